#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dpcc {

enum class LocalAggregation { kScoredSum, kMean };

struct CodecConfig {
  // One factor per encoder stage; the stage count is factors.size().
  std::vector<double> factors{1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0};
  std::size_t embed_dim = 8;
  std::size_t max_upsample = 8;
  std::size_t knn_k = 16;
  std::size_t pool_size = 43;
  std::size_t hidden = 16;  // width of every hidden MLP layer
  bool normals = false;
  LocalAggregation local_aggregation = LocalAggregation::kScoredSum;
  int position_bits = 9;
  bool learned_positions = true;
  // Nominal block cardinality used only to initialize offset scales.
  double reference_points = 1000.0;
  // Fixed multiplier on the bottleneck features. Quantization works on a
  // unit grid, so features need a spread of several units to survive it.
  double bottleneck_gain = 16.0;
  // Edge of the world-grid cells that become blocks, world units.
  double block_size = 1.0;

  std::size_t stages() const { return factors.size(); }
  void validate() const;
};

// Parses "1/2,1/3,0.25" into {0.5, 0.333.., 0.25}.
std::vector<double> parse_factor_list(const std::string& text);
std::string format_factor_list(const std::vector<double>& factors);

// Applies one `codec.<key>` setting (prefix already stripped). Returns false
// for an unknown key; throws ArgumentError for a bad value.
bool set_codec_option(CodecConfig& cfg, const std::string& key,
                      const std::string& value);
// key=value lines with the codec. prefix, stable order. Round-trips through
// set_codec_option.
std::string format_codec_config(const CodecConfig& cfg);
CodecConfig parse_codec_config(const std::string& text);

}  // namespace dpcc
