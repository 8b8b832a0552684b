#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpcc/autodiff/parameter.hpp"
#include "dpcc/codec/bitstream.hpp"
#include "dpcc/codec/config.hpp"
#include "dpcc/codec/decoder.hpp"
#include "dpcc/codec/encoder.hpp"
#include "dpcc/entropy/factorized.hpp"
#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc {

// Every learned piece of the codec over one parameter store.
class CodecModel {
 public:
  CodecModel(const CodecConfig& cfg, std::uint64_t seed);
  CodecModel(CodecModel&&) = default;
  CodecModel& operator=(CodecModel&&) = default;

  static CodecModel from_checkpoint(std::span<const std::uint8_t> bytes);
  static CodecModel load(const std::string& path);

  std::vector<std::uint8_t> checkpoint() const;
  void save(const std::string& path) const;
  // FNV-1a of the checkpoint bytes; bitstreams carry it.
  std::uint64_t model_id() const;

  // Runs the encoder over `blocks` (block frame) and builds the entropy
  // tables from the symbols it sees.
  void freeze(const std::vector<PointCloud>& blocks);
  bool frozen() const;

  const CodecConfig& config() const { return cfg_; }
  ad::ParameterStore& store() { return store_; }
  const ad::ParameterStore& store() const { return store_; }
  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  const FactorizedEntropyModel& feature_prior() const { return feature_prior_; }
  const FactorizedEntropyModel& position_prior() const { return position_prior_; }

 private:
  CodecConfig cfg_;
  ad::ParameterStore store_;
  Encoder encoder_;
  Decoder decoder_;
  FactorizedEntropyModel feature_prior_;  // one channel per feature
  FactorizedEntropyModel position_prior_;  // x, y, z grid indices, centered
};

// Bottleneck positions snapped to the position grid, [M, 3]. Training and
// decompression both feed these to the decoder.
ad::Tensor quantized_positions(const PointCloud& bottleneck, int bits);
// Centered grid symbols, row-major [M, 3].
std::vector<std::int32_t> position_symbols(const PointCloud& bottleneck, int bits);

struct BlockStats {
  std::size_t input_points = 0;
  std::size_t bottleneck_points = 0;
  std::size_t bytes = 0;
  // Feature symbols that fell outside their table and were clamped.
  std::size_t clamped_symbols = 0;
  PositionCoding position_coding = PositionCoding::kRaw;
  double bpp() const;
};

struct CompressedBlock {
  std::vector<std::uint8_t> bytes;
  BlockStats stats;
};

CompressedBlock compress_block(const CodecModel& model, const Block& block);

struct DecompressedBlock {
  PointCloud cloud;  // world frame
  BlockHeader header;
};

// Throws ModelMismatchError for a foreign version, model id or position
// precision, and DecodeError for corruption.
DecompressedBlock decompress_block(const CodecModel& model, std::span<const std::uint8_t> bytes);

struct CompressedCloud {
  std::vector<std::uint8_t> bytes;  // DPCF container
  std::vector<BlockStats> blocks;
  std::size_t input_points = 0;
  double bpp() const;
};

CompressedCloud compress_cloud(const CodecModel& model, const PointCloud& world);

struct DecompressedCloud {
  PointCloud cloud;
  std::vector<DecompressedBlock> blocks;
};

// DecodeError offsets are relative to the start of the container.
DecompressedCloud decompress_cloud(const CodecModel& model, std::span<const std::uint8_t> bytes);

}  // namespace dpcc
