#pragma once

#include <utility>
#include <vector>

#include "dpcc/autodiff/mlp.hpp"
#include "dpcc/autodiff/parameter.hpp"
#include "dpcc/autodiff/tensor.hpp"
#include "dpcc/codec/config.hpp"
#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc {

// 42 geodesic directions (icosahedron vertices, then normalized edge
// midpoints in (i, j) order) followed by the origin. Row-major [43, 3].
std::vector<Vec3> build_direction_pool();
inline constexpr std::size_t kDirectionPoolSize = 43;

// [N, U*d] -> [U*N, d]; candidate j of row i lands at row i*U + j.
ad::Tensor periodic_shuffle(const ad::Tensor& x, std::size_t groups);
ad::Tensor inverse_periodic_shuffle(const ad::Tensor& x, std::size_t groups);

// Input channels split into U contiguous, near-equal ranges; range g alone
// produces candidate g. With fewer channels than groups, neighboring groups
// share a channel but keep their own weights.
struct SubPointConv {
  std::size_t groups = 1, in_features = 0, out_features = 0;
  ad::Tensor weight;  // [in, U * out], masked block diagonal
  ad::Tensor bias;    // [U * out]
  ad::Tensor mask;    // constant, same shape as weight

  static SubPointConv create(ad::ParameterStore& store, const std::string& prefix,
                             std::size_t in, std::size_t out, std::size_t groups, Rng& rng);
  // Input channels [first, second) feeding group g.
  std::pair<std::size_t, std::size_t> group_channels(std::size_t g) const;
  // [N, in] -> [U*N, out].
  ad::Tensor forward(const ad::Tensor& x) const;
};

struct FactorPrediction {
  ad::Tensor continuous;              // [N, 1], in [1, U]
  std::vector<std::size_t> rounded;   // round half up, clamped to [1, U]
};

std::size_t round_factor(double u, std::size_t max_upsample);

struct UpsampleResult {
  std::size_t groups = 1;
  ad::Tensor candidates;  // [U*N, 3]
  ad::Tensor offsets;     // [U*N, 3]
  ad::Tensor features;    // [U*N, d]
  FactorPrediction factor;
  std::vector<std::size_t> chosen;  // candidate rows kept, parent-major
  ad::Tensor points;            // candidates restricted to `chosen`
  ad::Tensor chosen_features;   // features restricted to `chosen`

  std::size_t parents() const { return factor.rounded.size(); }
};

struct DecoderOutput {
  // stages[s] turns P^_{s+1} into P^_s (before refinement for s = 0).
  std::vector<UpsampleResult> stages;
  UpsampleResult refine;
  ad::Tensor points;    // P^_0, refined
  ad::Tensor features;
  ad::Tensor normals;   // only with codec.normals

  // P^_s for s in [0, S]; s = 0 is the refined output.
  const ad::Tensor& cloud(std::size_t s) const;
  ad::Tensor bottleneck;
};

class Decoder {
 public:
  struct BlockParams {
    std::size_t groups = 1;
    ad::Mlp factor;      // d -> h -> 1, unused when groups == 1
    SubPointConv expand;
    ad::Mlp post;        // d -> h -> d
    ad::Mlp direction;   // d -> h -> 43
    ad::Mlp magnitude;   // d -> h -> 1
    ad::Tensor log_scale;  // [1]
  };

  Decoder() = default;
  Decoder(const CodecConfig& cfg, ad::ParameterStore& store, Rng& rng);

  DecoderOutput decode(const ad::Tensor& points, const ad::Tensor& features) const;

  FactorPrediction predict_upsample_factor(const BlockParams& block,
                                           const ad::Tensor& features) const;
  // One scale-adaptive upsampling block. `all_chosen` keeps every candidate
  // and skips the factor head (refinement).
  UpsampleResult upsample(const BlockParams& block, const ad::Tensor& points,
                          const ad::Tensor& features, bool all_chosen) const;

  const BlockParams& stage(std::size_t s) const { return stages_.at(s); }
  const BlockParams& refine_block() const { return refine_; }
  const CodecConfig& config() const { return cfg_; }
  const ad::Tensor& pool() const { return pool_; }

 private:
  BlockParams make_block(ad::ParameterStore& store, const std::string& prefix,
                         std::size_t groups, double expected_factor, double spacing,
                         Rng& rng) const;

  CodecConfig cfg_;
  ad::Tensor pool_;  // [43, 3], constant
  std::vector<BlockParams> stages_;
  BlockParams refine_;
  ad::Mlp normal_head_;
};

}  // namespace dpcc
