#pragma once

#include <vector>

#include "dpcc/autodiff/mlp.hpp"
#include "dpcc/autodiff/parameter.hpp"
#include "dpcc/autodiff/tensor.hpp"
#include "dpcc/codec/config.hpp"
#include "dpcc/geometry/point_cloud.hpp"
#include "dpcc/geometry/sampling.hpp"

namespace dpcc {

// Neighborhood bookkeeping for one downsampling stage. Rows are sampled
// points, columns the k nearest points of the stage input (k = min(knn_k, N)).
struct StageNeighborhood {
  std::size_t k = 0;
  std::vector<std::size_t> neighbors;  // row-major [m, k], indices into P_s
  std::vector<bool> mask;              // neighbor is in the collapsed set
};

StageNeighborhood build_neighborhood(std::span<const Vec3> points,
                                     const DownsampleMap& map, std::size_t knn_k);

// Eq. (1) feature of one offset: unit direction and length. A zero offset
// has a zero direction.
std::array<double, 4> offset_feature(const Vec3& offset);

struct EncoderStage {
  PointCloud input;  // P_s
  DownsampleMap map;  // P_s -> P_{s+1}
  StageNeighborhood hood;
  ad::Tensor local;     // F^P
  ad::Tensor density;   // F^D
  ad::Tensor ancestor;  // F^A
};

struct EncoderOutput {
  PointCloud bottleneck;  // P_S
  ad::Tensor features;    // F_S, [|P_S|, d]
  std::vector<EncoderStage> stages;  // one per stage, s = 0..S-1
};

class Encoder {
 public:
  struct StageParams {
    ad::Mlp density;      // 1 -> h -> d
    ad::Mlp local;        // 4 -> h -> d
    ad::Mlp local_score;  // d -> h -> 1
    ad::Linear query, key, value;  // d -> d
    ad::Mlp position;     // 3 -> d -> d
    ad::Mlp attention;    // d -> h -> d
    ad::Mlp fuse;         // 3d -> h -> d
  };

  Encoder() = default;
  Encoder(const CodecConfig& cfg, ad::ParameterStore& store, Rng& rng);

  EncoderOutput encode(const PointCloud& block) const;

  // F_0 from raw positions (and normals when configured).
  ad::Tensor initial_features(const PointCloud& cloud) const;

  // Building blocks, exposed for tests.
  ad::Tensor density_embedding(std::size_t stage, const ad::Tensor& u) const;
  ad::Tensor local_position_embedding(std::size_t stage, std::span<const Vec3> points,
                                      const DownsampleMap& map,
                                      const StageNeighborhood& hood) const;
  ad::Tensor ancestor_embedding(std::size_t stage, std::span<const Vec3> points,
                                const ad::Tensor& features, const DownsampleMap& map,
                                const StageNeighborhood& hood) const;
  ad::Tensor fuse_embeddings(std::size_t stage, const ad::Tensor& local,
                             const ad::Tensor& density, const ad::Tensor& ancestor) const;

  const CodecConfig& config() const { return cfg_; }
  const StageParams& stage(std::size_t s) const { return stages_.at(s); }

 private:
  CodecConfig cfg_;
  ad::Mlp input_;
  std::vector<StageParams> stages_;
};

}  // namespace dpcc
