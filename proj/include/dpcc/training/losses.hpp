#pragma once

#include <span>
#include <vector>

#include "dpcc/autodiff/tensor.hpp"
#include "dpcc/codec/decoder.hpp"
#include "dpcc/geometry/point_cloud.hpp"
#include "dpcc/geometry/sampling.hpp"

namespace dpcc {

struct LossConfig {
  double lambda = 1e-3;  // rate weight
  double alpha = 1e-4;   // density loss
  double beta = 5e-7;    // cardinality loss
  double gamma = 50.0;   // mean-distance term inside the density loss
  double normal_weight = 1e-2;

  void validate() const;
};

// Symmetric point-to-point Chamfer distance, mean squared nearest distance in
// each direction. Correspondences are recomputed from the current values and
// held fixed; gradients flow through the distances only.
ad::Tensor chamfer_loss(const ad::Tensor& predicted, std::span<const Vec3> target);

// Sum of chamfer_loss over aligned stages.
ad::Tensor chamfer_loss_multistage(const std::vector<ad::Tensor>& predicted,
                                   const std::vector<std::vector<Vec3>>& target);

// Everything the density loss needs from one stage: the encoder-side cloud
// P_s with its downsampling into P_{s+1}, and the decoder block that
// upsampled P^_{s+1}.
struct DensityStage {
  std::span<const Vec3> input;  // P_s
  const DownsampleMap* map = nullptr;
  const UpsampleResult* upsample = nullptr;
  ad::Tensor parents;  // P^_{s+1}, the upsampling block's input
};

// For every decoded parent p^, the nearest sampled point p of P_{s+1} supplies
// |C(p)| and the mean distance of C(p) to p (p itself included at distance
// 0). The decoded side uses the continuous factor and the mean length of
// the chosen offsets. Each stage is normalized by |P^_{s+1}|.
ad::Tensor density_loss(const std::vector<DensityStage>& stages, double gamma);

// sum_s | |P_s| - sum of continuous factors of the decoder block producing
// P^_s |.
ad::Tensor cardinality_loss(const std::vector<std::size_t>& target_counts,
                            const std::vector<ad::Tensor>& continuous_factors);

// Mean squared distance between each predicted normal and the normal of the
// ground-truth point nearest to its position.
ad::Tensor normal_loss(const ad::Tensor& predicted_points, const ad::Tensor& predicted_normals,
                       const PointCloud& target);

struct LossTerms {
  ad::Tensor chamfer, density, cardinality, rate;
  ad::Tensor normal;  // undefined without normals
};

// D_cha + alpha D_den + beta D_card + lambda R (+ normal_weight * normal).
ad::Tensor total_loss(const LossTerms& terms, const LossConfig& cfg);

}  // namespace dpcc
