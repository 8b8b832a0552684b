#include "dpcc/training/losses.hpp"

#include <cmath>

#include "dpcc/autodiff/ops.hpp"
#include "dpcc/error.hpp"
#include "dpcc/geometry/spatial_grid.hpp"

namespace dpcc {
namespace {

using ad::Tensor;

std::vector<Vec3> rows_of(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3) {
    throw ShapeError("expected [N, 3] points, got " + ad::shape_str(t.shape()));
  }
  std::vector<Vec3> out(t.dim(0));
  const auto d = t.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {d[3 * i], d[3 * i + 1], d[3 * i + 2]};
  return out;
}

Tensor points_tensor(std::span<const Vec3> pts) {
  std::vector<double> flat;
  flat.reserve(3 * pts.size());
  for (const Vec3& p : pts) flat.insert(flat.end(), p.begin(), p.end());
  return Tensor::from({pts.size(), 3}, std::move(flat));
}

std::vector<Vec3> gather(std::span<const Vec3> pts, const std::vector<std::size_t>& idx) {
  std::vector<Vec3> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(pts[i]);
  return out;
}

Tensor mean_squared(const Tensor& diff) {
  return ad::scale(ad::sum_all(ad::square(diff)), 1.0 / static_cast<double>(diff.dim(0)));
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0) ||
      !(normal_weight >= 0.0)) {
    throw ArgumentError("loss weights must be non-negative");
  }
}

Tensor chamfer_loss(const Tensor& predicted, std::span<const Vec3> target) {
  const std::vector<Vec3> pred = rows_of(predicted);
  if (pred.empty() || target.empty()) throw ArgumentError("chamfer_loss: empty cloud");
  // predicted -> target
  const auto to_target = nearest_indices(target, pred);
  const Tensor forward = mean_squared(ad::sub(predicted, points_tensor(gather(target, to_target))));
  // target -> predicted
  const auto to_pred = nearest_indices(pred, target);
  const Tensor backward = mean_squared(ad::sub(ad::gather_rows(predicted, to_pred), points_tensor(target)));
  return ad::add(forward, backward);
}

Tensor chamfer_loss_multistage(const std::vector<Tensor>& predicted,
                               const std::vector<std::vector<Vec3>>& target) {
  if (predicted.size() != target.size() || predicted.empty()) {
    throw ArgumentError("chamfer_loss_multistage: stage lists do not line up");
  }
  Tensor acc = chamfer_loss(predicted[0], target[0]);
  for (std::size_t s = 1; s < predicted.size(); ++s) acc = ad::add(acc, chamfer_loss(predicted[s], target[s]));
  return acc;
}

Tensor density_loss(const std::vector<DensityStage>& stages, double gamma) {
  Tensor acc = Tensor::scalar(0.0);
  for (const DensityStage& st : stages) {
    if (!st.map || !st.upsample) throw ArgumentError("density_loss: incomplete stage");
    const DownsampleMap& map = *st.map;
    const UpsampleResult& up = *st.upsample;
    const std::size_t m = up.parents(), u = up.groups;
    if (m == 0) continue;

    // Encoder side: count and mean member distance for every sampled point.
    std::vector<Vec3> sampled = gather(st.input, map.sampled);
    std::vector<double> count(map.size()), spread(map.size());
    for (std::size_t j = 0; j < map.size(); ++j) {
      double d = 0.0;
      for (std::size_t q : map.collapsed[j]) d += std::sqrt(squared_distance(st.input[q], sampled[j]));
      count[j] = static_cast<double>(map.collapsed[j].size());
      spread[j] = d / count[j];
    }

    const std::vector<Vec3> parents = rows_of(st.parents);
    if (parents.size() != m) throw ShapeError("density_loss: parents do not match the factors");
    const auto match = nearest_indices(sampled, parents);

    // Mean chosen-offset length per parent as a constant averaging matrix
    // applied to the chosen lengths.
    const std::size_t k = up.chosen.size();
    std::vector<double> kept(m, 0.0);
    for (std::size_t r : up.chosen) kept[r / u] += 1.0;
    std::vector<double> avg(m * k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t i = up.chosen[c] / u;
      avg[i * k + c] = 1.0 / kept[i];
    }
    const Tensor lengths = ad::reshape(ad::l2norm(ad::gather_rows(up.offsets, up.chosen), 1), {k, 1});
    const Tensor child_spread = ad::matmul(Tensor::from({m, k}, std::move(avg)), lengths);

    std::vector<double> want_count(m), want_spread(m);
    for (std::size_t i = 0; i < m; ++i) {
      want_count[i] = count[match[i]];
      want_spread[i] = spread[match[i]];
    }
    const Tensor card = ad::abs(ad::sub(Tensor::from({m, 1}, std::move(want_count)), up.factor.continuous));
    const Tensor dist = ad::abs(ad::sub(Tensor::from({m, 1}, std::move(want_spread)), child_spread));
    const Tensor stage = ad::sum_all(ad::add(card, ad::scale(dist, gamma)));
    acc = ad::add(acc, ad::scale(stage, 1.0 / static_cast<double>(m)));
  }
  return acc;
}

Tensor cardinality_loss(const std::vector<std::size_t>& target_counts,
                        const std::vector<Tensor>& continuous_factors) {
  if (target_counts.size() != continuous_factors.size()) {
    throw ArgumentError("cardinality_loss: stage lists do not line up");
  }
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t s = 0; s < target_counts.size(); ++s) {
    const Tensor produced = ad::sum_all(continuous_factors[s]);
    acc = ad::add(acc, ad::abs(ad::add_scalar(produced, -static_cast<double>(target_counts[s]))));
  }
  return acc;
}

Tensor normal_loss(const Tensor& predicted_points, const Tensor& predicted_normals,
                   const PointCloud& target) {
  if (!target.has_normals()) throw ArgumentError("normal_loss: target has no normals");
  const auto nn = nearest_indices(target.positions, rows_of(predicted_points));
  return mean_squared(ad::sub(predicted_normals, points_tensor(gather(target.normals, nn))));
}

Tensor total_loss(const LossTerms& t, const LossConfig& cfg) {
  Tensor l = ad::add(t.chamfer, ad::scale(t.density, cfg.alpha));
  l = ad::add(l, ad::scale(t.cardinality, cfg.beta));
  l = ad::add(l, ad::scale(t.rate, cfg.lambda));
  if (t.normal.defined()) l = ad::add(l, ad::scale(t.normal, cfg.normal_weight));
  return l;
}

}  // namespace dpcc
