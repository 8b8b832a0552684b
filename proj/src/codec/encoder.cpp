#include "dpcc/codec/encoder.hpp"

#include <cmath>

#include "dpcc/autodiff/ops.hpp"
#include "dpcc/error.hpp"
#include "dpcc/geometry/spatial_grid.hpp"

namespace dpcc {
namespace {

using ad::Tensor;

// Added to masked logits ahead of a softmax; exp underflows to exactly 0.
constexpr double kMaskedLogit = -1e30;

std::string stage_prefix(std::size_t s) { return "enc.s" + std::to_string(s); }

ad::Linear make_linear(ad::ParameterStore& store, const std::string& name,
                       std::size_t in, std::size_t out, Rng& rng) {
  ad::Linear l;
  l.weight = store.create_uniform(name + ".weight", {in, out}, in, rng);
  l.bias = store.create_zeros(name + ".bias", {out});
  return l;
}

// Row i of `table` repeated `times` times, for every i.
std::vector<std::size_t> repeat_each(std::size_t rows, std::size_t times) {
  std::vector<std::size_t> out;
  out.reserve(rows * times);
  for (std::size_t i = 0; i < rows; ++i) out.insert(out.end(), times, i);
  return out;
}

Tensor additive_mask(const std::vector<bool>& mask, std::size_t width) {
  std::vector<double> v(mask.size() * width);
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) continue;
    std::fill(v.begin() + r * width, v.begin() + (r + 1) * width, kMaskedLogit);
  }
  return Tensor::from({mask.size(), width}, std::move(v));
}

}  // namespace

StageNeighborhood build_neighborhood(std::span<const Vec3> points,
                                     const DownsampleMap& map, std::size_t knn_k) {
  StageNeighborhood hood;
  hood.k = std::min(knn_k, points.size());
  std::vector<Vec3> centers;
  centers.reserve(map.size());
  for (std::size_t i : map.sampled) centers.push_back(points[i]);
  hood.neighbors = knn(points, centers, hood.k);
  hood.mask.resize(hood.neighbors.size());
  for (std::size_t r = 0; r < map.size(); ++r) {
    bool any = false;
    for (std::size_t c = 0; c < hood.k; ++c) {
      const std::size_t j = hood.neighbors[r * hood.k + c];
      const bool in = map.owner[j] == r;
      hood.mask[r * hood.k + c] = in;
      any = any || in;
    }
    // Only reachable with more than k coincident points; slot 0 sits at
    // distance zero from the center.
    if (!any) hood.mask[r * hood.k] = true;
  }
  return hood;
}

std::array<double, 4> offset_feature(const Vec3& offset) {
  const double len = norm(offset);
  if (len < 1e-12) return {0.0, 0.0, 0.0, 0.0};
  return {offset[0] / len, offset[1] / len, offset[2] / len, len};
}

Encoder::Encoder(const CodecConfig& cfg, ad::ParameterStore& store, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg_.embed_dim, h = cfg_.hidden;
  input_ = ad::make_mlp(store, "enc.input", {cfg_.normals ? 6u : 3u, h, d}, rng);
  for (std::size_t s = 0; s < cfg_.stages(); ++s) {
    const std::string p = stage_prefix(s);
    StageParams sp;
    sp.density = ad::make_mlp(store, p + ".density", {1, h, d}, rng);
    sp.local = ad::make_mlp(store, p + ".local", {4, h, d}, rng);
    sp.local_score = ad::make_mlp(store, p + ".local_score", {d, h, 1}, rng);
    sp.query = make_linear(store, p + ".ancestor.query", d, d, rng);
    sp.key = make_linear(store, p + ".ancestor.key", d, d, rng);
    sp.value = make_linear(store, p + ".ancestor.value", d, d, rng);
    sp.position = ad::make_mlp(store, p + ".ancestor.position", {3, d, d}, rng);
    sp.attention = ad::make_mlp(store, p + ".ancestor.attention", {d, h, d}, rng);
    sp.fuse = ad::make_mlp(store, p + ".fuse", {3 * d, h, d}, rng);
    stages_.push_back(std::move(sp));
  }
}

Tensor Encoder::initial_features(const PointCloud& cloud) const {
  const std::size_t width = cfg_.normals ? 6 : 3;
  if (cfg_.normals && cloud.normals.size() != cloud.size()) {
    throw ArgumentError("encoder configured for normals but the block has none");
  }
  std::vector<double> x;
  x.reserve(cloud.size() * width);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    x.insert(x.end(), cloud.positions[i].begin(), cloud.positions[i].end());
    if (cfg_.normals) x.insert(x.end(), cloud.normals[i].begin(), cloud.normals[i].end());
  }
  return input_.forward(Tensor::from({cloud.size(), width}, std::move(x)));
}

Tensor Encoder::density_embedding(std::size_t stage, const Tensor& u) const {
  return stages_.at(stage).density.forward(u);
}

Tensor Encoder::local_position_embedding(std::size_t stage, std::span<const Vec3> points,
                                         const DownsampleMap& map,
                                         const StageNeighborhood& hood) const {
  const StageParams& sp = stages_.at(stage);
  const std::size_t m = map.size(), k = hood.k, d = cfg_.embed_dim;
  std::vector<double> rows;
  rows.reserve(m * k * 4);
  for (std::size_t r = 0; r < m; ++r) {
    const Vec3& center = points[map.sampled[r]];
    for (std::size_t c = 0; c < k; ++c) {
      const auto f = offset_feature(points[hood.neighbors[r * k + c]] - center);
      rows.insert(rows.end(), f.begin(), f.end());
    }
  }
  const Tensor feats = sp.local.forward(Tensor::from({m * k, 4}, std::move(rows)));

  Tensor weights;  // [m, k]
  if (cfg_.local_aggregation == LocalAggregation::kScoredSum) {
    const Tensor scores = ad::add(sp.local_score.forward(feats), additive_mask(hood.mask, 1));
    weights = ad::softmax(ad::reshape(scores, {m, k}), 1);
  } else {
    std::vector<double> w(m * k, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      double count = 0.0;
      for (std::size_t c = 0; c < k; ++c) count += hood.mask[r * k + c];
      for (std::size_t c = 0; c < k; ++c) w[r * k + c] = hood.mask[r * k + c] / count;
    }
    weights = Tensor::from({m, k}, std::move(w));
  }
  const Tensor wide = ad::broadcast_to(ad::reshape(weights, {m, k, 1}), {m, k, d});
  return ad::sum(ad::mul(wide, ad::reshape(feats, {m, k, d})), 1);
}

Tensor Encoder::ancestor_embedding(std::size_t stage, std::span<const Vec3> points,
                                   const Tensor& features, const DownsampleMap& map,
                                   const StageNeighborhood& hood) const {
  const StageParams& sp = stages_.at(stage);
  const std::size_t m = map.size(), k = hood.k, d = cfg_.embed_dim;
  if (features.rank() != 2 || features.dim(0) != points.size() || features.dim(1) != d) {
    throw ShapeError("ancestor_embedding: features " + ad::shape_str(features.shape()) +
                     " do not match " + std::to_string(points.size()) + " points");
  }
  std::vector<double> rel;
  rel.reserve(m * k * 3);
  for (std::size_t r = 0; r < m; ++r) {
    const Vec3& center = points[map.sampled[r]];
    for (std::size_t c = 0; c < k; ++c) {
      const Vec3 o = points[hood.neighbors[r * k + c]] - center;
      rel.insert(rel.end(), o.begin(), o.end());
    }
  }
  const Tensor delta = sp.position.forward(Tensor::from({m * k, 3}, std::move(rel)));
  const Tensor centers = ad::gather_rows(features, map.sampled);
  const Tensor nbr = ad::gather_rows(features, hood.neighbors);
  const Tensor q = ad::gather_rows(sp.query.forward(centers), repeat_each(m, k));
  const Tensor logits = ad::add(
      sp.attention.forward(ad::add(ad::sub(q, sp.key.forward(nbr)), delta)),
      additive_mask(hood.mask, d));
  const Tensor w = ad::softmax(ad::reshape(logits, {m, k, d}), 1);
  const Tensor v = ad::reshape(ad::add(sp.value.forward(nbr), delta), {m, k, d});
  return ad::sum(ad::mul(w, v), 1);
}

Tensor Encoder::fuse_embeddings(std::size_t stage, const Tensor& local, const Tensor& density,
                                const Tensor& ancestor) const {
  if (local.dim(0) != density.dim(0) || local.dim(0) != ancestor.dim(0)) {
    throw ShapeError("fuse_embeddings: row counts " + std::to_string(local.dim(0)) + ", " +
                     std::to_string(density.dim(0)) + ", " + std::to_string(ancestor.dim(0)));
  }
  return stages_.at(stage).fuse.forward(ad::concat({local, density, ancestor}, 1));
}

EncoderOutput Encoder::encode(const PointCloud& block) const {
  if (block.empty()) {
    throw ArgumentError("encode: empty block; use fewer stages or larger blocks");
  }
  EncoderOutput out;
  PointCloud cloud = block;
  Tensor features = initial_features(cloud);
  for (std::size_t s = 0; s < cfg_.stages(); ++s) {
    EncoderStage st;
    const std::size_t m = downsampled_count(cloud.size(), cfg_.factors[s]);
    const auto sampled = farthest_point_sample(cloud.positions, m);
    st.map = collapse_assign(cloud.positions, sampled);
    st.hood = build_neighborhood(cloud.positions, st.map, cfg_.knn_k);

    const Tensor u = Tensor::from({m, 1}, st.map.factors);
    st.density = density_embedding(s, u);
    st.local = local_position_embedding(s, cloud.positions, st.map, st.hood);
    st.ancestor = ancestor_embedding(s, cloud.positions, features, st.map, st.hood);
    features = fuse_embeddings(s, st.local, st.density, st.ancestor);

    PointCloud next;
    next.frame = cloud.frame;
    for (std::size_t i : sampled) {
      next.positions.push_back(cloud.positions[i]);
      if (cloud.has_normals()) next.normals.push_back(cloud.normals[i]);
    }
    st.input = std::move(cloud);
    cloud = std::move(next);
    out.stages.push_back(std::move(st));
  }
  out.bottleneck = std::move(cloud);
  out.features = ad::scale(features, cfg_.bottleneck_gain);
  return out;
}

}  // namespace dpcc
