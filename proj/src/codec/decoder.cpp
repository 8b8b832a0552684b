#include "dpcc/codec/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "dpcc/autodiff/ops.hpp"
#include "dpcc/error.hpp"

namespace dpcc {
namespace {

using ad::Tensor;

std::vector<std::size_t> repeat_each(std::size_t rows, std::size_t times) {
  std::vector<std::size_t> out;
  out.reserve(rows * times);
  for (std::size_t i = 0; i < rows; ++i) out.insert(out.end(), times, i);
  return out;
}

Tensor normalize_rows(const Tensor& x) {
  const std::size_t n = x.dim(0), w = x.dim(1);
  const Tensor len = ad::broadcast_to(ad::reshape(ad::l2norm(x, 1), {n, 1}), {n, w});
  return ad::div(x, len);
}

}  // namespace

std::vector<Vec3> build_direction_pool() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> ico;
  for (double a : {-1.0, 1.0})
    for (double b : {-phi, phi}) {
      ico.push_back({0.0, a, b});
      ico.push_back({a, b, 0.0});
      ico.push_back({b, 0.0, a});
    }
  std::vector<Vec3> pool;
  for (const Vec3& v : ico) pool.push_back((1.0 / norm(v)) * v);
  // Icosahedron edges have length 2 in these coordinates.
  for (std::size_t i = 0; i < ico.size(); ++i)
    for (std::size_t j = i + 1; j < ico.size(); ++j) {
      if (std::abs(squared_distance(ico[i], ico[j]) - 4.0) > 1e-9) continue;
      const Vec3 mid = 0.5 * (ico[i] + ico[j]);
      pool.push_back((1.0 / norm(mid)) * mid);
    }
  pool.push_back({0.0, 0.0, 0.0});
  if (pool.size() != kDirectionPoolSize) throw Error("direction pool construction failed");
  return pool;
}

Tensor periodic_shuffle(const Tensor& x, std::size_t groups) {
  if (x.rank() != 2 || groups == 0 || x.dim(1) % groups != 0) {
    throw ShapeError("periodic_shuffle: " + ad::shape_str(x.shape()) + " with " +
                     std::to_string(groups) + " groups");
  }
  return ad::reshape(x, {x.dim(0) * groups, x.dim(1) / groups});
}

Tensor inverse_periodic_shuffle(const Tensor& x, std::size_t groups) {
  if (x.rank() != 2 || groups == 0 || x.dim(0) % groups != 0) {
    throw ShapeError("inverse_periodic_shuffle: " + ad::shape_str(x.shape()) + " with " +
                     std::to_string(groups) + " groups");
  }
  return ad::reshape(x, {x.dim(0) / groups, x.dim(1) * groups});
}

SubPointConv SubPointConv::create(ad::ParameterStore& store, const std::string& prefix,
                                  std::size_t in, std::size_t out, std::size_t groups,
                                  Rng& rng) {
  if (in == 0 || out == 0 || groups == 0) throw ArgumentError("sub_point_conv: zero dimension");
  SubPointConv c;
  c.groups = groups;
  c.in_features = in;
  c.out_features = out;
  const std::size_t per = (in + groups - 1) / groups;
  c.weight = store.create_uniform(prefix + ".weight", {in, groups * out}, per, rng);
  c.bias = store.create_zeros(prefix + ".bias", {groups * out});
  std::vector<double> mask(in * groups * out, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    const auto [lo, hi] = c.group_channels(g);
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t o = 0; o < out; ++o) mask[r * groups * out + g * out + o] = 1.0;
  }
  // Entries outside the block diagonal never reach the output.
  auto w = c.weight.mutable_data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= mask[i];
  c.mask = Tensor::from({in, groups * out}, std::move(mask));
  return c;
}

std::pair<std::size_t, std::size_t> SubPointConv::group_channels(std::size_t g) const {
  const std::size_t lo = std::min(g * in_features / groups, in_features - 1);
  return {lo, std::max((g + 1) * in_features / groups, lo + 1)};
}

Tensor SubPointConv::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_features) {
    throw ShapeError("sub_point_conv: expected [N, " + std::to_string(in_features) + "], got " +
                     ad::shape_str(x.shape()));
  }
  const Tensor y = ad::add(ad::matmul(x, ad::mul(weight, mask)), bias);
  return periodic_shuffle(y, groups);
}

std::size_t round_factor(double u, std::size_t max_upsample) {
  const double r = std::floor(u + 0.5);
  if (!(r >= 1.0)) return 1;
  return std::min(static_cast<std::size_t>(r), max_upsample);
}

const Tensor& DecoderOutput::cloud(std::size_t s) const {
  if (s == 0) return points;
  if (s < stages.size()) return stages[s].points;
  if (s == stages.size()) return bottleneck;
  throw ArgumentError("DecoderOutput::cloud: stage out of range");
}

Decoder::Decoder(const CodecConfig& cfg, ad::ParameterStore& store, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  std::vector<double> flat;
  for (const Vec3& v : build_direction_pool()) flat.insert(flat.end(), v.begin(), v.end());
  pool_ = Tensor::from({kDirectionPoolSize, 3}, std::move(flat));

  // Expected output cardinality of stage s, for the offset scale prior.
  std::vector<double> expected(cfg_.stages() + 1, cfg_.reference_points);
  for (std::size_t s = 0; s < cfg_.stages(); ++s) expected[s + 1] = expected[s] * cfg_.factors[s];
  auto spacing = [](double n) { return 2.0 / std::cbrt(std::max(n, 1.0)); };

  for (std::size_t s = 0; s < cfg_.stages(); ++s) {
    stages_.push_back(make_block(store, "dec.s" + std::to_string(s), cfg_.max_upsample,
                                 1.0 / cfg_.factors[s], spacing(expected[s]), rng));
  }
  refine_ = make_block(store, "dec.refine", 1, 1.0, spacing(expected[0]), rng);
  if (cfg_.normals) {
    normal_head_ =
        ad::make_mlp(store, "dec.normal", {cfg_.embed_dim, cfg_.hidden, 3}, rng);
  }
}

Decoder::BlockParams Decoder::make_block(ad::ParameterStore& store, const std::string& prefix,
                                         std::size_t groups, double expected_factor,
                                         double spacing, Rng& rng) const {
  const std::size_t d = cfg_.embed_dim, h = cfg_.hidden;
  BlockParams b;
  b.groups = groups;
  if (groups > 1) {
    b.factor = ad::make_mlp(store, prefix + ".factor", {d, h, 1}, rng);
    // Start the factor head at the stage's nominal factor instead of U/2.
    const double p = std::clamp((expected_factor - 1.0) / static_cast<double>(groups - 1),
                                0.02, 0.98);
    b.factor.layers.back().bias.mutable_data()[0] = std::log(p / (1.0 - p));
  }
  b.expand = SubPointConv::create(store, prefix + ".expand", d, d, groups, rng);
  b.post = ad::make_mlp(store, prefix + ".post", {d, h, d}, rng);
  b.direction = ad::make_mlp(store, prefix + ".direction", {d, h, kDirectionPoolSize}, rng);
  b.magnitude = ad::make_mlp(store, prefix + ".magnitude", {d, h, 1}, rng);
  b.log_scale = store.create(prefix + ".log_scale", {1}, {std::log(spacing)});
  return b;
}

FactorPrediction Decoder::predict_upsample_factor(const BlockParams& block,
                                                  const Tensor& features) const {
  FactorPrediction f;
  const std::size_t n = features.dim(0);
  if (block.groups == 1) {
    f.continuous = Tensor::full({n, 1}, 1.0);
    f.rounded.assign(n, 1);
    return f;
  }
  const double span = static_cast<double>(block.groups - 1);
  f.continuous = ad::add_scalar(ad::scale(ad::sigmoid(block.factor.forward(features)), span), 1.0);
  f.rounded.reserve(n);
  for (double u : f.continuous.data()) f.rounded.push_back(round_factor(u, block.groups));
  return f;
}

UpsampleResult Decoder::upsample(const BlockParams& block, const Tensor& points,
                                 const Tensor& features, bool all_chosen) const {
  const std::size_t n = points.dim(0), u = block.groups;
  if (features.dim(0) != n) {
    throw ShapeError("upsample: " + std::to_string(n) + " points but " +
                     std::to_string(features.dim(0)) + " feature rows");
  }
  UpsampleResult r;
  r.groups = u;
  if (all_chosen) {
    r.factor.continuous = Tensor::full({n, 1}, static_cast<double>(u));
    r.factor.rounded.assign(n, u);
  } else {
    r.factor = predict_upsample_factor(block, features);
  }

  const auto rep = repeat_each(n, u);
  // Residual feature expansion; only the shortcut repeats the parent.
  const Tensor expanded = block.post.forward(ad::relu(block.expand.forward(features)));
  r.features = ad::add(expanded, ad::gather_rows(features, rep));

  const Tensor weights = ad::softmax(block.direction.forward(r.features), 1);
  const Tensor direction = ad::matmul(weights, pool_);
  const Tensor magnitude =
      ad::mul(ad::softplus(block.magnitude.forward(r.features)), ad::exp(block.log_scale));
  r.offsets = ad::mul(ad::broadcast_to(magnitude, {n * u, 3}), direction);
  r.candidates = ad::add(ad::gather_rows(points, rep), r.offsets);

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < r.factor.rounded[i]; ++j) r.chosen.push_back(i * u + j);
  r.points = ad::gather_rows(r.candidates, r.chosen);
  r.chosen_features = ad::gather_rows(r.features, r.chosen);
  return r;
}

DecoderOutput Decoder::decode(const Tensor& points, const Tensor& features) const {
  if (points.rank() != 2 || points.dim(1) != 3) {
    throw ShapeError("decode: points must be [N, 3], got " + ad::shape_str(points.shape()));
  }
  if (features.rank() != 2 || features.dim(0) != points.dim(0) ||
      features.dim(1) != cfg_.embed_dim) {
    throw ShapeError("decode: features " + ad::shape_str(features.shape()) +
                     " do not align with " + std::to_string(points.dim(0)) + " points");
  }
  DecoderOutput out;
  out.bottleneck = points;
  out.stages.resize(cfg_.stages());
  Tensor p = points, f = features;
  for (std::size_t s = cfg_.stages(); s-- > 0;) {
    out.stages[s] = upsample(stages_[s], p, f, false);
    p = out.stages[s].points;
    f = out.stages[s].chosen_features;
  }
  out.refine = upsample(refine_, p, f, true);
  out.points = out.refine.points;
  out.features = out.refine.chosen_features;
  if (cfg_.normals) out.normals = normalize_rows(normal_head_.forward(out.features));
  return out;
}

}  // namespace dpcc
