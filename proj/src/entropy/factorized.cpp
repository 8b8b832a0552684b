#include "dpcc/entropy/factorized.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dpcc/autodiff/ops.hpp"
#include "dpcc/entropy/quantize.hpp"
#include "dpcc/error.hpp"

namespace dpcc {
namespace {

using ad::Tensor;

constexpr std::size_t kWidth = 3;
// Symbols per channel beyond which a table stops being useful.
constexpr std::int32_t kMaxSupport = 4096;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// sigmoid(b) - sigmoid(a) for a <= b, evaluated on the side of the logistic
// where it does not cancel.
double logistic_mass(double a, double b) {
  if (a + b > 0.0) return sigmoid(-a) - sigmoid(-b);
  return sigmoid(b) - sigmoid(a);
}

}  // namespace

FactorizedEntropyModel::FactorizedEntropyModel(ad::ParameterStore& store,
                                               const std::string& prefix,
                                               std::size_t channels, double init_scale,
                                               Rng& rng)
    : prefix_(prefix), channels_(channels) {
  if (channels == 0) throw ArgumentError("entropy model: zero channels");
  if (!(init_scale > 0.0)) throw ArgumentError("entropy model: init_scale must be positive");
  // Spread the initial scale evenly over the three layers so the composed
  // CDF starts roughly logistic with width init_scale.
  const double per_layer = std::pow(init_scale, 1.0 / 3.0);
  auto inv_softplus = [](double y) { return std::log(std::expm1(y)); };
  auto constant = [](std::size_t n, double v) { return std::vector<double>(n, v); };
  auto uniform = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-0.5, 0.5);
    return v;
  };
  const std::size_t c = channels;
  matrix0_ = store.create(prefix + ".l0.matrix", {c, kWidth},
                          constant(c * kWidth, inv_softplus(1.0 / per_layer / kWidth)));
  bias0_ = store.create(prefix + ".l0.bias", {c, kWidth}, uniform(c * kWidth));
  factor0_ = store.create_zeros(prefix + ".l0.factor", {c, kWidth});
  matrix1_ = store.create(prefix + ".l1.matrix", {c, kWidth, kWidth},
                          constant(c * kWidth * kWidth, inv_softplus(1.0 / per_layer / kWidth)));
  bias1_ = store.create(prefix + ".l1.bias", {c, kWidth}, uniform(c * kWidth));
  factor1_ = store.create_zeros(prefix + ".l1.factor", {c, kWidth});
  matrix2_ = store.create(prefix + ".l2.matrix", {c, kWidth},
                          constant(c * kWidth, inv_softplus(1.0 / per_layer)));
  bias2_ = store.create(prefix + ".l2.bias", {c}, uniform(c));
}

Tensor FactorizedEntropyModel::cdf_logits(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != channels_) {
    throw ShapeError("entropy model: expected [N, " + std::to_string(channels_) + "], got " +
                     ad::shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), c = channels_;
  Tensor h = ad::broadcast_to(ad::reshape(x, {n, c, 1}), {n, c, kWidth});
  h = ad::add(ad::mul(h, ad::softplus(matrix0_)), bias0_);
  h = ad::add(h, ad::mul(ad::tanh(h), ad::tanh(factor0_)));
  h = ad::broadcast_to(ad::reshape(h, {n, c, 1, kWidth}), {n, c, kWidth, kWidth});
  h = ad::add(ad::sum(ad::mul(h, ad::softplus(matrix1_)), 3), bias1_);
  h = ad::add(h, ad::mul(ad::tanh(h), ad::tanh(factor1_)));
  return ad::add(ad::sum(ad::mul(h, ad::softplus(matrix2_)), 2), bias2_);
}

Tensor FactorizedEntropyModel::likelihood(const Tensor& y) const {
  const std::size_t n = y.dim(0);
  const Tensor both =
      cdf_logits(ad::concat({ad::add_scalar(y, -0.5), ad::add_scalar(y, 0.5)}, 0));
  std::vector<std::size_t> lo_rows(n), hi_rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo_rows[i] = i;
    hi_rows[i] = n + i;
  }
  const Tensor lower = ad::gather_rows(both, lo_rows);
  const Tensor upper = ad::gather_rows(both, hi_rows);
  // Reflect to the left tail when both logits are positive; the difference
  // of two sigmoids near 1 loses every digit otherwise.
  std::vector<double> flip(lower.numel());
  for (std::size_t i = 0; i < flip.size(); ++i) {
    flip[i] = lower.at(i) + upper.at(i) > 0.0 ? -1.0 : 1.0;
  }
  const Tensor sign = Tensor::from(lower.shape(), std::move(flip));
  const Tensor p = ad::abs(
      ad::sub(ad::sigmoid(ad::mul(sign, upper)), ad::sigmoid(ad::mul(sign, lower))));
  return ad::clamp(p, kLikelihoodFloor, 1.0);
}

double FactorizedEntropyModel::cdf_logit(std::size_t ch, double x) const {
  double h0[kWidth], h1[kWidth];
  for (std::size_t j = 0; j < kWidth; ++j) {
    const std::size_t k = ch * kWidth + j;
    const double v = softplus(matrix0_.at(k)) * x + bias0_.at(k);
    h0[j] = v + std::tanh(factor0_.at(k)) * std::tanh(v);
  }
  for (std::size_t j = 0; j < kWidth; ++j) {
    double v = bias1_.at(ch * kWidth + j);
    for (std::size_t i = 0; i < kWidth; ++i) {
      v += softplus(matrix1_.at((ch * kWidth + j) * kWidth + i)) * h0[i];
    }
    h1[j] = v + std::tanh(factor1_.at(ch * kWidth + j)) * std::tanh(v);
  }
  double out = bias2_.at(ch);
  for (std::size_t j = 0; j < kWidth; ++j) out += softplus(matrix2_.at(ch * kWidth + j)) * h1[j];
  return out;
}

double FactorizedEntropyModel::bin_probability(std::size_t ch, double center) const {
  return logistic_mass(cdf_logit(ch, center - 0.5), cdf_logit(ch, center + 0.5));
}

double FactorizedEntropyModel::median(std::size_t ch) const {
  double lo = -1.0, hi = 1.0;
  while (cdf_logit(ch, lo) > 0.0 && lo > -1e12) lo *= 2.0;
  while (cdf_logit(ch, hi) < 0.0 && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf_logit(ch, mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void FactorizedEntropyModel::freeze(ad::ParameterStore& store, const std::vector<double>& values,
                                    bool integer_offsets) {
  if (values.size() % channels_ != 0) {
    throw ArgumentError("entropy model freeze: value count is not a multiple of the channels");
  }
  // Layout: C, then per channel: offset, lo, size, frequencies.
  std::vector<double> flat{static_cast<double>(channels_)};
  for (std::size_t ch = 0; ch < channels_; ++ch) {
    double offset = median(ch);
    if (integer_offsets) offset = std::round(offset);
    std::int32_t seen_lo = 0, seen_hi = 0;
    for (std::size_t i = ch; i < values.size(); i += channels_) {
      const std::int32_t q = quantize(values[i], offset);
      if (i == ch || q < seen_lo) seen_lo = q;
      if (i == ch || q > seen_hi) seen_hi = q;
    }
    const std::int32_t lo = std::clamp(seen_lo, -kMaxSupport / 2, kMaxSupport / 2) - 2;
    const std::int32_t hi = std::clamp(seen_hi, -kMaxSupport / 2, kMaxSupport / 2) + 2;
    std::vector<double> probs;
    for (std::int32_t s = lo; s <= hi; ++s) probs.push_back(bin_probability(ch, s + offset));
    const auto table = FrequencyTable::from_probabilities(lo, probs);
    flat.push_back(offset);
    flat.push_back(lo);
    flat.push_back(static_cast<double>(table.size()));
    for (std::uint32_t f : table.frequencies()) flat.push_back(f);
  }
  const std::size_t len = flat.size();
  store.set_buffer(tables_name(), {len}, std::move(flat));
  if (!load_tables(store)) throw Error("entropy model freeze: tables did not reload");
}

bool FactorizedEntropyModel::load_tables(const ad::ParameterStore& store) {
  tables_.clear();
  offsets_.clear();
  if (!store.contains(tables_name())) return false;
  const auto flat = store.get(tables_name()).data();
  auto bad = [&] { return FormatError("entropy tables '" + tables_name() + "' are malformed"); };
  std::size_t pos = 0;
  auto next = [&]() {
    if (pos >= flat.size()) throw bad();
    return flat[pos++];
  };
  if (next() != static_cast<double>(channels_)) throw bad();
  for (std::size_t ch = 0; ch < channels_; ++ch) {
    const double offset = next();
    const double lo = next(), size = next();
    if (lo != std::floor(lo) || size < 1.0 || size != std::floor(size)) throw bad();
    std::vector<std::uint32_t> freq;
    for (std::size_t i = 0; i < static_cast<std::size_t>(size); ++i) {
      const double f = next();
      if (f < 1.0 || f > kTableTotal || f != std::floor(f)) throw bad();
      freq.push_back(static_cast<std::uint32_t>(f));
    }
    offsets_.push_back(offset);
    tables_.emplace_back(static_cast<std::int32_t>(lo), std::move(freq));
  }
  if (pos != flat.size()) throw bad();
  return true;
}

Tensor rate_bits(const Tensor& likelihoods) {
  return ad::scale(ad::sum_all(ad::log(likelihoods)), -1.0 / std::numbers::ln2);
}

NoisyRate rate_proxy(const Tensor& y, const LikelihoodFn& likelihood, Rng& rng) {
  std::vector<double> noise(y.numel());
  for (double& u : noise) u = rng.uniform(-0.5, 0.5);
  NoisyRate r;
  r.noisy = ad::add(y, Tensor::from(y.shape(), std::move(noise)));
  r.bits = rate_bits(likelihood(r.noisy));
  return r;
}

}  // namespace dpcc
