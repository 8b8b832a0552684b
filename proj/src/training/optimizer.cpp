#include "dpcc/training/optimizer.hpp"

#include <cmath>

#include "dpcc/error.hpp"

namespace dpcc {

void adam_update(std::span<double> values, std::span<const double> grads,
                 std::span<double> m, std::span<double> v, std::size_t step, double lr,
                 const AdamConfig& cfg) {
  if (grads.size() != values.size() || m.size() != values.size() || v.size() != values.size()) {
    throw ArgumentError("adam_update: buffer sizes differ");
  }
  if (step == 0) throw ArgumentError("adam_update: step counts from 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < values.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
  }
}

void Adam::step(ad::ParameterStore& store, double lr) {
  ++step_;
  for (ad::Parameter& p : store.entries()) {
    if (!p.trainable) continue;
    const std::size_t n = p.tensor.numel();
    if (p.first_moment.size() != n) p.first_moment.assign(n, 0.0);
    if (p.second_moment.size() != n) p.second_moment.assign(n, 0.0);
    std::vector<double> g = p.tensor.has_grad() ? p.tensor.grad() : std::vector<double>(n, 0.0);
    adam_update(p.tensor.mutable_data(), g, p.first_moment, p.second_moment, step_, lr, cfg_);
  }
}

double scheduled_learning_rate(double base, std::size_t epoch, double factor, std::size_t every) {
  if (every == 0) return base;
  return base * std::pow(factor, static_cast<double>(epoch / every));
}

}  // namespace dpcc
