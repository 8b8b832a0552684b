#pragma once

#include <cstddef>
#include <span>

#include "dpcc/autodiff/parameter.hpp"

namespace dpcc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update of `values` in place. `step` counts from 1.
void adam_update(std::span<double> values, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 std::size_t step, double lr, const AdamConfig& cfg = {});

// Adam over every trainable entry of a store. Moments live in the store's
// Parameter records and are created on first use.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies the gradients accumulated on each parameter tensor. Entries
  // without a gradient count as zero gradient.
  void step(ad::ParameterStore& store, double lr);
  std::size_t steps() const { return step_; }

 private:
  AdamConfig cfg_;
  std::size_t step_ = 0;
};

// base * factor^floor(epoch / every).
double scheduled_learning_rate(double base, std::size_t epoch, double factor, std::size_t every);

}  // namespace dpcc
