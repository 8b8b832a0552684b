#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dpcc/autodiff/tensor.hpp"

namespace dpcc::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates rejected as non-smooth
  bool passed = true;
};

struct GradCheckOptions {
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // 0 checks every coordinate; otherwise a seeded random subset per input.
  std::size_t max_coords = 0;
  std::uint64_t seed = 1;
  // Skip coordinates whose one-sided differences disagree by more than tol:
  // a ReLU kink lies inside [x - eps, x + eps] and the central difference
  // says nothing about the gradient there.
  bool skip_kinks = false;
};

// Compares analytic gradients of the scalar `f()` w.r.t. each leaf in
// `inputs` against central differences (f(x+eps) - f(x-eps)) / 2eps.
// `f` must rebuild its graph on every call and be deterministic.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs, double eps,
                           double tol, const GradCheckOptions& options = {});

// Single-input form.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& x, double eps, double tol);

}  // namespace dpcc::ad
