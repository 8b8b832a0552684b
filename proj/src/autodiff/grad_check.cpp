#include "dpcc/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpcc/error.hpp"
#include "dpcc/random.hpp"

namespace dpcc::ad {

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs, double eps,
                           double tol, const GradCheckOptions& options) {
  if (eps <= 0.0) throw ArgumentError("grad_check: eps must be positive");
  for (const auto& x : inputs) x.zero_grad();
  const Tensor root = f();
  const double base = root.item();
  backward(root);
  std::vector<std::vector<double>> analytic;
  for (const auto& x : inputs) analytic.push_back(x.grad());

  GradCheckReport report;
  Rng rng(options.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor x = inputs[k];
    std::vector<std::size_t> coords(x.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords && coords.size() > options.max_coords) {
      for (std::size_t i = 0; i < options.max_coords; ++i) {
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      }
      coords.resize(options.max_coords);
    }
    auto values = x.mutable_data();
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = f().item();
      values[i] = saved - eps;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      if (options.skip_kinks) {
        const double right = (up - base) / eps, left = (base - down) / eps;
        const double spread = std::fabs(right - left) /
                              std::max({std::fabs(right), std::fabs(left), options.floor});
        if (spread > tol) {
          ++report.skipped;
          continue;
        }
      }
      const double a = analytic[k][i];
      const double denom =
          std::max({std::fabs(a), std::fabs(numeric), options.floor});
      const double err = std::fabs(a - numeric) / denom;
      ++report.checked;
      if (!(err <= report.max_rel_error)) {
        report.max_rel_error = err;
        report.worst_input = k;
        report.worst_index = i;
      }
    }
  }
  for (const auto& x : inputs) x.zero_grad();
  report.passed = report.max_rel_error <= tol;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& x, double eps, double tol) {
  return grad_check([&] { return f(x); }, {x}, eps, tol);
}

}  // namespace dpcc::ad
