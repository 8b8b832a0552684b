#pragma once

#include <cstddef>
#include <vector>

#include "dpcc/autodiff/tensor.hpp"

// Differentiable primitives. Binary elementwise ops accept either equal
// shapes, or a right operand whose shape equals the left operand's shape with
// the leading (batch) axis removed. Every other expansion goes through
// broadcast_to.
namespace dpcc::ad {

// Floor applied before log and sqrt.
inline constexpr double kLogSqrtFloor = 1e-12;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions drop the reduced axis.
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor l2norm(const Tensor& a, std::size_t axis);
Tensor softmax(const Tensor& a, std::size_t axis);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);
// Rows (entries of axis 0) selected by index; repeats allowed.
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows);
// Expands axes of extent 1 to the target extents; rank must match.
Tensor broadcast_to(const Tensor& a, const Shape& shape);

}  // namespace dpcc::ad
