#include "dpcc/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpcc/error.hpp"

namespace dpcc::ad {
namespace {

using BackwardFn = std::function<void(Node&)>;

Tensor make_op(Shape shape, std::vector<double> value,
               const std::vector<Tensor>& inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs_grad = std::any_of(
      inputs.begin(), inputs.end(),
      [](const Tensor& t) { return t.requires_grad(); });
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

// Gradient sink of parent `i`, or nullptr when that parent is constant.
double* sink(Node& self, std::size_t i) {
  Node& parent = *self.parents[i];
  return parent.requires_grad ? parent.grad_buffer().data() : nullptr;
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                   " and " + shape_str(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a,
                             const std::string& what) {
  throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " " + what);
}

// Right operand either matches exactly or matches the left shape minus its
// leading axis.
bool binary_compatible(const Shape& a, const Shape& b) {
  if (a == b) return true;
  if (a.empty() || b.size() + 1 != a.size()) return false;
  return std::equal(b.begin(), b.end(), a.begin() + 1);
}

struct AxisSplit {
  std::size_t outer, extent, inner;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    shape_fail(op, shape, "has no axis " + std::to_string(axis));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out = shape;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

// Shared skeleton of pointwise unary ops. `derivative(x, y)` is dy/dx given
// input x and output y.
template <class F, class D>
Tensor unary(const Tensor& a, F f, D derivative) {
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_op(a.shape(), std::move(out), {a}, [derivative](Node& self) {
    double* ga = sink(self, 0);
    if (!ga) return;
    const auto& x = self.parents[0]->value;
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      ga[i] += self.grad[i] * derivative(x[i], self.value[i]);
    }
  });
}

enum class BinaryKind { kAdd, kSub, kMul, kDiv };

Tensor binary(const char* op, const Tensor& a, const Tensor& b,
              BinaryKind kind) {
  if (!binary_compatible(a.shape(), b.shape())) {
    shape_fail(op, a.shape(), b.shape());
  }
  const std::size_t n = a.numel();
  const std::size_t nb = b.numel();
  std::vector<double> out(n);
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[i];
    const double v = y[i % nb];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = u + v; break;
      case BinaryKind::kSub: out[i] = u - v; break;
      case BinaryKind::kMul: out[i] = u * v; break;
      case BinaryKind::kDiv: out[i] = u / v; break;
    }
  }
  return make_op(a.shape(), std::move(out), {a, b}, [kind, nb](Node& self) {
    double* ga = sink(self, 0);
    double* gb = sink(self, 1);
    const auto& x = self.parents[0]->value;
    const auto& y = self.parents[1]->value;
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const double g = self.grad[i];
      const std::size_t j = i % nb;
      switch (kind) {
        case BinaryKind::kAdd:
          if (ga) ga[i] += g;
          if (gb) gb[j] += g;
          break;
        case BinaryKind::kSub:
          if (ga) ga[i] += g;
          if (gb) gb[j] -= g;
          break;
        case BinaryKind::kMul:
          if (ga) ga[i] += g * y[j];
          if (gb) gb[j] += g * x[i];
          break;
        case BinaryKind::kDiv:
          if (ga) ga[i] += g / y[j];
          if (gb) gb[j] -= g * x[i] / (y[j] * y[j]);
          break;
      }
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_fail("matmul", a.shape(), b.shape());
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m, 0.0);
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = x[i * k + p];
      if (s == 0.0) continue;
      const double* brow = y.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
    }
  }
  return make_op({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    double* ga = sink(self, 0);
    double* gb = sink(self, 1);
    const auto& x = self.parents[0]->value;
    const auto& y = self.parents[1]->value;
    const auto& g = self.grad;
    if (ga) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = y.data() + p * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (gb) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double s = x[i * k + p];
          if (s == 0.0) continue;
          double* gbrow = gb + p * m;
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += s * grow[j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, BinaryKind::kAdd);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, BinaryKind::kSub);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, BinaryKind::kMul);
}
Tensor div(const Tensor& a, const Tensor& b) {
  return binary("div", a, b, BinaryKind::kDiv);
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      },
      [](double x, double) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(std::max(x, kLogSqrtFloor)); },
      [](double x, double) { return x >= kLogSqrtFloor ? 1.0 / x : 0.0; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, [](double x) { return std::sqrt(std::max(x, kLogSqrtFloor)); },
      [](double x, double y) { return x >= kLogSqrtFloor ? 0.5 / y : 0.0; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) {
        return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ArgumentError("clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis("sum", a.shape(), axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += x[(o * s.extent + e) * s.inner + i];
  return make_op(drop_axis(a.shape(), axis), std::move(out), {a},
                 [s](Node& self) {
                   double* ga = sink(self, 0);
                   if (!ga) return;
                   for (std::size_t o = 0; o < s.outer; ++o)
                     for (std::size_t e = 0; e < s.extent; ++e)
                       for (std::size_t i = 0; i < s.inner; ++i)
                         ga[(o * s.extent + e) * s.inner + i] +=
                             self.grad[o * s.inner + i];
                 });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  const std::size_t extent = split_axis("mean", a.shape(), axis).extent;
  if (extent == 0) shape_fail("mean", a.shape(), "has empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(extent));
}

Tensor sum_all(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_op({}, {total}, {a}, [](Node& self) {
    double* ga = sink(self, 0);
    if (!ga) return;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) ga[i] += g;
  });
}

Tensor mean_all(const Tensor& a) {
  if (a.numel() == 0) shape_fail("mean_all", a.shape(), "is empty");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor l2norm(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis("l2norm", a.shape(), axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double v = x[(o * s.extent + e) * s.inner + i];
        out[o * s.inner + i] += v * v;
      }
  std::vector<bool> clamped(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    clamped[i] = out[i] < kLogSqrtFloor;
    out[i] = std::sqrt(std::max(out[i], kLogSqrtFloor));
  }
  return make_op(drop_axis(a.shape(), axis), std::move(out), {a},
                 [s, clamped = std::move(clamped)](Node& self) {
                   double* ga = sink(self, 0);
                   if (!ga) return;
                   const auto& x = self.parents[0]->value;
                   for (std::size_t o = 0; o < s.outer; ++o)
                     for (std::size_t i = 0; i < s.inner; ++i) {
                       const std::size_t r = o * s.inner + i;
                       if (clamped[r]) continue;
                       const double g = self.grad[r] / self.value[r];
                       for (std::size_t e = 0; e < s.extent; ++e) {
                         const std::size_t idx = (o * s.extent + e) * s.inner + i;
                         ga[idx] += g * x[idx];
                       }
                     }
                 });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis("softmax", a.shape(), axis);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t e) { return (o * s.extent + e) * s.inner + i; };
      double hi = -INFINITY;
      for (std::size_t e = 0; e < s.extent; ++e) hi = std::max(hi, x[at(e)]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        out[at(e)] = std::exp(x[at(e)] - hi);
        total += out[at(e)];
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[at(e)] /= total;
    }
  return make_op(a.shape(), std::move(out), {a}, [s](Node& self) {
    double* ga = sink(self, 0);
    if (!ga) return;
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        auto at = [&](std::size_t e) { return (o * s.extent + e) * s.inner + i; };
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) dot += g[at(e)] * y[at(e)];
        for (std::size_t e = 0; e < s.extent; ++e)
          ga[at(e)] += y[at(e)] * (g[at(e)] - dot);
      }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  split_axis("concat", first, axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = first;
    if (a.size() != b.size()) shape_fail("concat", first, p.shape());
    a[axis] = b[axis] = 0;
    if (a != b) shape_fail("concat", first, p.shape());
    out_shape[axis] += p.dim(axis);
  }
  const AxisSplit os = split_axis("concat", out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t ext = p.dim(axis);
    const auto x = p.data();
    for (std::size_t o = 0; o < os.outer; ++o)
      for (std::size_t e = 0; e < ext; ++e)
        for (std::size_t i = 0; i < os.inner; ++i)
          out[(o * os.extent + offset + e) * os.inner + i] =
              x[(o * ext + e) * os.inner + i];
    offset += ext;
  }
  return make_op(std::move(out_shape), std::move(out), parts,
                 [os, axis, offsets](Node& self) {
                   for (std::size_t k = 0; k < self.parents.size(); ++k) {
                     double* gp = sink(self, k);
                     if (!gp) continue;
                     const std::size_t ext = self.parents[k]->shape[axis];
                     for (std::size_t o = 0; o < os.outer; ++o)
                       for (std::size_t e = 0; e < ext; ++e)
                         for (std::size_t i = 0; i < os.inner; ++i)
                           gp[(o * ext + e) * os.inner + i] +=
                               self.grad[(o * os.extent + offsets[k] + e) *
                                             os.inner + i];
                   }
                 });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) shape_fail("reshape", a.shape(), shape);
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_op(std::move(shape), std::move(out), {a}, [](Node& self) {
    double* ga = sink(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) shape_fail("transpose", a.shape(), "is not rank 2");
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n * m);
  const auto x = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = x[i * m + j];
  return make_op({m, n}, std::move(out), {a}, [n, m](Node& self) {
    double* ga = sink(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += self.grad[j * n + i];
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
  if (a.rank() < 1) shape_fail("gather_rows", a.shape(), "has no rows");
  const std::size_t width = a.dim(0) ? a.numel() / a.dim(0) : 0;
  for (std::size_t r : rows) {
    if (r >= a.dim(0)) {
      shape_fail("gather_rows", a.shape(), "has no row " + std::to_string(r));
    }
  }
  Shape out_shape = a.shape();
  out_shape[0] = rows.size();
  std::vector<double> out(rows.size() * width);
  const auto x = a.data();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(rows[i] * width),
                width, out.begin() + static_cast<std::ptrdiff_t>(i * width));
  return make_op(std::move(out_shape), std::move(out), {a},
                 [rows, width](Node& self) {
                   double* ga = sink(self, 0);
                   if (!ga) return;
                   for (std::size_t i = 0; i < rows.size(); ++i)
                     for (std::size_t c = 0; c < width; ++c)
                       ga[rows[i] * width + c] += self.grad[i * width + c];
                 });
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
  const Shape& in = a.shape();
  if (in.size() != shape.size()) shape_fail("broadcast_to", in, shape);
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] != shape[i] && in[i] != 1) shape_fail("broadcast_to", in, shape);
  }
  const std::size_t rank = shape.size();
  // Source offset of every output element.
  std::vector<std::size_t> src(numel(shape));
  std::vector<std::size_t> in_stride(rank, 1), out_index(rank, 0);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < rank; ++d)
      if (in[d] != 1) off += out_index[d] * in_stride[d];
    src[flat] = off;
    for (std::size_t d = rank; d-- > 0;) {
      if (++out_index[d] < shape[d]) break;
      out_index[d] = 0;
    }
  }
  std::vector<double> out(src.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = x[src[i]];
  return make_op(shape, std::move(out), {a},
                 [src = std::move(src)](Node& self) {
                   double* ga = sink(self, 0);
                   if (!ga) return;
                   for (std::size_t i = 0; i < src.size(); ++i)
                     ga[src[i]] += self.grad[i];
                 });
}

}  // namespace dpcc::ad
