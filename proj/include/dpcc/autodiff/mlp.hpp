#pragma once

#include <string>
#include <vector>

#include "dpcc/autodiff/parameter.hpp"
#include "dpcc/autodiff/tensor.hpp"

namespace dpcc::ad {

enum class Activation { kLinear, kRelu, kSigmoid, kTanh };

// x @ weight + bias, weight [in, out], bias [out].
struct Linear {
  Tensor weight;
  Tensor bias;

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor forward(const Tensor& x) const;
};

struct Mlp {
  std::vector<Linear> layers;
  std::vector<Activation> activations;  // one per layer

  std::size_t in_features() const { return layers.front().in_features(); }
  std::size_t out_features() const { return layers.back().out_features(); }
  Tensor forward(const Tensor& x) const;
};

Tensor apply_activation(const Tensor& x, Activation activation);

// Alternating affine + activation composition over [N, in] rows.
Tensor mlp_forward(const std::vector<Linear>& layers, const Tensor& x,
                   const std::vector<Activation>& activations);

// Registers `<prefix>.l<i>.weight` / `.bias` for consecutive `dims`. Hidden
// layers use `hidden`, the last layer uses `last`.
Mlp make_mlp(ParameterStore& store, const std::string& prefix,
             const std::vector<std::size_t>& dims, Rng& rng,
             Activation hidden = Activation::kRelu,
             Activation last = Activation::kLinear);

}  // namespace dpcc::ad
