#include "dpcc/autodiff/mlp.hpp"

#include "dpcc/autodiff/ops.hpp"
#include "dpcc/error.hpp"

namespace dpcc::ad {

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_features()) {
    throw ShapeError("linear: input " + shape_str(x.shape()) +
                     " does not match weight " + shape_str(weight.shape()));
  }
  return add(matmul(x, weight), bias);
}

Tensor apply_activation(const Tensor& x, Activation activation) {
  switch (activation) {
    case Activation::kLinear: return x;
    case Activation::kRelu: return relu(x);
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kTanh: return tanh(x);
  }
  return x;
}

Tensor mlp_forward(const std::vector<Linear>& layers, const Tensor& x,
                   const std::vector<Activation>& activations) {
  if (layers.size() != activations.size()) {
    throw ArgumentError("mlp: " + std::to_string(layers.size()) +
                        " layers but " + std::to_string(activations.size()) +
                        " activations");
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0 && layers[i].in_features() != layers[i - 1].out_features()) {
      throw ShapeError("mlp: layer " + std::to_string(i) + " expects " +
                       std::to_string(layers[i].in_features()) +
                       " inputs, previous layer gives " +
                       std::to_string(layers[i - 1].out_features()));
    }
    h = apply_activation(layers[i].forward(h), activations[i]);
  }
  return h;
}

Tensor Mlp::forward(const Tensor& x) const {
  return mlp_forward(layers, x, activations);
}

Mlp make_mlp(ParameterStore& store, const std::string& prefix,
             const std::vector<std::size_t>& dims, Rng& rng,
             Activation hidden, Activation last) {
  if (dims.size() < 2) throw ArgumentError("mlp '" + prefix + "' needs >= 2 dims");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::string base = prefix + ".l" + std::to_string(i);
    Linear layer;
    layer.weight = store.create_uniform(base + ".weight", {dims[i], dims[i + 1]},
                                        dims[i], rng);
    layer.bias = store.create_zeros(base + ".bias", {dims[i + 1]});
    mlp.layers.push_back(layer);
    mlp.activations.push_back(i + 2 == dims.size() ? last : hidden);
  }
  return mlp;
}

}  // namespace dpcc::ad
