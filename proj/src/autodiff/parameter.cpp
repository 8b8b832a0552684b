#include "dpcc/autodiff/parameter.hpp"

#include <cmath>

#include "dpcc/error.hpp"

namespace dpcc::ad {

Tensor ParameterStore::create(const std::string& name, Shape shape,
                              std::vector<double> values, bool trainable) {
  if (index_.count(name)) {
    throw ArgumentError("duplicate parameter name '" + name + "'");
  }
  Parameter p;
  p.name = name;
  p.tensor = Tensor::from(std::move(shape), std::move(values), trainable);
  p.first_moment.assign(p.tensor.numel(), 0.0);
  p.second_moment.assign(p.tensor.numel(), 0.0);
  p.trainable = trainable;
  index_[name] = entries_.size();
  entries_.push_back(std::move(p));
  return entries_.back().tensor;
}

Tensor ParameterStore::create_zeros(const std::string& name, Shape shape,
                                    bool trainable) {
  const std::size_t n = numel(shape);
  return create(name, std::move(shape), std::vector<double>(n, 0.0),
                trainable);
}

Tensor ParameterStore::create_uniform(const std::string& name, Shape shape,
                                      std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<double> values(numel(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return create(name, std::move(shape), std::move(values));
}

void ParameterStore::set_buffer(const std::string& name, Shape shape,
                                std::vector<double> values) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    create(name, std::move(shape), std::move(values), false);
    return;
  }
  Parameter& p = entries_[it->second];
  p.tensor = Tensor::from(std::move(shape), std::move(values), p.trainable);
  p.first_moment.assign(p.tensor.numel(), 0.0);
  p.second_moment.assign(p.tensor.numel(), 0.0);
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

Tensor ParameterStore::get(const std::string& name) const {
  return at(name).tensor;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ArgumentError("unknown parameter '" + name + "'");
  }
  return entries_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

void ParameterStore::zero_grad() {
  for (auto& p : entries_) p.tensor.zero_grad();
}

std::size_t ParameterStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : entries_)
    if (p.trainable) n += p.tensor.numel();
  return n;
}

}  // namespace dpcc::ad
