#pragma once

#include <map>
#include <string>
#include <vector>

#include "dpcc/autodiff/tensor.hpp"
#include "dpcc/random.hpp"

namespace dpcc::ad {

// Named leaf tensor plus Adam moment buffers.
struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  // Frozen buffers (entropy tables, offsets) live alongside learned weights
  // but are skipped by the optimizer.
  bool trainable = true;
};

// Insertion-ordered collection of uniquely named parameters.
class ParameterStore {
 public:
  // Throws ArgumentError if `name` already exists.
  Tensor create(const std::string& name, Shape shape,
                std::vector<double> values, bool trainable = true);
  Tensor create_zeros(const std::string& name, Shape shape,
                      bool trainable = true);
  // Affine weight, uniform in +-sqrt(1/fan_in).
  Tensor create_uniform(const std::string& name, Shape shape,
                        std::size_t fan_in, Rng& rng);

  // Replaces the value of an existing entry, or creates a frozen one.
  void set_buffer(const std::string& name, Shape shape,
                  std::vector<double> values);

  bool contains(const std::string& name) const;
  Tensor get(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void zero_grad();
  // Total number of trainable scalars.
  std::size_t trainable_count() const;

 private:
  std::vector<Parameter> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace dpcc::ad
