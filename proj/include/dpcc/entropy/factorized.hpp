#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dpcc/autodiff/parameter.hpp"
#include "dpcc/autodiff/tensor.hpp"
#include "dpcc/entropy/range_coder.hpp"
#include "dpcc/random.hpp"

namespace dpcc {

inline constexpr double kLikelihoodFloor = 1e-9;

// Fully factorized prior: one monotone CDF per channel, built from three
// affine layers (widths 1 -> 3 -> 3 -> 1) with softplus-constrained weights
// and tanh gates between them. Values are [N, C] with channel = column.
class FactorizedEntropyModel {
 public:
  FactorizedEntropyModel() = default;
  // `init_scale` is the rough spread of the values the model starts out
  // expecting.
  FactorizedEntropyModel(ad::ParameterStore& store, const std::string& prefix,
                         std::size_t channels, double init_scale, Rng& rng);

  std::size_t channels() const { return channels_; }
  const std::string& prefix() const { return prefix_; }

  // Pre-sigmoid CDF, [N, C] -> [N, C].
  ad::Tensor cdf_logits(const ad::Tensor& x) const;
  // Mass of the unit bin centered on each value, floored at kLikelihoodFloor.
  ad::Tensor likelihood(const ad::Tensor& y) const;

  // Graph-free scalar versions for table construction.
  double cdf_logit(std::size_t channel, double x) const;
  double bin_probability(std::size_t channel, double center) const;
  // Point where the channel CDF crosses 1/2.
  double median(std::size_t channel) const;

  // Builds one table per channel over symbols round(y - offset), offset =
  // channel median, with support [min - 2, max + 2] of the symbols seen in
  // `values` (row-major [N, C], may be empty). Integer-valued data needs
  // `integer_offsets` to stay lossless. Tables and offsets are stored in
  // `store` as a frozen buffer so checkpoints carry them.
  void freeze(ad::ParameterStore& store, const std::vector<double>& values,
              bool integer_offsets = false);
  // Reloads tables written by freeze(); false if `store` has none.
  bool load_tables(const ad::ParameterStore& store);
  bool frozen() const { return !tables_.empty(); }

  const std::vector<FrequencyTable>& tables() const { return tables_; }
  const std::vector<double>& offsets() const { return offsets_; }
  std::string tables_name() const { return prefix_ + ".tables"; }

 private:
  std::string prefix_;
  std::size_t channels_ = 0;
  ad::Tensor matrix0_, bias0_, factor0_;  // [C, 3]
  ad::Tensor matrix1_;                    // [C, 3, 3], [channel, out, in]
  ad::Tensor bias1_, factor1_;            // [C, 3]
  ad::Tensor matrix2_;                    // [C, 3]
  ad::Tensor bias2_;                      // [C]
  std::vector<FrequencyTable> tables_;
  std::vector<double> offsets_;
};

// Total -log2 over every element.
ad::Tensor rate_bits(const ad::Tensor& likelihoods);

using LikelihoodFn = std::function<ad::Tensor(const ad::Tensor&)>;

struct NoisyRate {
  ad::Tensor noisy;  // y + U(-1/2, 1/2)
  ad::Tensor bits;   // scalar
};

// Training-time rate: bits of y + uniform noise under `likelihood`.
NoisyRate rate_proxy(const ad::Tensor& y, const LikelihoodFn& likelihood, Rng& rng);

}  // namespace dpcc
