#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dpcc/codec/model.hpp"
#include "dpcc/random.hpp"
#include "dpcc/training/losses.hpp"
#include "dpcc/training/optimizer.hpp"

namespace dpcc {

struct TrainConfig {
  std::size_t epochs = 50;
  double learning_rate = 1e-3;
  double lr_decay = 0.5;
  std::size_t decay_every = 15;  // epochs
  // Optimizer steps on each block per epoch. Lets a tiny dataset stand in
  // for a larger one without changing what an epoch means to the schedule.
  std::size_t repeats = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

// One training forward pass over a block-frame cloud. The decoder sees the
// bottleneck positions snapped to the position grid and the features with
// uniform noise added; `noise` supplies that noise.
struct ForwardPass {
  EncoderOutput encoded;
  DecoderOutput decoded;
  LossTerms terms;
  ad::Tensor total;
  // Bits of the bottleneck position symbols under the position prior, per
  // input point. Only the position prior's parameters reach it.
  ad::Tensor position_rate;
  // total + position_rate; the quantity the optimizer follows.
  ad::Tensor objective;
};

ForwardPass forward_pass(const CodecModel& model, const PointCloud& block, const LossConfig& cfg,
                         Rng& noise);

struct StepLosses {
  double chamfer = 0, density = 0, cardinality = 0, rate = 0, normal = 0, total = 0;
};

StepLosses step_losses(const ForwardPass& pass);

struct EpochLog {
  std::size_t epoch = 0;
  double learning_rate = 0;
  StepLosses mean;  // averaged over the epoch's steps
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t steps = 0;
};

using StepCallback = std::function<void(std::size_t step, const StepLosses&)>;

// Per-block Adam steps over `blocks` (block frame), then freezes the entropy
// tables on the same blocks. Deterministic for a fixed seed. A non-finite
// loss restores the parameters from before the failing step and throws
// NanLossError.
TrainResult train(CodecModel& model, const std::vector<PointCloud>& blocks,
                  const TrainConfig& train_cfg, const LossConfig& loss_cfg,
                  const StepCallback& on_step = {});

// epoch,D_cha,D_den,D_card,R,total
std::string loss_csv(const std::vector<EpochLog>& epochs);

}  // namespace dpcc
