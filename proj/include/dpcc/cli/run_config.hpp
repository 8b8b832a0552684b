#pragma once

#include <string>

#include "dpcc/codec/config.hpp"
#include "dpcc/geometry/metrics.hpp"
#include "dpcc/training/losses.hpp"
#include "dpcc/training/trainer.hpp"

namespace dpcc {

// Everything a command can be configured with. The file form is flat
// key=value lines, '#' starts a comment, keys carry a section prefix:
//
//   codec.factors=1/2,1/3,1/4
//   loss.lambda=1e-3
//   train.epochs=50
//   metric.dm_radius=0.15
struct RunConfig {
  CodecConfig codec;
  LossConfig loss;
  TrainConfig train;
  MetricConfig metric;

  void validate() const;
};

// Applies one fully qualified key. Unknown keys raise FormatError, bad values
// ArgumentError.
void set_run_option(RunConfig& cfg, const std::string& key, const std::string& value);

// Later lines override earlier ones; the result is validated.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::string& path);

// Every key in a stable order; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& cfg);

}  // namespace dpcc
