#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpcc/autodiff/parameter.hpp"

// Parameter checkpoint container. Byte layout (all integers little-endian):
//
//   "DPCC"                     magic, 4 bytes
//   u16 version                currently 1
//   u32 parameter count
//   u32 config length, bytes   key=value text the model was built from
//   per parameter:
//     u16 name length, bytes
//     u8  flags                bit 0 = trainable
//     u8  rank, u32 extent[rank]
//     f64 values[product of extents]
namespace dpcc::ad {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
  bool trainable = true;
};

struct Checkpoint {
  std::string config_text;
  std::vector<CheckpointEntry> entries;
};

std::vector<std::uint8_t> serialize_checkpoint(const ParameterStore& store,
                                               const std::string& config_text);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

// Overwrites every entry of `store` from `checkpoint`. Names and shapes must
// match one-to-one.
void load_checkpoint(const Checkpoint& checkpoint, ParameterStore& store);

}  // namespace dpcc::ad
