#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dpcc {

inline constexpr std::uint16_t kBitstreamVersion = 1;

enum class PositionCoding : std::uint8_t { kRaw = 0, kLearned = 1 };

// Fixed-size block header, 36 bytes on the wire:
//   "DPCB", u16 version, f32 origin[3], f32 scale, u32 point count,
//   u8 position bits, u8 position coding, u64 model id
// followed by two u32-length segments: positions, then features.
struct BlockHeader {
  std::uint16_t version = kBitstreamVersion;
  std::array<float, 3> origin{};
  float scale = 1.0f;
  std::uint32_t count = 0;
  std::uint8_t position_bits = 9;
  PositionCoding position_coding = PositionCoding::kRaw;
  std::uint64_t model_id = 0;
};
inline constexpr std::size_t kBlockHeaderBytes = 36;

struct BlockBitstream {
  BlockHeader header;
  std::vector<std::uint8_t> positions;
  std::vector<std::uint8_t> features;
};

std::vector<std::uint8_t> serialize_block(const BlockBitstream& block);
// Structural parse only; version and model checks happen in the codec.
// Malformed input raises DecodeError with the failing offset.
BlockBitstream parse_block(std::span<const std::uint8_t> bytes);

// "DPCF", u32 block count, then per block a u32 length and its bitstream.
std::vector<std::uint8_t> serialize_container(const std::vector<std::vector<std::uint8_t>>& blocks);
std::vector<std::vector<std::uint8_t>> parse_container(std::span<const std::uint8_t> bytes);
// Byte offset of each block payload inside a container, for diagnostics.
std::vector<std::size_t> container_offsets(std::span<const std::uint8_t> bytes);

}  // namespace dpcc
