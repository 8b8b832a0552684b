#pragma once

#include <cstdint>
#include <vector>

namespace dpcc {

// round(value - offset), halves away from zero, saturating at the int32
// range.
std::int32_t quantize(double value, double offset);
double dequantize(std::int32_t symbol, double offset);

// Uniform grid over [-1, 1] with 2^bits levels: index round_half_up of
// (x + 1) / 2 * (2^bits - 1), clamped to the grid.
std::uint32_t quantize_position(double x, int bits);
double dequantize_position(std::uint32_t index, int bits);
// Index minus 2^(bits-1), the symbol the learned position model codes.
inline std::int32_t center_position_index(std::uint32_t index, int bits) {
  return static_cast<std::int32_t>(index) - (std::int32_t{1} << (bits - 1));
}
inline std::uint32_t uncenter_position_symbol(std::int32_t symbol, int bits) {
  return static_cast<std::uint32_t>(symbol + (std::int32_t{1} << (bits - 1)));
}

// LSB-first bit packing of fixed-width unsigned fields.
std::vector<std::uint8_t> pack_bits(const std::vector<std::uint32_t>& values, int width);
// Throws DecodeError if `bytes` does not hold exactly `count` fields.
std::vector<std::uint32_t> unpack_bits(const std::vector<std::uint8_t>& bytes, int width,
                                       std::size_t count);
inline std::size_t packed_size(std::size_t count, int width) {
  return (count * static_cast<std::size_t>(width) + 7) / 8;
}

}  // namespace dpcc
