#include "dpcc/entropy/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "dpcc/error.hpp"

namespace dpcc {

std::int32_t quantize(double value, double offset) {
  const double q = std::round(value - offset);
  if (std::isnan(q)) throw ArgumentError("quantize: NaN input");
  return static_cast<std::int32_t>(std::clamp(q, -2147483648.0, 2147483647.0));
}

double dequantize(std::int32_t symbol, double offset) { return symbol + offset; }

std::uint32_t quantize_position(double x, int bits) {
  const double levels = std::ldexp(1.0, bits) - 1.0;
  const double t = std::floor((x + 1.0) * 0.5 * levels + 0.5);
  if (!(t > 0.0)) return 0;
  if (t > levels) return static_cast<std::uint32_t>(levels);
  return static_cast<std::uint32_t>(t);
}

double dequantize_position(std::uint32_t index, int bits) {
  const double levels = std::ldexp(1.0, bits) - 1.0;
  return 2.0 * index / levels - 1.0;
}

std::vector<std::uint8_t> pack_bits(const std::vector<std::uint32_t>& values, int width) {
  std::vector<std::uint8_t> out(packed_size(values.size(), width), 0);
  std::size_t bit = 0;
  for (std::uint32_t v : values) {
    for (int b = 0; b < width; ++b, ++bit) {
      if ((v >> b) & 1u) out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
  }
  return out;
}

std::vector<std::uint32_t> unpack_bits(const std::vector<std::uint8_t>& bytes, int width,
                                       std::size_t count) {
  if (bytes.size() != packed_size(count, width)) {
    throw DecodeError("raw positions: expected " + std::to_string(packed_size(count, width)) +
                          " bytes, got " + std::to_string(bytes.size()),
                      0);
  }
  std::vector<std::uint32_t> out(count, 0);
  std::size_t bit = 0;
  for (auto& v : out) {
    for (int b = 0; b < width; ++b, ++bit) {
      if ((bytes[bit / 8] >> (bit % 8)) & 1u) v |= 1u << b;
    }
  }
  return out;
}

}  // namespace dpcc
