#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dpcc {

inline constexpr int kTableBits = 16;
inline constexpr std::uint32_t kTableTotal = 1u << kTableBits;

// Integer frequencies over the contiguous symbol range [lo, lo + size).
class FrequencyTable {
 public:
  FrequencyTable() = default;
  // Every frequency must be >= 1 and the sum must not exceed kTableTotal.
  FrequencyTable(std::int32_t lo, std::vector<std::uint32_t> freq);

  // Allocates kTableTotal over `probabilities`, at least 1 per symbol. The
  // remainder after flooring goes to the largest fractional parts, lowest
  // index first on ties.
  static FrequencyTable from_probabilities(std::int32_t lo,
                                           const std::vector<double>& probabilities);

  std::int32_t lo() const { return lo_; }
  std::int32_t hi() const { return lo_ + static_cast<std::int32_t>(freq_.size()) - 1; }
  std::size_t size() const { return freq_.size(); }
  std::uint32_t total() const { return cum_.back(); }
  bool contains(std::int32_t s) const { return s >= lo_ && s <= hi(); }
  std::uint32_t freq(std::int32_t s) const { return freq_[static_cast<std::size_t>(s - lo_)]; }
  std::uint32_t cum(std::int32_t s) const { return cum_[static_cast<std::size_t>(s - lo_)]; }
  // Symbol whose cumulative interval holds `value` (< total()).
  std::int32_t find(std::uint32_t value) const;
  // -log2 of the coded probability of s.
  double cost_bits(std::int32_t s) const;

  const std::vector<std::uint32_t>& frequencies() const { return freq_; }

 private:
  std::int32_t lo_ = 0;
  std::vector<std::uint32_t> freq_;
  std::vector<std::uint32_t> cum_{0};
};

// Carry-less range coder (Subbotin) on a 64-bit state that shifts out one
// byte at a time. The range never drops below 2^48, so a 16-bit total leaves
// at least 32 bits of resolution per symbol. finish() flushes 8 bytes.
class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
  void encode(const FrequencyTable& table, std::int32_t symbol);
  std::vector<std::uint8_t> finish();

 private:
  void normalize();

  std::uint64_t low_ = 0;
  std::uint64_t range_ = ~std::uint64_t{0};
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  std::int32_t decode(const FrequencyTable& table);
  // Throws DecodeError unless exactly every input byte was consumed.
  void finish() const;

 private:
  std::uint8_t next_byte();
  void normalize();

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  bool overrun_ = false;
  std::uint64_t low_ = 0;
  std::uint64_t range_ = ~std::uint64_t{0};
  std::uint64_t code_ = 0;
};

// Symbol i is coded with tables[i % tables.size()]. The encoder throws
// ArgumentError for a symbol outside its table.
std::vector<std::uint8_t> range_encode(std::span<const std::int32_t> symbols,
                                       std::span<const FrequencyTable> tables);
std::vector<std::int32_t> range_decode(std::span<const std::uint8_t> bytes,
                                       std::span<const FrequencyTable> tables,
                                       std::size_t count);

}  // namespace dpcc
