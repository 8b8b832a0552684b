#include "dpcc/entropy/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpcc/error.hpp"

namespace dpcc {
namespace {

constexpr std::uint64_t kTop = std::uint64_t{1} << 56;
constexpr std::uint64_t kBottom = std::uint64_t{1} << 48;

}  // namespace

FrequencyTable::FrequencyTable(std::int32_t lo, std::vector<std::uint32_t> freq)
    : lo_(lo), freq_(std::move(freq)) {
  if (freq_.empty()) throw ArgumentError("frequency table: empty support");
  cum_.assign(freq_.size() + 1, 0);
  for (std::size_t i = 0; i < freq_.size(); ++i) {
    if (freq_[i] == 0) throw ArgumentError("frequency table: zero frequency");
    cum_[i + 1] = cum_[i] + freq_[i];
    if (cum_[i + 1] > kTableTotal) throw ArgumentError("frequency table: total exceeds 2^16");
  }
}

FrequencyTable FrequencyTable::from_probabilities(std::int32_t lo,
                                                  const std::vector<double>& probabilities) {
  const std::size_t n = probabilities.size();
  if (n == 0 || n > kTableTotal) {
    throw ArgumentError("frequency table: support of " + std::to_string(n) + " symbols");
  }
  double mass = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw ArgumentError("frequency table: negative or NaN probability");
    mass += p;
  }
  const double budget = static_cast<double>(kTableTotal - n);
  std::vector<std::uint32_t> freq(n, 1);
  std::vector<double> frac(n, 0.0);
  std::uint32_t used = static_cast<std::uint32_t>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double share = mass > 0.0 ? probabilities[i] / mass * budget : budget / n;
    const double whole = std::floor(share);
    freq[i] += static_cast<std::uint32_t>(whole);
    frac[i] = share - whole;
    used += static_cast<std::uint32_t>(whole);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; used < kTableTotal; k = (k + 1) % n, ++used) ++freq[order[k]];
  return FrequencyTable(lo, std::move(freq));
}

std::int32_t FrequencyTable::find(std::uint32_t value) const {
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), value);
  return lo_ + static_cast<std::int32_t>(it - cum_.begin()) - 1;
}

double FrequencyTable::cost_bits(std::int32_t s) const {
  return std::log2(static_cast<double>(total()) / freq(s));
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
  const std::uint64_t r = range_ / total;
  low_ += r * cum;
  range_ = r * freq;
  normalize();
}

void RangeEncoder::encode(const FrequencyTable& table, std::int32_t symbol) {
  if (!table.contains(symbol)) {
    throw ArgumentError("range coder: symbol " + std::to_string(symbol) +
                        " outside table support [" + std::to_string(table.lo()) + ", " +
                        std::to_string(table.hi()) + "]");
  }
  encode(table.cum(symbol), table.freq(symbol), table.total());
}

void RangeEncoder::normalize() {
  for (;;) {
    if ((low_ ^ (low_ + range_)) >= kTop) {
      if (range_ >= kBottom) return;
      // Interval straddles a byte boundary while too narrow: give up the
      // part above the boundary.
      range_ = (0 - low_) & (kBottom - 1);
    }
    out_.push_back(static_cast<std::uint8_t>(low_ >> 56));
    low_ <<= 8;
    range_ <<= 8;
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 8; ++i) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 56));
    low_ <<= 8;
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 8; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) {
    overrun_ = true;
    ++pos_;
    return 0;
  }
  return bytes_[pos_++];
}

std::int32_t RangeDecoder::decode(const FrequencyTable& table) {
  const std::uint32_t total = table.total();
  const std::uint64_t r = range_ / total;
  const std::uint64_t v = (code_ - low_) / r;
  if (overrun_ || v >= total) {
    throw DecodeError("range decoder: corrupted symbol stream", std::min(pos_, bytes_.size()));
  }
  const std::int32_t s = table.find(static_cast<std::uint32_t>(v));
  low_ += r * table.cum(s);
  range_ = r * table.freq(s);
  normalize();
  return s;
}

void RangeDecoder::normalize() {
  for (;;) {
    if ((low_ ^ (low_ + range_)) >= kTop) {
      if (range_ >= kBottom) return;
      range_ = (0 - low_) & (kBottom - 1);
    }
    code_ = (code_ << 8) | next_byte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

void RangeDecoder::finish() const {
  if (overrun_ || pos_ != bytes_.size()) {
    throw DecodeError("range decoder: consumed " + std::to_string(pos_) + " of " +
                          std::to_string(bytes_.size()) + " bytes",
                      std::min(pos_, bytes_.size()));
  }
}

std::vector<std::uint8_t> range_encode(std::span<const std::int32_t> symbols,
                                       std::span<const FrequencyTable> tables) {
  if (tables.empty()) throw ArgumentError("range_encode: no tables");
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode(tables[i % tables.size()], symbols[i]);
  return enc.finish();
}

std::vector<std::int32_t> range_decode(std::span<const std::uint8_t> bytes,
                                       std::span<const FrequencyTable> tables,
                                       std::size_t count) {
  if (tables.empty()) throw ArgumentError("range_decode: no tables");
  if (bytes.size() < 8) throw DecodeError("range decoder: stream shorter than its flush", 0);
  RangeDecoder dec(bytes);
  std::vector<std::int32_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(dec.decode(tables[i % tables.size()]));
  dec.finish();
  return out;
}

}  // namespace dpcc
