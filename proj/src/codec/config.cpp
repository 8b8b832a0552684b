#include "dpcc/codec/config.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dpcc/error.hpp"

namespace dpcc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(x)) {
    throw ArgumentError("codec." + key + ": expected a number, got '" + v + "'");
  }
  return x;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const double x = parse_real(key, v);
  if (x < 0.0 || x != std::floor(x)) {
    throw ArgumentError("codec." + key + ": expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ArgumentError("codec." + key + ": expected true/false, got '" + v + "'");
}

}  // namespace

void CodecConfig::validate() const {
  if (factors.empty()) throw ArgumentError("codec.factors: need at least one stage");
  for (double f : factors) {
    if (!(f > 0.0) || f > 1.0) {
      throw ArgumentError("codec.factors: every factor must lie in (0, 1]");
    }
    const double inv = std::ceil(1.0 / f - 1e-9);
    if (inv > static_cast<double>(max_upsample)) {
      throw ArgumentError("codec.factors: ceil(1/f) exceeds codec.max_upsample");
    }
    if (inv > static_cast<double>(knn_k)) {
      throw ArgumentError("codec.knn_k must be at least ceil(1/f) for every stage");
    }
  }
  if (embed_dim == 0 || hidden == 0) throw ArgumentError("codec: zero width");
  if (max_upsample == 0) throw ArgumentError("codec.max_upsample must be >= 1");
  if (pool_size != 43) throw ArgumentError("codec.pool_size: only the 43-entry pool exists");
  if (position_bits < 2 || position_bits > 16) {
    throw ArgumentError("codec.position_bits must lie in [2, 16]");
  }
  if (!(reference_points >= 1.0)) throw ArgumentError("codec.reference_points must be >= 1");
  if (!(block_size > 0.0)) throw ArgumentError("codec.block_size must be positive");
  if (!(bottleneck_gain > 0.0)) throw ArgumentError("codec.bottleneck_gain must be positive");
}

std::vector<double> parse_factor_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ArgumentError("empty entry in factor list '" + text + "'");
    const auto slash = item.find('/');
    if (slash == std::string::npos) {
      out.push_back(parse_real("factors", item));
    } else {
      const double num = parse_real("factors", trim(item.substr(0, slash)));
      const double den = parse_real("factors", trim(item.substr(slash + 1)));
      if (den == 0.0) throw ArgumentError("zero denominator in '" + item + "'");
      out.push_back(num / den);
    }
  }
  if (out.empty()) throw ArgumentError("empty factor list");
  return out;
}

std::string format_factor_list(const std::vector<double>& factors) {
  std::ostringstream os;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) os << ',';
    const double inv = 1.0 / factors[i];
    if (std::abs(inv - std::round(inv)) < 1e-12) {
      os << "1/" << static_cast<long long>(std::round(inv));
    } else {
      os << std::setprecision(std::numeric_limits<double>::max_digits10) << factors[i];
    }
  }
  return os.str();
}

bool set_codec_option(CodecConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "factors") {
    cfg.factors = parse_factor_list(v);
  } else if (key == "embed_dim") {
    cfg.embed_dim = parse_count(key, v);
  } else if (key == "max_upsample") {
    cfg.max_upsample = parse_count(key, v);
  } else if (key == "knn_k") {
    cfg.knn_k = parse_count(key, v);
  } else if (key == "pool_size") {
    cfg.pool_size = parse_count(key, v);
  } else if (key == "hidden") {
    cfg.hidden = parse_count(key, v);
  } else if (key == "normals") {
    cfg.normals = parse_bool(key, v);
  } else if (key == "local_aggregation") {
    if (v == "scored_sum") {
      cfg.local_aggregation = LocalAggregation::kScoredSum;
    } else if (v == "mean") {
      cfg.local_aggregation = LocalAggregation::kMean;
    } else {
      throw ArgumentError("codec.local_aggregation: expected scored_sum or mean");
    }
  } else if (key == "position_bits") {
    cfg.position_bits = static_cast<int>(parse_count(key, v));
  } else if (key == "learned_positions") {
    cfg.learned_positions = parse_bool(key, v);
  } else if (key == "reference_points") {
    cfg.reference_points = parse_real(key, v);
  } else if (key == "block_size") {
    cfg.block_size = parse_real(key, v);
  } else if (key == "bottleneck_gain") {
    cfg.bottleneck_gain = parse_real(key, v);
  } else {
    return false;
  }
  return true;
}

std::string format_codec_config(const CodecConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "codec.factors=" << format_factor_list(cfg.factors) << '\n'
     << "codec.embed_dim=" << cfg.embed_dim << '\n'
     << "codec.max_upsample=" << cfg.max_upsample << '\n'
     << "codec.knn_k=" << cfg.knn_k << '\n'
     << "codec.pool_size=" << cfg.pool_size << '\n'
     << "codec.hidden=" << cfg.hidden << '\n'
     << "codec.normals=" << (cfg.normals ? "true" : "false") << '\n'
     << "codec.local_aggregation="
     << (cfg.local_aggregation == LocalAggregation::kScoredSum ? "scored_sum" : "mean") << '\n'
     << "codec.position_bits=" << cfg.position_bits << '\n'
     << "codec.learned_positions=" << (cfg.learned_positions ? "true" : "false") << '\n'
     << "codec.reference_points=" << cfg.reference_points << '\n'
     << "codec.block_size=" << cfg.block_size << '\n'
     << "codec.bottleneck_gain=" << cfg.bottleneck_gain << '\n';
  return os.str();
}

CodecConfig parse_codec_config(const std::string& text) {
  CodecConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("codec config: missing '=' in '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("codec.", 0) != 0) throw FormatError("codec config: unexpected key " + key);
    key = key.substr(6);
    if (!set_codec_option(cfg, key, line.substr(eq + 1))) {
      throw FormatError("codec config: unknown key codec." + key);
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace dpcc
