#include "dpcc/cli/run_config.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dpcc/error.hpp"
#include "dpcc/io/bytes.hpp"

namespace dpcc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size() || !std::isfinite(x)) {
    throw ArgumentError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

std::uint64_t count(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ArgumentError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ArgumentError(key + ": '" + v + "' is out of range");
  }
}

}  // namespace

void RunConfig::validate() const {
  codec.validate();
  loss.validate();
  train.validate();
  metric.validate();
}

void set_run_option(RunConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  const auto dot = key.find('.');
  const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
  const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
  bool known = true;
  if (section == "codec") {
    known = set_codec_option(cfg.codec, name, v);
  } else if (section == "loss") {
    if (name == "lambda") cfg.loss.lambda = real(key, v);
    else if (name == "alpha") cfg.loss.alpha = real(key, v);
    else if (name == "beta") cfg.loss.beta = real(key, v);
    else if (name == "gamma") cfg.loss.gamma = real(key, v);
    else if (name == "normal_weight") cfg.loss.normal_weight = real(key, v);
    else known = false;
  } else if (section == "train") {
    if (name == "epochs") cfg.train.epochs = count(key, v);
    else if (name == "learning_rate") cfg.train.learning_rate = real(key, v);
    else if (name == "lr_decay") cfg.train.lr_decay = real(key, v);
    else if (name == "decay_every") cfg.train.decay_every = count(key, v);
    else if (name == "repeats") cfg.train.repeats = count(key, v);
    else if (name == "seed") cfg.train.seed = count(key, v);
    else known = false;
  } else if (section == "metric") {
    if (name == "dm_radius") cfg.metric.dm_radius = real(key, v);
    else if (name == "dm_weight") cfg.metric.dm_weight = real(key, v);
    else if (name == "psnr_peak") cfg.metric.psnr_peak = real(key, v);
    else if (name == "f1_tau_p") cfg.metric.f1_tau_p = real(key, v);
    else if (name == "f1_tau_n") cfg.metric.f1_tau_n = real(key, v);
    else known = false;
  } else {
    known = false;
  }
  if (!known) throw FormatError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text, RunConfig cfg) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set_run_option(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const FormatError& e) {
      throw FormatError("config line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ArgumentError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  const auto bytes = io::read_file(path);
  return parse_run_config(std::string(bytes.begin(), bytes.end()));
}

std::string format_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << format_codec_config(cfg.codec);
  os << "loss.lambda=" << cfg.loss.lambda << '\n'
     << "loss.alpha=" << cfg.loss.alpha << '\n'
     << "loss.beta=" << cfg.loss.beta << '\n'
     << "loss.gamma=" << cfg.loss.gamma << '\n'
     << "loss.normal_weight=" << cfg.loss.normal_weight << '\n';
  os << "train.epochs=" << cfg.train.epochs << '\n'
     << "train.learning_rate=" << cfg.train.learning_rate << '\n'
     << "train.lr_decay=" << cfg.train.lr_decay << '\n'
     << "train.decay_every=" << cfg.train.decay_every << '\n'
     << "train.repeats=" << cfg.train.repeats << '\n'
     << "train.seed=" << cfg.train.seed << '\n';
  os << "metric.dm_radius=" << cfg.metric.dm_radius << '\n'
     << "metric.dm_weight=" << cfg.metric.dm_weight << '\n'
     << "metric.psnr_peak=" << cfg.metric.psnr_peak << '\n'
     << "metric.f1_tau_p=" << cfg.metric.f1_tau_p << '\n'
     << "metric.f1_tau_n=" << cfg.metric.f1_tau_n << '\n';
  return os.str();
}

}  // namespace dpcc
