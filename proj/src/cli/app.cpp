#include "dpcc/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dpcc/cli/evaluate.hpp"
#include "dpcc/cli/svg.hpp"
#include "dpcc/codec/model.hpp"
#include "dpcc/io/bytes.hpp"
#include "dpcc/io/ply.hpp"
#include "dpcc/io/synth.hpp"
#include "dpcc/training/trainer.hpp"

namespace dpcc {
namespace fs = std::filesystem;
namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config file first, then --set overrides in order, then --seed.
RunConfig resolve_config(const std::string& path, const std::vector<std::string>& sets,
                         const std::optional<std::uint64_t>& seed) {
  try {
    RunConfig cfg;
    if (!path.empty()) {
      const auto bytes = io::read_file(path);
      cfg = parse_run_config(std::string(bytes.begin(), bytes.end()));
    }
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      set_run_option(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) cfg.train.seed = *seed;
    cfg.validate();
    return cfg;
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void require_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path)) throw Error("cannot create directory '" + path + "'");
}

// Output files may name directories that do not exist yet.
const std::string& ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) require_dir(parent.string());
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  io::write_file_atomic(ensure_parent(path),
                        std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sibling(const std::string& path, const std::string& name) {
  const fs::path parent = fs::path(path).parent_path();
  return (parent.empty() ? fs::path(name) : parent / name).string();
}

void print_epochs(const TrainResult& r, std::ostream& out) {
  for (const EpochLog& e : r.epochs) {
    out << "epoch " << e.epoch << "  lr " << e.learning_rate << "  D_cha " << e.mean.chamfer
        << "  D_den " << e.mean.density << "  D_card " << e.mean.cardinality << "  R "
        << e.mean.rate << "  total " << e.mean.total << '\n';
  }
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out, losses;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(a.config, a.sets, a.seed);
  const Dataset data = load_dataset(a.data, cfg.codec, err);
  out << "training on " << data.blocks.size() << " blocks from " << data.files.size()
      << " files\n";
  CodecModel model(cfg.codec, cfg.train.seed);
  const TrainResult r = train(model, data.blocks, cfg.train, cfg.loss);
  print_epochs(r, out);
  model.save(ensure_parent(a.out));
  const std::string losses = a.losses.empty() ? sibling(a.out, "losses.csv") : a.losses;
  write_text(losses, loss_csv(r.epochs));
  out << "wrote " << a.out << " (model " << std::hex << std::setw(16) << std::setfill('0')
      << model.model_id() << std::dec << std::setfill(' ') << ", " << r.steps << " steps) and "
      << losses << '\n';
  return kExitOk;
}

// ---- compress / decompress --------------------------------------------------

struct CodecArgs {
  std::string in, model, out;
};

int cmd_compress(const CodecArgs& a, std::ostream& out) {
  const CodecModel model = CodecModel::load(a.model);
  const PointCloud cloud = read_cloud(a.in);
  const CompressedCloud c = compress_cloud(model, cloud);
  io::write_file_atomic(ensure_parent(a.out), c.bytes);
  for (std::size_t i = 0; i < c.blocks.size(); ++i) {
    const BlockStats& s = c.blocks[i];
    out << "block " << i << ": " << s.input_points << " points, " << s.bottleneck_points
        << " bottleneck, " << s.bytes << " bytes, " << fixed(s.bpp()) << " bpp"
        << (s.position_coding == PositionCoding::kLearned ? "" : ", raw positions");
    if (s.clamped_symbols > 0) out << ", " << s.clamped_symbols << " clamped symbols";
    out << '\n';
  }
  out << "total: " << c.input_points << " points, " << c.bytes.size() << " bytes, "
      << fixed(c.bpp()) << " bpp\n";
  return kExitOk;
}

int cmd_decompress(const CodecArgs& a, std::ostream& out) {
  const CodecModel model = CodecModel::load(a.model);
  const auto bytes = io::read_file(a.in);
  const DecompressedCloud d = decompress_cloud(model, bytes);
  write_cloud(ensure_parent(a.out), d.cloud);
  out << "decoded " << d.blocks.size() << " blocks, " << d.cloud.size() << " points -> " << a.out
      << '\n';
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string gt, rec, bits, metrics, config, csv;
  std::vector<std::string> sets;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve_config(a.config, a.sets, std::nullopt);
  MetricSelection which;
  try {
    which = parse_metric_list(a.metrics.empty() ? (a.bits.empty() ? "cd,psnr,dm" : "cd,psnr,dm,bpp")
                                                : a.metrics);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  if (which.bpp && a.bits.empty()) throw UsageError("bpp needs --bits");
  const PointCloud gt = read_cloud(a.gt);
  const PointCloud rec = read_cloud(a.rec);
  if (which.f1 && (!gt.has_normals() || !rec.has_normals())) {
    throw UsageError("f1 needs normals in both --gt and --rec; " +
                     std::string(gt.has_normals() ? a.rec : a.gt) + " has none");
  }
  std::vector<std::uint8_t> bits;
  if (!a.bits.empty()) bits = io::read_file(a.bits);
  const EvalReport r = evaluate_clouds(gt, rec, bits, which, cfg.codec.block_size, cfg.metric);
  out << eval_text(r, which);
  const std::string csv = eval_csv(r, which);
  if (a.csv.empty()) {
    out << csv;
  } else {
    write_text(a.csv, csv);
    out << "wrote " << a.csv << '\n';
  }
  return kExitOk;
}

// ---- rdcurve ----------------------------------------------------------------

struct RdArgs {
  std::string data, lambdas, factors, config, out;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

struct RdPoint {
  double lambda;
  std::vector<double> factors;
  double bpp = 0, cd = 0, psnr = 0, dm = 0;
};

int cmd_rdcurve(const RdArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig base = resolve_config(a.config, a.sets, a.seed);
  std::vector<double> lambdas;
  std::vector<std::vector<double>> factor_sets;
  try {
    for (const std::string& s : split(a.lambdas, ',')) {
      std::size_t used = 0;
      const double l = std::stod(s, &used);
      if (used != s.size() || !(l >= 0.0) || !std::isfinite(l)) throw ArgumentError("bad lambda '" + s + "'");
      lambdas.push_back(l);
    }
    for (const std::string& s : split(a.factors, ';')) factor_sets.push_back(parse_factor_list(s));
  } catch (const std::invalid_argument&) {
    throw UsageError("--lambdas expects comma-separated numbers, got '" + a.lambdas + "'");
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  if (lambdas.empty()) throw UsageError("--lambdas: need at least one value");
  if (factor_sets.empty()) factor_sets.push_back(base.codec.factors);
  if (lambdas.size() * factor_sets.size() < 2) {
    throw UsageError("rdcurve needs at least two (lambda, factors) settings");
  }
  require_dir(a.out);

  std::vector<RdPoint> rows;
  const Dataset data = load_dataset(a.data, base.codec, err);
  const MetricSelection which = parse_metric_list("cd,psnr,dm,bpp");
  for (const auto& factors : factor_sets) {
    for (double lambda : lambdas) {
      RunConfig cfg = base;
      cfg.codec.factors = factors;
      cfg.loss.lambda = lambda;
      try {
        cfg.validate();
      } catch (const ArgumentError& e) {
        throw UsageError(e.what());
      }
      const std::size_t idx = rows.size();
      out << "setting " << idx << ": lambda " << lambda << ", factors "
          << format_factor_list(factors) << '\n';
      CodecModel model(cfg.codec, cfg.train.seed);
      const TrainResult tr = train(model, data.blocks, cfg.train, cfg.loss);
      model.save((fs::path(a.out) / ("model_" + std::to_string(idx) + ".ckpt")).string());
      write_text((fs::path(a.out) / ("losses_" + std::to_string(idx) + ".csv")).string(),
                 loss_csv(tr.epochs));

      RdPoint row{lambda, factors};
      double bits = 0, points = 0, wcd = 0, wpsnr = 0, wdm = 0;
      for (const PointCloud& cloud : data.clouds) {
        const CompressedCloud c = compress_cloud(model, cloud);
        const DecompressedCloud d = decompress_cloud(model, c.bytes);
        const EvalReport r =
            evaluate_clouds(cloud, d.cloud, c.bytes, which, cfg.codec.block_size, cfg.metric);
        const double n = static_cast<double>(r.aggregate.n_points);
        bits += 8.0 * static_cast<double>(c.bytes.size());
        points += n;
        wcd += n * r.aggregate.cd;
        wpsnr += n * r.aggregate.psnr;
        wdm += n * r.aggregate.dm;
      }
      row.bpp = bits / points;
      row.cd = wcd / points;
      row.psnr = wpsnr / points;
      row.dm = wdm / points;
      out << "  bpp " << row.bpp << "  cd " << row.cd << "  psnr " << row.psnr << "  dm " << row.dm
          << '\n';
      rows.push_back(row);
    }
  }

  std::ostringstream csv;
  csv << "lambda,factors,bpp,cd,psnr,dm\n" << std::setprecision(10);
  for (const RdPoint& r : rows) {
    csv << r.lambda << ",\"" << format_factor_list(r.factors) << "\"," << r.bpp << ',' << r.cd
        << ',' << r.psnr << ',' << r.dm << '\n';
  }
  write_text((fs::path(a.out) / "rd.csv").string(), csv.str());

  // One series per factor setting, ordered by rate.
  std::vector<PlotPanel> panels{{"Bpp vs CD", "bpp", "CD", {}},
                                {"Bpp vs PSNR", "bpp", "PSNR (dB)", {}},
                                {"Bpp vs DM", "bpp", "DM", {}}};
  for (const auto& factors : factor_sets) {
    std::vector<RdPoint> mine;
    for (const RdPoint& r : rows)
      if (r.factors == factors) mine.push_back(r);
    std::sort(mine.begin(), mine.end(), [](const RdPoint& x, const RdPoint& y) { return x.bpp < y.bpp; });
    const std::string label = "f " + format_factor_list(factors);
    PlotSeries cd{label, {}}, psnr{label, {}}, dm{label, {}};
    for (const RdPoint& r : mine) {
      cd.points.emplace_back(r.bpp, r.cd);
      psnr.points.emplace_back(r.bpp, r.psnr);
      dm.points.emplace_back(r.bpp, r.dm);
    }
    panels[0].series.push_back(cd);
    panels[1].series.push_back(psnr);
    panels[2].series.push_back(dm);
  }
  write_text((fs::path(a.out) / "rd.svg").string(), render_svg(panels));
  out << "wrote " << rows.size() << " settings to " << (fs::path(a.out) / "rd.csv").string()
      << " and rd.svg\n";
  return kExitOk;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string kind, out;
  std::size_t n = 1000, files = 1;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  io::SynthKind kind;
  try {
    kind = io::parse_synth_kind(a.kind);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  if (a.n == 0) throw UsageError("-n must be positive");
  if (a.files == 0) throw UsageError("--files must be positive");
  const std::string ext = fs::path(a.out).extension().string();
  const bool single = ext == ".ply" || ext == ".dpcl";
  if (single && a.files != 1) throw UsageError("--out names one file but --files > 1");
  if (single) {
    write_cloud(ensure_parent(a.out), io::synth_cloud(kind, a.n, a.seed));
    out << "wrote " << a.out << '\n';
    return kExitOk;
  }
  require_dir(a.out);
  for (std::size_t i = 0; i < a.files; ++i) {
    const std::string path =
        (fs::path(a.out) / (io::synth_kind_name(kind) + "_" + std::to_string(i) + ".ply")).string();
    write_cloud(path, io::synth_cloud(kind, a.n, a.seed + i));
    out << "wrote " << path << '\n';
  }
  return kExitOk;
}

}  // namespace

Dataset load_dataset(const std::string& dir, const CodecConfig& codec, std::ostream& err) {
  if (!fs::is_directory(dir)) throw UsageError("--data: '" + dir + "' is not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".ply" || ext == ".dpcl")) {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  Dataset d;
  for (const std::string& path : paths) {
    PointCloud cloud;
    try {
      cloud = read_cloud(path);
    } catch (const Error& e) {
      err << "skipping " << path << ": " << e.what() << '\n';
      continue;
    }
    if (cloud.empty()) {
      err << "skipping " << path << ": no points\n";
      continue;
    }
    if (codec.normals && !cloud.has_normals()) {
      err << "skipping " << path << ": codec.normals is set but the file has no normals\n";
      continue;
    }
    for (Block& b : partition_blocks(cloud, codec.block_size)) d.blocks.push_back(std::move(b.cloud));
    d.files.push_back(path);
    d.clouds.push_back(std::move(cloud));
  }
  if (d.blocks.empty()) throw Error("no usable point clouds in '" + dir + "'");
  return d;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned density-preserving point cloud codec", "dpcc"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a codec on a directory of point clouds");
  train_cmd->add_option("--data", ta.data, "directory of .ply/.dpcl files")->required();
  train_cmd->add_option("--config", ta.config, "key=value config file");
  train_cmd->add_option("--set", ta.sets, "config override, key=value (repeatable)");
  train_cmd->add_option("--out", ta.out, "checkpoint path")->required();
  train_cmd->add_option("--losses", ta.losses, "loss CSV path (default: losses.csv next to --out)");
  train_cmd->add_option("--seed", ta.seed, "overrides train.seed");

  CodecArgs ca, da;
  auto* compress_cmd = app.add_subcommand("compress", "compress a point cloud into a .dpcf file");
  compress_cmd->add_option("--in", ca.in, "input .ply/.dpcl")->required();
  compress_cmd->add_option("--model", ca.model, "checkpoint")->required();
  compress_cmd->add_option("--out", ca.out, "output .dpcf")->required();
  auto* decompress_cmd = app.add_subcommand("decompress", "decode a .dpcf file");
  decompress_cmd->add_option("--in", da.in, "input .dpcf")->required();
  decompress_cmd->add_option("--model", da.model, "checkpoint")->required();
  decompress_cmd->add_option("--out", da.out, "output .ply/.dpcl")->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "per-block and aggregate distortion and rate");
  eval_cmd->add_option("--gt", ea.gt, "ground truth cloud")->required();
  eval_cmd->add_option("--rec", ea.rec, "reconstructed cloud")->required();
  eval_cmd->add_option("--bits", ea.bits, "the .dpcf file, for bpp");
  eval_cmd->add_option("--metrics", ea.metrics, "subset of cd,psnr,dm,f1,bpp");
  eval_cmd->add_option("--config", ea.config, "config file (metric.* and codec.block_size)");
  eval_cmd->add_option("--set", ea.sets, "config override, key=value (repeatable)");
  eval_cmd->add_option("--csv", ea.csv, "write the CSV here instead of stdout");

  RdArgs ra;
  auto* rd_cmd = app.add_subcommand("rdcurve", "train per (lambda, factors) setting and plot R-D");
  rd_cmd->add_option("--data", ra.data, "directory of .ply/.dpcl files")->required();
  rd_cmd->add_option("--lambdas", ra.lambdas, "comma-separated rate weights")->required();
  rd_cmd->add_option("--factors", ra.factors, "factor lists separated by ';', e.g. 1/2,1/3,1/4;1/2,1/2,1/2");
  rd_cmd->add_option("--config", ra.config, "key=value config file");
  rd_cmd->add_option("--set", ra.sets, "config override, key=value (repeatable)");
  rd_cmd->add_option("--seed", ra.seed, "overrides train.seed");
  rd_cmd->add_option("--out", ra.out, "output directory")->required();

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "write seeded synthetic clouds");
  synth_cmd->add_option("--kind", sa.kind, "plane, sphere, two-density-cluster or line")->required();
  synth_cmd->add_option("-n,--points", sa.n, "points per cloud");
  synth_cmd->add_option("--seed", sa.seed, "seed of the first file");
  synth_cmd->add_option("--files", sa.files, "number of files; seeds count up from --seed");
  synth_cmd->add_option("--out", sa.out, "a .ply/.dpcl file, or a directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(ta, out, err);
    if (compress_cmd->parsed()) return cmd_compress(ca, out);
    if (decompress_cmd->parsed()) return cmd_decompress(da, out);
    if (eval_cmd->parsed()) return cmd_eval(ea, out);
    if (rd_cmd->parsed()) return cmd_rdcurve(ra, out, err);
    if (synth_cmd->parsed()) return cmd_synth(sa, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ModelMismatchError& e) {
    err << "model mismatch: " << e.what() << '\n';
    return kExitModelMismatch;
  } catch (const DecodeError& e) {
    err << "decode failed: " << e.what() << '\n';
    return kExitDecode;
  } catch (const NanLossError& e) {
    err << "training aborted: " << e.what() << '\n';
    return kExitNan;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dpcc
