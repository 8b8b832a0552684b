#include "dpcc/cli/evaluate.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "dpcc/codec/bitstream.hpp"
#include "dpcc/error.hpp"

namespace dpcc {
namespace {

using Cell = std::array<std::int64_t, 3>;

PointCloud to_block_frame(const PointCloud& world, const Block& block) {
  PointCloud out;
  out.frame = Frame::kBlock;
  out.normals = world.normals;
  out.positions.reserve(world.size());
  for (const Vec3& p : world.positions) out.positions.push_back(block.to_block(p));
  return out;
}

// World-frame points of `cloud` grouped by grid cell.
std::map<Cell, PointCloud> by_cell(const PointCloud& cloud, double block_size) {
  std::map<Cell, PointCloud> out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const Cell c{static_cast<std::int64_t>(std::floor(p[0] / block_size)),
                 static_cast<std::int64_t>(std::floor(p[1] / block_size)),
                 static_cast<std::int64_t>(std::floor(p[2] / block_size))};
    PointCloud& dst = out[c];
    dst.positions.push_back(p);
    if (cloud.has_normals()) dst.normals.push_back(cloud.normals[i]);
  }
  return out;
}

// Payload bytes per cell, keyed by the cell whose center the header names.
std::map<Cell, std::size_t> bytes_by_cell(std::span<const std::uint8_t> bits, double block_size) {
  std::map<Cell, std::size_t> out;
  for (const auto& payload : parse_container(bits)) {
    const BlockHeader h = parse_block(payload).header;
    Cell c;
    for (int a = 0; a < 3; ++a) {
      c[a] = static_cast<std::int64_t>(std::floor(static_cast<double>(h.origin[a]) / block_size));
    }
    out[c] += payload.size();
  }
  return out;
}

std::string field(double v, bool selected) {
  if (!selected) return "";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

MetricSelection parse_metric_list(const std::string& text) {
  MetricSelection m;
  std::stringstream ss(text);
  std::string name;
  bool any = false;
  while (std::getline(ss, name, ',')) {
    bool* slot = name == "cd"     ? &m.cd
                 : name == "psnr" ? &m.psnr
                 : name == "dm"   ? &m.dm
                 : name == "f1"   ? &m.f1
                 : name == "bpp"  ? &m.bpp
                                  : nullptr;
    if (!slot) throw ArgumentError("unknown metric '" + name + "' (cd, psnr, dm, f1, bpp)");
    if (*slot) throw ArgumentError("metric '" + name + "' listed twice");
    *slot = any = true;
  }
  if (!any) throw ArgumentError("empty metric list");
  return m;
}

EvalReport evaluate_clouds(const PointCloud& gt_in, const PointCloud& rec,
                           std::span<const std::uint8_t> bits, const MetricSelection& which,
                           double block_size, const MetricConfig& cfg) {
  cfg.validate();
  if (!(block_size > 0.0)) throw ArgumentError("evaluate: block size must be positive");
  if (gt_in.empty()) throw ArgumentError("evaluate: ground truth cloud is empty");
  if (which.bpp && bits.empty()) throw ArgumentError("evaluate: bpp needs the compressed file");
  if (which.f1 && (!gt_in.has_normals() || !rec.has_normals())) {
    throw ArgumentError("f1 needs normals on both clouds; " +
                        std::string(gt_in.has_normals() ? "reconstruction" : "ground truth") +
                        " has none");
  }

  EvalReport report;
  PointCloud gt = gt_in;
  if (which.psnr && !gt.has_normals()) {
    gt.normals = estimate_normals(gt.positions);
    report.notes.push_back("ground truth has no normals; estimated them for psnr");
  }

  const std::vector<Block> blocks = partition_blocks(gt, block_size);
  auto rec_cells = by_cell(rec, block_size);
  std::map<Cell, std::size_t> payload;
  if (which.bpp) payload = bytes_by_cell(bits, block_size);

  struct Mean {
    double sum = 0.0, weight = 0.0;
    void add(double v, double w) {
      if (!std::isnan(v)) sum += w * v, weight += w;
    }
    double value() const { return weight > 0.0 ? sum / weight : kNotComputed; }
  } cd, psnr, dm, f1;

  std::size_t total_points = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Block& block = blocks[b];
    BlockMetrics m;
    m.block_id = b;
    m.cell = block.cell;
    m.n_points = block.cloud.size();
    total_points += m.n_points;
    if (which.bpp) {
      const auto it = payload.find(block.cell);
      m.bpp = bits_per_point(it == payload.end() ? 0 : it->second, m.n_points);
    }
    const auto it = rec_cells.find(block.cell);
    if (it != rec_cells.end()) {
      const PointCloud r = to_block_frame(it->second, block);
      m.rec_points = r.size();
      const PointCloud& g = block.cloud;
      if (which.cd) m.cd = chamfer_distance(g, r);
      if (which.psnr) m.psnr = p2plane_psnr(g, r, cfg.psnr_peak);
      if (which.dm) m.dm = density_metric(g, r, cfg);
      if (which.f1) m.f1 = f1_score(g, r, cfg.f1_tau_p, cfg.f1_tau_n);
      rec_cells.erase(it);
    }
    const double w = static_cast<double>(m.n_points);
    cd.add(m.cd, w);
    psnr.add(m.psnr, w);
    dm.add(m.dm, w);
    f1.add(m.f1, w);
    report.blocks.push_back(m);
  }
  for (const auto& [cell, cloud] : rec_cells) report.stray_points += cloud.size();
  if (report.stray_points > 0) {
    report.notes.push_back(std::to_string(report.stray_points) +
                           " reconstructed points lie in cells without ground truth");
  }
  std::size_t empty = 0;
  for (const BlockMetrics& m : report.blocks) empty += m.rec_points == 0;
  if (empty > 0 && (which.cd || which.psnr || which.dm || which.f1)) {
    report.notes.push_back(std::to_string(empty) +
                           " ground-truth blocks have no reconstructed points; their metrics are nan");
  }

  BlockMetrics& a = report.aggregate;
  a.n_points = total_points;
  a.rec_points = rec.size();
  if (which.bpp) a.bpp = bits_per_point(bits.size(), total_points);
  a.cd = which.cd ? cd.value() : kNotComputed;
  a.psnr = which.psnr ? psnr.value() : kNotComputed;
  a.dm = which.dm ? dm.value() : kNotComputed;
  a.f1 = which.f1 ? f1.value() : kNotComputed;
  return report;
}

std::string eval_csv(const EvalReport& report, const MetricSelection& w) {
  std::ostringstream os;
  os << "block_id,n_points,bpp,cd,psnr,dm,f1\n";
  auto row = [&](const std::string& id, const BlockMetrics& m) {
    os << id << ',' << m.n_points << ',' << field(m.bpp, w.bpp) << ',' << field(m.cd, w.cd) << ','
       << field(m.psnr, w.psnr) << ',' << field(m.dm, w.dm) << ',' << field(m.f1, w.f1) << '\n';
  };
  for (const BlockMetrics& m : report.blocks) row(std::to_string(m.block_id), m);
  row("all", report.aggregate);
  return os.str();
}

std::string eval_text(const EvalReport& report, const MetricSelection& w) {
  std::ostringstream os;
  os << std::setprecision(6);
  auto line = [&](const BlockMetrics& m) {
    os << m.n_points << " points";
    if (w.bpp) os << "  bpp " << m.bpp;
    if (w.cd) os << "  cd " << m.cd;
    if (w.psnr) os << "  psnr " << m.psnr << " dB";
    if (w.dm) os << "  dm " << m.dm;
    if (w.f1) os << "  f1 " << m.f1;
    os << '\n';
  };
  for (const BlockMetrics& m : report.blocks) {
    os << "block " << m.block_id << " (" << m.cell[0] << ',' << m.cell[1] << ',' << m.cell[2]
       << "): ";
    line(m);
  }
  os << "all: ";
  line(report.aggregate);
  for (const std::string& n : report.notes) os << "note: " << n << '\n';
  return os.str();
}

}  // namespace dpcc
