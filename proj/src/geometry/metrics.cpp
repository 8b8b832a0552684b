#include "dpcc/geometry/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <tuple>

#include "dpcc/error.hpp"
#include "dpcc/geometry/spatial_grid.hpp"

namespace dpcc {
namespace {

void require_nonempty(const PointCloud& c, const char* what) {
  if (c.empty()) throw ArgumentError(std::string(what) + ": empty point cloud");
}

double one_sided_cd(const PointCloud& from, const PointCloud& to) {
  const auto nn = nearest_indices(to.positions, from.positions);
  double acc = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    acc += squared_distance(from.positions[i], to.positions[nn[i]]);
  }
  return acc / static_cast<double>(from.size());
}

struct Neighborhood {
  double count;  // |K(a)|, at least 1
  double mean;   // mean distance to a, r when K(a) is empty
};

std::vector<Neighborhood> neighborhoods(const std::vector<Vec3>& pts, double r) {
  const SpatialGrid grid(pts, r);
  std::vector<Neighborhood> out;
  out.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double count = 0.0, dist = 0.0;
    for (std::size_t j : grid.radius(pts[i], r)) {
      if (j == i) continue;
      count += 1.0;
      dist += std::sqrt(squared_distance(pts[i], pts[j]));
    }
    if (count == 0.0) {
      out.push_back({1.0, r});
    } else {
      out.push_back({count, dist / count});
    }
  }
  return out;
}

double one_sided_dm(const std::vector<Vec3>& a, const std::vector<Neighborhood>& ka,
                    const std::vector<Vec3>& b, const std::vector<Neighborhood>& kb,
                    double mu, double r) {
  const auto nn = nearest_indices(b, a);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Neighborhood& x = ka[i];
    const Neighborhood& y = kb[nn[i]];
    // Exact duplicates give a zero mean distance; fall back to the radius
    // scale there, as for an empty neighborhood.
    const double scale = x.mean > 0.0 ? x.mean : r;
    acc += std::abs(x.count - y.count) / x.count + mu * std::abs(x.mean - y.mean) / scale;
  }
  return acc / static_cast<double>(a.size());
}

double p2plane_mse(const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                   const std::vector<Vec3>& to_normals) {
  const auto nn = nearest_indices(to, from);
  double acc = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double e = dot(from[i] - to[nn[i]], to_normals[nn[i]]);
    acc += e * e;
  }
  return acc / static_cast<double>(from.size());
}

}  // namespace

void MetricConfig::validate() const {
  if (!(dm_radius > 0.0)) throw ArgumentError("metric.dm_radius must be > 0");
  if (!(dm_weight >= 0.0)) throw ArgumentError("metric.dm_weight must be >= 0");
  if (!(psnr_peak > 0.0)) throw ArgumentError("metric.psnr_peak must be > 0");
  if (!(f1_tau_p >= 0.0) || !(f1_tau_n >= 0.0)) {
    throw ArgumentError("F1 thresholds must be >= 0");
  }
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, "chamfer_distance");
  require_nonempty(b, "chamfer_distance");
  return one_sided_cd(a, b) + one_sided_cd(b, a);
}

double p2plane_psnr(const PointCloud& gt, const PointCloud& rec, double peak) {
  require_nonempty(gt, "p2plane_psnr");
  require_nonempty(rec, "p2plane_psnr");
  if (!gt.has_normals()) throw ArgumentError("p2plane_psnr: ground truth needs normals");
  if (!(peak > 0.0)) throw ArgumentError("p2plane_psnr: peak must be > 0");

  // Reconstructed points borrow the normal of their nearest gt point.
  const auto borrow = nearest_indices(gt.positions, rec.positions);
  std::vector<Vec3> rec_normals;
  rec_normals.reserve(rec.size());
  for (std::size_t j : borrow) rec_normals.push_back(gt.normals[j]);

  const double mse = std::max(p2plane_mse(gt.positions, rec.positions, rec_normals),
                              p2plane_mse(rec.positions, gt.positions, gt.normals));
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(3.0 * peak * peak / mse));
}

double density_metric(const PointCloud& gt, const PointCloud& rec,
                      const MetricConfig& cfg) {
  require_nonempty(gt, "density_metric");
  require_nonempty(rec, "density_metric");
  cfg.validate();
  const auto kg = neighborhoods(gt.positions, cfg.dm_radius);
  const auto kr = neighborhoods(rec.positions, cfg.dm_radius);
  return one_sided_dm(gt.positions, kg, rec.positions, kr, cfg.dm_weight, cfg.dm_radius) +
         one_sided_dm(rec.positions, kr, gt.positions, kg, cfg.dm_weight, cfg.dm_radius);
}

double f1_score(const PointCloud& gt, const PointCloud& rec, double tau_p,
                double tau_n) {
  require_nonempty(gt, "f1_score");
  require_nonempty(rec, "f1_score");
  if (!gt.has_normals() || !rec.has_normals()) {
    throw ArgumentError("f1_score: both clouds need normals");
  }
  // Every (rec, gt) pair inside both thresholds, matched greedily by distance.
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  const SpatialGrid grid(gt.positions, tau_p > 0.0 ? tau_p : 1.0);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    for (std::size_t j : grid.radius(rec.positions[i], tau_p)) {
      const Vec3 dn = gt.normals[j] - rec.normals[i];
      if (dot(dn, dn) > tau_n * tau_n) continue;
      pairs.emplace_back(squared_distance(rec.positions[i], gt.positions[j]), i, j);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> rec_used(rec.size(), false), gt_used(gt.size(), false);
  std::size_t tp = 0;
  for (const auto& [d, i, j] : pairs) {
    if (rec_used[i] || gt_used[j]) continue;
    rec_used[i] = gt_used[j] = true;
    ++tp;
  }
  // FP = |rec| - TP and FN = |gt| - TP.
  return 2.0 * static_cast<double>(tp) / static_cast<double>(rec.size() + gt.size());
}

double bits_per_point(std::size_t bytes, std::size_t point_count) {
  if (point_count == 0) throw ArgumentError("bits_per_point: zero points");
  return 8.0 * static_cast<double>(bytes) / static_cast<double>(point_count);
}

std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, std::size_t k) {
  std::vector<Vec3> out;
  if (points.empty()) return out;
  k = std::min(k, points.size());
  const auto nbrs = knn(points, points, k);
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::size_t t = 0; t < k; ++t) {
      const Vec3& p = points[nbrs[i * k + t]];
      mean += Eigen::Vector3d(p[0], p[1], p[2]);
    }
    mean /= static_cast<double>(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t t = 0; t < k; ++t) {
      const Vec3& p = points[nbrs[i * k + t]];
      const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
      cov += d * d.transpose();
    }
    Vec3 n{0.0, 0.0, 1.0};
    if (k >= 3) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
      const Eigen::Vector3d v = es.eigenvectors().col(0);
      n = {v.x(), v.y(), v.z()};
    }
    for (int a = 2; a >= 0; --a) {
      if (n[a] > 0.0) break;
      if (n[a] < 0.0) {
        n = -1.0 * n;
        break;
      }
    }
    const double len = norm(n);
    out.push_back(len > 0.0 ? (1.0 / len) * n : Vec3{0.0, 0.0, 1.0});
  }
  return out;
}

}  // namespace dpcc
