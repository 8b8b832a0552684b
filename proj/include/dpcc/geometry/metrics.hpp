#pragma once

#include <cstddef>
#include <vector>

#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc {

struct MetricConfig {
  double dm_radius = 0.15;  // block units
  double dm_weight = 1e-4;
  double psnr_peak = 1.0;
  double f1_tau_p = 0.05;
  double f1_tau_n = 0.2;

  void validate() const;
};

constexpr double kPsnrCapDb = 100.0;

double chamfer_distance(const PointCloud& a, const PointCloud& b);

// Symmetric point-to-plane PSNR in dB, capped at kPsnrCapDb. `gt` must carry
// normals; see estimate_normals.
double p2plane_psnr(const PointCloud& gt, const PointCloud& rec, double peak);

double density_metric(const PointCloud& gt, const PointCloud& rec,
                      const MetricConfig& cfg);

// Each gt point backs at most one true positive. Both clouds need normals.
double f1_score(const PointCloud& gt, const PointCloud& rec, double tau_p,
                double tau_n);

double bits_per_point(std::size_t bytes, std::size_t point_count);

// PCA normals over the k nearest neighbors (self included). Sign is fixed so
// the first nonzero of (z, y, x) is positive.
std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points,
                                   std::size_t k = 16);

}  // namespace dpcc
