#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dpcc/geometry/metrics.hpp"
#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc {

struct MetricSelection {
  bool cd = false, psnr = false, dm = false, f1 = false, bpp = false;
};

// "cd,psnr,dm,f1,bpp" in any order and any subset. Throws ArgumentError on
// an unknown or repeated name, or an empty list.
MetricSelection parse_metric_list(const std::string& text);

inline constexpr double kNotComputed = std::numeric_limits<double>::quiet_NaN();

struct BlockMetrics {
  std::size_t block_id = 0;
  std::array<std::int64_t, 3> cell{};
  std::size_t n_points = 0;    // ground truth
  std::size_t rec_points = 0;
  double bpp = kNotComputed, cd = kNotComputed, psnr = kNotComputed, dm = kNotComputed,
         f1 = kNotComputed;
};

struct EvalReport {
  std::vector<BlockMetrics> blocks;
  // Point-count-weighted means over the blocks where each metric is defined.
  // bpp is the whole container's bits over all ground-truth points.
  BlockMetrics aggregate;
  std::size_t stray_points = 0;  // reconstructed points in cells without ground truth
  std::vector<std::string> notes;
};

// Both clouds are cut on the same world grid and every metric is taken in the
// block frame of the ground-truth block. `bits` may be empty unless bpp is
// selected. Missing ground-truth normals are estimated for psnr; f1 requires
// normals on both clouds and throws ArgumentError without them.
EvalReport evaluate_clouds(const PointCloud& gt, const PointCloud& rec,
                           std::span<const std::uint8_t> bits, const MetricSelection& which,
                           double block_size, const MetricConfig& cfg);

// block_id,n_points,bpp,cd,psnr,dm,f1 with one row per block and a final
// "all" row. Unselected metrics are empty, undefined ones "nan".
std::string eval_csv(const EvalReport& report, const MetricSelection& which);
std::string eval_text(const EvalReport& report, const MetricSelection& which);

}  // namespace dpcc
