#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc {

// Iterative farthest point sampling. Without an explicit seed the first pick
// is the point nearest the centroid. Ties go to the lower index.
std::vector<std::size_t> farthest_point_sample(
    std::span<const Vec3> points, std::size_t count,
    std::optional<std::size_t> seed = std::nullopt);

// Number of points kept when downsampling n points by factor f.
std::size_t downsampled_count(std::size_t n, double factor);

struct DownsampleMap {
  std::vector<std::size_t> sampled;  // indices into the parent cloud
  // collapsed[s] lists the parent indices owned by sampled[s], ascending.
  // Includes sampled[s] itself.
  std::vector<std::vector<std::size_t>> collapsed;
  std::vector<std::size_t> owner;  // parent index -> slot in `sampled`
  std::vector<double> factors;     // |collapsed[s]|

  std::size_t size() const { return sampled.size(); }
};

// Every parent point joins its nearest sampled point; a sampled point always
// owns itself. Equidistant points go to the sample with the lower parent index.
DownsampleMap collapse_assign(std::span<const Vec3> parent,
                              std::span<const std::size_t> sampled);

}  // namespace dpcc
