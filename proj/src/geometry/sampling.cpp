#include "dpcc/geometry/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dpcc/error.hpp"
#include "dpcc/geometry/spatial_grid.hpp"

namespace dpcc {

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points,
                                               std::size_t count,
                                               std::optional<std::size_t> seed) {
  const std::size_t n = points.size();
  if (count == 0 || count > n) {
    throw ArgumentError("farthest_point_sample: need 1 <= m <= N, got m=" +
                        std::to_string(count) + " N=" + std::to_string(n));
  }
  std::size_t first = 0;
  if (seed) {
    if (*seed >= n) throw ArgumentError("farthest_point_sample: seed out of range");
    first = *seed;
  } else {
    Vec3 c{0.0, 0.0, 0.0};
    for (const Vec3& p : points) c = c + p;
    c = (1.0 / static_cast<double>(n)) * c;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = squared_distance(points[i], c);
      if (d < best) {
        best = d;
        first = i;
      }
    }
  }

  std::vector<std::size_t> chosen{first};
  chosen.reserve(count);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  taken[first] = true;
  std::size_t last = first;
  while (chosen.size() < count) {
    std::size_t arg = n;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d[i] = std::min(min_d[i], squared_distance(points[i], points[last]));
      if (min_d[i] > best) {
        best = min_d[i];
        arg = i;
      }
    }
    taken[arg] = true;
    chosen.push_back(arg);
    last = arg;
  }
  return chosen;
}

std::size_t downsampled_count(std::size_t n, double factor) {
  if (n == 0) return 0;
  if (!(factor > 0.0) || factor > 1.0) {
    throw ArgumentError("downsampling factor must lie in (0, 1]");
  }
  const auto m = static_cast<std::size_t>(std::floor(factor * static_cast<double>(n) + 0.5));
  return std::clamp<std::size_t>(m, 1, n);
}

DownsampleMap collapse_assign(std::span<const Vec3> parent,
                              std::span<const std::size_t> sampled) {
  if (sampled.empty()) throw ArgumentError("collapse_assign: no sampled points");
  const std::size_t n = parent.size();
  std::vector<std::size_t> slot_of(n, n);
  for (std::size_t s = 0; s < sampled.size(); ++s) {
    if (sampled[s] >= n) throw ArgumentError("collapse_assign: index out of range");
    if (slot_of[sampled[s]] != n) throw ArgumentError("collapse_assign: duplicate sample");
    slot_of[sampled[s]] = s;
  }

  // The grid breaks ties by position in its point list, so list the samples in
  // ascending parent-index order.
  std::vector<std::size_t> by_parent(sampled.begin(), sampled.end());
  std::sort(by_parent.begin(), by_parent.end());
  std::vector<Vec3> sample_pts;
  sample_pts.reserve(by_parent.size());
  for (std::size_t i : by_parent) sample_pts.push_back(parent[i]);
  const SpatialGrid grid = SpatialGrid::adaptive(sample_pts, 2.0);

  DownsampleMap map;
  map.sampled.assign(sampled.begin(), sampled.end());
  map.collapsed.resize(sampled.size());
  map.owner.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t slot =
        slot_of[i] != n ? slot_of[i] : slot_of[by_parent[grid.nearest(parent[i])]];
    map.owner[i] = slot;
    map.collapsed[slot].push_back(i);
  }
  map.factors.reserve(sampled.size());
  for (const auto& c : map.collapsed) map.factors.push_back(static_cast<double>(c.size()));
  return map;
}

}  // namespace dpcc
