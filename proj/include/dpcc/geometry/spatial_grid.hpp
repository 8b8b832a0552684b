#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc {

// Uniform hash grid over a fixed point set. All queries are exact and break
// distance ties toward the lower point index.
class SpatialGrid {
 public:
  SpatialGrid(std::span<const Vec3> points, double cell_size);
  // Cell size chosen so that an average cell holds about `per_cell` points.
  static SpatialGrid adaptive(std::span<const Vec3> points, double per_cell);

  // Indices of the k nearest points, ascending by (distance, index).
  std::vector<std::size_t> knn(const Vec3& query, std::size_t k) const;
  std::size_t nearest(const Vec3& query) const;
  // Indices with |p - query| <= radius, ascending by index.
  std::vector<std::size_t> radius(const Vec3& query, double radius) const;

  double cell_size() const { return cell_; }

 private:
  using Key = std::array<std::int64_t, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(k[0]) * 0x9E3779B97F4A7C15ull;
      h ^= static_cast<std::uint64_t>(k[1]) * 0xC2B2AE3D27D4EB4Full + (h << 6);
      h ^= static_cast<std::uint64_t>(k[2]) * 0x165667B19E3779F9ull + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };

  Key key_of(const Vec3& p) const;
  const std::vector<std::size_t>* cell(const Key& k) const;

  std::span<const Vec3> points_;
  double cell_;
  Key lo_{}, hi_{};
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> cells_;
};

// Row-major Q x k neighbor indices of `queries` within `points`.
std::vector<std::size_t> knn(std::span<const Vec3> points,
                             std::span<const Vec3> queries, std::size_t k);
// Nearest point index for every query.
std::vector<std::size_t> nearest_indices(std::span<const Vec3> points,
                                         std::span<const Vec3> queries);

}  // namespace dpcc
