#include "dpcc/geometry/spatial_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpcc/error.hpp"

namespace dpcc {
namespace {

struct Candidate {
  double d2;
  std::size_t index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

}  // namespace

SpatialGrid::SpatialGrid(std::span<const Vec3> points, double cell_size)
    : points_(points), cell_(cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw ArgumentError("spatial grid cell size must be positive");
  }
  lo_.fill(std::numeric_limits<std::int64_t>::max());
  hi_.fill(std::numeric_limits<std::int64_t>::min());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Key k = key_of(points[i]);
    for (int a = 0; a < 3; ++a) {
      lo_[a] = std::min(lo_[a], k[a]);
      hi_[a] = std::max(hi_[a], k[a]);
    }
    cells_[k].push_back(i);
  }
}

SpatialGrid SpatialGrid::adaptive(std::span<const Vec3> points, double per_cell) {
  Vec3 lo{INFINITY, INFINITY, INFINITY}, hi{-INFINITY, -INFINITY, -INFINITY};
  for (const Vec3& p : points)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  double extent = 0.0;
  double volume = 1.0;
  int live_axes = 0;
  for (int a = 0; a < 3 && !points.empty(); ++a) {
    const double e = hi[a] - lo[a];
    extent = std::max(extent, e);
    if (e > 0.0) {
      volume *= e;
      ++live_axes;
    }
  }
  double cell = 1.0;
  if (live_axes > 0 && points.size() > 0) {
    cell = std::pow(volume * per_cell / static_cast<double>(points.size()),
                    1.0 / live_axes);
    cell = std::clamp(cell, extent * 1e-6, extent);
  }
  if (!(cell > 0.0) || !std::isfinite(cell)) cell = 1.0;
  return SpatialGrid(points, cell);
}

SpatialGrid::Key SpatialGrid::key_of(const Vec3& p) const {
  Key k{};
  for (int a = 0; a < 3; ++a) {
    k[a] = static_cast<std::int64_t>(std::floor(p[a] / cell_));
  }
  return k;
}

const std::vector<std::size_t>* SpatialGrid::cell(const Key& k) const {
  auto it = cells_.find(k);
  return it == cells_.end() ? nullptr : &it->second;
}

std::vector<std::size_t> SpatialGrid::knn(const Vec3& query, std::size_t k) const {
  if (k > points_.size()) {
    throw ArgumentError("knn: k=" + std::to_string(k) + " exceeds " +
                        std::to_string(points_.size()) + " points");
  }
  std::vector<Candidate> best;
  if (k == 0) return {};
  best.reserve(k + 1);
  const Key c = key_of(query);
  // Rings needed to cover every occupied cell from the query cell, and the
  // first ring that touches the occupied box at all.
  std::int64_t max_ring = 0, min_ring = 0;
  for (int a = 0; a < 3; ++a) {
    max_ring = std::max({max_ring, c[a] - lo_[a], hi_[a] - c[a]});
    min_ring = std::max({min_ring, lo_[a] - c[a], c[a] - hi_[a]});
  }
  auto consider = [&](const std::vector<std::size_t>& members) {
    for (std::size_t idx : members) {
      const Candidate cand{squared_distance(query, points_[idx]), idx};
      if (best.size() < k) {
        best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
      } else if (cand < best.back()) {
        best.pop_back();
        best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
      }
    }
  };
  // Far outside the occupied box the rings up to the bound outnumber the
  // points; a scan gives the same answer sooner.
  std::int64_t span = 0;
  for (int a = 0; a < 3; ++a) span = std::max(span, hi_[a] - lo_[a]);
  if (min_ring > span + 2) {
    for (const auto& [key, members] : cells_) consider(members);
    std::vector<std::size_t> out;
    for (const auto& b : best) out.push_back(b.index);
    return out;
  }
  auto visit = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    if (const auto* m = cell({x, y, z})) consider(*m);
  };
  for (std::int64_t r = min_ring; r <= max_ring; ++r) {
    // Cells at Chebyshev distance r from c, clipped to the occupied box.
    const std::int64_t x0 = std::max(c[0] - r, lo_[0]), x1 = std::min(c[0] + r, hi_[0]);
    const std::int64_t y0 = std::max(c[1] - r, lo_[1]), y1 = std::min(c[1] + r, hi_[1]);
    const std::int64_t z0 = std::max(c[2] - r, lo_[2]), z1 = std::min(c[2] + r, hi_[2]);
    for (std::int64_t x = x0; x <= x1; ++x)
      for (std::int64_t y = y0; y <= y1; ++y) {
        if (std::abs(x - c[0]) == r || std::abs(y - c[1]) == r) {
          for (std::int64_t z = z0; z <= z1; ++z) visit(x, y, z);
        } else {
          if (c[2] - r >= z0) visit(x, y, c[2] - r);
          if (r > 0 && c[2] + r <= z1) visit(x, y, c[2] + r);
        }
      }
    // Anything not yet visited is at least r * cell away.
    if (best.size() == k) {
      const double bound = static_cast<double>(r) * cell_;
      if (best.back().d2 < bound * bound) break;
    }
  }
  std::vector<std::size_t> out;
  out.reserve(best.size());
  for (const auto& b : best) out.push_back(b.index);
  return out;
}

std::size_t SpatialGrid::nearest(const Vec3& query) const {
  return knn(query, 1).front();
}

std::vector<std::size_t> SpatialGrid::radius(const Vec3& query, double radius) const {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  const Key lo = key_of({query[0] - radius, query[1] - radius, query[2] - radius});
  const Key hi = key_of({query[0] + radius, query[1] + radius, query[2] + radius});
  for (std::int64_t x = std::max(lo[0], lo_[0]); x <= std::min(hi[0], hi_[0]); ++x)
    for (std::int64_t y = std::max(lo[1], lo_[1]); y <= std::min(hi[1], hi_[1]); ++y)
      for (std::int64_t z = std::max(lo[2], lo_[2]); z <= std::min(hi[2], hi_[2]); ++z)
        if (const auto* m = cell({x, y, z}))
          for (std::size_t idx : *m)
            if (squared_distance(query, points_[idx]) <= r2) out.push_back(idx);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> knn(std::span<const Vec3> points,
                             std::span<const Vec3> queries, std::size_t k) {
  if (k > points.size()) {
    throw ArgumentError("knn: k=" + std::to_string(k) + " exceeds " +
                        std::to_string(points.size()) + " points");
  }
  std::vector<std::size_t> out;
  out.reserve(queries.size() * k);
  if (k == 0) return out;
  const SpatialGrid grid = SpatialGrid::adaptive(points, std::max<double>(k, 4.0));
  for (const Vec3& q : queries) {
    const auto row = grid.knn(q, k);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

std::vector<std::size_t> nearest_indices(std::span<const Vec3> points,
                                         std::span<const Vec3> queries) {
  if (points.empty()) throw ArgumentError("nearest: empty point set");
  return knn(points, queries, 1);
}

}  // namespace dpcc
