#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dpcc {

using Vec3 = std::array<double, 3>;

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
// Always summed in x, y, z order so every caller sees identical roundings.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}
double norm(const Vec3& a);

enum class Frame { kWorld, kBlock };

struct PointCloud {
  std::vector<Vec3> positions;
  // Empty, or one unit vector per position.
  std::vector<Vec3> normals;
  Frame frame = Frame::kWorld;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_normals() const { return !normals.empty(); }
};

// One cell of the world grid, normalized to [-1, 1]^3.
struct Block {
  PointCloud cloud;
  std::array<std::int64_t, 3> cell{};
  Vec3 origin{};       // cell center, world units
  double scale = 1.0;  // world units per block unit (half the edge)
  double block_size = 1.0;

  Vec3 to_block(const Vec3& world) const;
  Vec3 to_world(const Vec3& block) const;
};

// Axis-aligned cells of edge `block_size` anchored at the world origin; a
// point at x lies in cell floor(x / block_size). Empty cells are omitted and
// blocks come out in lexicographic cell order.
std::vector<Block> partition_blocks(const PointCloud& world, double block_size);

// Block-frame cloud back to world coordinates. Normals pass through.
PointCloud denormalize(const PointCloud& block_cloud, const Block& block);

}  // namespace dpcc
