#include "dpcc/geometry/point_cloud.hpp"

#include <cmath>
#include <map>

#include "dpcc/error.hpp"

namespace dpcc {

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 Block::to_block(const Vec3& world) const {
  return {(world[0] - origin[0]) / scale, (world[1] - origin[1]) / scale,
          (world[2] - origin[2]) / scale};
}

Vec3 Block::to_world(const Vec3& block) const {
  return {origin[0] + block[0] * scale, origin[1] + block[1] * scale,
          origin[2] + block[2] * scale};
}

std::vector<Block> partition_blocks(const PointCloud& world, double block_size) {
  if (!(block_size > 0.0)) throw ArgumentError("block size must be positive");
  std::map<std::array<std::int64_t, 3>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < world.size(); ++i) {
    std::array<std::int64_t, 3> key{};
    for (int a = 0; a < 3; ++a) {
      const double c = world.positions[i][a];
      if (!std::isfinite(c)) throw ArgumentError("non-finite coordinate");
      key[a] = static_cast<std::int64_t>(std::floor(c / block_size));
    }
    cells[key].push_back(i);
  }
  std::vector<Block> blocks;
  for (const auto& [key, members] : cells) {
    Block b;
    b.cell = key;
    b.block_size = block_size;
    b.scale = block_size / 2.0;
    for (int a = 0; a < 3; ++a) {
      b.origin[a] = (static_cast<double>(key[a]) + 0.5) * block_size;
    }
    b.cloud.frame = Frame::kBlock;
    for (std::size_t i : members) {
      b.cloud.positions.push_back(b.to_block(world.positions[i]));
      if (world.has_normals()) b.cloud.normals.push_back(world.normals[i]);
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

PointCloud denormalize(const PointCloud& block_cloud, const Block& block) {
  PointCloud out;
  out.frame = Frame::kWorld;
  out.normals = block_cloud.normals;
  out.positions.reserve(block_cloud.size());
  for (const Vec3& p : block_cloud.positions) out.positions.push_back(block.to_world(p));
  return out;
}

}  // namespace dpcc
