#include "dpcc/io/synth.hpp"

#include <cmath>
#include <numbers>

#include "dpcc/error.hpp"
#include "dpcc/random.hpp"

namespace dpcc::io {
namespace {

// Sparse patch [-0.9, 0.5] x [-0.7, 0.7]; dense patch a quarter of that edge,
// centered at (0.725, 0).
constexpr double kSparseEdge = 1.4;
constexpr double kDenseEdge = kSparseEdge / 4.0;

}  // namespace

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "plane") return SynthKind::kPlane;
  if (name == "sphere") return SynthKind::kSphere;
  if (name == "two-density-cluster") return SynthKind::kTwoDensityCluster;
  if (name == "line") return SynthKind::kLine;
  throw ArgumentError("unknown synthetic dataset '" + name +
                      "' (plane, sphere, two-density-cluster, line)");
}

std::string synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::kPlane: return "plane";
    case SynthKind::kSphere: return "sphere";
    case SynthKind::kTwoDensityCluster: return "two-density-cluster";
    case SynthKind::kLine: return "line";
  }
  return "?";
}

PointCloud synth_cloud(SynthKind kind, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("synthetic dataset needs n > 0");
  Rng rng(seed);
  PointCloud c;
  c.positions.reserve(n);
  c.normals.reserve(n);
  switch (kind) {
    case SynthKind::kPlane:
      for (std::size_t i = 0; i < n; ++i) {
        c.positions.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0});
        c.normals.push_back({0.0, 0.0, 1.0});
      }
      break;
    case SynthKind::kSphere:
      for (std::size_t i = 0; i < n; ++i) {
        // Uniform on the sphere: z uniform, azimuth uniform.
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3 p{r * std::cos(phi), r * std::sin(phi), z};
        c.positions.push_back(p);
        c.normals.push_back(p);
      }
      break;
    case SynthKind::kTwoDensityCluster: {
      const std::size_t sparse = n - n / 2;
      for (std::size_t i = 0; i < n; ++i) {
        if (i < sparse) {
          c.positions.push_back({-0.9 + kSparseEdge * rng.uniform(), -0.7 + kSparseEdge * rng.uniform(), 0.0});
        } else {
          c.positions.push_back({0.725 + kDenseEdge * (rng.uniform() - 0.5),
                                 kDenseEdge * (rng.uniform() - 0.5), 0.0});
        }
        c.normals.push_back({0.0, 0.0, 1.0});
      }
      break;
    }
    case SynthKind::kLine:
      for (std::size_t i = 0; i < n; ++i) {
        c.positions.push_back({rng.uniform(-1.0, 1.0), 0.0, 0.0});
        c.normals.push_back({0.0, 0.0, 1.0});
      }
      break;
  }
  return c;
}

}  // namespace dpcc::io
