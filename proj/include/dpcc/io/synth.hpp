#pragma once

#include <cstdint>
#include <string>

#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc::io {

enum class SynthKind { kPlane, kSphere, kTwoDensityCluster, kLine };

SynthKind parse_synth_kind(const std::string& name);
std::string synth_kind_name(SynthKind kind);

// Seeded clouds inside [-1, 1]^3, with unit normals.
//   plane   z = 0 over [-1, 1]^2
//   sphere  radius 1 about the origin
//   two-density-cluster  two z = 0 patches with n/2 points each; the dense
//           patch has a quarter of the sparse patch's edge, so its points
//           sit about four times closer together
//   line    the x axis over [-1, 1]
PointCloud synth_cloud(SynthKind kind, std::size_t n, std::uint64_t seed);

}  // namespace dpcc::io
