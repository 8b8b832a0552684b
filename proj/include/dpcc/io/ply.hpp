#pragma once

#include <string>

#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc {

enum class PlyEncoding { kAscii, kBinaryLittleEndian };

// Reads x, y, z and, when all three are present, nx, ny, nz from the vertex
// element. Other vertex properties are skipped; float, double and the integer
// types are accepted.
PointCloud read_ply(const std::string& path);
PointCloud parse_ply(const std::string& bytes);

std::string format_ply(const PointCloud& cloud, PlyEncoding encoding);
void write_ply(const std::string& path, const PointCloud& cloud,
               PlyEncoding encoding = PlyEncoding::kBinaryLittleEndian);

// Fixture format: "DPCL", u32 count, count f32 triples.
std::string format_dpcl(const PointCloud& cloud);
PointCloud parse_dpcl(const std::string& bytes);

// Dispatches on the file extension (.ply or .dpcl).
PointCloud read_cloud(const std::string& path);
void write_cloud(const std::string& path, const PointCloud& cloud);

}  // namespace dpcc
