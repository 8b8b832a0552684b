#include "dpcc/io/ply.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dpcc/error.hpp"
#include "dpcc/io/bytes.hpp"

namespace dpcc {
namespace {

enum class Scalar { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

Scalar parse_scalar(const std::string& t) {
  if (t == "char" || t == "int8") return Scalar::kI8;
  if (t == "uchar" || t == "uint8") return Scalar::kU8;
  if (t == "short" || t == "int16") return Scalar::kI16;
  if (t == "ushort" || t == "uint16") return Scalar::kU16;
  if (t == "int" || t == "int32") return Scalar::kI32;
  if (t == "uint" || t == "uint32") return Scalar::kU32;
  if (t == "float" || t == "float32") return Scalar::kF32;
  if (t == "double" || t == "float64") return Scalar::kF64;
  throw FormatError("ply: unknown property type '" + t + "'");
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::kI8:
    case Scalar::kU8: return 1;
    case Scalar::kI16:
    case Scalar::kU16: return 2;
    case Scalar::kI32:
    case Scalar::kU32:
    case Scalar::kF32: return 4;
    case Scalar::kF64: return 8;
  }
  return 0;
}

double read_binary(const unsigned char* p, Scalar s) {
  std::uint64_t bits = 0;
  const std::size_t n = scalar_size(s);
  for (std::size_t i = 0; i < n; ++i) bits |= std::uint64_t{p[i]} << (8 * i);
  switch (s) {
    case Scalar::kI8: return static_cast<std::int8_t>(bits);
    case Scalar::kU8: return static_cast<std::uint8_t>(bits);
    case Scalar::kI16: return static_cast<std::int16_t>(bits);
    case Scalar::kU16: return static_cast<std::uint16_t>(bits);
    case Scalar::kI32: return static_cast<std::int32_t>(bits);
    case Scalar::kU32: return static_cast<std::uint32_t>(bits);
    case Scalar::kF32: {
      const auto b32 = static_cast<std::uint32_t>(bits);
      float f;
      std::memcpy(&f, &b32, 4);
      return f;
    }
    case Scalar::kF64: {
      double d;
      std::memcpy(&d, &bits, 8);
      return d;
    }
  }
  return 0.0;
}

struct Property {
  std::string name;
  Scalar type;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

Vec3 unit_or_zero(const Vec3& n) {
  const double len = norm(n);
  return len > 0.0 ? (1.0 / len) * n : n;
}

}  // namespace

PointCloud parse_ply(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) throw FormatError("ply: unterminated header");
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    return line;
  };

  if (next_line() != "ply") throw FormatError("ply: missing magic");
  bool binary = false;
  std::vector<Element> elements;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw FormatError("ply: unsupported format '" + fmt + "'");
      }
    } else if (word == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (!ls) throw FormatError("ply: bad element line '" + line + "'");
      elements.push_back(std::move(e));
    } else if (word == "property") {
      if (elements.empty()) throw FormatError("ply: property before element");
      std::string type;
      ls >> type;
      if (type == "list") {
        // Lists are only legal outside the vertex element, which we skip.
        if (elements.back().name == "vertex") {
          throw FormatError("ply: list property on vertex element");
        }
        elements.back().props.push_back({"list", Scalar::kU8});
        continue;
      }
      Property p{"", parse_scalar(type)};
      ls >> p.name;
      elements.back().props.push_back(p);
    } else {
      throw FormatError("ply: unexpected header line '" + line + "'");
    }
  }

  PointCloud cloud;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      if (e.count > 0) throw FormatError("ply: element '" + e.name + "' precedes vertex");
      continue;
    }
    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
    for (std::size_t i = 0; i < e.props.size(); ++i) {
      const std::string& n = e.props[i].name;
      const int k = static_cast<int>(i);
      if (n == "x") ix = k;
      if (n == "y") iy = k;
      if (n == "z") iz = k;
      if (n == "nx") inx = k;
      if (n == "ny") iny = k;
      if (n == "nz") inz = k;
    }
    if (ix < 0 || iy < 0 || iz < 0) throw FormatError("ply: vertex lacks x/y/z");
    const bool normals = inx >= 0 && iny >= 0 && inz >= 0;
    std::vector<double> row(e.props.size());
    std::size_t stride = 0;
    for (const Property& p : e.props) stride += scalar_size(p.type);

    std::istringstream body;
    if (!binary) body.str(bytes.substr(pos));
    for (std::size_t v = 0; v < e.count; ++v) {
      if (binary) {
        if (pos + stride > bytes.size()) {
          throw FormatError("ply: truncated binary body at vertex " + std::to_string(v));
        }
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          row[i] = read_binary(p, e.props[i].type);
          p += scalar_size(e.props[i].type);
        }
        pos += stride;
      } else {
        for (double& x : row) {
          if (!(body >> x)) {
            throw FormatError("ply: truncated ascii body at vertex " + std::to_string(v));
          }
        }
      }
      cloud.positions.push_back({row[ix], row[iy], row[iz]});
      if (normals) cloud.normals.push_back(unit_or_zero({row[inx], row[iny], row[inz]}));
    }
    break;
  }
  return cloud;
}

PointCloud read_ply(const std::string& path) {
  const auto bytes = io::read_file(path);
  return parse_ply(std::string(bytes.begin(), bytes.end()));
}

std::string format_ply(const PointCloud& cloud, PlyEncoding encoding) {
  const bool normals = cloud.has_normals();
  std::ostringstream os;
  os << "ply\n"
     << (encoding == PlyEncoding::kAscii ? "format ascii 1.0\n"
                                         : "format binary_little_endian 1.0\n")
     << "element vertex " << cloud.size() << "\n";
  const char* type = "double";
  for (const char* n : {"x", "y", "z"}) os << "property " << type << ' ' << n << "\n";
  if (normals) {
    for (const char* n : {"nx", "ny", "nz"}) os << "property " << type << ' ' << n << "\n";
  }
  os << "end_header\n";
  if (encoding == PlyEncoding::kAscii) {
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.positions[i];
      os << p[0] << ' ' << p[1] << ' ' << p[2];
      if (normals) {
        const Vec3& n = cloud.normals[i];
        os << ' ' << n[0] << ' ' << n[1] << ' ' << n[2];
      }
      os << '\n';
    }
    return os.str();
  }
  io::ByteWriter w;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (double x : cloud.positions[i]) w.f64(x);
    if (normals) for (double x : cloud.normals[i]) w.f64(x);
  }
  std::string out = os.str();
  out.append(w.bytes().begin(), w.bytes().end());
  return out;
}

void write_ply(const std::string& path, const PointCloud& cloud, PlyEncoding encoding) {
  const std::string s = format_ply(cloud, encoding);
  io::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::string format_dpcl(const PointCloud& cloud) {
  io::ByteWriter w;
  w.raw(std::string_view("DPCL"));
  w.u32(static_cast<std::uint32_t>(cloud.size()));
  for (const Vec3& p : cloud.positions)
    for (double x : p) w.f32(static_cast<float>(x));
  return std::string(w.bytes().begin(), w.bytes().end());
}

PointCloud parse_dpcl(const std::string& bytes) {
  io::ByteReader r(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  if (r.remaining() < 4 || r.text(4) != "DPCL") throw FormatError("dpcl: bad magic");
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 12 != r.remaining()) {
    throw FormatError("dpcl: body length does not match count " + std::to_string(n));
  }
  PointCloud cloud;
  cloud.positions.resize(n);
  for (auto& p : cloud.positions)
    for (double& x : p) x = r.f32();
  return cloud;
}

PointCloud read_cloud(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".dpcl") {
    const auto b = io::read_file(path);
    return parse_dpcl(std::string(b.begin(), b.end()));
  }
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ply") return read_ply(path);
  throw ArgumentError("unknown point cloud extension: " + path);
}

void write_cloud(const std::string& path, const PointCloud& cloud) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".dpcl") {
    const std::string s = format_dpcl(cloud);
    io::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    return;
  }
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ply") {
    write_ply(path, cloud);
    return;
  }
  throw ArgumentError("unknown point cloud extension: " + path);
}

}  // namespace dpcc
