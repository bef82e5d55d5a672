#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "softgrasp/error.hpp"
#include "softgrasp/transform.hpp"

namespace softgrasp {

// Vertices in meters. Triangles index into `vertices`.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

inline void validate_mesh(const TriangleMesh& mesh, const std::string& source) {
  if (mesh.triangles.empty()) throw Error(ErrorKind::MeshFormat, source, "mesh has no triangles");
  for (const Vec3& v : mesh.vertices) {
    if (!v.allFinite()) throw Error(ErrorKind::MeshFormat, source, "non-finite vertex");
  }
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int i : t) {
      if (i < 0 || i >= n) throw Error(ErrorKind::MeshFormat, source, "triangle index out of range");
    }
  }
}

namespace detail {

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Looks for a "units" declaration ("units=mm", "units: m", "unit mm") inside a
// header/comment line. Anything other than meters is rejected.
inline void check_declared_units(const std::string& line, const std::string& source) {
  const std::string lower = lowercase(line);
  auto pos = lower.find("unit");
  if (pos == std::string::npos) return;
  pos += 4;
  if (pos < lower.size() && lower[pos] == 's') ++pos;
  while (pos < lower.size() && (lower[pos] == ' ' || lower[pos] == '=' || lower[pos] == ':')) ++pos;
  std::string value;
  while (pos < lower.size() && std::isalpha(static_cast<unsigned char>(lower[pos]))) value += lower[pos++];
  if (value.empty()) return;
  if (value == "m" || value == "meter" || value == "meters" || value == "metre" || value == "metres") {
    return;
  }
  throw Error(ErrorKind::NonMetricUnits, source, "declared units '" + value + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MeshNotFound, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Welds identical vertex coordinates so STL soups get shared indices.
class VertexWelder {
 public:
  int add(const Vec3& v) {
    for (std::size_t i = recent_start(); i < mesh.vertices.size(); ++i) {
      if (mesh.vertices[i] == v) return static_cast<int>(i);
    }
    mesh.vertices.push_back(v);
    return static_cast<int>(mesh.vertices.size() - 1);
  }
  TriangleMesh mesh;

 private:
  // Only search a small window: consecutive STL facets share most vertices.
  std::size_t recent_start() const { return mesh.vertices.size() > 64 ? mesh.vertices.size() - 64 : 0; }
};

inline TriangleMesh parse_binary_stl(const std::string& data, const std::string& source) {
  check_declared_units(data.substr(0, 80), source);
  std::uint32_t count = 0;
  std::memcpy(&count, data.data() + 80, 4);
  VertexWelder welder;
  for (std::uint32_t f = 0; f < count; ++f) {
    const char* facet = data.data() + 84 + 50 * static_cast<std::size_t>(f);
    std::array<int, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      float xyz[3];
      std::memcpy(xyz, facet + 12 + 12 * k, 12);
      tri[k] = welder.add(Vec3(xyz[0], xyz[1], xyz[2]));
    }
    welder.mesh.triangles.push_back(tri);
  }
  return std::move(welder.mesh);
}

inline TriangleMesh parse_ascii_stl(const std::string& data, const std::string& source) {
  std::istringstream in(data);
  std::string line;
  VertexWelder welder;
  std::vector<int> pending;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      check_declared_units(line, source);
      first = false;
    }
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "vertex") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw Error(ErrorKind::MeshFormat, source, "bad vertex line");
      pending.push_back(welder.add(v));
    } else if (word == "endfacet") {
      if (pending.size() != 3) throw Error(ErrorKind::MeshFormat, source, "facet without 3 vertices");
      welder.mesh.triangles.push_back({pending[0], pending[1], pending[2]});
      pending.clear();
    }
  }
  return std::move(welder.mesh);
}

}  // namespace detail

inline TriangleMesh parse_stl(const std::string& data, const std::string& source = "<stl>") {
  TriangleMesh mesh;
  bool binary = false;
  if (data.size() >= 84) {
    std::uint32_t count = 0;
    std::memcpy(&count, data.data() + 80, 4);
    binary = data.size() == 84 + 50 * static_cast<std::size_t>(count);
  }
  if (binary) {
    mesh = detail::parse_binary_stl(data, source);
  } else if (data.rfind("solid", 0) == 0) {
    mesh = detail::parse_ascii_stl(data, source);
  } else {
    throw Error(ErrorKind::MeshFormat, source, "not an STL file");
  }
  validate_mesh(mesh, source);
  return mesh;
}

// Supports `v` and `f` records; polygon faces are fan-triangulated, negative
// (relative) indices and v/vt/vn forms are accepted.
inline TriangleMesh parse_obj(const std::string& data, const std::string& source = "<obj>") {
  TriangleMesh mesh;
  std::istringstream in(data);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      detail::check_declared_units(line.substr(1), source);
      continue;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw Error(ErrorKind::MeshFormat, source, "bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const int raw = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(raw > 0 ? raw - 1 : static_cast<int>(mesh.vertices.size()) + raw);
      }
      if (idx.size() < 3) throw Error(ErrorKind::MeshFormat, source, "face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  validate_mesh(mesh, source);
  return mesh;
}

inline TriangleMesh load_mesh(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::MeshNotFound, path.string());
  const std::string ext = detail::lowercase(path.extension().string());
  const std::string data = detail::read_file(path);
  if (ext == ".stl") return parse_stl(data, path.string());
  if (ext == ".obj") return parse_obj(data, path.string());
  throw Error(ErrorKind::MeshFormat, path.string(), "unsupported mesh extension '" + ext + "'");
}

inline std::string to_obj(const TriangleMesh& mesh) {
  std::ostringstream out;
  out.precision(17);
  out << "# units: m\n";
  for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  return out.str();
}

inline std::string to_binary_stl(const TriangleMesh& mesh) {
  std::string out(80, ' ');
  const std::string header = "softgrasp binary stl units=m";
  out.replace(0, header.size(), header);
  const auto count = static_cast<std::uint32_t>(mesh.triangles.size());
  out.append(reinterpret_cast<const char*>(&count), 4);
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    Vec3 n = (b - a).cross(c - a);
    if (n.norm() > 0) n.normalize();
    float rec[12];
    const Vec3* vs[4] = {&n, &a, &b, &c};
    for (int k = 0; k < 4; ++k) {
      for (int j = 0; j < 3; ++j) rec[3 * k + j] = static_cast<float>((*vs[k])[j]);
    }
    out.append(reinterpret_cast<const char*>(rec), sizeof(rec));
    out.append(2, '\0');
  }
  return out;
}

inline TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& pose) {
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v = pose * v;
  return out;
}

// ---- procedural primitives ----

inline TriangleMesh box_mesh(const Vec3& size) {
  TriangleMesh m;
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

// Surface of revolution about +z. `profile` holds (radius, z) pairs from
// bottom to top; profile points with radius 0 collapse to a single pole.
inline TriangleMesh lathe_mesh(const std::vector<std::pair<double, double>>& profile, int segments) {
  TriangleMesh m;
  std::vector<std::vector<int>> rings;
  for (const auto& [r, z] : profile) {
    std::vector<int> ring;
    if (r <= 0.0) {
      m.vertices.emplace_back(0.0, 0.0, z);
      ring.assign(segments, static_cast<int>(m.vertices.size() - 1));
    } else {
      for (int s = 0; s < segments; ++s) {
        const double a = 2.0 * std::numbers::pi * s / segments;
        m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), z);
        ring.push_back(static_cast<int>(m.vertices.size() - 1));
      }
    }
    rings.push_back(std::move(ring));
  }
  for (std::size_t k = 0; k + 1 < rings.size(); ++k) {
    for (int s = 0; s < segments; ++s) {
      const int s1 = (s + 1) % segments;
      const int a = rings[k][s], b = rings[k][s1], c = rings[k + 1][s], d = rings[k + 1][s1];
      if (a != b) m.triangles.push_back({a, b, d});
      if (c != d) m.triangles.push_back({a, d, c});
    }
  }
  return m;
}

inline TriangleMesh sphere_mesh(double radius, int rings = 16, int segments = 24) {
  std::vector<std::pair<double, double>> profile;
  for (int k = 0; k <= rings; ++k) {
    const double phi = std::numbers::pi * k / rings;  // 0 at bottom pole
    profile.emplace_back(radius * std::sin(phi), -radius * std::cos(phi));
  }
  return lathe_mesh(profile, segments);
}

inline TriangleMesh ellipsoid_mesh(const Vec3& radii, int rings = 16, int segments = 24) {
  TriangleMesh m = sphere_mesh(1.0, rings, segments);
  for (Vec3& v : m.vertices) v = v.cwiseProduct(radii);
  return m;
}

inline TriangleMesh cylinder_mesh(double radius, double length, int segments = 24) {
  const double h = 0.5 * length;
  return lathe_mesh({{0.0, -h}, {radius, -h}, {radius, h}, {0.0, h}}, segments);
}

}  // namespace softgrasp
