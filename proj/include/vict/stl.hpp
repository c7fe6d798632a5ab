#pragma once

// STL reader (binary and ASCII) with vertex welding, and a binary writer.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "vict/errors.hpp"
#include "vict/mesh.hpp"

namespace vict {

inline constexpr double kWeldTolerance = 1e-9;

namespace stl_detail {

struct CellHash {
  std::size_t operator()(const std::array<std::int64_t, 3>& c) const {
    std::size_t h = 1469598103934665603ull;
    for (auto v : c) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
    return h;
  }
};

// Merges vertices closer than the tolerance into one index, first-seen order.
class VertexWelder {
public:
  explicit VertexWelder(std::vector<Vec3>& out) : out_(out) {}

  std::uint32_t add(const Vec3& p) {
    const auto cell = cell_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find({cell[0] + dx, cell[1] + dy, cell[2] + dz});
          if (it == cells_.end()) continue;
          for (auto idx : it->second)
            if ((out_[idx] - p).norm() <= kWeldTolerance) return idx;
        }
    const auto idx = static_cast<std::uint32_t>(out_.size());
    out_.push_back(p);
    cells_[cell].push_back(idx);
    return idx;
  }

private:
  static std::array<std::int64_t, 3> cell_of(const Vec3& p) {
    return {static_cast<std::int64_t>(std::floor(p[0] / kWeldTolerance)),
            static_cast<std::int64_t>(std::floor(p[1] / kWeldTolerance)),
            static_cast<std::int64_t>(std::floor(p[2] / kWeldTolerance))};
  }

  std::vector<Vec3>& out_;
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::uint32_t>, CellHash> cells_;
};

inline bool looks_ascii(const std::string& bytes) {
  const auto b = bytes.find_first_not_of(" \t\r\n");
  if (b == std::string::npos || bytes.compare(b, 5, "solid") != 0) return false;
  if (bytes.size() >= 84) {
    std::uint32_t n;
    std::memcpy(&n, bytes.data() + 80, 4);
    // Some binary writers put "solid" in the header; trust an exact size match.
    if (bytes.size() == 84 + 50ull * n) return false;
  }
  return true;
}

inline TriMesh parse_binary(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 84)
    throw FormatError(name + ": binary STL truncated in header at byte offset " +
                      std::to_string(bytes.size()));
  std::uint32_t count;
  std::memcpy(&count, bytes.data() + 80, 4);
  const std::size_t expected = 84 + 50ull * count;
  if (bytes.size() < expected) {
    const std::size_t complete = (bytes.size() - 84) / 50;
    throw FormatError(name + ": binary STL declares " + std::to_string(count) +
                      " triangles but record " + std::to_string(complete) +
                      " is truncated at byte offset " + std::to_string(84 + 50 * complete));
  }
  if (bytes.size() > expected)
    throw FormatError(name + ": " + std::to_string(bytes.size() - expected) +
                      " unexpected trailing bytes at byte offset " + std::to_string(expected));
  TriMesh mesh;
  VertexWelder weld(mesh.vertices);
  mesh.triangles.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const char* rec = bytes.data() + 84 + 50 * t;
    std::array<std::uint32_t, 3> tri{};
    for (int v = 0; v < 3; ++v) {
      float xyz[3];
      std::memcpy(xyz, rec + 12 + 12 * v, 12);
      const Vec3 p(xyz[0], xyz[1], xyz[2]);
      if (!p.allFinite())
        throw FormatError(name + ": non-finite vertex at byte offset " +
                          std::to_string(84 + 50 * t + 12 + 12 * v));
      tri[v] = weld.add(p);
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

inline TriMesh parse_ascii(const std::string& bytes, const std::string& name) {
  std::istringstream in(bytes);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) -> void {
    throw FormatError(name + ": ASCII STL line " + std::to_string(line_no) + ": " + why);
  };
  // Returns the whitespace-separated tokens of the next non-blank line.
  auto next = [&]() -> std::vector<std::string> {
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream ls(line);
      std::vector<std::string> toks;
      std::string t;
      while (ls >> t) toks.push_back(t);
      if (!toks.empty()) return toks;
    }
    return {};
  };
  auto number = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) fail("bad number \"" + s + "\"");
    return v;
  };

  TriMesh mesh;
  VertexWelder weld(mesh.vertices);
  auto toks = next();
  if (toks.empty() || toks[0] != "solid") fail("expected \"solid\"");
  while (true) {
    toks = next();
    if (toks.empty()) fail("unexpected end of file, expected \"endsolid\"");
    if (toks[0] == "endsolid") {
      toks = next();
      if (toks.empty()) break;
      if (toks[0] != "solid") fail("expected \"solid\" or end of file");
      continue;
    }
    if (toks[0] != "facet" || toks.size() != 5 || toks[1] != "normal")
      fail("expected \"facet normal nx ny nz\"");
    toks = next();
    if (toks.size() != 2 || toks[0] != "outer" || toks[1] != "loop") fail("expected \"outer loop\"");
    std::array<std::uint32_t, 3> tri{};
    for (int v = 0; v < 3; ++v) {
      toks = next();
      if (toks.size() != 4 || toks[0] != "vertex") fail("expected \"vertex x y z\"");
      tri[v] = weld.add(Vec3(number(toks[1]), number(toks[2]), number(toks[3])));
    }
    toks = next();
    if (toks.size() != 1 || toks[0] != "endloop") fail("expected \"endloop\"");
    toks = next();
    if (toks.size() != 1 || toks[0] != "endfacet") fail("expected \"endfacet\"");
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

} // namespace stl_detail

/// Reads binary or ASCII STL. Vertices within 1e-9 mm are merged; the triangle
/// count is preserved.
inline TriMesh read_stl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  TriMesh mesh = stl_detail::looks_ascii(bytes) ? stl_detail::parse_ascii(bytes, path.string())
                                                : stl_detail::parse_binary(bytes, path.string());
  validate(mesh);
  return mesh;
}

inline void write_stl_binary(const TriMesh& mesh, const std::filesystem::path& path) {
  std::string out(80, '\0');
  const char tag[] = "binary STL";
  std::memcpy(out.data(), tag, sizeof tag - 1);
  const auto count = static_cast<std::uint32_t>(mesh.triangles.size());
  out.append(reinterpret_cast<const char*>(&count), 4);
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    Vec3 n = (b - a).cross(c - a);
    if (n.norm() > 0) n.normalize();
    float rec[12] = {float(n[0]), float(n[1]), float(n[2]), float(a[0]), float(a[1]), float(a[2]),
                     float(b[0]), float(b[1]), float(b[2]), float(c[0]), float(c[1]), float(c[2])};
    out.append(reinterpret_cast<const char*>(rec), sizeof rec);
    out.append(2, '\0');
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

} // namespace vict
