#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vict/errors.hpp"
#include "vict/volgrid.hpp"

namespace vict {

/// Indexed triangle surface, coordinates in mm.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty() && vertices.empty(); }
};

inline void validate(const TriMesh& m) {
  if (!m.vertices.empty() && m.vertices.size() < 3)
    throw InputError("non-empty mesh needs at least 3 vertices");
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    if (!m.vertices[i].allFinite())
      throw InputError("mesh vertex " + std::to_string(i) + " is not finite");
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    for (auto idx : m.triangles[t])
      if (idx >= m.vertices.size())
        throw InputError("triangle " + std::to_string(t) + " references missing vertex " +
                         std::to_string(idx));
}

inline double surface_area(const TriMesh& m) {
  double area = 0.0;
  for (const auto& t : m.triangles) {
    const Vec3& a = m.vertices[t[0]];
    area += 0.5 * (m.vertices[t[1]] - a).cross(m.vertices[t[2]] - a).norm();
  }
  return area;
}

} // namespace vict
