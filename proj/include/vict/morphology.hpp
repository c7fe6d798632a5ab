#pragma once

// Binary morphology with a discretized Euclidean ball.
//
// The structuring element of radius r is { o in Z^3 : |o|^2 < (r+1)^2 }, the
// lattice points of the open ball of radius r+1. Radius 0 is the single
// voxel, radius 1 the full 3x3x3 (26-connected) neighbourhood. Dilation and
// erosion are evaluated through an exact squared distance transform.

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "vict/edt.hpp"
#include "vict/volgrid.hpp"

namespace vict {

/// Squared-norm bound of the structuring element of radius r.
inline constexpr std::int64_t ball_limit(int radius) {
  return static_cast<std::int64_t>(radius + 1) * (radius + 1) - 1;
}

inline std::vector<std::array<std::int64_t, 3>> ball_offsets(int radius) {
  std::vector<std::array<std::int64_t, 3>> out;
  const std::int64_t lim = ball_limit(radius);
  for (std::int64_t z = -radius; z <= radius; ++z)
    for (std::int64_t y = -radius; y <= radius; ++y)
      for (std::int64_t x = -radius; x <= radius; ++x)
        if (x * x + y * y + z * z <= lim) out.push_back({x, y, z});
  return out;
}

inline BitBox dilate(const BitBox& in, int radius) {
  if (radius <= 0) return in;
  const auto d2 = squared_edt(in);
  BitBox out(in.dims);
  const double lim = static_cast<double>(ball_limit(radius));
  for (std::size_t n = 0; n < out.size(); ++n) out.data[n] = d2[n] <= lim ? 1 : 0;
  return out;
}

/// Erosion treating voxels outside the box as set, so that closing never
/// removes input voxels next to the box boundary.
inline BitBox erode(const BitBox& in, int radius) {
  if (radius <= 0) return in;
  BitBox holes(in.dims);
  for (std::size_t n = 0; n < in.size(); ++n) holes.data[n] = in.data[n] ? 0 : 1;
  const auto d2 = squared_edt(holes);
  BitBox out(in.dims);
  const double lim = static_cast<double>(ball_limit(radius));
  for (std::size_t n = 0; n < out.size(); ++n) out.data[n] = d2[n] > lim ? 1 : 0;
  return out;
}

inline BitBox close(const BitBox& in, int radius) { return erode(dilate(in, radius), radius); }

/// Sets every unset voxel that is not 6-connected to the box boundary
/// through unset voxels.
inline BitBox fill_holes(const BitBox& in) {
  const auto& d = in.dims;
  BitBox reached(d);
  std::vector<std::size_t> stack;
  auto seed = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    const auto n = in.index(x, y, z);
    if (!in.data[n] && !reached.data[n]) {
      reached.data[n] = 1;
      stack.push_back(n);
    }
  };
  for (std::int64_t z = 0; z < d[2]; ++z)
    for (std::int64_t y = 0; y < d[1]; ++y)
      for (std::int64_t x = 0; x < d[0]; ++x)
        if (x == 0 || y == 0 || z == 0 || x == d[0] - 1 || y == d[1] - 1 || z == d[2] - 1)
          seed(x, y, z);
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    const auto x = static_cast<std::int64_t>(n % d[0]);
    const auto y = static_cast<std::int64_t>((n / d[0]) % d[1]);
    const auto z = static_cast<std::int64_t>(n / (d[0] * d[1]));
    if (x > 0) seed(x - 1, y, z);
    if (x + 1 < d[0]) seed(x + 1, y, z);
    if (y > 0) seed(x, y - 1, z);
    if (y + 1 < d[1]) seed(x, y + 1, z);
    if (z > 0) seed(x, y, z - 1);
    if (z + 1 < d[2]) seed(x, y, z + 1);
  }
  BitBox out(d);
  for (std::size_t n = 0; n < out.size(); ++n) out.data[n] = (in.data[n] || !reached.data[n]) ? 1 : 0;
  return out;
}

/// Inclusive index-space box.
struct IndexBox {
  Index3 lo{0, 0, 0};
  Index3 hi{-1, -1, -1};

  bool empty() const { return hi[0] < lo[0] || hi[1] < lo[1] || hi[2] < lo[2]; }
  std::array<std::int64_t, 3> extent() const {
    return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
  }
  bool contains(const Index3& i) const {
    for (int a = 0; a < 3; ++a)
      if (i[a] < lo[a] || i[a] > hi[a]) return false;
    return true;
  }
  friend bool operator==(const IndexBox&, const IndexBox&) = default;
};

/// Bounding box of set voxels; empty box when the mask is empty.
inline IndexBox bounding_box(const VoxelMask& m) {
  IndexBox box{{m.geometry.dims[0], m.geometry.dims[1], m.geometry.dims[2]}, {-1, -1, -1}};
  for (std::size_t n = 0; n < m.bits.size(); ++n) {
    if (!m.bits[n]) continue;
    const auto i = m.geometry.unlinear(n);
    for (int a = 0; a < 3; ++a) {
      box.lo[a] = std::min(box.lo[a], i[a]);
      box.hi[a] = std::max(box.hi[a], i[a]);
    }
  }
  if (box.hi[0] < 0) return IndexBox{};
  return box;
}

inline IndexBox expand_clip(const IndexBox& box, std::int64_t margin, const Index3& dims) {
  IndexBox out;
  for (int a = 0; a < 3; ++a) {
    out.lo[a] = std::max<std::int64_t>(0, box.lo[a] - margin);
    out.hi[a] = std::min<std::int64_t>(dims[a] - 1, box.hi[a] + margin);
  }
  return out;
}

inline BitBox crop(const VoxelMask& m, const IndexBox& box) {
  BitBox out(box.extent());
  for (std::int64_t z = 0; z < out.dims[2]; ++z)
    for (std::int64_t y = 0; y < out.dims[1]; ++y)
      for (std::int64_t x = 0; x < out.dims[0]; ++x)
        out.data[out.index(x, y, z)] = m.bits[m.geometry.linear({box.lo[0] + x, box.lo[1] + y, box.lo[2] + z})];
  return out;
}

inline void paste(const BitBox& b, const IndexBox& box, VoxelMask& m) {
  for (std::int64_t z = 0; z < b.dims[2]; ++z)
    for (std::int64_t y = 0; y < b.dims[1]; ++y)
      for (std::int64_t x = 0; x < b.dims[0]; ++x)
        m.bits[m.geometry.linear({box.lo[0] + x, box.lo[1] + y, box.lo[2] + z})] = b.data[b.index(x, y, z)];
}

inline BitBox to_bitbox(const VoxelMask& m) {
  return crop(m, IndexBox{{0, 0, 0}, {m.geometry.dims[0] - 1, m.geometry.dims[1] - 1, m.geometry.dims[2] - 1}});
}

} // namespace vict
