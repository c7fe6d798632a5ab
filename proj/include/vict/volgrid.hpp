#pragma once

// Voxel grid geometry, HU volumes and binary masks sharing the native CT grid.
//
// Indices address voxel centers. The physical position of index i is
//   x(i) = origin + direction * (spacing .* i)
// with direction a proper rotation. All geometry math is done in double.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "vict/errors.hpp"

namespace vict {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index3 = std::array<std::int64_t, 3>;
using HU = std::int32_t;

inline constexpr double kOrthonormalTol = 1e-9;

struct GridGeometry {
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  Mat3 direction = Mat3::Identity();
  Index3 dims{1, 1, 1};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  bool contains(const Index3& i) const {
    return i[0] >= 0 && i[1] >= 0 && i[2] >= 0 && i[0] < dims[0] && i[1] < dims[1] &&
           i[2] < dims[2];
  }

  // x fastest, z slowest (NRRD order).
  std::size_t linear(const Index3& i) const {
    return static_cast<std::size_t>(i[0] + dims[0] * (i[1] + dims[1] * i[2]));
  }

  Index3 unlinear(std::size_t n) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<std::int64_t>(n % nx), static_cast<std::int64_t>((n / nx) % ny),
            static_cast<std::int64_t>(n / (nx * ny))};
  }

  double mean_spacing() const { return (spacing[0] + spacing[1] + spacing[2]) / 3.0; }

  friend bool operator==(const GridGeometry& a, const GridGeometry& b) {
    return a.dims == b.dims && a.origin == b.origin && a.spacing == b.spacing &&
           a.direction == b.direction;
  }
};

inline std::string describe(const GridGeometry& g) {
  std::ostringstream os;
  os.precision(17);
  os << "dims=(" << g.dims[0] << "," << g.dims[1] << "," << g.dims[2] << ") origin=("
     << g.origin[0] << "," << g.origin[1] << "," << g.origin[2] << ") spacing=("
     << g.spacing[0] << "," << g.spacing[1] << "," << g.spacing[2] << ") direction=[";
  for (int r = 0; r < 3; ++r) {
    os << (r ? ";" : "") << g.direction(r, 0) << "," << g.direction(r, 1) << ","
       << g.direction(r, 2);
  }
  os << "]";
  return os.str();
}

/// Throws GeometryError unless dims, spacing and direction satisfy the grid invariants.
inline void validate(const GridGeometry& g, double tol = kOrthonormalTol) {
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] <= 0) throw GeometryError("grid dims must be positive: " + describe(g));
    if (!(g.spacing[a] > 0.0) || !std::isfinite(g.spacing[a]))
      throw GeometryError("grid spacing must be finite and positive: " + describe(g));
    if (!std::isfinite(g.origin[a])) throw GeometryError("grid origin must be finite");
  }
  if (!g.direction.allFinite()) throw GeometryError("direction matrix must be finite");
  const Mat3 gram = g.direction.transpose() * g.direction;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
    throw GeometryError("direction columns are not orthonormal: " + describe(g));
  if (std::abs(g.direction.determinant() - 1.0) > tol)
    throw GeometryError("direction matrix must be a proper rotation (det +1): " + describe(g));
}

/// Index -> physical position of the voxel center.
inline Vec3 index_to_physical(const GridGeometry& g, const Index3& i) {
  if (!g.contains(i)) {
    throw std::out_of_range("voxel index (" + std::to_string(i[0]) + "," +
                            std::to_string(i[1]) + "," + std::to_string(i[2]) +
                            ") outside grid");
  }
  const Vec3 scaled(g.spacing[0] * static_cast<double>(i[0]),
                    g.spacing[1] * static_cast<double>(i[1]),
                    g.spacing[2] * static_cast<double>(i[2]));
  return g.origin + g.direction * scaled;
}

/// Precomputed inverse of the index mapping, for hot loops.
class PhysicalToIndex {
public:
  explicit PhysicalToIndex(const GridGeometry& g)
      : origin_(g.origin), dims_(g.dims),
        inverse_(g.spacing.cwiseInverse().asDiagonal() * g.direction.transpose()) {}

  Vec3 continuous(const Vec3& p) const { return inverse_ * (p - origin_); }

  // Nearest voxel center; ties round toward +infinity.
  std::optional<Index3> operator()(const Vec3& p) const {
    const Vec3 c = continuous(p);
    Index3 out{};
    for (int a = 0; a < 3; ++a) {
      const double r = std::floor(c[a] + 0.5);
      if (!(r >= 0.0) || r >= static_cast<double>(dims_[a])) return std::nullopt;
      out[a] = static_cast<std::int64_t>(r);
    }
    return out;
  }

private:
  Vec3 origin_;
  Index3 dims_;
  Mat3 inverse_;
};

inline std::optional<Index3> physical_to_index(const GridGeometry& g, const Vec3& p) {
  return PhysicalToIndex(g)(p);
}

struct HuRange {
  HU lo = -1024;
  HU hi = 4096;
};

struct CtVolume {
  GridGeometry geometry;
  std::vector<std::int16_t> values;

  CtVolume() = default;
  CtVolume(GridGeometry g, std::vector<std::int16_t> v)
      : geometry(std::move(g)), values(std::move(v)) {
    validate(geometry);
    if (values.size() != geometry.voxel_count())
      throw GeometryError("volume value count " + std::to_string(values.size()) +
                          " does not match grid size " +
                          std::to_string(geometry.voxel_count()));
  }

  static CtVolume filled(const GridGeometry& g, HU value) {
    return CtVolume(g, std::vector<std::int16_t>(g.voxel_count(), static_cast<std::int16_t>(value)));
  }

  std::int16_t at(const Index3& i) const { return values[geometry.linear(i)]; }
  std::int16_t& at(const Index3& i) { return values[geometry.linear(i)]; }
};

/// Throws InputError naming the first voxel outside the accepted HU range.
inline void validate_hu(const CtVolume& v, HuRange range = {}) {
  for (std::size_t n = 0; n < v.values.size(); ++n) {
    if (v.values[n] < range.lo || v.values[n] > range.hi) {
      throw InputError("HU value " + std::to_string(v.values[n]) + " at voxel " +
                       std::to_string(n) + " outside [" + std::to_string(range.lo) + ", " +
                       std::to_string(range.hi) + "]");
    }
  }
}

struct VoxelMask {
  GridGeometry geometry;
  std::vector<std::uint8_t> bits;

  VoxelMask() = default;
  explicit VoxelMask(GridGeometry g) : geometry(std::move(g)), bits(geometry.voxel_count(), 0) {
    validate(geometry);
  }
  VoxelMask(GridGeometry g, std::vector<std::uint8_t> b)
      : geometry(std::move(g)), bits(std::move(b)) {
    validate(geometry);
    if (bits.size() != geometry.voxel_count())
      throw GeometryError("mask size does not match grid size");
    for (auto& x : bits) x = x ? 1 : 0;
  }

  bool at(const Index3& i) const { return bits[geometry.linear(i)] != 0; }
  void set(const Index3& i, bool on = true) { bits[geometry.linear(i)] = on ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  bool empty() const { return count() == 0; }

  friend bool operator==(const VoxelMask& a, const VoxelMask& b) {
    return a.geometry == b.geometry && a.bits == b.bits;
  }
};

inline void require_same_geometry(const GridGeometry& a, const GridGeometry& b,
                                  const char* what) {
  if (!(a == b)) {
    throw GeometryError(std::string(what) + ": grid geometry mismatch\n  first:  " +
                        describe(a) + "\n  second: " + describe(b));
  }
}

namespace detail {
template <typename Op>
VoxelMask combine(const VoxelMask& a, const VoxelMask& b, const char* what, Op op) {
  require_same_geometry(a.geometry, b.geometry, what);
  VoxelMask out(a.geometry);
  for (std::size_t n = 0; n < out.bits.size(); ++n) out.bits[n] = op(a.bits[n], b.bits[n]) ? 1 : 0;
  return out;
}
} // namespace detail

inline VoxelMask mask_and(const VoxelMask& a, const VoxelMask& b) {
  return detail::combine(a, b, "mask_and", [](auto x, auto y) { return x && y; });
}
inline VoxelMask mask_or(const VoxelMask& a, const VoxelMask& b) {
  return detail::combine(a, b, "mask_or", [](auto x, auto y) { return x || y; });
}
/// a AND NOT b
inline VoxelMask mask_and_not(const VoxelMask& a, const VoxelMask& b) {
  return detail::combine(a, b, "mask_and_not", [](auto x, auto y) { return x && !y; });
}
inline VoxelMask mask_not(const VoxelMask& a) {
  VoxelMask out(a.geometry);
  for (std::size_t n = 0; n < out.bits.size(); ++n) out.bits[n] = a.bits[n] ? 0 : 1;
  return out;
}
inline bool is_subset(const VoxelMask& a, const VoxelMask& b) {
  require_same_geometry(a.geometry, b.geometry, "is_subset");
  for (std::size_t n = 0; n < a.bits.size(); ++n)
    if (a.bits[n] && !b.bits[n]) return false;
  return true;
}

/// Voxels strictly above tau.
inline VoxelMask threshold_mask(const CtVolume& vol, HU tau) {
  VoxelMask out(vol.geometry);
  for (std::size_t n = 0; n < out.bits.size(); ++n) out.bits[n] = vol.values[n] > tau ? 1 : 0;
  return out;
}

} // namespace vict
