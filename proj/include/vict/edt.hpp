#pragma once

// Exact squared Euclidean distance transform on a 3D box of voxels
// (separable lower-envelope-of-parabolas algorithm), with optional
// per-axis weights for anisotropic spacing.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "vict/parallel.hpp"

namespace vict {

/// Dense byte grid over a box; x fastest.
struct BitBox {
  std::array<std::int64_t, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> data;

  BitBox() = default;
  explicit BitBox(std::array<std::int64_t, 3> d)
      : dims(d), data(static_cast<std::size_t>(d[0] * d[1] * d[2]), 0) {}

  std::size_t size() const { return data.size(); }
  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::size_t>(x + dims[0] * (y + dims[1] * z));
  }
};

inline constexpr double kEdtInfinity = std::numeric_limits<double>::infinity();

namespace edt_detail {

// One 1D pass: f holds squared distances along a line, weight scales index
// differences (squared spacing). Output written back into f.
inline void envelope_1d(std::vector<double>& f, double weight, std::vector<std::int64_t>& v,
                        std::vector<double>& z, std::vector<double>& out) {
  const auto n = static_cast<std::int64_t>(f.size());
  out.assign(f.size(), kEdtInfinity);
  v.assign(f.size(), 0);
  z.assign(f.size() + 1, 0.0);
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == kEdtInfinity) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kEdtInfinity;
      z[1] = kEdtInfinity;
      continue;
    }
    double s;
    while (true) {
      const std::int64_t p = v[k];
      s = ((f[q] + weight * double(q * q)) - (f[p] + weight * double(p * p))) /
          (2.0 * weight * double(q - p));
      if (s <= z[k]) --k;  // z[0] is -inf, so k stays >= 0
      else break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kEdtInfinity;
  }
  if (k < 0) {
    f.assign(f.size(), kEdtInfinity);
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[j + 1] < double(q)) ++j;
    const double d = double(q - v[j]);
    out[q] = weight * d * d + f[v[j]];
  }
  f.swap(out);
}

} // namespace edt_detail

/// Squared distance from every voxel to the nearest voxel with features=1,
/// measured in weighted index units: d^2 = sum_a w_a * (di_a)^2. With unit
/// weights and integer offsets the result is an exact integer. Voxels with no
/// feature anywhere in the box get +infinity.
inline std::vector<double> squared_edt(const BitBox& features,
                                       std::array<double, 3> weights = {1.0, 1.0, 1.0}) {
  const auto& d = features.dims;
  std::vector<double> dist(features.size());
  for (std::size_t n = 0; n < dist.size(); ++n) dist[n] = features.data[n] ? 0.0 : kEdtInfinity;
  if (dist.empty()) return dist;

  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    const std::int64_t len = d[axis];
    const std::size_t lines = static_cast<std::size_t>(d[a1] * d[a2]);
    parallel_for_chunks(lines, [&](std::size_t lo, std::size_t hi) {
      std::vector<double> f(static_cast<std::size_t>(len)), out;
      std::vector<std::int64_t> v;
      std::vector<double> z;
      for (std::size_t line = lo; line < hi; ++line) {
        std::array<std::int64_t, 3> c{};
        c[a1] = static_cast<std::int64_t>(line) % d[a1];
        c[a2] = static_cast<std::int64_t>(line) / d[a1];
        for (std::int64_t t = 0; t < len; ++t) {
          c[axis] = t;
          f[t] = dist[features.index(c[0], c[1], c[2])];
        }
        edt_detail::envelope_1d(f, weights[axis], v, z, out);
        for (std::int64_t t = 0; t < len; ++t) {
          c[axis] = t;
          dist[features.index(c[0], c[1], c[2])] = f[t];
        }
      }
    });
  }
  return dist;
}

} // namespace vict
