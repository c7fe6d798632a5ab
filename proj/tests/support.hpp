#pragma once

// Shared fixtures and brute-force oracles for the test suites. Nothing here
// calls into the library's algorithms; the oracles are written from the
// definitions so they can check the fast paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "vict/volgrid.hpp"

namespace vict::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "vict") {
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
      auto p = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()));
      if (std::filesystem::create_directory(p)) {
        path_ = p;
        return;
      }
    }
    throw std::runtime_error("cannot create temporary directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline GridGeometry grid(Index3 dims, Vec3 spacing = Vec3::Ones(), Vec3 origin = Vec3::Zero(),
                         Mat3 direction = Mat3::Identity()) {
  return {origin, spacing, direction, dims};
}

/// Random mask made of a few random boxes plus salt noise, so it has both
/// solid regions and isolated voxels.
template <typename Rng>
VoxelMask random_mask(const GridGeometry& g, Rng& rng, double noise = 0.02) {
  VoxelMask m(g);
  std::uniform_int_distribution<int> nbox(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int boxes = nbox(rng);
  for (int b = 0; b < boxes; ++b) {
    Index3 lo, hi;
    for (int a = 0; a < 3; ++a) {
      std::uniform_int_distribution<std::int64_t> c(0, g.dims[a] - 1);
      std::int64_t p = c(rng), q = c(rng);
      lo[a] = std::min(p, q);
      hi[a] = std::max(p, q);
    }
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
      for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
        for (std::int64_t x = lo[0]; x <= hi[0]; ++x) m.set({x, y, z}, true);
  }
  for (auto& b : m.bits)
    if (u(rng) < noise) b = b ? 0 : 1;
  return m;
}

struct BruteBox {
  Index3 lo, hi;
  bool inside(const Index3& i) const {
    for (int a = 0; a < 3; ++a)
      if (i[a] < lo[a] || i[a] > hi[a]) return false;
    return true;
  }
};

/// Boundary voxels by definition: set, and either on the box face or with an
/// unset face neighbour.
inline std::vector<Index3> brute_surface(const VoxelMask& m, const BruteBox& box) {
  static const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<Index3> out;
  for (std::int64_t z = box.lo[2]; z <= box.hi[2]; ++z)
    for (std::int64_t y = box.lo[1]; y <= box.hi[1]; ++y)
      for (std::int64_t x = box.lo[0]; x <= box.hi[0]; ++x) {
        const Index3 i{x, y, z};
        if (!m.at(i)) continue;
        bool edge = false;
        for (const auto& d : nb) {
          const Index3 j{x + d[0], y + d[1], z + d[2]};
          if (!box.inside(j) || !m.at(j)) edge = true;
        }
        if (edge) out.push_back(i);
      }
  return out;
}

struct BruteDistances {
  double msd, rmsd, hd95, hd100, chamfer;
};

/// O(|A| |B|) nearest-neighbour distances, symmetric pooling, linear-rank
/// 95th percentile. `per_axis` scales each axis by its spacing; otherwise
/// index distances are multiplied by the mean spacing.
inline BruteDistances brute_distances(const std::vector<Index3>& a, const std::vector<Index3>& b, const Vec3& s,
                                      bool per_axis) {
  auto dist = [&](const Index3& p, const Index3& q) {
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = double(p[k] - q[k]) * (per_axis ? s[k] : 1.0);
      acc += d * d;
    }
    return std::sqrt(acc) * (per_axis ? 1.0 : (s[0] + s[1] + s[2]) / 3.0);
  };
  auto directed = [&](const std::vector<Index3>& from, const std::vector<Index3>& to) {
    std::vector<double> out;
    for (const auto& p : from) {
      double best = INFINITY;
      for (const auto& q : to) best = std::min(best, dist(p, q));
      out.push_back(best);
    }
    return out;
  };
  const auto da = directed(a, b), db = directed(b, a);
  std::vector<double> all(da);
  all.insert(all.end(), db.begin(), db.end());
  auto avg = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
  };
  double sq = 0;
  for (double x : all) sq += x * x;
  std::vector<double> sorted(all);
  std::sort(sorted.begin(), sorted.end());
  const double rank = 0.95 * double(sorted.size() - 1);
  const std::size_t r0 = std::size_t(rank);
  const std::size_t r1 = std::min(r0 + 1, sorted.size() - 1);
  const double hd95 = sorted[r0] + (rank - double(r0)) * (sorted[r1] - sorted[r0]);
  return {avg(all), std::sqrt(sq / double(all.size())), hd95, sorted.back(), 0.5 * (avg(da) + avg(db))};
}

/// Exact convex hull of integer points (incremental, strict visibility).
/// Faces are oriented so that interior points give orient <= 0.
class IntegerHull {
 public:
  using P = std::array<std::int64_t, 3>;

  explicit IntegerHull(std::vector<P> pts) : pts_(std::move(pts)) {
    std::sort(pts_.begin(), pts_.end());
    pts_.erase(std::unique(pts_.begin(), pts_.end()), pts_.end());
    seed();
    for (std::size_t i = 0; i < pts_.size(); ++i) add(i);
  }

  bool contains(const P& p) const {
    for (const auto& f : faces_)
      if (orient(pts_[f[0]], pts_[f[1]], pts_[f[2]], p) > 0) return false;
    return true;
  }
  std::size_t face_count() const { return faces_.size(); }

  static std::int64_t orient(const P& a, const P& b, const P& c, const P& p) {
    const std::int64_t ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const std::int64_t vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    const std::int64_t nx = uy * vz - uz * vy, ny = uz * vx - ux * vz, nz = ux * vy - uy * vx;
    return nx * (p[0] - a[0]) + ny * (p[1] - a[1]) + nz * (p[2] - a[2]);
  }

 private:
  void seed() {
    if (pts_.size() < 4) throw std::runtime_error("hull needs 4 points");
    const std::size_t a = 0;
    std::size_t b = 1, c = 0, d = 0;
    auto collinear = [&](std::size_t i) {
      const auto& p = pts_[a];
      const auto& q = pts_[b];
      const auto& r = pts_[i];
      const std::int64_t ux = q[0] - p[0], uy = q[1] - p[1], uz = q[2] - p[2];
      const std::int64_t vx = r[0] - p[0], vy = r[1] - p[1], vz = r[2] - p[2];
      return uy * vz - uz * vy == 0 && uz * vx - ux * vz == 0 && ux * vy - uy * vx == 0;
    };
    for (c = 2; c < pts_.size() && collinear(c); ++c) {}
    if (c == pts_.size()) throw std::runtime_error("hull points are collinear");
    for (d = 2; d < pts_.size() && (d == c || orient(pts_[a], pts_[b], pts_[c], pts_[d]) == 0); ++d) {}
    if (d == pts_.size()) throw std::runtime_error("hull points are coplanar");
    std::array<std::array<std::size_t, 3>, 4> f{{{a, b, c}, {a, b, d}, {a, c, d}, {b, c, d}}};
    const std::size_t opposite[4] = {d, c, b, a};
    for (int k = 0; k < 4; ++k) {
      if (orient(pts_[f[k][0]], pts_[f[k][1]], pts_[f[k][2]], pts_[opposite[k]]) > 0) std::swap(f[k][1], f[k][2]);
      faces_.push_back(f[k]);
    }
  }

  void add(std::size_t i) {
    const P& p = pts_[i];
    std::vector<char> visible(faces_.size(), 0);
    bool any = false;
    for (std::size_t k = 0; k < faces_.size(); ++k)
      if (orient(pts_[faces_[k][0]], pts_[faces_[k][1]], pts_[faces_[k][2]], p) > 0) visible[k] = any = true;
    if (!any) return;
    std::map<std::pair<std::size_t, std::size_t>, int> edges;
    for (std::size_t k = 0; k < faces_.size(); ++k)
      if (visible[k])
        for (int e = 0; e < 3; ++e) edges[{faces_[k][e], faces_[k][(e + 1) % 3]}] += 1;
    std::vector<std::array<std::size_t, 3>> next;
    for (std::size_t k = 0; k < faces_.size(); ++k)
      if (!visible[k]) next.push_back(faces_[k]);
    for (const auto& [e, n] : edges)
      if (!edges.count({e.second, e.first})) next.push_back({e.first, e.second, i});
    faces_ = std::move(next);
  }

  std::vector<P> pts_;
  std::vector<std::array<std::size_t, 3>> faces_;
};

/// 6-connected components of the unset voxels; returns the number of
/// components and whether every component reaches the grid boundary.
struct BackgroundComponents {
  std::size_t count = 0;
  bool all_touch_boundary = true;
};

inline BackgroundComponents background_components(const VoxelMask& m) {
  const auto& g = m.geometry;
  std::vector<char> seen(m.bits.size(), 0);
  BackgroundComponents out;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < m.bits.size(); ++s) {
    if (m.bits[s] || seen[s]) continue;
    ++out.count;
    bool touches = false;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index3 i = g.unlinear(stack.back());
      stack.pop_back();
      for (int a = 0; a < 3; ++a) {
        if (i[a] == 0 || i[a] == g.dims[a] - 1) touches = true;
        for (int d : {-1, 1}) {
          Index3 j = i;
          j[a] += d;
          if (!g.contains(j)) continue;
          const std::size_t n = g.linear(j);
          if (m.bits[n] || seen[n]) continue;
          seen[n] = 1;
          stack.push_back(n);
        }
      }
    }
    out.all_touch_boundary = out.all_touch_boundary && touches;
  }
  return out;
}

} // namespace vict::testing
