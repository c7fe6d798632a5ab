#pragma once

// Synthetic ground truth: a tissue block with air cavities, a sequence of
// resection intervals carved out of it, and per-interval reconstruction
// inputs (cavity surface mesh, camera fiducial, landmark pairs).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "vict/edt.hpp"
#include "vict/errors.hpp"
#include "vict/fcsv.hpp"
#include "vict/mesh.hpp"
#include "vict/parallel.hpp"
#include "vict/register.hpp"
#include "vict/volgrid.hpp"

namespace vict {

struct Shape {
  enum class Kind { sphere, ellipsoid, box };
  Kind kind = Kind::sphere;
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3::Ones();  // sphere uses radii[0]; box uses half extents

  bool contains(const Vec3& p) const {
    const Vec3 d = p - center;
    switch (kind) {
      case Kind::sphere: return d.squaredNorm() <= radii[0] * radii[0];
      case Kind::ellipsoid: return d.cwiseQuotient(radii).squaredNorm() <= 1.0;
      case Kind::box: return (d.cwiseAbs() - radii).maxCoeff() <= 0.0;
    }
    return false;
  }

  Vec3 half_extent() const { return kind == Kind::sphere ? Vec3::Constant(radii[0]) : radii; }

  static Shape sphere(const Vec3& c, double r) { return {Kind::sphere, c, Vec3::Constant(r)}; }
  static Shape ellipsoid(const Vec3& c, const Vec3& r) { return {Kind::ellipsoid, c, r}; }
  static Shape box(const Vec3& c, const Vec3& half) { return {Kind::box, c, half}; }
};

struct PhantomSpec {
  Index3 dims{64, 64, 64};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  Mat3 direction = Mat3::Identity();
  HU tissue_hu = 700;
  HU background_hu = -1000;
  std::vector<Shape> cavities;
  std::vector<std::vector<Shape>> resections;  // one shape list per interval
  std::uint64_t seed = 0;
  std::optional<RigidTransform> perturb;  // maps the true frame to the emitted mesh frame
  bool visible_faces_only = false;

  GridGeometry geometry() const { return {origin, spacing, direction, dims}; }
  std::size_t interval_count() const { return resections.size(); }
};

namespace phantom_detail {

// Voxels whose centers fall in any of the shapes.
inline VoxelMask shape_mask(const GridGeometry& g, const std::vector<Shape>& shapes) {
  VoxelMask m(g);
  if (shapes.empty()) return m;
  const auto slice = static_cast<std::size_t>(g.dims[0] * g.dims[1]);
  parallel_for(static_cast<std::size_t>(g.dims[2]), [&](std::size_t z) {
    for (std::int64_t y = 0; y < g.dims[1]; ++y)
      for (std::int64_t x = 0; x < g.dims[0]; ++x) {
        const Index3 i{x, y, static_cast<std::int64_t>(z)};
        const Vec3 p = index_to_physical(g, i);
        for (const auto& s : shapes)
          if (s.contains(p)) {
            m.bits[z * slice + static_cast<std::size_t>(y * g.dims[0] + x)] = 1;
            break;
          }
      }
  });
  return m;
}

inline void check_within(const GridGeometry& g, const Shape& s, const std::string& what) {
  const PhysicalToIndex to_index(g);
  const Vec3 h = s.half_extent();
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner = s.center + Vec3((c & 1) ? h[0] : -h[0], (c & 2) ? h[1] : -h[1], (c & 4) ? h[2] : -h[2]);
    const Vec3 ci = to_index.continuous(corner);
    for (int a = 0; a < 3; ++a)
      if (ci[a] < -0.5 - 1e-9 || ci[a] > double(g.dims[a]) - 0.5 + 1e-9)
        throw InputError(what + " extends outside the grid's physical extent");
  }
}

} // namespace phantom_detail

inline void validate(const PhantomSpec& spec) {
  const GridGeometry g = spec.geometry();
  validate(g);
  if (spec.tissue_hu <= spec.background_hu) throw InputError("tissue HU must exceed background HU");
  for (HU v : {spec.tissue_hu, spec.background_hu})
    if (v < -32768 || v > 32767) throw InputError("phantom HU outside 16-bit range");
  auto check_shape = [&](const Shape& s, const std::string& what) {
    if (!s.center.allFinite() || !s.radii.allFinite() || (s.half_extent().array() <= 0.0).any())
      throw InputError(what + " needs a finite center and positive radii");
    phantom_detail::check_within(g, s, what);
  };
  for (std::size_t c = 0; c < spec.cavities.size(); ++c) check_shape(spec.cavities[c], "cavity " + std::to_string(c));
  if (spec.perturb) validate(*spec.perturb);

  const VoxelMask cavity = phantom_detail::shape_mask(g, spec.cavities);
  for (std::size_t k = 0; k < spec.resections.size(); ++k) {
    for (std::size_t j = 0; j < spec.resections[k].size(); ++j) {
      const std::string what = "interval " + std::to_string(k + 1) + " resection " + std::to_string(j);
      const Shape& s = spec.resections[k][j];
      check_shape(s, what);
      const VoxelMask carved = phantom_detail::shape_mask(g, {s});
      bool hits_tissue = false;
      for (std::size_t n = 0; n < carved.bits.size() && !hits_tissue; ++n)
        hits_tissue = carved.bits[n] && !cavity.bits[n];
      if (!hits_tissue) throw InputError(what + " does not intersect tissue");
    }
  }
}

/// Tissue everywhere except voxel centers inside a cavity shape.
inline CtVolume make_pct(const PhantomSpec& spec) {
  const GridGeometry g = spec.geometry();
  const VoxelMask cavity = phantom_detail::shape_mask(g, spec.cavities);
  CtVolume vol = CtVolume::filled(g, spec.tissue_hu);
  for (std::size_t n = 0; n < cavity.bits.size(); ++n)
    if (cavity.bits[n]) vol.values[n] = static_cast<std::int16_t>(spec.background_hu);
  return vol;
}

/// Voxels removed by intervals 1..k (cumulative shape membership).
inline VoxelMask carved_mask(const PhantomSpec& spec, std::size_t k) {
  if (k < 1 || k > spec.interval_count())
    throw std::out_of_range("interval " + std::to_string(k) + " outside [1, " +
                            std::to_string(spec.interval_count()) + "]");
  std::vector<Shape> shapes;
  for (std::size_t j = 0; j < k; ++j) shapes.insert(shapes.end(), spec.resections[j].begin(), spec.resections[j].end());
  return phantom_detail::shape_mask(spec.geometry(), shapes);
}

inline CtVolume make_interval_gt(const PhantomSpec& spec, std::size_t k) {
  const VoxelMask carved = carved_mask(spec, k);
  CtVolume vol = make_pct(spec);
  for (std::size_t n = 0; n < carved.bits.size(); ++n)
    if (carved.bits[n]) vol.values[n] = static_cast<std::int16_t>(spec.background_hu);
  return vol;
}

/// 6-connected component labels of the set voxels (0 = unset), labelled in
/// scan order starting at 1.
inline std::vector<std::uint32_t> label_components(const VoxelMask& m, std::uint32_t* count = nullptr) {
  const auto& g = m.geometry;
  std::vector<std::uint32_t> labels(m.bits.size(), 0);
  std::uint32_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < m.bits.size(); ++s) {
    if (!m.bits[s] || labels[s]) continue;
    labels[s] = ++next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t n = stack.back();
      stack.pop_back();
      const Index3 i = g.unlinear(n);
      for (int a = 0; a < 3; ++a)
        for (int d : {-1, 1}) {
          Index3 j = i;
          j[a] += d;
          if (!g.contains(j)) continue;
          const auto nj = g.linear(j);
          if (m.bits[nj] && !labels[nj]) {
            labels[nj] = next;
            stack.push_back(nj);
          }
        }
    }
  }
  if (count) *count = next;
  return labels;
}

struct PhantomRecon {
  TriMesh mesh;               // emitted (perturbed) frame
  FiducialSet camera;         // one point labelled "camera", emitted frame
  FiducialSet landmarks_src;  // emitted frame
  FiducialSet landmarks_dst;  // true CT frame
  Vec3 camera_true = Vec3::Zero();
  VoxelMask cavity;           // cavity component that was meshed
};

/// Physical positions of the six fixed landmarks in the CT frame.
inline FiducialSet phantom_landmarks(const PhantomSpec& spec) {
  static constexpr std::array<std::array<double, 3>, 6> fractions{{{0.25, 0.25, 0.25},
                                                                   {0.75, 0.25, 0.25},
                                                                   {0.25, 0.75, 0.25},
                                                                   {0.25, 0.25, 0.75},
                                                                   {0.75, 0.75, 0.25},
                                                                   {0.75, 0.25, 0.75}}};
  FiducialSet out;
  out.frame = Frame::LPS;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    Vec3 c;
    for (int a = 0; a < 3; ++a) c[a] = fractions[k][a] * double(spec.dims[a] - 1) * spec.spacing[a];
    out.points.push_back({"L" + std::to_string(k + 1), spec.origin + spec.direction * c});
  }
  return out;
}

namespace phantom_detail {

// Deepest cavity point: centroid of the voxels farthest from tissue (grid
// exterior counts as tissue), or the first such voxel when the centroid falls
// outside that set.
inline Vec3 deepest_point(const VoxelMask& cavity) {
  const auto& g = cavity.geometry;
  BitBox solid({g.dims[0] + 2, g.dims[1] + 2, g.dims[2] + 2});
  for (std::int64_t z = 0; z < solid.dims[2]; ++z)
    for (std::int64_t y = 0; y < solid.dims[1]; ++y)
      for (std::int64_t x = 0; x < solid.dims[0]; ++x) {
        const bool border = x == 0 || y == 0 || z == 0 || x == solid.dims[0] - 1 ||
                            y == solid.dims[1] - 1 || z == solid.dims[2] - 1;
        solid.data[solid.index(x, y, z)] = border || !cavity.at({x - 1, y - 1, z - 1});
      }
  const auto d2 = squared_edt(solid);
  double best = -1.0;
  std::vector<std::size_t> argmax;
  for (std::size_t n = 0; n < cavity.bits.size(); ++n) {
    if (!cavity.bits[n]) continue;
    const Index3 i = g.unlinear(n);
    const double d = d2[solid.index(i[0] + 1, i[1] + 1, i[2] + 1)];
    if (d > best) {
      best = d;
      argmax.clear();
    }
    if (d == best) argmax.push_back(n);
  }
  if (argmax.empty()) throw InputError("cavity is empty");
  Vec3 centroid = Vec3::Zero();
  for (auto n : argmax) centroid += index_to_physical(g, g.unlinear(n));
  centroid /= double(argmax.size());
  if (const auto idx = physical_to_index(g, centroid)) {
    const auto n = g.linear(*idx);
    if (std::binary_search(argmax.begin(), argmax.end(), n)) return centroid;
  }
  return index_to_physical(g, g.unlinear(argmax.front()));
}

inline bool face_visible(const VoxelMask& cavity, const Vec3& camera, const Vec3& face_center,
                         const Vec3& inward) {
  const auto& g = cavity.geometry;
  const PhysicalToIndex to_index(g);
  const Vec3 target = face_center + inward * (0.25 * g.spacing.minCoeff());
  const double length = (target - camera).norm();
  const double step = 0.25 * g.spacing.minCoeff();
  const auto steps = static_cast<std::size_t>(std::ceil(length / step));
  for (std::size_t j = 0; j <= steps; ++j) {
    const double t = std::min(1.0, double(j) * step / std::max(length, 1e-12));
    const auto idx = to_index(camera + t * (target - camera));
    if (!idx || !cavity.at(*idx)) return false;
  }
  return true;
}

} // namespace phantom_detail

/// Cuberille mesh of the boundary of `cavity`: two triangles per exposed voxel
/// face, vertices at face corners, normals pointing out of the cavity.
inline TriMesh cuberille_mesh(const VoxelMask& cavity, const std::optional<Vec3>& visible_from = std::nullopt) {
  const auto& g = cavity.geometry;
  TriMesh mesh;
  std::unordered_map<std::int64_t, std::uint32_t> corner_ids;
  const std::int64_t lx = 2 * g.dims[0] + 1, ly = 2 * g.dims[1] + 1;
  // Corner lattice coordinates are doubled indices (2i - 1 .. 2i + 1).
  auto vertex = [&](std::int64_t cx, std::int64_t cy, std::int64_t cz) {
    const std::int64_t key = (cx + 1) + lx * ((cy + 1) + ly * (cz + 1));
    const auto [it, fresh] = corner_ids.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (fresh) {
      const Vec3 c(0.5 * double(cx) * g.spacing[0], 0.5 * double(cy) * g.spacing[1], 0.5 * double(cz) * g.spacing[2]);
      mesh.vertices.push_back(g.origin + g.direction * c);
    }
    return it->second;
  };
  for (std::size_t n = 0; n < cavity.bits.size(); ++n) {
    if (!cavity.bits[n]) continue;
    const Index3 i = g.unlinear(n);
    for (int a = 0; a < 3; ++a)
      for (int s : {-1, 1}) {
        Index3 j = i;
        j[a] += s;
        if (g.contains(j) && cavity.at(j)) continue;
        const int b = (a + 1) % 3, c = (a + 2) % 3;
        std::array<std::int64_t, 3> base{2 * i[0], 2 * i[1], 2 * i[2]};
        base[a] += s;
        if (visible_from) {
          Vec3 fc(0.5 * double(base[0]) * g.spacing[0], 0.5 * double(base[1]) * g.spacing[1],
                  0.5 * double(base[2]) * g.spacing[2]);
          Vec3 inward = Vec3::Zero();
          inward[a] = -double(s);
          if (!phantom_detail::face_visible(cavity, *visible_from, g.origin + g.direction * fc,
                                            g.direction * inward))
            continue;
        }
        std::array<std::uint32_t, 4> q{};
        const std::array<std::array<int, 2>, 4> square{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
        for (int k = 0; k < 4; ++k) {
          auto p = base;
          p[b] += square[k][0];
          p[c] += square[k][1];
          q[k] = vertex(p[0], p[1], p[2]);
        }
        if (s > 0) {
          mesh.triangles.push_back({q[0], q[1], q[2]});
          mesh.triangles.push_back({q[0], q[2], q[3]});
        } else {
          mesh.triangles.push_back({q[0], q[2], q[1]});
          mesh.triangles.push_back({q[0], q[3], q[2]});
        }
      }
  }
  return mesh;
}

/// Cavity (background) voxels of a volume.
inline VoxelMask cavity_mask(const CtVolume& vol, HU background_hu) {
  VoxelMask m(vol.geometry);
  for (std::size_t n = 0; n < m.bits.size(); ++n) m.bits[n] = vol.values[n] == background_hu ? 1 : 0;
  return m;
}

inline PhantomRecon make_recon(const PhantomSpec& spec, std::size_t k) {
  const CtVolume gt = make_interval_gt(spec, k);
  const VoxelMask all_cavity = cavity_mask(gt, spec.background_hu);
  if (all_cavity.empty()) throw InputError("interval " + std::to_string(k) + " has no cavity to reconstruct");

  PhantomRecon out;
  out.camera_true = phantom_detail::deepest_point(all_cavity);
  const auto& g = all_cavity.geometry;
  std::uint32_t components = 0;
  const auto labels = label_components(all_cavity, &components);
  if (components != 1)
    throw InputError("interval " + std::to_string(k) + " cavity is disconnected (" + std::to_string(components) +
                     " components); the camera cannot see all of it");
  const auto cam_idx = physical_to_index(g, out.camera_true);
  if (!cam_idx || !labels[g.linear(*cam_idx)])
    throw InputError("interval " + std::to_string(k) + " camera point is not inside the cavity");
  out.cavity = all_cavity;

  std::optional<Vec3> visible_from;
  if (spec.visible_faces_only) visible_from = out.camera_true;
  const TriMesh mesh_true = cuberille_mesh(out.cavity, visible_from);

  const RigidTransform perturb = spec.perturb.value_or(RigidTransform::identity());
  out.mesh = apply_transform(perturb, mesh_true);
  out.camera.frame = Frame::LPS;
  out.camera.points.push_back({"camera", perturb(out.camera_true)});
  out.landmarks_dst = phantom_landmarks(spec);
  out.landmarks_src = apply_transform(perturb, out.landmarks_dst);
  return out;
}

/// Random rigid transform with rotation angle up to max_angle_rad about a
/// uniformly random axis and translation components up to max_translation.
template <typename Rng>
RigidTransform random_rigid(Rng& rng, double max_angle_rad, double max_translation) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 axis(normal(rng), normal(rng), normal(rng));
  axis.normalize();
  const double angle = unit(rng) * max_angle_rad;
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  for (int a = 0; a < 3; ++a) t.translation[a] = (2.0 * unit(rng) - 1.0) * max_translation;
  return t;
}

/// A randomized single convex cavity (sphere, ellipsoid or box) with no
/// resection intervals other than one small carve touching the cavity.
inline PhantomSpec random_convex_spec(std::uint64_t seed, std::int64_t size = 40) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PhantomSpec spec;
  spec.seed = seed;
  spec.dims = {size, size, size};
  const double mid = 0.5 * double(size - 1);
  const double max_r = 0.3 * double(size);
  const Vec3 center(mid + (u(rng) - 0.5) * 4.0, mid + (u(rng) - 0.5) * 4.0, mid + (u(rng) - 0.5) * 4.0);
  const Vec3 radii(max_r * (0.5 + 0.5 * u(rng)), max_r * (0.5 + 0.5 * u(rng)), max_r * (0.5 + 0.5 * u(rng)));
  switch (seed % 3) {
    case 0: spec.cavities.push_back(Shape::sphere(center, radii[0])); break;
    case 1: spec.cavities.push_back(Shape::ellipsoid(center, radii)); break;
    default: spec.cavities.push_back(Shape::box(center, radii * 0.8)); break;
  }
  // One interval that slightly enlarges the same convex region.
  Shape grown = spec.cavities.front();
  grown.radii = grown.radii * 1.1;
  spec.resections.push_back({grown});
  return spec;
}

} // namespace vict
