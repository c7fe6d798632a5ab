#pragma once

// Reconstruction occupancy mask on the CT grid: rays from the camera origin
// through every mesh vertex are sampled into voxels, then the sparse
// scaffold is solidified by dilation, closing and hole filling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "vict/errors.hpp"
#include "vict/mesh.hpp"
#include "vict/morphology.hpp"
#include "vict/parallel.hpp"
#include "vict/volgrid.hpp"

namespace vict {

struct RayVoxParams {
  std::optional<double> step_mm;  // unset: half the smallest voxel spacing
  int dilation_radius = 0;
  int closing_radius = 2;
  bool fill_holes = true;
};

inline double resolved_step(const RayVoxParams& p, const GridGeometry& g) {
  return p.step_mm ? *p.step_mm : 0.5 * g.spacing.minCoeff();
}

inline void validate(const RayVoxParams& p) {
  if (p.step_mm && !(*p.step_mm > 0.0 && std::isfinite(*p.step_mm)))
    throw InputError("ray step must be positive");
  if (p.dilation_radius < 0 || p.closing_radius < 0)
    throw InputError("morphology radii must be non-negative");
}

/// Rays shorter than this are treated as the single camera point.
inline constexpr double kDegenerateRay = 1e-9;

struct RayCastResult {
  VoxelMask mask;
  std::size_t rays = 0;
  std::size_t degenerate_rays = 0;  // vertex coincident with the camera
  std::size_t samples_in_grid = 0;
  std::size_t samples_outside = 0;
};

/// Samples r(t) = camera + t * d for t in {0, step, 2 step, ...} below the ray
/// length, plus the vertex itself, and marks the nearest voxel of each
/// in-grid sample.
inline RayCastResult cast_rays(const TriMesh& mesh, const Vec3& camera, const GridGeometry& geom,
                               double step) {
  if (mesh.vertices.empty()) throw InputError("cannot cast rays through an empty mesh");
  if (!camera.allFinite()) throw InputError("camera origin is not finite");
  if (!(step > 0.0) || !std::isfinite(step)) throw InputError("ray step must be positive");

  RayCastResult out{VoxelMask(geom)};
  out.rays = mesh.vertices.size();
  const PhysicalToIndex to_index(geom);
  std::atomic<std::size_t> degenerate{0}, inside{0}, outside{0};

  parallel_for_chunks(mesh.vertices.size(), [&](std::size_t lo, std::size_t hi) {
    std::size_t deg = 0, in = 0, off = 0;
    auto mark = [&](const Vec3& p) {
      if (const auto idx = to_index(p)) {
        std::atomic_ref<std::uint8_t>(out.mask.bits[geom.linear(*idx)]).store(1, std::memory_order_relaxed);
        ++in;
      } else {
        ++off;
      }
    };
    for (std::size_t m = lo; m < hi; ++m) {
      const Vec3& v = mesh.vertices[m];
      const double length = (v - camera).norm();
      if (length < kDegenerateRay) {
        ++deg;
        mark(camera);
        continue;
      }
      const Vec3 dir = (v - camera) / length;
      for (std::size_t j = 0;; ++j) {
        const double t = static_cast<double>(j) * step;
        if (t >= length) break;
        mark(camera + t * dir);
      }
      mark(v);
    }
    degenerate += deg;
    inside += in;
    outside += off;
  });
  out.degenerate_rays = degenerate;
  out.samples_in_grid = inside;
  out.samples_outside = outside;
  return out;
}

/// Dilation, then closing, then (optionally) hole filling. Computed on the
/// bounding box of the input padded far enough that the result is the same
/// as on the whole grid.
inline VoxelMask solidify(const VoxelMask& mask, const RayVoxParams& params) {
  validate(params);
  const IndexBox bbox = bounding_box(mask);
  if (bbox.empty()) return VoxelMask(mask.geometry);
  const std::int64_t pad = params.dilation_radius + 2 * params.closing_radius + 2;
  const IndexBox box = expand_clip(bbox, pad, mask.geometry.dims);

  BitBox work = crop(mask, box);
  work = dilate(work, params.dilation_radius);
  work = close(work, params.closing_radius);
  if (params.fill_holes) work = fill_holes(work);

  VoxelMask out(mask.geometry);
  paste(work, box, out);
  return out;
}

struct ReconMask {
  VoxelMask mask;
  RayCastResult rays;
};

inline ReconMask build_recon_mask(const TriMesh& mesh, const Vec3& camera, const GridGeometry& geom,
                                  const RayVoxParams& params) {
  validate(params);
  validate(mesh);
  auto rays = cast_rays(mesh, camera, geom, resolved_step(params, geom));
  VoxelMask solid = solidify(rays.mask, params);
  return {std::move(solid), std::move(rays)};
}

} // namespace vict
