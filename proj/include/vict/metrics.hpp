#pragma once

// Overlap and surface-distance metrics between two masks inside an index-space
// region of interest.
//
// Surface voxels are set voxels with an unset 6-neighbour or lying on the ROI
// boundary. Distances are pooled symmetrically over both surfaces. By default
// index-space distances are converted to mm with the mean voxel spacing; the
// per-axis mode measures anisotropic Euclidean distance instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vict/edt.hpp"
#include "vict/errors.hpp"
#include "vict/morphology.hpp"
#include "vict/volgrid.hpp"

namespace vict {

enum class DistanceMode { mean_spacing, per_axis };

inline const char* to_string(DistanceMode m) {
  return m == DistanceMode::mean_spacing ? "mean-spacing" : "per-axis";
}

struct VoxelCounts {
  std::size_t a_only = 0;
  std::size_t b_only = 0;
  std::size_t both = 0;
};

struct Overlap {
  double dsc = 1.0;
  double jaccard = 1.0;
  VoxelCounts counts;
};

struct SurfaceDistances {
  double msd = 0.0;
  double rmsd = 0.0;
  double hd95 = 0.0;
  double hd100 = 0.0;
  double chamfer = 0.0;
  std::size_t surface_a = 0;
  std::size_t surface_b = 0;
};

struct MetricsReport {
  double dsc = 1.0;
  double jaccard = 1.0;
  double hd95 = 0.0;
  double hd100 = 0.0;
  double chamfer = 0.0;
  double msd = 0.0;
  double rmsd = 0.0;
  IndexBox roi;
  VoxelCounts voxel_counts;
  double mean_spacing = 1.0;
  DistanceMode distance_mode = DistanceMode::mean_spacing;
  std::size_t surface_a = 0;
  std::size_t surface_b = 0;
  HU tau = -300;
  std::int64_t margin = 3;
};

/// Bounding box of the set voxels grown by `margin` on every side, clipped to the grid.
inline IndexBox roi_from_mask(const VoxelMask& recon_mask, std::int64_t margin) {
  if (margin < 0) throw InputError("ROI margin must be non-negative");
  const IndexBox box = bounding_box(recon_mask);
  if (box.empty()) throw InputError("cannot derive an ROI from an empty reconstruction mask");
  return expand_clip(box, margin, recon_mask.geometry.dims);
}

namespace metrics_detail {

inline void check_roi(const IndexBox& roi, const GridGeometry& g) {
  if (roi.empty()) throw InputError("ROI is empty");
  for (int a = 0; a < 3; ++a)
    if (roi.lo[a] < 0 || roi.hi[a] >= g.dims[a]) throw InputError("ROI extends outside the grid");
}

template <typename Fn>
void for_each_in(const IndexBox& roi, Fn&& fn) {
  for (std::int64_t z = roi.lo[2]; z <= roi.hi[2]; ++z)
    for (std::int64_t y = roi.lo[1]; y <= roi.hi[1]; ++y)
      for (std::int64_t x = roi.lo[0]; x <= roi.hi[0]; ++x) fn(Index3{x, y, z});
}

} // namespace metrics_detail

inline Overlap overlap(const VoxelMask& a, const VoxelMask& b, const IndexBox& roi) {
  require_same_geometry(a.geometry, b.geometry, "overlap");
  metrics_detail::check_roi(roi, a.geometry);
  Overlap out;
  metrics_detail::for_each_in(roi, [&](const Index3& i) {
    const auto n = a.geometry.linear(i);
    if (a.bits[n] && b.bits[n]) ++out.counts.both;
    else if (a.bits[n]) ++out.counts.a_only;
    else if (b.bits[n]) ++out.counts.b_only;
  });
  const auto& c = out.counts;
  const double size_a = double(c.a_only + c.both), size_b = double(c.b_only + c.both);
  if (size_a + size_b == 0.0) return out;  // both empty: perfect agreement
  out.dsc = 2.0 * double(c.both) / (size_a + size_b);
  out.jaccard = double(c.both) / double(c.a_only + c.b_only + c.both);
  return out;
}

/// Surface voxels of m inside roi, in increasing linear-index order.
inline std::vector<Index3> surface_extract(const VoxelMask& m, const IndexBox& roi) {
  metrics_detail::check_roi(roi, m.geometry);
  std::vector<Index3> out;
  metrics_detail::for_each_in(roi, [&](const Index3& i) {
    if (!m.at(i)) return;
    for (int a = 0; a < 3; ++a) {
      if (i[a] == roi.lo[a] || i[a] == roi.hi[a]) {
        out.push_back(i);
        return;
      }
    }
    for (int a = 0; a < 3; ++a)
      for (int s : {-1, 1}) {
        Index3 j = i;
        j[a] += s;
        if (!m.at(j)) {
          out.push_back(i);
          return;
        }
      }
  });
  return out;
}

/// 95th percentile with linear interpolation between closest ranks.
inline double percentile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - double(lo)) * (values[lo + 1] - values[lo]);
}

namespace metrics_detail {

// Distance from each point of `from` to the nearest point of `to`, in units
// determined by weights (squared per-axis scale).
inline std::vector<double> nearest_distances(const std::vector<Index3>& from, const std::vector<Index3>& to,
                                             const IndexBox& roi, std::array<double, 3> weights) {
  BitBox target(roi.extent());
  for (const auto& p : to) target.data[target.index(p[0] - roi.lo[0], p[1] - roi.lo[1], p[2] - roi.lo[2])] = 1;
  const auto d2 = squared_edt(target, weights);
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& p : from)
    out.push_back(std::sqrt(d2[target.index(p[0] - roi.lo[0], p[1] - roi.lo[1], p[2] - roi.lo[2])]));
  return out;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

} // namespace metrics_detail

inline SurfaceDistances surface_distances(const VoxelMask& a, const VoxelMask& b, const IndexBox& roi,
                                          DistanceMode mode = DistanceMode::mean_spacing) {
  require_same_geometry(a.geometry, b.geometry, "surface_distances");
  const auto sa = surface_extract(a, roi);
  const auto sb = surface_extract(b, roi);
  if (sa.empty() && sb.empty()) throw InputError("both surfaces (A and B) are empty within the ROI");
  if (sa.empty()) throw InputError("surface of mask A is empty within the ROI");
  if (sb.empty()) throw InputError("surface of mask B is empty within the ROI");

  const Vec3& s = a.geometry.spacing;
  const std::array<double, 3> weights =
      mode == DistanceMode::per_axis ? std::array<double, 3>{s[0] * s[0], s[1] * s[1], s[2] * s[2]}
                                     : std::array<double, 3>{1.0, 1.0, 1.0};
  const double scale = mode == DistanceMode::per_axis ? 1.0 : a.geometry.mean_spacing();

  const auto da = metrics_detail::nearest_distances(sa, sb, roi, weights);
  const auto db = metrics_detail::nearest_distances(sb, sa, roi, weights);

  std::vector<double> pooled;
  pooled.reserve(da.size() + db.size());
  pooled.insert(pooled.end(), da.begin(), da.end());
  pooled.insert(pooled.end(), db.begin(), db.end());

  double sum = 0.0, sum_sq = 0.0, max = 0.0;
  for (double d : pooled) {
    sum += d;
    sum_sq += d * d;
    max = std::max(max, d);
  }
  const double n = double(pooled.size());

  SurfaceDistances out;
  out.msd = sum / n * scale;
  out.rmsd = std::sqrt(sum_sq / n) * scale;
  out.hd100 = max * scale;
  out.hd95 = percentile_linear(pooled, 0.95) * scale;
  out.chamfer = 0.5 * (metrics_detail::mean(da) + metrics_detail::mean(db)) * scale;
  out.surface_a = sa.size();
  out.surface_b = sb.size();
  return out;
}

struct EvalParams {
  HU tau = -300;
  std::int64_t margin = 3;
  DistanceMode mode = DistanceMode::mean_spacing;
};

/// Thresholds both volumes, restricts to the reconstruction ROI and fills a report.
inline MetricsReport evaluate(const CtVolume& vict, const CtVolume& gt, const VoxelMask& recon_mask,
                              const EvalParams& params = {}) {
  require_same_geometry(vict.geometry, gt.geometry, "evaluate (viCT vs ground truth)");
  require_same_geometry(vict.geometry, recon_mask.geometry, "evaluate (viCT vs reconstruction mask)");
  const VoxelMask a = threshold_mask(vict, params.tau);
  const VoxelMask b = threshold_mask(gt, params.tau);

  MetricsReport r;
  r.roi = roi_from_mask(recon_mask, params.margin);
  const Overlap ov = overlap(a, b, r.roi);
  const SurfaceDistances sd = surface_distances(a, b, r.roi, params.mode);
  r.dsc = ov.dsc;
  r.jaccard = ov.jaccard;
  r.voxel_counts = ov.counts;
  r.msd = sd.msd;
  r.rmsd = sd.rmsd;
  r.hd95 = sd.hd95;
  r.hd100 = sd.hd100;
  r.chamfer = sd.chamfer;
  r.surface_a = sd.surface_a;
  r.surface_b = sd.surface_b;
  r.mean_spacing = vict.geometry.mean_spacing();
  r.distance_mode = params.mode;
  r.tau = params.tau;
  r.margin = params.margin;
  return r;
}

} // namespace vict
