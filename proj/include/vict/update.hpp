#pragma once

// Voxel-wise CT update: tissue voxels outside the intraoperative reconstruction
// keep their HU value; everything else becomes air.

#include <string>
#include <vector>

#include "vict/errors.hpp"
#include "vict/volgrid.hpp"

namespace vict {

struct UpdateParams {
  HU tau = -300;
  HU air_hu = -1000;
};

inline void validate(const UpdateParams& p) {
  if (p.air_hu > p.tau)
    throw InputError("air HU (" + std::to_string(p.air_hu) + ") must not exceed the threshold (" +
                     std::to_string(p.tau) + ")");
  if (p.air_hu < -32768 || p.air_hu > 32767) throw InputError("air HU outside 16-bit range");
}

/// Tissue voxels not covered by the reconstruction.
inline VoxelMask vict_mask(const VoxelMask& tissue, const VoxelMask& recon_mask) {
  require_same_geometry(tissue.geometry, recon_mask.geometry, "vict_mask");
  return mask_and_not(tissue, recon_mask);
}

inline CtVolume apply_update(const CtVolume& pct, const VoxelMask& kept, const UpdateParams& params) {
  validate(params);
  require_same_geometry(pct.geometry, kept.geometry, "apply_update");
  CtVolume out = pct;
  const auto air = static_cast<std::int16_t>(params.air_hu);
  for (std::size_t n = 0; n < out.values.size(); ++n)
    if (!kept.bits[n]) out.values[n] = air;
  return out;
}

/// Single-interval update of a pCT from one reconstruction mask.
inline CtVolume update_volume(const CtVolume& pct, const VoxelMask& recon_mask, const UpdateParams& params) {
  validate(params);
  return apply_update(pct, vict_mask(threshold_mask(pct, params.tau), recon_mask), params);
}

/// Interval k is always computed from the original pCT against the union of
/// reconstruction masks 1..k.
inline std::vector<CtVolume> sequential_update(const CtVolume& pct, const std::vector<VoxelMask>& recon_masks,
                                               const UpdateParams& params) {
  validate(params);
  for (std::size_t k = 0; k < recon_masks.size(); ++k)
    require_same_geometry(pct.geometry, recon_masks[k].geometry,
                          ("sequential_update interval " + std::to_string(k + 1)).c_str());
  const VoxelMask tissue = threshold_mask(pct, params.tau);
  std::vector<CtVolume> out;
  out.reserve(recon_masks.size());
  VoxelMask cumulative(pct.geometry);
  for (const auto& m : recon_masks) {
    cumulative = mask_or(cumulative, m);
    out.push_back(apply_update(pct, vict_mask(tissue, cumulative), params));
  }
  return out;
}

} // namespace vict
