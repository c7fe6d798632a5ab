#pragma once

// End-to-end orchestration used by the command-line tool: registration,
// per-interval reconstruction masks, cumulative CT updates and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "vict/errors.hpp"
#include "vict/fcsv.hpp"
#include "vict/json_io.hpp"
#include "vict/metrics.hpp"
#include "vict/nrrd.hpp"
#include "vict/phantom.hpp"
#include "vict/rayvox.hpp"
#include "vict/register.hpp"
#include "vict/stl.hpp"
#include "vict/update.hpp"

namespace vict {

namespace fs = std::filesystem;

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw InputError("sha256 failed for " + path.string());
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

/// Re-throws the exception currently being handled with `stage` prefixed,
/// keeping its category.
[[noreturn]] inline void rethrow_with_stage(const std::string& stage) {
  try {
    throw;
  } catch (const FormatError& e) {
    throw FormatError(stage + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(stage + ": " + e.what());
  } catch (const GeometryError& e) {
    throw GeometryError(stage + ": " + e.what());
  } catch (const RegistrationError& e) {
    throw RegistrationError(stage + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw std::out_of_range(stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::logic_error(stage + ": " + e.what());
  }
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (...) {
    rethrow_with_stage(name);
  }
}

/// Camera origin from an FCSV: the point labelled "camera", or the only point.
inline Vec3 read_camera(const fs::path& path, Frame default_frame) {
  const FiducialSet set = to_lps(read_fcsv(path, default_frame));
  if (const auto* p = set.find("camera")) return p->position;
  if (set.points.size() != 1)
    throw InputError(path.string() + ": expected one camera fiducial (or one labelled \"camera\"), found " +
                     std::to_string(set.points.size()));
  return set.points.front().position;
}

struct RegistrationOutcome {
  TransformRecord record;
  bool warn_count = false;  // outside the customary 3-10 landmarks
};

inline RegistrationOutcome register_landmarks(const FiducialSet& src, const FiducialSet& dst) {
  const PairingResult paired = pair_by_label(src, dst);
  const RigidFit fit = fit_rigid(paired.pairs);
  RegistrationOutcome out;
  out.record = {fit.transform, fit.fre, paired.pairs.pairs.size(), paired.unmatched};
  out.warn_count = paired.pairs.pairs.size() < 3 || paired.pairs.pairs.size() > 10;
  return out;
}

inline TransformRecord read_transform(const fs::path& path) {
  const auto j = read_json(path);
  TransformRecord r;
  r.transform = transform_from_json(j);
  r.fre_mm = j.value("fre_mm", 0.0);
  r.pair_count = j.value("pair_count", std::size_t{0});
  return r;
}

/// Maps mesh and camera into the CT frame and builds the reconstruction mask there.
inline ReconMask recon_mask_in_ct(const TriMesh& mesh, const Vec3& camera, const RigidTransform& to_ct,
                                  const GridGeometry& geom, const RayVoxParams& params) {
  return build_recon_mask(apply_transform(to_ct, mesh), to_ct(camera), geom, params);
}

struct IntervalInput {
  fs::path recon_stl;
  fs::path camera_fcsv;
  std::optional<fs::path> gt;
};

struct PipelineParams {
  RayVoxParams rayvox;
  UpdateParams update;
  std::int64_t margin = 3;
  DistanceMode distance_mode = DistanceMode::mean_spacing;
  Frame fcsv_default_frame = Frame::RAS;
};

struct PipelineManifest {
  fs::path pct;
  std::optional<fs::path> landmarks_src;
  std::optional<fs::path> landmarks_dst;
  std::vector<IntervalInput> intervals;
  PipelineParams params;
};

inline ordered_json to_json(const PipelineManifest& m) {
  ordered_json j;
  j["pct"] = m.pct.generic_string();
  if (m.landmarks_src) j["landmarks_src"] = m.landmarks_src->generic_string();
  if (m.landmarks_dst) j["landmarks_dst"] = m.landmarks_dst->generic_string();
  j["intervals"] = ordered_json::array();
  for (const auto& iv : m.intervals) {
    ordered_json e;
    e["recon_stl"] = iv.recon_stl.generic_string();
    e["camera_fcsv"] = iv.camera_fcsv.generic_string();
    if (iv.gt) e["gt"] = iv.gt->generic_string();
    j["intervals"].push_back(e);
  }
  const auto& p = m.params;
  ordered_json params;
  if (p.rayvox.step_mm) params["step_mm"] = *p.rayvox.step_mm;
  else params["step_mm"] = nullptr;
  params["dilate"] = p.rayvox.dilation_radius;
  params["close"] = p.rayvox.closing_radius;
  params["fill_holes"] = p.rayvox.fill_holes;
  params["tau_hu"] = p.update.tau;
  params["air_hu"] = p.update.air_hu;
  params["margin"] = p.margin;
  params["per_axis_mm"] = p.distance_mode == DistanceMode::per_axis;
  params["fcsv_frame"] = to_string(p.fcsv_default_frame);
  j["params"] = params;
  return j;
}

/// Parses a manifest; relative paths resolve against the manifest directory.
/// Every referenced file must exist.
inline PipelineManifest load_manifest(const fs::path& path) {
  const auto j = read_json(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  PipelineManifest m;
  try {
    m.pct = resolve(j.at("pct").get<std::string>());
    if (j.contains("landmarks_src") != j.contains("landmarks_dst"))
      throw FormatError("manifest: landmarks_src and landmarks_dst must be given together");
    if (j.contains("landmarks_src")) {
      m.landmarks_src = resolve(j.at("landmarks_src").get<std::string>());
      m.landmarks_dst = resolve(j.at("landmarks_dst").get<std::string>());
    }
    for (const auto& e : j.at("intervals")) {
      IntervalInput iv;
      iv.recon_stl = resolve(e.at("recon_stl").get<std::string>());
      iv.camera_fcsv = resolve(e.at("camera_fcsv").get<std::string>());
      if (e.contains("gt") && !e.at("gt").is_null()) iv.gt = resolve(e.at("gt").get<std::string>());
      m.intervals.push_back(std::move(iv));
    }
    if (j.contains("params")) {
      const auto& p = j.at("params");
      auto& P = m.params;
      if (p.contains("step_mm") && !p.at("step_mm").is_null()) P.rayvox.step_mm = p.at("step_mm").get<double>();
      P.rayvox.dilation_radius = p.value("dilate", P.rayvox.dilation_radius);
      P.rayvox.closing_radius = p.value("close", P.rayvox.closing_radius);
      P.rayvox.fill_holes = p.value("fill_holes", P.rayvox.fill_holes);
      P.update.tau = p.value("tau_hu", P.update.tau);
      P.update.air_hu = p.value("air_hu", P.update.air_hu);
      P.margin = p.value("margin", P.margin);
      if (p.value("per_axis_mm", false)) P.distance_mode = DistanceMode::per_axis;
      const std::string frame = p.value("fcsv_frame", std::string("RAS"));
      if (frame == "RAS") P.fcsv_default_frame = Frame::RAS;
      else if (frame == "LPS") P.fcsv_default_frame = Frame::LPS;
      else throw FormatError("manifest: fcsv_frame must be RAS or LPS");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (m.intervals.empty()) throw InputError(path.string() + ": manifest lists no intervals");

  std::vector<std::string> missing;
  auto need = [&](const fs::path& p) {
    if (!fs::exists(p)) missing.push_back(p.string());
  };
  need(m.pct);
  if (m.landmarks_src) {
    need(*m.landmarks_src);
    need(*m.landmarks_dst);
  }
  for (const auto& iv : m.intervals) {
    need(iv.recon_stl);
    need(iv.camera_fcsv);
    if (iv.gt) need(*iv.gt);
  }
  if (!missing.empty()) {
    std::string msg = path.string() + ": missing input files:";
    for (const auto& f : missing) msg += "\n  " + f;
    throw InputError(msg);
  }
  validate(m.params.rayvox);
  validate(m.params.update);
  return m;
}

struct IntervalOutcome {
  std::size_t index = 0;  // 1-based
  fs::path vict_path;
  fs::path mrec_path;
  std::size_t occupied_voxels = 0;
  std::optional<MetricsReport> report;
  std::optional<fs::path> report_path;
};

struct PipelineOutcome {
  TransformRecord registration;
  bool registered = false;
  std::vector<IntervalOutcome> intervals;
};

/// Runs the whole manifest, writing vict_k.nrrd, mrec_k.nrrd (cumulative
/// reconstruction mask) and report_k.json into out_dir.
inline PipelineOutcome run_pipeline(const PipelineManifest& m, const fs::path& out_dir, std::ostream& log) {
  fs::create_directories(out_dir);
  const auto& P = m.params;
  PipelineOutcome out;

  const CtVolume pct = stage("read pCT", [&] { return read_nrrd(m.pct); });
  RigidTransform to_ct = RigidTransform::identity();
  if (m.landmarks_src) {
    const auto reg = stage("register", [&] {
      return register_landmarks(read_fcsv(*m.landmarks_src, P.fcsv_default_frame),
                                read_fcsv(*m.landmarks_dst, P.fcsv_default_frame));
    });
    out.registration = reg.record;
    out.registered = true;
    to_ct = reg.record.transform;
    log << "register: " << reg.record.pair_count << " landmark pairs, FRE " << reg.record.fre_mm << " mm\n";
    if (reg.warn_count) log << "register: warning: landmark count outside 3-10\n";
    write_json(to_json(reg.record), out_dir / "transform.json");
  } else {
    log << "register: no landmarks in manifest, using identity transform\n";
  }

  const VoxelMask tissue = threshold_mask(pct, P.update.tau);
  VoxelMask cumulative(pct.geometry);
  for (std::size_t k = 0; k < m.intervals.size(); ++k) {
    const auto& iv = m.intervals[k];
    const std::string tag = "interval " + std::to_string(k + 1);
    IntervalOutcome res;
    res.index = k + 1;
    const ReconMask rec = stage(tag + " voxelize", [&] {
      const TriMesh mesh = read_stl(iv.recon_stl);
      const Vec3 camera = read_camera(iv.camera_fcsv, P.fcsv_default_frame);
      return recon_mask_in_ct(mesh, camera, to_ct, pct.geometry, P.rayvox);
    });
    cumulative = mask_or(cumulative, rec.mask);
    const CtVolume vict = stage(tag + " update", [&] {
      return apply_update(pct, vict_mask(tissue, cumulative), P.update);
    });
    res.vict_path = out_dir / ("vict_" + std::to_string(k + 1) + ".nrrd");
    res.mrec_path = out_dir / ("mrec_" + std::to_string(k + 1) + ".nrrd");
    stage(tag + " write", [&] {
      write_nrrd(vict, res.vict_path);
      write_mask_nrrd(cumulative, res.mrec_path);
    });
    res.occupied_voxels = threshold_mask(vict, P.update.tau).count();
    log << tag << ": " << rec.rays.rays << " rays, reconstruction mask " << rec.mask.count() << " voxels, occupied "
        << res.occupied_voxels << "\n";
    if (iv.gt) {
      const MetricsReport report = stage(tag + " eval", [&] {
        const CtVolume gt = read_nrrd(*iv.gt);
        return evaluate(vict, gt, cumulative, {P.update.tau, P.margin, P.distance_mode});
      });
      res.report_path = out_dir / ("report_" + std::to_string(k + 1) + ".json");
      write_json(to_json(report, {{"vict", res.vict_path.filename().string(), sha256_file(res.vict_path)},
                                  {"gt", iv.gt->filename().string(), sha256_file(*iv.gt)},
                                  {"mrec", res.mrec_path.filename().string(), sha256_file(res.mrec_path)}}),
                 *res.report_path);
      log << tag << ": DSC " << report.dsc << ", HD95 " << report.hd95 << " mm\n";
      res.report = report;
    } else {
      log << tag << ": no ground truth in manifest, evaluation skipped\n";
    }
    out.intervals.push_back(std::move(res));
  }
  return out;
}

/// Writes a complete phantom case: pct.nrrd, gt_k.nrrd, recon_k.stl,
/// camera_k.fcsv, landmarks_{src,dst}.fcsv and a manifest.json that the
/// pipeline can run directly.
inline PipelineManifest write_phantom_case(const PhantomSpec& spec, const fs::path& out_dir,
                                           const PipelineParams& params = {}) {
  validate(spec);
  fs::create_directories(out_dir);
  PipelineManifest m;
  m.params = params;
  m.params.fcsv_default_frame = Frame::LPS;
  write_nrrd(make_pct(spec), out_dir / "pct.nrrd");
  m.pct = "pct.nrrd";
  const FiducialSet dst = phantom_landmarks(spec);
  const RigidTransform perturb = spec.perturb.value_or(RigidTransform::identity());
  write_fcsv(apply_transform(perturb, dst), out_dir / "landmarks_src.fcsv");
  write_fcsv(dst, out_dir / "landmarks_dst.fcsv");
  m.landmarks_src = "landmarks_src.fcsv";
  m.landmarks_dst = "landmarks_dst.fcsv";
  for (std::size_t k = 1; k <= spec.interval_count(); ++k) {
    const std::string n = std::to_string(k);
    const PhantomRecon rec = make_recon(spec, k);
    write_nrrd(make_interval_gt(spec, k), out_dir / ("gt_" + n + ".nrrd"));
    write_stl_binary(rec.mesh, out_dir / ("recon_" + n + ".stl"));
    write_fcsv(rec.camera, out_dir / ("camera_" + n + ".fcsv"));
    m.intervals.push_back({"recon_" + n + ".stl", "camera_" + n + ".fcsv", fs::path("gt_" + n + ".nrrd")});
  }
  write_json(to_json(m), out_dir / "manifest.json");
  return m;
}

} // namespace vict
