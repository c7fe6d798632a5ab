// vict: command-line front end for CT updating from intraoperative surface
// reconstructions.
//
// Exit codes: 0 success, 2 input/format error, 3 geometry/registration
// error, 4 internal invariant violation.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vict/pipeline.hpp"

using namespace vict;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitGeometry = 3;
constexpr int kExitInternal = 4;

struct CommonFlags {
  unsigned threads = 0;
  std::string fcsv_frame = "RAS";
  bool raw = false;
};

struct RayFlags {
  std::optional<double> step_mm;
  int dilate = RayVoxParams{}.dilation_radius;
  int close = RayVoxParams{}.closing_radius;
  bool no_fill_holes = false;

  RayVoxParams params() const {
    RayVoxParams p;
    p.step_mm = step_mm;
    p.dilation_radius = dilate;
    p.closing_radius = close;
    p.fill_holes = !no_fill_holes;
    return p;
  }
};

void add_ray_flags(CLI::App* cmd, RayFlags& f) {
  cmd->add_option("--step-mm", f.step_mm, "Ray sample spacing in mm (default: half the smallest voxel spacing)");
  cmd->add_option("--dilate", f.dilate, "Dilation radius in voxels")->capture_default_str();
  cmd->add_option("--close", f.close, "Closing radius in voxels")->capture_default_str();
  cmd->add_flag("--no-fill-holes", f.no_fill_holes, "Skip hole filling");
}

Frame parse_frame(const std::string& s) {
  if (s == "RAS") return Frame::RAS;
  if (s == "LPS") return Frame::LPS;
  throw InputError("--fcsv-frame must be RAS or LPS");
}

NrrdEncoding encoding(const CommonFlags& c) { return c.raw ? NrrdEncoding::raw : NrrdEncoding::gzip; }

RigidTransform load_transform(const std::string& path) {
  if (path.empty()) return RigidTransform::identity();
  return stage("read transform", [&] { return read_transform(path).transform; });
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual intraoperative CT: update a preoperative CT from surface reconstructions"};
  app.require_subcommand(1);
  CommonFlags common;
  app.add_option("--threads", common.threads, "Worker threads (0 = all cores)");
  app.add_option("--fcsv-frame", common.fcsv_frame,
                 "Frame assumed for FCSV files without a CoordinateSystem line (RAS or LPS)")
      ->capture_default_str();
  app.add_flag("--raw", common.raw, "Write raw instead of gzip NRRD payloads");

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom case");
  std::string spec_path, phantom_out;
  phantom->add_option("--spec", spec_path, "Phantom spec JSON")->required();
  phantom->add_option("--out", phantom_out, "Output directory")->required();

  // register
  auto* reg = app.add_subcommand("register", "Rigid landmark registration (source -> target)");
  std::string reg_src, reg_dst, reg_out;
  reg->add_option("--src", reg_src, "Landmarks in the reconstruction frame (FCSV)")->required();
  reg->add_option("--dst", reg_dst, "Landmarks in the CT frame (FCSV)")->required();
  reg->add_option("--out", reg_out, "Transform JSON output")->required();

  // voxelize
  auto* vox = app.add_subcommand("voxelize", "Build the reconstruction mask on the CT grid");
  std::string vox_mesh, vox_camera, vox_ref, vox_transform, vox_out;
  RayFlags vox_flags;
  vox->add_option("--mesh", vox_mesh, "Reconstruction STL")->required();
  vox->add_option("--camera", vox_camera, "Camera origin FCSV")->required();
  vox->add_option("--reference", vox_ref, "CT volume defining the grid (NRRD)")->required();
  vox->add_option("--transform", vox_transform, "Transform JSON (default identity)");
  vox->add_option("--out", vox_out, "Mask NRRD output")->required();
  add_ray_flags(vox, vox_flags);

  // update
  auto* upd = app.add_subcommand("update", "Produce a viCT volume from a pCT and a reconstruction");
  std::string upd_pct, upd_mesh, upd_camera, upd_transform, upd_mask_in, upd_out, upd_mask_out;
  RayFlags upd_flags;
  UpdateParams upd_params;
  upd->add_option("--pct", upd_pct, "Preoperative CT (NRRD)")->required();
  upd->add_option("--mesh", upd_mesh, "Reconstruction STL");
  upd->add_option("--camera", upd_camera, "Camera origin FCSV");
  upd->add_option("--transform", upd_transform, "Transform JSON (default identity)");
  upd->add_option("--mask", upd_mask_in, "Use an existing reconstruction mask instead of --mesh/--camera");
  upd->add_option("--out", upd_out, "viCT NRRD output")->required();
  upd->add_option("--mask-out", upd_mask_out, "Write the reconstruction mask here");
  upd->add_option("--tau-hu", upd_params.tau, "Anatomy threshold in HU")->capture_default_str();
  upd->add_option("--air-hu", upd_params.air_hu, "HU assigned to removed voxels")->capture_default_str();
  add_ray_flags(upd, upd_flags);

  // eval
  auto* ev = app.add_subcommand("eval", "Compare a viCT against ground truth inside the reconstruction ROI");
  std::string ev_vict, ev_gt, ev_mask, ev_out;
  EvalParams ev_params;
  bool ev_per_axis = false;
  ev->add_option("--vict", ev_vict, "viCT NRRD")->required();
  ev->add_option("--gt", ev_gt, "Ground-truth interval CT NRRD")->required();
  ev->add_option("--mask", ev_mask, "Reconstruction mask NRRD (defines the ROI)")->required();
  ev->add_option("--out", ev_out, "Report JSON output (default stdout)");
  ev->add_option("--margin", ev_params.margin, "ROI margin in voxels")->capture_default_str();
  ev->add_option("--tau-hu", ev_params.tau, "Anatomy threshold in HU")->capture_default_str();
  ev->add_flag("--per-axis-mm", ev_per_axis,
               "Anisotropic Euclidean distances instead of mean-spacing conversion");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run register/update/eval over a manifest of intervals");
  std::string pipe_manifest, pipe_out;
  pipe->add_option("--manifest", pipe_manifest, "Manifest JSON")->required();
  pipe->add_option("--out", pipe_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    set_thread_count(common.threads);
    const Frame frame = parse_frame(common.fcsv_frame);

    if (*phantom) {
      const PhantomSpec spec = stage("read spec", [&] { return phantom_spec_from_json(read_json(spec_path)); });
      const auto m = stage("phantom", [&] { return write_phantom_case(spec, phantom_out); });
      std::cout << "phantom: wrote pCT, " << m.intervals.size() << " intervals and manifest.json to "
                << phantom_out << "\n";
    } else if (*reg) {
      const auto out = stage("register", [&] {
        return register_landmarks(read_fcsv(reg_src, frame), read_fcsv(reg_dst, frame));
      });
      write_json(to_json(out.record), reg_out);
      std::cout << "register: " << out.record.pair_count << " pairs, FRE " << out.record.fre_mm << " mm\n";
      for (const auto& l : out.record.unmatched) std::cerr << "register: unmatched label \"" << l << "\" skipped\n";
      if (out.warn_count)
        std::cerr << "register: warning: " << out.record.pair_count << " landmarks (3-10 customary)\n";
    } else if (*vox) {
      const RigidTransform t = load_transform(vox_transform);
      const CtVolume ref = stage("read reference", [&] { return read_nrrd(vox_ref); });
      const auto rec = stage("voxelize", [&] {
        return recon_mask_in_ct(read_stl(vox_mesh), read_camera(vox_camera, frame), t, ref.geometry,
                                vox_flags.params());
      });
      write_mask_nrrd(rec.mask, vox_out, encoding(common));
      std::cout << "voxelize: " << rec.rays.rays << " rays (" << rec.rays.degenerate_rays << " degenerate), "
                << rec.mask.count() << " voxels\n";
    } else if (*upd) {
      const CtVolume pct = stage("read pCT", [&] { return read_nrrd(upd_pct); });
      VoxelMask recon_mask;
      if (!upd_mask_in.empty()) {
        if (!upd_mesh.empty() || !upd_camera.empty())
          throw InputError("update: --mask excludes --mesh/--camera");
        recon_mask = stage("read mask", [&] { return read_mask_nrrd(upd_mask_in); });
      } else {
        if (upd_mesh.empty() || upd_camera.empty())
          throw InputError("update: --mesh and --camera are required unless --mask is given");
        const RigidTransform t = load_transform(upd_transform);
        recon_mask = stage("voxelize", [&] {
                  return recon_mask_in_ct(read_stl(upd_mesh), read_camera(upd_camera, frame), t, pct.geometry,
                                          upd_flags.params());
                }).mask;
      }
      const CtVolume vict = stage("update", [&] { return update_volume(pct, recon_mask, upd_params); });
      write_nrrd(vict, upd_out, encoding(common));
      if (!upd_mask_out.empty()) write_mask_nrrd(recon_mask, upd_mask_out, encoding(common));
      std::cout << "update: reconstruction mask " << recon_mask.count() << " voxels, occupied "
                << threshold_mask(vict, upd_params.tau).count() << " of "
                << threshold_mask(pct, upd_params.tau).count() << "\n";
    } else if (*ev) {
      if (ev_per_axis) ev_params.mode = DistanceMode::per_axis;
      const CtVolume vict = stage("read viCT", [&] { return read_nrrd(ev_vict); });
      const CtVolume gt = stage("read ground truth", [&] { return read_nrrd(ev_gt); });
      const VoxelMask m = stage("read mask", [&] { return read_mask_nrrd(ev_mask); });
      const MetricsReport r = stage("eval", [&] { return evaluate(vict, gt, m, ev_params); });
      const auto j = to_json(r, {{"vict", ev_vict, sha256_file(ev_vict)},
                                 {"gt", ev_gt, sha256_file(ev_gt)},
                                 {"mrec", ev_mask, sha256_file(ev_mask)}});
      if (ev_out.empty()) std::cout << j.dump(2) << "\n";
      else write_json(j, ev_out);
    } else if (*pipe) {
      const PipelineManifest m = stage("manifest", [&] { return load_manifest(pipe_manifest); });
      const auto out = run_pipeline(m, pipe_out, std::cout);
      std::size_t prev = 0;
      for (const auto& iv : out.intervals) {
        if (iv.index > 1 && iv.occupied_voxels > prev)
          throw std::logic_error("occupied voxel count increased at interval " + std::to_string(iv.index));
        prev = iv.occupied_voxels;
      }
    }
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const GeometryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeometry;
  } catch (const RegistrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeometry;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return EXIT_SUCCESS;
}
