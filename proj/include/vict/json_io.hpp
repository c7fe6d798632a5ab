#pragma once

// JSON encodings: phantom specs, rigid transforms and metrics reports.
// Key order is fixed so that output bytes are reproducible.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vict/errors.hpp"
#include "vict/metrics.hpp"
#include "vict/phantom.hpp"
#include "vict/register.hpp"

namespace vict {

using ordered_json = nlohmann::ordered_json;

namespace json_detail {

inline Vec3 vec3(const ordered_json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw FormatError(what + ": expected an array of 3 numbers");
  Vec3 v;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw FormatError(what + ": expected numbers");
    v[a] = j[a].get<double>();
  }
  return v;
}

inline ordered_json to_json(const Vec3& v) { return ordered_json::array({v[0], v[1], v[2]}); }
inline ordered_json to_json(const Index3& v) { return ordered_json::array({v[0], v[1], v[2]}); }

inline Eigen::Matrix4d mat4(const ordered_json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw FormatError(what + ": expected a 4x4 array");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw FormatError(what + ": expected a 4x4 array");
    for (int c = 0; c < 4; ++c) {
      if (!j[r][c].is_number()) throw FormatError(what + ": expected numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

inline ordered_json to_json(const Eigen::Matrix4d& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < 4; ++r) rows.push_back(ordered_json::array({m(r, 0), m(r, 1), m(r, 2), m(r, 3)}));
  return rows;
}

inline Shape shape(const ordered_json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("type") || !j.contains("center"))
    throw FormatError(what + ": shape needs \"type\" and \"center\"");
  const auto type = j.at("type").get<std::string>();
  const Vec3 c = vec3(j.at("center"), what + ".center");
  if (type == "sphere") {
    if (!j.contains("radius") || !j.at("radius").is_number()) throw FormatError(what + ": sphere needs \"radius\"");
    return Shape::sphere(c, j.at("radius").get<double>());
  }
  if (type == "ellipsoid") return Shape::ellipsoid(c, vec3(j.at("radii"), what + ".radii"));
  if (type == "box") {
    const char* key = j.contains("half_extents") ? "half_extents" : "radii";
    return Shape::box(c, vec3(j.at(key), what + "." + key));
  }
  throw FormatError(what + ": unknown shape type \"" + type + "\"");
}

inline ordered_json to_json(const Shape& s) {
  ordered_json j;
  switch (s.kind) {
    case Shape::Kind::sphere:
      j["type"] = "sphere";
      j["center"] = to_json(s.center);
      j["radius"] = s.radii[0];
      break;
    case Shape::Kind::ellipsoid:
      j["type"] = "ellipsoid";
      j["center"] = to_json(s.center);
      j["radii"] = to_json(s.radii);
      break;
    case Shape::Kind::box:
      j["type"] = "box";
      j["center"] = to_json(s.center);
      j["half_extents"] = to_json(s.radii);
      break;
  }
  return j;
}

} // namespace json_detail

inline ordered_json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json(const ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline RigidTransform transform_from_json(const ordered_json& j) {
  if (j.contains("matrix")) return from_matrix(json_detail::mat4(j.at("matrix"), "matrix"));
  RigidTransform t;
  if (j.contains("rotation_axis")) {
    Vec3 axis = json_detail::vec3(j.at("rotation_axis"), "rotation_axis");
    if (!(axis.norm() > 0)) throw FormatError("rotation_axis must be non-zero");
    const double deg = j.value("rotation_deg", 0.0);
    t.rotation = Eigen::AngleAxisd(deg * M_PI / 180.0, axis.normalized()).toRotationMatrix();
  }
  if (j.contains("translation")) t.translation = json_detail::vec3(j.at("translation"), "translation");
  return t;
}

struct TransformRecord {
  RigidTransform transform;
  double fre_mm = 0.0;
  std::size_t pair_count = 0;
  std::vector<std::string> unmatched;
};

inline ordered_json to_json(const TransformRecord& r) {
  ordered_json j;
  j["schema"] = "vict-rigid-transform/1";
  j["maps"] = "source (reconstruction frame) to target (CT frame), LPS mm";
  j["matrix"] = json_detail::to_json(r.transform.matrix());
  j["fre_mm"] = r.fre_mm;
  j["pair_count"] = r.pair_count;
  j["unmatched_labels"] = r.unmatched;
  return j;
}

inline PhantomSpec phantom_spec_from_json(const ordered_json& j) {
  using namespace json_detail;
  PhantomSpec s;
  if (!j.is_object()) throw FormatError("phantom spec must be a JSON object");
  static const char* known[] = {"dims", "spacing", "origin", "direction", "tissue_hu", "background_hu",
                                "cavities", "resections", "seed", "perturb", "visible_faces_only"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw FormatError("phantom spec: unknown field \"" + key + "\"");
  }
  try {
    const Vec3 dims = vec3(j.at("dims"), "dims");
    for (int a = 0; a < 3; ++a) {
      if (dims[a] != std::floor(dims[a]) || dims[a] < 1) throw FormatError("dims must be positive integers");
      s.dims[a] = static_cast<std::int64_t>(dims[a]);
    }
    if (j.contains("spacing")) s.spacing = vec3(j.at("spacing"), "spacing");
    if (j.contains("origin")) s.origin = vec3(j.at("origin"), "origin");
    if (j.contains("direction")) {
      const auto& d = j.at("direction");
      if (!d.is_array() || d.size() != 3) throw FormatError("direction must be 3 rows");
      for (int r = 0; r < 3; ++r) s.direction.row(r) = vec3(d[r], "direction row").transpose();
    }
    s.tissue_hu = j.value("tissue_hu", s.tissue_hu);
    s.background_hu = j.value("background_hu", s.background_hu);
    s.seed = j.value("seed", std::uint64_t{0});
    s.visible_faces_only = j.value("visible_faces_only", false);
    if (j.contains("cavities"))
      for (std::size_t c = 0; c < j.at("cavities").size(); ++c)
        s.cavities.push_back(shape(j.at("cavities")[c], "cavities[" + std::to_string(c) + "]"));
    if (j.contains("resections"))
      for (std::size_t k = 0; k < j.at("resections").size(); ++k) {
        std::vector<Shape> interval;
        const auto& list = j.at("resections")[k];
        if (!list.is_array()) throw FormatError("each resection interval must be an array of shapes");
        for (std::size_t c = 0; c < list.size(); ++c)
          interval.push_back(shape(list[c], "resections[" + std::to_string(k) + "][" + std::to_string(c) + "]"));
        s.resections.push_back(std::move(interval));
      }
    if (j.contains("perturb") && !j.at("perturb").is_null()) s.perturb = transform_from_json(j.at("perturb"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("phantom spec: ") + e.what());
  }
  return s;
}

inline ordered_json to_json(const PhantomSpec& s) {
  using namespace json_detail;
  ordered_json j;
  j["dims"] = to_json(s.dims);
  j["spacing"] = to_json(s.spacing);
  j["origin"] = to_json(s.origin);
  ordered_json dir = ordered_json::array();
  for (int r = 0; r < 3; ++r) dir.push_back(to_json(Vec3(s.direction.row(r).transpose())));
  j["direction"] = dir;
  j["tissue_hu"] = s.tissue_hu;
  j["background_hu"] = s.background_hu;
  j["cavities"] = ordered_json::array();
  for (const auto& c : s.cavities) j["cavities"].push_back(to_json(c));
  j["resections"] = ordered_json::array();
  for (const auto& interval : s.resections) {
    ordered_json list = ordered_json::array();
    for (const auto& c : interval) list.push_back(to_json(c));
    j["resections"].push_back(list);
  }
  j["seed"] = s.seed;
  if (s.perturb) j["perturb"] = {{"matrix", to_json(s.perturb->matrix())}};
  j["visible_faces_only"] = s.visible_faces_only;
  return j;
}

struct InputDigest {
  std::string role;
  std::string path;
  std::string sha256;
};

inline ordered_json to_json(const MetricsReport& r, const std::vector<InputDigest>& inputs = {}) {
  using namespace json_detail;
  ordered_json j;
  j["schema"] = "vict-metrics-report/1";
  j["dsc"] = r.dsc;
  j["jaccard"] = r.jaccard;
  j["hd95"] = r.hd95;
  j["hd100"] = r.hd100;
  j["chamfer"] = r.chamfer;
  j["msd"] = r.msd;
  j["rmsd"] = r.rmsd;
  j["roi"] = {{"lo", to_json(r.roi.lo)}, {"hi", to_json(r.roi.hi)}};
  j["voxel_counts"] = {{"a_only", r.voxel_counts.a_only}, {"b_only", r.voxel_counts.b_only}, {"both", r.voxel_counts.both}};
  j["surface_voxels"] = {{"a", r.surface_a}, {"b", r.surface_b}};
  j["mean_spacing"] = r.mean_spacing;
  j["distance_mode"] = to_string(r.distance_mode);
  j["params"] = {{"tau_hu", r.tau}, {"margin", r.margin}};
  ordered_json in = ordered_json::array();
  for (const auto& d : inputs) in.push_back({{"role", d.role}, {"path", d.path}, {"sha256", d.sha256}});
  j["inputs"] = in;
  return j;
}

inline MetricsReport report_from_json(const ordered_json& j) {
  MetricsReport r;
  try {
    r.dsc = j.at("dsc").get<double>();
    r.jaccard = j.at("jaccard").get<double>();
    r.hd95 = j.at("hd95").get<double>();
    r.hd100 = j.at("hd100").get<double>();
    r.chamfer = j.at("chamfer").get<double>();
    r.msd = j.at("msd").get<double>();
    r.rmsd = j.at("rmsd").get<double>();
    for (int a = 0; a < 3; ++a) {
      r.roi.lo[a] = j.at("roi").at("lo")[a].get<std::int64_t>();
      r.roi.hi[a] = j.at("roi").at("hi")[a].get<std::int64_t>();
    }
    r.voxel_counts = {j.at("voxel_counts").at("a_only").get<std::size_t>(),
                      j.at("voxel_counts").at("b_only").get<std::size_t>(),
                      j.at("voxel_counts").at("both").get<std::size_t>()};
    r.surface_a = j.at("surface_voxels").at("a").get<std::size_t>();
    r.surface_b = j.at("surface_voxels").at("b").get<std::size_t>();
    r.mean_spacing = j.at("mean_spacing").get<double>();
    r.distance_mode = j.at("distance_mode").get<std::string>() == "per-axis" ? DistanceMode::per_axis
                                                                             : DistanceMode::mean_spacing;
    r.tau = j.at("params").at("tau_hu").get<HU>();
    r.margin = j.at("params").at("margin").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics report: ") + e.what());
  }
  return r;
}

} // namespace vict
