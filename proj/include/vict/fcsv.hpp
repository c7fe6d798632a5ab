#pragma once

// Slicer markups fiducial CSV (FCSV). Only id, x, y, z and label are consumed.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vict/errors.hpp"
#include "vict/volgrid.hpp"

namespace vict {

enum class Frame { LPS, RAS };

inline const char* to_string(Frame f) { return f == Frame::LPS ? "LPS" : "RAS"; }

struct Fiducial {
  std::string label;
  Vec3 position = Vec3::Zero();
};

struct FiducialSet {
  std::vector<Fiducial> points;
  Frame frame = Frame::LPS;

  const Fiducial* find(const std::string& label) const {
    for (const auto& p : points)
      if (p.label == label) return &p;
    return nullptr;
  }
};

inline void validate(const FiducialSet& f) {
  std::set<std::string> seen;
  for (const auto& p : f.points) {
    if (!seen.insert(p.label).second) throw FormatError("duplicate fiducial label \"" + p.label + "\"");
    if (!p.position.allFinite()) throw FormatError("fiducial \"" + p.label + "\" is not finite");
  }
}

/// RAS -> LPS negates x and y. LPS input is returned unchanged.
inline FiducialSet to_lps(FiducialSet f) {
  if (f.frame == Frame::RAS) {
    for (auto& p : f.points) {
      p.position[0] = -p.position[0];
      p.position[1] = -p.position[1];
    }
    f.frame = Frame::LPS;
  }
  return f;
}

namespace fcsv_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    else if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else cur += c;
  }
  out.push_back(trim(cur));
  return out;
}

} // namespace fcsv_detail

/// Parses an FCSV file. The frame is taken from the CoordinateSystem comment;
/// when absent, `default_frame` applies (Slicer writes RAS by default). No
/// frame conversion happens here; see to_lps.
inline FiducialSet read_fcsv(const std::filesystem::path& path, Frame default_frame = Frame::RAS) {
  using namespace fcsv_detail;
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string name = path.string();

  FiducialSet set;
  set.frame = default_frame;
  bool version_seen = false;
  std::size_t label_col = 11;
  std::string line;
  int line_no = 0;
  int row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      const auto eq = body.find('=');
      const std::string key = trim(body.substr(0, eq));
      const std::string value = eq == std::string::npos ? "" : trim(body.substr(eq + 1));
      if (key.rfind("Markups fiducial file version", 0) == 0) {
        version_seen = true;
      } else if (key == "CoordinateSystem") {
        if (value == "RAS" || value == "0") set.frame = Frame::RAS;
        else if (value == "LPS" || value == "1") set.frame = Frame::LPS;
        else throw FormatError(name + ": line " + std::to_string(line_no) +
                               ": unknown coordinate system \"" + value + "\"");
      } else if (key == "columns") {
        const auto cols = split_csv(value);
        if (cols.size() < 4 || cols[0] != "id" || cols[1] != "x" || cols[2] != "y" || cols[3] != "z")
          throw FormatError(name + ": line " + std::to_string(line_no) +
                            ": columns must start with id,x,y,z");
        for (std::size_t c = 0; c < cols.size(); ++c)
          if (cols[c] == "label") label_col = c;
      }
      continue;
    }
    if (!version_seen)
      throw FormatError(name + ": missing \"# Markups fiducial file version\" header");
    ++row;
    const auto cells = split_csv(t);
    if (cells.size() < 4)
      throw FormatError(name + ": row " + std::to_string(row) + " (line " +
                        std::to_string(line_no) + ") has fewer than 4 columns");
    Fiducial f;
    for (int a = 0; a < 3; ++a) {
      const std::string& cell = cells[1 + a];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0' || !std::isfinite(v))
        throw FormatError(name + ": row " + std::to_string(row) + " (line " +
                          std::to_string(line_no) + "): non-numeric coordinate \"" + cell + "\"");
      f.position[a] = v;
    }
    f.label = label_col < cells.size() && !cells[label_col].empty() ? cells[label_col] : cells[0];
    if (f.label.empty())
      throw FormatError(name + ": row " + std::to_string(row) + " has neither label nor id");
    set.points.push_back(std::move(f));
  }
  if (!version_seen)
    throw FormatError(name + ": missing \"# Markups fiducial file version\" header");
  validate(set);
  return set;
}

/// Writes a v4.11-layout FCSV declaring the set's frame.
inline void write_fcsv(const FiducialSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << "# Markups fiducial file version = 4.11\n";
  out << "# CoordinateSystem = " << to_string(set.frame) << "\n";
  out << "# columns = id,x,y,z,ow,ox,oy,oz,vis,sel,lock,label,desc,associatedNodeID\n";
  char buf[64];
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    const auto& p = set.points[i];
    out << "vtkMRMLMarkupsFiducialNode_" << i;
    for (int a = 0; a < 3; ++a) {
      std::snprintf(buf, sizeof buf, ",%.17g", p.position[a]);
      out << buf;
    }
    out << ",0,0,0,1,1,1,0," << p.label << ",,\n";
  }
  if (!out) throw InputError("write failed: " + path.string());
}

} // namespace vict
