#pragma once

// Reader/writer for the attached-header NRRD subset used for CT volumes and
// masks: dimension 3, int16 or float32 samples, little endian, raw or gzip.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <Eigen/SVD>

#include "vict/errors.hpp"
#include "vict/volgrid.hpp"

namespace vict {

static_assert(std::endian::native == std::endian::little,
              "NRRD payload handling assumes a little-endian host");

enum class NrrdEncoding { raw, gzip };

namespace nrrd_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

inline std::string inflate_gzip(const std::string& in, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw FormatError("zlib inflateInit failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    throw FormatError("gzip payload decoded to " + std::to_string(produced) +
                      " bytes, expected " + std::to_string(expected));
  }
  return out;
}

inline std::string deflate_gzip(const std::string& in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw InputError("zlib deflateInit failed");
  std::string out(deflateBound(&zs, static_cast<uLong>(in.size())) + 32, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw InputError("zlib deflate failed");
  return out;
}

struct HeaderLine {
  int number;
  std::string text;
  std::string value;
};

[[noreturn]] inline void fail(const HeaderLine& l, const std::string& why) {
  throw FormatError("NRRD header line " + std::to_string(l.number) + " \"" + l.text + "\": " + why);
}

inline std::vector<double> parse_numbers(const std::string& s, const HeaderLine& l) {
  std::vector<double> out;
  std::string cleaned = s;
  for (char& c : cleaned)
    if (c == '(' || c == ')' || c == ',') c = ' ';
  std::istringstream is(cleaned);
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0' || !std::isfinite(v)) fail(l, "not a number: " + tok);
    out.push_back(v);
  }
  return out;
}

// "(a,b,c) (d,e,f) (g,h,i)" -> three vectors
inline std::vector<Vec3> parse_vectors(const std::string& s, const HeaderLine& l) {
  std::vector<Vec3> out;
  std::size_t pos = 0;
  while (true) {
    const auto open = s.find('(', pos);
    if (open == std::string::npos) break;
    const auto close = s.find(')', open);
    if (close == std::string::npos) fail(l, "unterminated vector");
    const auto nums = parse_numbers(s.substr(open + 1, close - open - 1), l);
    if (nums.size() != 3) fail(l, "vectors must have 3 components");
    out.emplace_back(nums[0], nums[1], nums[2]);
    pos = close + 1;
  }
  if (trim(s.substr(pos)).size() != 0) fail(l, "unexpected trailing text");
  return out;
}

enum class SampleType { int16, float32 };

inline std::optional<SampleType> parse_type(const std::string& t) {
  static const std::map<std::string, SampleType> names = {
      {"short", SampleType::int16},        {"short int", SampleType::int16},
      {"signed short", SampleType::int16}, {"signed short int", SampleType::int16},
      {"int16", SampleType::int16},        {"int16_t", SampleType::int16},
      {"float", SampleType::float32},      {"float32", SampleType::float32}};
  const auto it = names.find(t);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_vec(const Vec3& v) {
  return "(" + format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]) + ")";
}

} // namespace nrrd_detail

/// Parses an attached-header NRRD volume. Any header field outside the
/// supported subset is rejected. Values are checked against `range` when given.
inline CtVolume read_nrrd(const std::filesystem::path& path,
                          std::optional<HuRange> range = HuRange{}) {
  using namespace nrrd_detail;
  const std::string bytes = read_file(path);

  std::size_t pos = 0;
  int line_no = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= bytes.size()) return std::nullopt;
    auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) nl = bytes.size();
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  const auto magic = next_line();
  if (!magic || magic->size() != 8 || magic->rfind("NRRD000", 0) != 0 || (*magic)[7] < '1' ||
      (*magic)[7] > '5') {
    throw FormatError(path.string() + ": missing NRRD magic line");
  }

  std::map<std::string, HeaderLine> fields;
  bool blank_seen = false;
  while (auto line = next_line()) {
    if (line->empty()) {
      blank_seen = true;
      break;
    }
    if ((*line)[0] == '#') continue;
    HeaderLine hl{line_no, *line, {}};
    if (line->find(":=") != std::string::npos) fail(hl, "key/value pairs are not supported");
    const auto colon = line->find(": ");
    if (colon == std::string::npos) fail(hl, "expected \"field: value\"");
    const std::string key = line->substr(0, colon);
    hl.value = trim(line->substr(colon + 2));
    static const char* supported[] = {"dimension", "type",  "sizes",  "space origin",
                                      "space directions", "encoding", "endian", "space",
                                      "kinds"};
    bool ok = false;
    for (const char* s : supported) ok = ok || key == s;
    if (!ok) fail(hl, "unsupported field \"" + key + "\"");
    if (fields.count(key)) fail(hl, "duplicate field");
    fields.emplace(key, hl);
  }
  if (!blank_seen) throw FormatError(path.string() + ": header not terminated by a blank line");

  auto require = [&](const char* key) -> const HeaderLine& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw FormatError(path.string() + ": missing required field \"" + key + "\"");
    return it->second;
  };

  const auto& dim = require("dimension");
  if (dim.value != "3") fail(dim, "only dimension 3 is supported");

  const auto& type_line = require("type");
  const auto type = parse_type(type_line.value);
  if (!type) fail(type_line, "unsupported type (int16 or float32 only)");

  const auto& enc_line = require("encoding");
  NrrdEncoding encoding;
  if (enc_line.value == "raw") encoding = NrrdEncoding::raw;
  else if (enc_line.value == "gzip" || enc_line.value == "gz") encoding = NrrdEncoding::gzip;
  else fail(enc_line, "unsupported encoding (raw or gzip only)");

  const auto& endian_line = require("endian");
  if (endian_line.value != "little") fail(endian_line, "only little endian is supported");

  if (const auto it = fields.find("space"); it != fields.end()) {
    if (it->second.value != "left-posterior-superior" && it->second.value != "LPS")
      fail(it->second, "only left-posterior-superior space is supported");
  }
  if (const auto it = fields.find("kinds"); it != fields.end()) {
    std::istringstream is(it->second.value);
    std::string k;
    int n = 0;
    while (is >> k) {
      if (k != "domain" && k != "space") fail(it->second, "kinds must be domain or space");
      ++n;
    }
    if (n != 3) fail(it->second, "expected 3 kinds");
  }

  GridGeometry g;
  const auto& sizes_line = require("sizes");
  {
    std::istringstream is(sizes_line.value);
    std::vector<std::int64_t> sizes;
    std::string tok;
    while (is >> tok) {
      char* end = nullptr;
      const long long v = std::strtoll(tok.c_str(), &end, 10);
      if (*end != '\0' || v <= 0) fail(sizes_line, "sizes must be positive integers");
      sizes.push_back(v);
    }
    if (sizes.size() != 3) fail(sizes_line, "expected 3 sizes");
    g.dims = {sizes[0], sizes[1], sizes[2]};
  }

  const auto& origin_line = require("space origin");
  {
    const auto v = parse_vectors(origin_line.value, origin_line);
    if (v.size() != 1) fail(origin_line, "expected one vector");
    g.origin = v[0];
  }

  const auto& dir_line = require("space directions");
  {
    const auto v = parse_vectors(dir_line.value, dir_line);
    if (v.size() != 3) fail(dir_line, "expected three vectors");
    for (int a = 0; a < 3; ++a) {
      const double n = v[a].norm();
      if (!(n > 0.0)) fail(dir_line, "zero-length direction vector");
      g.spacing[a] = n;
      g.direction.col(a) = v[a] / n;
    }
    const Mat3 gram = g.direction.transpose() * g.direction;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
      throw GeometryError(path.string() + ": space directions are not orthogonal (tolerance 1e-6)");
    if (g.direction.determinant() < 0.0)
      throw GeometryError(path.string() + ": mirrored direction matrix (det -1) is not supported");
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > kOrthonormalTol) {
      // Snap to the nearest rotation; only reached for files written with low precision.
      Eigen::JacobiSVD<Mat3> svd(g.direction, Eigen::ComputeFullU | Eigen::ComputeFullV);
      g.direction = svd.matrixU() * svd.matrixV().transpose();
    }
  }
  validate(g);

  const std::size_t count = g.voxel_count();
  const std::size_t sample_bytes = 2 + (*type == SampleType::float32 ? 2 : 0);
  const std::string encoded = pos < bytes.size() ? bytes.substr(pos) : std::string{};
  std::string payload;
  if (encoding == NrrdEncoding::raw) {
    if (encoded.size() != count * sample_bytes) {
      throw FormatError(path.string() + ": raw payload has " + std::to_string(encoded.size()) +
                        " bytes, expected " + std::to_string(count * sample_bytes));
    }
    payload = encoded;
  } else {
    payload = inflate_gzip(encoded, count * sample_bytes);
  }

  std::vector<std::int16_t> values(count);
  if (*type == SampleType::int16) {
    std::memcpy(values.data(), payload.data(), count * 2);
  } else {
    for (std::size_t n = 0; n < count; ++n) {
      float f;
      std::memcpy(&f, payload.data() + 4 * n, 4);
      const double r = std::nearbyint(static_cast<double>(f));
      if (!std::isfinite(r) || r < -32768.0 || r > 32767.0)
        throw FormatError(path.string() + ": float sample " + std::to_string(n) +
                          " not representable as 16-bit HU");
      values[n] = static_cast<std::int16_t>(r);
    }
  }
  CtVolume vol(g, std::move(values));
  if (range) validate_hu(vol, *range);
  return vol;
}

/// Writes an int16 NRRD with the full header subset. Output bytes depend only
/// on the volume and encoding.
inline void write_nrrd(const CtVolume& vol, const std::filesystem::path& path,
                       NrrdEncoding encoding = NrrdEncoding::gzip) {
  using namespace nrrd_detail;
  const auto& g = vol.geometry;
  std::string header = "NRRD0004\n";
  header += "type: int16\n";
  header += "dimension: 3\n";
  header += "space: left-posterior-superior\n";
  header += "sizes: " + std::to_string(g.dims[0]) + " " + std::to_string(g.dims[1]) + " " +
            std::to_string(g.dims[2]) + "\n";
  header += "space directions:";
  for (int a = 0; a < 3; ++a) header += " " + format_vec(g.direction.col(a) * g.spacing[a]);
  header += "\n";
  header += "kinds: domain domain domain\n";
  header += "endian: little\n";
  header += std::string("encoding: ") + (encoding == NrrdEncoding::raw ? "raw" : "gzip") + "\n";
  header += "space origin: " + format_vec(g.origin) + "\n\n";

  std::string payload(reinterpret_cast<const char*>(vol.values.data()), vol.values.size() * 2);
  if (encoding == NrrdEncoding::gzip) payload = deflate_gzip(payload);
  write_file(path, header + payload);
}

inline VoxelMask volume_to_mask(const CtVolume& v) {
  VoxelMask m(v.geometry);
  for (std::size_t n = 0; n < v.values.size(); ++n) {
    if (v.values[n] != 0 && v.values[n] != 1)
      throw FormatError("mask volume holds value " + std::to_string(v.values[n]) +
                        " at voxel " + std::to_string(n) + " (expected 0 or 1)");
    m.bits[n] = static_cast<std::uint8_t>(v.values[n]);
  }
  return m;
}

inline CtVolume mask_to_volume(const VoxelMask& m) {
  return CtVolume(m.geometry, std::vector<std::int16_t>(m.bits.begin(), m.bits.end()));
}

/// Masks are stored as int16 NRRD volumes holding 0/1.
inline VoxelMask read_mask_nrrd(const std::filesystem::path& path) {
  return volume_to_mask(read_nrrd(path));
}

inline void write_mask_nrrd(const VoxelMask& m, const std::filesystem::path& path,
                            NrrdEncoding encoding = NrrdEncoding::gzip) {
  write_nrrd(mask_to_volume(m), path, encoding);
}

} // namespace vict
