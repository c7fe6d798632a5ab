#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>

#include "support.hpp"
#include "vict/fcsv.hpp"
#include "vict/nrrd.hpp"
#include "vict/stl.hpp"

using namespace vict;
using vict::testing::grid;
using vict::testing::read_bytes;
using vict::testing::TempDir;
using vict::testing::write_text;

namespace {

std::string int16_payload(const std::vector<std::int16_t>& v) {
  std::string s(v.size() * 2, '\0');
  for (std::size_t n = 0; n < v.size(); ++n) {
    const auto u = static_cast<std::uint16_t>(v[n]);
    s[2 * n] = static_cast<char>(u & 0xff);
    s[2 * n + 1] = static_cast<char>(u >> 8);
  }
  return s;
}

std::string header(const std::string& extra_first = "", const std::string& dimension = "3",
                   const std::string& type = "short", const std::string& encoding = "raw",
                   const std::string& dirs = "(1,0,0) (0,1,0) (0,0,1)") {
  return "NRRD0004\n" + extra_first + "type: " + type + "\ndimension: " + dimension +
         "\nspace: left-posterior-superior\nsizes: 2 2 2\nspace directions: " + dirs +
         "\nkinds: domain domain domain\nendian: little\nencoding: " + encoding +
         "\nspace origin: (0,0,0)\n\n";
}

const std::vector<std::int16_t> kEight{-1000, -500, 0, 1, 2, 300, 700, 1500};

// Unit cube as 12 triangles with outward winding.
const float kCube[12][9] = {
    {0, 0, 0, 0, 1, 0, 1, 1, 0}, {0, 0, 0, 1, 1, 0, 1, 0, 0}, {0, 0, 1, 1, 0, 1, 1, 1, 1},
    {0, 0, 1, 1, 1, 1, 0, 1, 1}, {0, 0, 0, 1, 0, 0, 1, 0, 1}, {0, 0, 0, 1, 0, 1, 0, 0, 1},
    {0, 1, 0, 0, 1, 1, 1, 1, 1}, {0, 1, 0, 1, 1, 1, 1, 1, 0}, {0, 0, 0, 0, 0, 1, 0, 1, 1},
    {0, 0, 0, 0, 1, 1, 0, 1, 0}, {1, 0, 0, 1, 1, 0, 1, 1, 1}, {1, 0, 0, 1, 1, 1, 1, 0, 1}};

std::string binary_stl(int declared, int present, const std::string& head = "cube") {
  std::string s(80, '\0');
  std::memcpy(s.data(), head.data(), head.size());
  const std::uint32_t n = static_cast<std::uint32_t>(declared);
  s.append(reinterpret_cast<const char*>(&n), 4);
  for (int t = 0; t < present; ++t) {
    const float normal[3] = {0, 0, 0};
    s.append(reinterpret_cast<const char*>(normal), 12);
    s.append(reinterpret_cast<const char*>(kCube[t % 12]), 36);
    s.append(2, '\0');
  }
  return s;
}

const char* kFcsvHeader = "# Markups fiducial file version = 4.11\n";
const char* kFcsvColumns = "# columns = id,x,y,z,ow,ox,oy,oz,vis,sel,lock,label,desc,associatedNodeID\n";

} // namespace

TEST(NrrdRead, MinimalRawInt16) {
  TempDir dir;
  write_text(dir / "a.nrrd", header() + int16_payload(kEight));
  const CtVolume v = read_nrrd(dir / "a.nrrd");
  EXPECT_EQ(v.geometry.dims, (Index3{2, 2, 2}));
  EXPECT_EQ(v.values, kEight);
  EXPECT_EQ(v.geometry.spacing, Vec3(1, 1, 1));
  EXPECT_EQ(v.geometry.direction, Mat3::Identity());
}

TEST(NrrdRead, DimensionFourNamesHeaderLine) {
  TempDir dir;
  write_text(dir / "a.nrrd", header("", "4") + int16_payload(kEight));
  try {
    read_nrrd(dir / "a.nrrd");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(NrrdRead, SpacingFromDirectionColumns) {
  TempDir dir;
  write_text(dir / "a.nrrd",
             header("", "3", "short", "raw", "(0.5,0,0) (0,0.5,0) (0,0,1)") + int16_payload(kEight));
  const CtVolume v = read_nrrd(dir / "a.nrrd");
  EXPECT_EQ(v.geometry.spacing, Vec3(0.5, 0.5, 1));
  EXPECT_EQ(v.geometry.direction, Mat3::Identity());
}

TEST(NrrdRead, RejectsUnsupportedFieldsAndValues) {
  TempDir dir;
  const auto payload = int16_payload(kEight);
  auto expect_format = [&](const std::string& text) {
    write_text(dir / "x.nrrd", text);
    EXPECT_THROW(read_nrrd(dir / "x.nrrd"), FormatError) << text.substr(0, 200);
  };
  expect_format(header("content: foo\n") + payload);
  expect_format(header("", "3", "uchar") + payload);
  expect_format(header("", "3", "short", "bzip2") + payload);
  expect_format(header() + payload.substr(1));
  expect_format("NRRD0004\ntype: short\n");
  std::string big_endian = header();
  big_endian.replace(big_endian.find("little"), 6, "big");
  expect_format(big_endian + payload);
}

TEST(NrrdRead, NonOrthogonalDirectionsAreGeometryErrors) {
  TempDir dir;
  write_text(dir / "a.nrrd",
             header("", "3", "short", "raw", "(1,0.01,0) (0,1,0) (0,0,1)") + int16_payload(kEight));
  EXPECT_THROW(read_nrrd(dir / "a.nrrd"), GeometryError);
}

TEST(NrrdRead, Float32SamplesRoundToHu) {
  TempDir dir;
  std::string payload;
  for (float f : {-1000.2f, -499.6f, 0.f, 1.f, 2.4f, 300.f, 700.f, 1500.f})
    payload.append(reinterpret_cast<const char*>(&f), 4);
  write_text(dir / "a.nrrd", header("", "3", "float") + payload);
  EXPECT_EQ(read_nrrd(dir / "a.nrrd").values, (std::vector<std::int16_t>{-1000, -500, 0, 1, 2, 300, 700, 1500}));
}

TEST(NrrdRead, HuRangeChecked) {
  TempDir dir;
  auto vals = kEight;
  vals[3] = 9000;
  write_text(dir / "a.nrrd", header() + int16_payload(vals));
  EXPECT_THROW(read_nrrd(dir / "a.nrrd"), InputError);
  EXPECT_EQ(read_nrrd(dir / "a.nrrd", std::nullopt).values[3], 9000);
}

TEST(NrrdRoundTrip, ValuesAndGeometryBothEncodings) {
  TempDir dir;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> hu(-32768, 32767);
  const auto g = grid({7, 5, 3}, {0.3125, 0.41, 1.7}, {-123.456789012345, 0.1, 1e-7},
                      Eigen::AngleAxisd(0.4, Vec3(0.2, 1, -0.3).normalized()).toRotationMatrix());
  std::vector<std::int16_t> vals(g.voxel_count());
  for (auto& v : vals) v = static_cast<std::int16_t>(hu(rng));
  const CtVolume vol(g, vals);
  for (auto enc : {NrrdEncoding::raw, NrrdEncoding::gzip}) {
    write_nrrd(vol, dir / "r.nrrd", enc);
    const CtVolume back = read_nrrd(dir / "r.nrrd", std::nullopt);
    EXPECT_EQ(back.values, vol.values);
    EXPECT_EQ(back.geometry.dims, g.dims);
    EXPECT_LT((back.geometry.origin - g.origin).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((back.geometry.spacing - g.spacing).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((back.geometry.direction - g.direction).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(NrrdRoundTrip, OriginTextPreservedToTwelveDigits) {
  TempDir dir;
  const auto g = grid({2, 2, 2}, Vec3::Ones(), {-87.123456789012, 42.000000000001, 3.14159265358979});
  write_nrrd(CtVolume::filled(g, 0), dir / "o.nrrd", NrrdEncoding::raw);
  const std::string text = read_bytes(dir / "o.nrrd");
  const auto at = text.find("space origin: ");
  ASSERT_NE(at, std::string::npos);
  const std::string line = text.substr(at, text.find('\n', at) - at);
  std::string nums = line.substr(line.find('('));
  for (char& c : nums)
    if (c == '(' || c == ')' || c == ',') c = ' ';
  std::istringstream is(nums);
  auto twelve = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    return std::string(buf);
  };
  for (int a = 0; a < 3; ++a) {
    double v = 0;
    ASSERT_TRUE(is >> v) << line;
    EXPECT_EQ(twelve(v), twelve(g.origin[a])) << line;
  }
}

TEST(NrrdRoundTrip, WriterIsDeterministic) {
  TempDir dir;
  const auto vol = CtVolume::filled(grid({9, 9, 9}), 123);
  write_nrrd(vol, dir / "a.nrrd");
  write_nrrd(vol, dir / "b.nrrd");
  EXPECT_EQ(read_bytes(dir / "a.nrrd"), read_bytes(dir / "b.nrrd"));
}

TEST(MaskNrrd, RoundTripAndRejectsNonBinary) {
  TempDir dir;
  VoxelMask m(grid({3, 3, 3}));
  m.set({1, 2, 0});
  m.set({2, 2, 2});
  write_mask_nrrd(m, dir / "m.nrrd");
  EXPECT_EQ(read_mask_nrrd(dir / "m.nrrd"), m);
  write_nrrd(CtVolume::filled(grid({3, 3, 3}), 2), dir / "bad.nrrd");
  EXPECT_THROW(read_mask_nrrd(dir / "bad.nrrd"), FormatError);
}

TEST(Stl, SingleTriangleAscii) {
  TempDir dir;
  write_text(dir / "t.stl",
             "solid t\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n"
             "   vertex 0 1 0\n  endloop\n endfacet\nendsolid t\n");
  const TriMesh m = read_stl(dir / "t.stl");
  EXPECT_EQ(m.vertices.size(), 3u);
  EXPECT_EQ(m.triangles.size(), 1u);
}

TEST(Stl, BinaryCubeMergesToEightVertices) {
  TempDir dir;
  write_text(dir / "c.stl", binary_stl(12, 12));
  const TriMesh m = read_stl(dir / "c.stl");
  EXPECT_EQ(m.vertices.size(), 8u);
  EXPECT_EQ(m.triangles.size(), 12u);
  EXPECT_NEAR(surface_area(m), 6.0, 1e-12);
}

TEST(Stl, BinaryHeaderStartingWithSolidIsStillBinary) {
  TempDir dir;
  write_text(dir / "c.stl", binary_stl(12, 12, "solid cube exported"));
  EXPECT_EQ(read_stl(dir / "c.stl").triangles.size(), 12u);
}

TEST(Stl, TruncatedBinaryReportsByteOffset) {
  TempDir dir;
  write_text(dir / "c.stl", binary_stl(10, 9));
  try {
    read_stl(dir / "c.stl");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset 534"), std::string::npos) << e.what();
  }
}

TEST(Stl, AsciiKeywordErrorReportsLine) {
  TempDir dir;
  write_text(dir / "t.stl",
             "solid t\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertx 1 0 0\n"
             "   vertex 0 1 0\n  endloop\n endfacet\nendsolid t\n");
  try {
    read_stl(dir / "t.stl");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos) << e.what();
  }
}

TEST(Stl, WeldingPreservesTriangleCountAndArea) {
  TempDir dir;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10, 10);
  TriMesh soup;
  for (int t = 0; t < 300; ++t) {
    // Every other triangle reuses the previous triangle's corners, so welding has work to do.
    for (int v = 0; v < 3; ++v) {
      if (t % 2 && v < 2) soup.vertices.push_back(soup.vertices[soup.vertices.size() - 3 + v]);
      else soup.vertices.push_back(Vec3(float(u(rng)), float(u(rng)), float(u(rng))).cast<double>());
    }
    const auto b = static_cast<std::uint32_t>(3 * t);
    soup.triangles.push_back({b, b + 1, b + 2});
  }
  write_stl_binary(soup, dir / "s.stl");
  const TriMesh welded = read_stl(dir / "s.stl");
  EXPECT_EQ(welded.triangles.size(), soup.triangles.size());
  EXPECT_LT(welded.vertices.size(), soup.vertices.size());
  EXPECT_LT(std::abs(surface_area(welded) - surface_area(soup)) / surface_area(soup), 1e-9);
}

TEST(Fcsv, LpsFileReadsVerbatim) {
  TempDir dir;
  write_text(dir / "p.fcsv", std::string(kFcsvHeader) + "# CoordinateSystem = LPS\n" + kFcsvColumns +
                                 "vtkMRMLMarkupsFiducialNode_0,1,2,3,0,0,0,1,1,1,0,L1,,\n");
  const FiducialSet s = read_fcsv(dir / "p.fcsv");
  EXPECT_EQ(s.frame, Frame::LPS);
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_EQ(s.points[0].label, "L1");
  EXPECT_EQ(s.points[0].position, Vec3(1, 2, 3));
}

TEST(Fcsv, MissingCoordinateSystemDefaultsToRas) {
  TempDir dir;
  write_text(dir / "p.fcsv", std::string(kFcsvHeader) + kFcsvColumns + "0,1,2,3,0,0,0,1,1,1,0,A,,\n");
  EXPECT_EQ(read_fcsv(dir / "p.fcsv").frame, Frame::RAS);
  EXPECT_EQ(read_fcsv(dir / "p.fcsv", Frame::LPS).frame, Frame::LPS);
}

TEST(Fcsv, RasToLpsFlipsXY) {
  TempDir dir;
  write_text(dir / "p.fcsv", std::string(kFcsvHeader) + "# CoordinateSystem = RAS\n" + kFcsvColumns +
                                 "0,1,2,3,0,0,0,1,1,1,0,A,,\n1,-4.5,0,7.25,0,0,0,1,1,1,0,B,,\n");
  const FiducialSet lps = to_lps(read_fcsv(dir / "p.fcsv"));
  EXPECT_EQ(lps.frame, Frame::LPS);
  EXPECT_EQ(lps.points[0].position, Vec3(-1, -2, 3));
  EXPECT_EQ(lps.points[1].position, Vec3(4.5, 0, 7.25));
}

TEST(Fcsv, ToLpsIsIdentityOnLps) {
  FiducialSet s{{{"a", Vec3(1, 2, 3)}, {"b", Vec3(-4, 5, -6)}}, Frame::LPS};
  const FiducialSet out = to_lps(s);
  ASSERT_EQ(out.points.size(), 2u);
  EXPECT_EQ(out.points[0].position, s.points[0].position);
  EXPECT_EQ(out.points[1].position, s.points[1].position);
  EXPECT_EQ(out.points[1].label, "b");
}

TEST(Fcsv, NumericCoordinateSystemCodes) {
  TempDir dir;
  write_text(dir / "p.fcsv", std::string(kFcsvHeader) + "# CoordinateSystem = 1\n" + kFcsvColumns +
                                 "0,1,2,3,0,0,0,1,1,1,0,A,,\n");
  EXPECT_EQ(read_fcsv(dir / "p.fcsv").frame, Frame::LPS);
}

TEST(Fcsv, NonNumericCoordinateNamesRow) {
  TempDir dir;
  write_text(dir / "p.fcsv", std::string(kFcsvHeader) + kFcsvColumns + "0,1,2,3,0,0,0,1,1,1,0,A,,\n" +
                                 "1,4,five,6,0,0,0,1,1,1,0,B,,\n");
  try {
    read_fcsv(dir / "p.fcsv");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Fcsv, RejectsMissingVersionAndDuplicateLabels) {
  TempDir dir;
  write_text(dir / "a.fcsv", std::string(kFcsvColumns) + "0,1,2,3,0,0,0,1,1,1,0,A,,\n");
  EXPECT_THROW(read_fcsv(dir / "a.fcsv"), FormatError);
  write_text(dir / "b.fcsv", std::string(kFcsvHeader) + kFcsvColumns + "0,1,2,3,0,0,0,1,1,1,0,A,,\n" +
                                 "1,1,2,3,0,0,0,1,1,1,0,A,,\n");
  EXPECT_ANY_THROW(read_fcsv(dir / "b.fcsv"));
}

TEST(Fcsv, WriterRoundTrip) {
  TempDir dir;
  FiducialSet s{{{"L1", Vec3(0.1, -2.5, 1e-9)}, {"camera", Vec3(100.25, 3, -7)}}, Frame::LPS};
  write_fcsv(s, dir / "w.fcsv");
  const FiducialSet back = read_fcsv(dir / "w.fcsv");
  EXPECT_EQ(back.frame, Frame::LPS);
  ASSERT_EQ(back.points.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.points[i].label, s.points[i].label);
    EXPECT_EQ(back.points[i].position, s.points[i].position);
  }
}
