#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "vict/morphology.hpp"

using namespace vict;

namespace {

BitBox random_box(std::array<std::int64_t, 3> dims, std::mt19937_64& rng, double p) {
  BitBox b(dims);
  std::bernoulli_distribution on(p);
  for (auto& v : b.data) v = on(rng) ? 1 : 0;
  return b;
}

std::vector<double> brute_edt(const BitBox& f, std::array<double, 3> w) {
  std::vector<double> out(f.size(), INFINITY);
  for (std::int64_t z = 0; z < f.dims[2]; ++z)
    for (std::int64_t y = 0; y < f.dims[1]; ++y)
      for (std::int64_t x = 0; x < f.dims[0]; ++x) {
        double best = INFINITY;
        for (std::int64_t c = 0; c < f.dims[2]; ++c)
          for (std::int64_t b = 0; b < f.dims[1]; ++b)
            for (std::int64_t a = 0; a < f.dims[0]; ++a)
              if (f.data[f.index(a, b, c)])
                best = std::min(best, w[0] * double((x - a) * (x - a)) + w[1] * double((y - b) * (y - b)) +
                                          w[2] * double((z - c) * (z - c)));
        out[f.index(x, y, z)] = best;
      }
  return out;
}

// Dilation and erosion straight from the structuring-element offsets.
BitBox brute_dilate(const BitBox& in, int r) {
  BitBox out(in.dims);
  const auto se = ball_offsets(r);
  for (std::int64_t z = 0; z < in.dims[2]; ++z)
    for (std::int64_t y = 0; y < in.dims[1]; ++y)
      for (std::int64_t x = 0; x < in.dims[0]; ++x)
        for (const auto& o : se) {
          const std::int64_t a = x + o[0], b = y + o[1], c = z + o[2];
          if (a < 0 || b < 0 || c < 0 || a >= in.dims[0] || b >= in.dims[1] || c >= in.dims[2]) continue;
          if (in.data[in.index(a, b, c)]) {
            out.data[out.index(x, y, z)] = 1;
            break;
          }
        }
  return out;
}

BitBox brute_erode(const BitBox& in, int r) {
  BitBox out(in.dims);
  const auto se = ball_offsets(r);
  for (std::int64_t z = 0; z < in.dims[2]; ++z)
    for (std::int64_t y = 0; y < in.dims[1]; ++y)
      for (std::int64_t x = 0; x < in.dims[0]; ++x) {
        bool all = true;
        for (const auto& o : se) {
          const std::int64_t a = x + o[0], b = y + o[1], c = z + o[2];
          if (a < 0 || b < 0 || c < 0 || a >= in.dims[0] || b >= in.dims[1] || c >= in.dims[2]) continue;
          all = all && in.data[in.index(a, b, c)];
        }
        out.data[out.index(x, y, z)] = all ? 1 : 0;
      }
  return out;
}

VoxelMask as_mask(const BitBox& b) {
  VoxelMask m(vict::testing::grid({b.dims[0], b.dims[1], b.dims[2]}));
  m.bits = b.data;
  return m;
}

} // namespace

TEST(Edt, MatchesBruteForceIsotropic) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const BitBox f = random_box({7, 5, 6}, rng, 0.05 + 0.02 * t);
    const auto fast = squared_edt(f);
    const auto slow = brute_edt(f, {1, 1, 1});
    for (std::size_t n = 0; n < f.size(); ++n) ASSERT_EQ(fast[n], slow[n]) << n;
  }
}

TEST(Edt, MatchesBruteForceWeighted) {
  std::mt19937_64 rng(2);
  const std::array<double, 3> w{0.25, 0.64, 2.25};
  for (int t = 0; t < 10; ++t) {
    const BitBox f = random_box({6, 7, 5}, rng, 0.08);
    const auto fast = squared_edt(f, w);
    const auto slow = brute_edt(f, w);
    for (std::size_t n = 0; n < f.size(); ++n) ASSERT_NEAR(fast[n], slow[n], 1e-12) << n;
  }
}

TEST(Edt, NoFeaturesGivesInfinity) {
  const auto d = squared_edt(BitBox({3, 3, 3}));
  for (double v : d) EXPECT_TRUE(std::isinf(v));
}

TEST(Ball, RadiusOneIsTwentySixNeighbourhood) {
  EXPECT_EQ(ball_offsets(0).size(), 1u);
  EXPECT_EQ(ball_offsets(1).size(), 27u);
  for (const auto& o : ball_offsets(2)) EXPECT_LE(o[0] * o[0] + o[1] * o[1] + o[2] * o[2], 8);
}

TEST(Morphology, DilateErodeMatchBruteForce) {
  std::mt19937_64 rng(3);
  for (int r = 0; r <= 3; ++r)
    for (int t = 0; t < 6; ++t) {
      const BitBox in = random_box({9, 8, 7}, rng, 0.04 + 0.1 * t);
      ASSERT_EQ(dilate(in, r).data, brute_dilate(in, r).data) << "r=" << r;
      ASSERT_EQ(erode(in, r).data, brute_erode(in, r).data) << "r=" << r;
    }
}

TEST(Morphology, ClosingConnectsVoxelsTwoApart) {
  BitBox b({7, 5, 5});
  b.data[b.index(2, 2, 2)] = 1;
  b.data[b.index(4, 2, 2)] = 1;
  const BitBox c = close(b, 1);
  EXPECT_TRUE(c.data[c.index(3, 2, 2)]);
  EXPECT_TRUE(c.data[c.index(2, 2, 2)]);
  EXPECT_TRUE(c.data[c.index(4, 2, 2)]);
}

TEST(Morphology, ClosingIsExtensiveAndIdempotent) {
  std::mt19937_64 rng(4);
  for (int r = 1; r <= 3; ++r)
    for (int t = 0; t < 5; ++t) {
      const BitBox in = random_box({10, 9, 8}, rng, 0.1 + 0.05 * t);
      const BitBox c = close(in, r);
      for (std::size_t n = 0; n < in.size(); ++n) ASSERT_LE(in.data[n], c.data[n]);
      ASSERT_EQ(close(c, r).data, c.data);
    }
}

TEST(Morphology, EmptyStaysEmpty) {
  const BitBox e({6, 6, 6});
  EXPECT_EQ(dilate(e, 2).data, e.data);
  EXPECT_EQ(close(e, 2).data, e.data);
  EXPECT_EQ(fill_holes(e).data, e.data);
}

TEST(FillHoles, HollowShellIsFilled) {
  BitBox b({7, 7, 7});
  for (std::int64_t z = 1; z <= 5; ++z)
    for (std::int64_t y = 1; y <= 5; ++y)
      for (std::int64_t x = 1; x <= 5; ++x)
        if (x == 1 || x == 5 || y == 1 || y == 5 || z == 1 || z == 5) b.data[b.index(x, y, z)] = 1;
  const BitBox f = fill_holes(b);
  for (std::int64_t z = 0; z < 7; ++z)
    for (std::int64_t y = 0; y < 7; ++y)
      for (std::int64_t x = 0; x < 7; ++x) {
        const bool inside = x >= 1 && x <= 5 && y >= 1 && y <= 5 && z >= 1 && z <= 5;
        ASSERT_EQ(f.data[f.index(x, y, z)] != 0, inside);
      }
}

TEST(FillHoles, LeavesSingleBoundaryConnectedBackground) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const BitBox in = random_box({12, 11, 10}, rng, 0.2 + 0.02 * t);
    const BitBox f = fill_holes(in);
    for (std::size_t n = 0; n < in.size(); ++n) ASSERT_LE(in.data[n], f.data[n]);
    // Boxes spanning the grid may split the background, but no part stays enclosed.
    const auto bg = vict::testing::background_components(as_mask(f));
    ASSERT_TRUE(bg.all_touch_boundary);
    // Every voxel that was filled had no path to the boundary in the input.
    const auto before = vict::testing::background_components(as_mask(in));
    if (before.all_touch_boundary) {
      ASSERT_EQ(f.data, in.data);
    }
  }
}

TEST(BoundingBox, CropPasteRoundTrip) {
  VoxelMask m(vict::testing::grid({10, 12, 14}));
  EXPECT_TRUE(bounding_box(m).empty());
  m.set({2, 3, 4});
  m.set({5, 9, 6});
  const IndexBox bb = bounding_box(m);
  EXPECT_EQ(bb.lo, (Index3{2, 3, 4}));
  EXPECT_EQ(bb.hi, (Index3{5, 9, 6}));
  const IndexBox grown = expand_clip(bb, 3, m.geometry.dims);
  EXPECT_EQ(grown.lo, (Index3{0, 0, 1}));
  EXPECT_EQ(grown.hi, (Index3{8, 11, 9}));
  VoxelMask back(m.geometry);
  paste(crop(m, grown), grown, back);
  EXPECT_EQ(back, m);
}
