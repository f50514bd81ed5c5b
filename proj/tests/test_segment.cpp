#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hwloc/illum.hpp"
#include "hwloc/segment.hpp"
#include "support.hpp"

using namespace hwloc;

namespace {

FeatureGrid two_tone(int w, int h, int split, RangeFeature a, RangeFeature b, double sigma = 0,
                     std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma > 0 ? sigma : 1.0);
  FeatureGrid f(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      RangeFeature x = u < split ? a : b;
      if (sigma > 0) {
        x.f1 += n(rng);
        x.f2 += n(rng);
      }
      f(u, v) = x;
    }
  }
  return f;
}

bool four_connected(const Grid<int>& labels, int region) {
  int start = -1;
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == region) {
      ++count;
      if (start < 0) start = static_cast<int>(i);
    }
  }
  if (start < 0) return false;
  std::vector<char> seen(labels.size(), 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  std::size_t reached = 0;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    ++reached;
    const int u = i % labels.width(), v = i / labels.width();
    const int du[] = {1, -1, 0, 0}, dv[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int a = u + du[k], b = v + dv[k];
      if (!labels.contains(a, b)) continue;
      const auto j = labels.index(a, b);
      if (seen[j] || labels[j] != region) continue;
      seen[j] = 1;
      stack.push_back(static_cast<int>(j));
    }
  }
  return reached == count;
}

}  // namespace

TEST(MeanShift, ConstantImageIsFixedPoint) {
  const FeatureGrid f(20, 15, RangeFeature{0.3, 0.4});
  MeanShiftParams p;
  p.max_iter = 1;
  const auto out = mean_shift_filter(f, p);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_NEAR(out[i].f1, 0.3, 1e-12);
    EXPECT_NEAR(out[i].f2, 0.4, 1e-12);
  }
}

TEST(MeanShift, TwoTonesDoNotMix) {
  const FeatureGrid f = two_tone(30, 20, 13, {0.2, 0.3}, {0.5, 0.3});
  const auto out = mean_shift_filter(f);
  for (int v = 0; v < 20; ++v) {
    for (int u = 0; u < 30; ++u) {
      EXPECT_NEAR(out(u, v).f1, f(u, v).f1, 1e-12);
      EXPECT_NEAR(out(u, v).f2, f(u, v).f2, 1e-12);
    }
  }
}

TEST(MeanShift, NoisyStepEdgeRecoversTones) {
  MeanShiftParams p;
  p.range_bandwidth = 0.05;
  const RangeFeature a{0.30, 0.35}, b{0.45, 0.30};
  const FeatureGrid f = two_tone(48, 24, 24, a, b, 0.01, 4);
  const auto out = mean_shift_filter(f, p);
  const int hs = static_cast<int>(p.spatial_bandwidth);
  for (int v = 0; v < 24; ++v) {
    for (int u = 0; u < 48; ++u) {
      if (std::abs(u - 24) <= hs) continue;
      const RangeFeature& t = u < 24 ? a : b;
      EXPECT_NEAR(out(u, v).f1, t.f1, 0.01);
      EXPECT_NEAR(out(u, v).f2, t.f2, 0.01);
    }
  }
}

TEST(MeanShift, MatchesBruteForceModeSeek) {
  MeanShiftParams p;
  p.range_bandwidth = 0.05;
  p.spatial_bandwidth = 4;
  const FeatureGrid f = two_tone(20, 12, 9, {0.30, 0.35}, {0.45, 0.30}, 0.01, 9);
  const auto out = mean_shift_filter(f, p);
  for (int v = 0; v < f.height(); ++v) {
    for (int u = 0; u < f.width(); ++u) {
      const auto ref = hwloc::testing::brute_force_mode(f, u, v, p);
      EXPECT_NEAR(out(u, v).f1, ref.f1, 1e-12);
      EXPECT_NEAR(out(u, v).f2, ref.f2, 1e-12);
    }
  }
}

TEST(MeanShift, IdempotentAtConvergence) {
  MeanShiftParams p;
  p.max_iter = 200;
  p.eps = 1e-9;
  const FeatureGrid f = two_tone(24, 16, 10, {0.3, 0.35}, {0.45, 0.3}, 0.01, 2);
  const auto once = mean_shift_filter(f, p);
  const auto twice = mean_shift_filter(once, p);
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_NEAR(once[i].f1, twice[i].f1, 1e-3);
    EXPECT_NEAR(once[i].f2, twice[i].f2, 1e-3);
  }
}

TEST(MeanShift, ThreadCountDoesNotChangeOutput) {
  const auto scene = hwloc::testing::mondrian(80, 60, 3, 0.01);
  const auto feats = normalize_illumination(scene.image, IlluminantEstimate{});
  MeanShiftParams one, four;
  one.threads = 1;
  four.threads = 4;
  EXPECT_EQ(mean_shift_filter(feats, one), mean_shift_filter(feats, four));
}

TEST(MeanShift, RejectsBadParameters) {
  const FeatureGrid f(4, 4);
  MeanShiftParams p;
  p.spatial_bandwidth = 0.5;
  EXPECT_THROW(mean_shift_filter(f, p), std::invalid_argument);
  p = {};
  p.range_bandwidth = 0;
  EXPECT_THROW(mean_shift_filter(f, p), std::invalid_argument);
  p = {};
  p.max_iter = 0;
  EXPECT_THROW(mean_shift_filter(f, p), std::invalid_argument);
}

TEST(Labeling, ConstantImageIsOneRegion) {
  const auto map = segment(FeatureGrid(32, 24, RangeFeature{0.2, 0.2}));
  EXPECT_EQ(map.region_count, 1);
  EXPECT_EQ(map.sizes.at(0), 32u * 24u);
}

TEST(Labeling, TwoToneSplitAtTrueColumn) {
  const auto map = segment(two_tone(40, 20, 17, {0.2, 0.3}, {0.5, 0.3}));
  ASSERT_EQ(map.region_count, 2);
  for (int v = 0; v < 20; ++v) {
    for (int u = 0; u < 40; ++u) EXPECT_EQ(map.labels(u, v), u < 17 ? 0 : 1);
  }
}

TEST(Labeling, SmallRegionsMergedAndLabelsDense) {
  FeatureGrid f(30, 30, RangeFeature{0.2, 0.3});
  for (int v = 10; v < 13; ++v) {
    for (int u = 10; u < 13; ++u) f(u, v) = {0.6, 0.2};  // 9 px sliver
  }
  SegmentParams p;
  p.min_region_size = 16;
  const auto map = segment(f, p);
  EXPECT_EQ(map.region_count, 1);

  const auto scene = hwloc::testing::mondrian(120, 90, 5, 0.01);
  const auto m2 = segment(normalize_illumination(scene.image, IlluminantEstimate{}));
  std::set<int> seen(m2.labels.data().begin(), m2.labels.data().end());
  EXPECT_EQ(static_cast<int>(seen.size()), m2.region_count);
  EXPECT_EQ(*seen.rbegin(), m2.region_count - 1);
  for (int r = 0; r < m2.region_count; ++r) {
    EXPECT_GE(m2.sizes[r], 64u);
    EXPECT_TRUE(four_connected(m2.labels, r)) << "region " << r;
  }
}

TEST(Labeling, DeterministicAcrossRuns) {
  const auto scene = hwloc::testing::mondrian(100, 80, 6, 0.01);
  const auto feats = normalize_illumination(scene.image, IlluminantEstimate{});
  EXPECT_EQ(segment(feats).labels, segment(feats).labels);
}

TEST(Labeling, RegionCountNonIncreasingInRangeBandwidth) {
  const auto scene = hwloc::testing::mondrian(100, 80, 7, 0.01);
  const auto feats = normalize_illumination(scene.image, IlluminantEstimate{});
  int prev = std::numeric_limits<int>::max();
  for (double hr : {0.02, 0.04, 0.08, 0.16}) {
    SegmentParams p;
    p.mean_shift.range_bandwidth = hr;
    const int n = segment(feats, p).region_count;
    EXPECT_LE(n, prev) << "h_r " << hr;
    prev = n;
  }
}

TEST(Boundaries, ThreeByThreeSquare) {
  SegmentMap map;
  map.labels = Grid<int>(5, 5, 0);
  for (int v = 1; v <= 3; ++v) {
    for (int u = 1; u <= 3; ++u) map.labels(u, v) = 1;
  }
  map.region_count = 2;
  const auto contours = extract_boundaries(map);
  ASSERT_EQ(contours.size(), 2u);
  // Counter-clockwise on screen (v down): from the top-left corner go down
  // the left side first.
  const std::vector<PixelCoord> expect{{1, 1}, {1, 2}, {1, 3}, {2, 3},
                                       {3, 3}, {3, 2}, {3, 1}, {2, 1}};
  EXPECT_EQ(contours[1].region, 1);
  EXPECT_EQ(contours[1].points, expect);
}

TEST(Boundaries, FullImageIsBorderRing) {
  SegmentMap map;
  map.labels = Grid<int>(4, 3, 0);
  map.region_count = 1;
  const auto c = extract_boundaries(map);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].points.size(), 2u * 4 + 2u * 3 - 4);
  for (const auto& p : c[0].points) {
    EXPECT_TRUE(p.u == 0 || p.v == 0 || p.u == 3 || p.v == 2);
  }
}

TEST(Boundaries, ContourInvariantsOnMondrian) {
  const auto scene = hwloc::testing::mondrian(120, 90, 8, 0.01);
  const auto map = segment(normalize_illumination(scene.image, IlluminantEstimate{}));
  const auto contours = extract_boundaries(map);
  ASSERT_EQ(static_cast<int>(contours.size()), map.region_count);
  for (std::size_t r = 0; r < contours.size(); ++r) {
    const auto& pts = contours[r].points;
    EXPECT_EQ(contours[r].region, static_cast<int>(r));
    ASSERT_GE(pts.size(), 4u);
    double area2 = 0;  // shoelace, screen coordinates
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& a = pts[i];
      const auto& b = pts[(i + 1) % pts.size()];
      EXPECT_LE(std::max(std::abs(a.u - b.u), std::abs(a.v - b.v)), 1);
      EXPECT_EQ(map.labels(a.u, a.v), static_cast<int>(r));
      // On the region's edge: a 4-neighbor differs or the pixel is on the frame.
      bool edge = a.u == 0 || a.v == 0 || a.u == map.labels.width() - 1 ||
                  a.v == map.labels.height() - 1;
      const int du[] = {1, -1, 0, 0}, dv[] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        edge = edge || map.labels(a.u + du[k], a.v + dv[k]) != static_cast<int>(r);
      }
      EXPECT_TRUE(edge);
      area2 += static_cast<double>(a.u) * b.v - static_cast<double>(b.u) * a.v;
    }
    // Counter-clockwise as displayed with v down is a negative shoelace sum.
    EXPECT_LT(area2, 0) << "region " << r;
  }
}

TEST(Boundaries, LabelImagePaletteIsDeterministic) {
  SegmentMap map;
  map.labels = Grid<int>(3, 1, 0);
  map.labels(1, 0) = 1;
  map.labels(2, 0) = 2;
  map.region_count = 3;
  const auto img = label_image(map);
  EXPECT_EQ(img, label_image(map));
  EXPECT_NE(img(0, 0), img(1, 0));
  EXPECT_NE(img(1, 0), img(2, 0));
}

TEST(Segmentation, MondrianBoundaryF1) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto scene = hwloc::testing::mondrian(160, 120, seed, 0.01);
    const auto map = segment(normalize_illumination(scene.image, estimate_illuminant(scene.image)));
    const auto s = hwloc::testing::boundary_f1(map.labels, scene.truth, 2);
    EXPECT_GE(s.f1, 0.9) << "seed " << seed << " P " << s.precision << " R " << s.recall;
  }
}
