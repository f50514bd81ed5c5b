#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hwloc/illum.hpp"

using namespace hwloc;

namespace {

// Dichromatic patch: body color `body` at constant diffuse strength plus a
// Gaussian specular lobe of color `gamma`. Each channel is
// m_d * body_c + m_s * gamma_c, so on the lobe sigma_c is linear in 1/s with
// intercept gamma_c. The lobe is small against the frame, like a lamp
// reflection on a floor.
RgbImage dichromatic(Chromaticity body, Chromaticity gamma, double lobe_peak, int size = 96) {
  RgbImage img(size, size);
  const double c = 0.5 * (size - 1), r = size / 12.0;
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const double d2 = (u - c) * (u - c) + (v - c) * (v - c);
      const double ms = lobe_peak * std::exp(-d2 / (2 * r * r));
      const double md = 0.6;
      img.set(u, v, {md * body.r + ms * gamma.r, md * body.g + ms * gamma.g,
                     md * body.b + ms * gamma.b});
    }
  }
  return img;
}

}  // namespace

TEST(Chromaticity, Examples) {
  RgbImage img(3, 1);
  img.set(0, 0, {0.5, 0.5, 0.5});
  img.set(1, 0, {0.6, 0.3, 0.1});
  img.set(2, 0, {0.0, 0.0, 0.01});
  const auto m = chromaticity(img);
  EXPECT_NEAR(m.sigma(0, 0).r, 1.0 / 3, 1e-15);
  EXPECT_NEAR(m.sigma(0, 0).b, 1.0 / 3, 1e-15);
  EXPECT_NEAR(m.sigma(1, 0).r, 0.6, 1e-15);
  EXPECT_NEAR(m.sigma(1, 0).g, 0.3, 1e-15);
  EXPECT_NEAR(m.sigma(1, 0).b, 0.1, 1e-15);
  // Below s_min: neutral and flagged.
  EXPECT_EQ(m.black(2, 0), 1);
  EXPECT_EQ(m.black(1, 0), 0);
  EXPECT_NEAR(m.sigma(2, 0).g, 1.0 / 3, 1e-15);
}

TEST(Chromaticity, ScaleInvariantAndSumsToOne) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ch(0.05, 1.0), k(0.05, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Rgb p{ch(rng), ch(rng), ch(rng)};
    const double m = std::max({p.r, p.g, p.b});
    const double s = k(rng) / m;  // keeps k*p in gamut
    RgbImage img(2, 1);
    img.set(0, 0, p);
    img.set(1, 0, {s * p.r, s * p.g, s * p.b});
    const auto c = chromaticity(img);
    if (img(1, 0).sum() < kBlackThreshold) continue;
    EXPECT_NEAR(c.sigma(0, 0).r, c.sigma(1, 0).r, 1e-12);
    EXPECT_NEAR(c.sigma(0, 0).g, c.sigma(1, 0).g, 1e-12);
    EXPECT_NEAR(c.sigma(0, 0).b, c.sigma(1, 0).b, 1e-12);
    EXPECT_NEAR(c.sigma(0, 0).r + c.sigma(0, 0).g + c.sigma(0, 0).b, 1.0, 1e-9);
  }
}

TEST(Iic, Examples) {
  RgbImage img(3, 1);
  img.set(0, 0, {1, 0, 0});
  img.set(1, 0, {0.25, 0.25, 0.5});
  img.set(2, 0, {0, 0, 0});
  const auto r = iic_project(img, Channel::kR);
  ASSERT_EQ(r.size(), 2u);  // black pixel skipped
  EXPECT_DOUBLE_EQ(r[0].x, 1.0);
  EXPECT_DOUBLE_EQ(r[0].y, 1.0);
  const auto g = iic_project(img, Channel::kG);
  EXPECT_DOUBLE_EQ(g[1].x, 1.0);
  EXPECT_DOUBLE_EQ(g[1].y, 0.25);
  EXPECT_EQ(g[1].pixel, 1u);
}

TEST(Iic, UniformImageIsOneHorizontalCluster) {
  const RgbImage img(5, 4, Rgb{0.3, 0.2, 0.1});
  const auto pts = iic_project(img, Channel::kB);
  ASSERT_EQ(pts.size(), 20u);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(pts[i].pixel, i);  // row-major
    EXPECT_DOUBLE_EQ(pts[i].y, pts[0].y);
  }
}

TEST(Illuminant, RecoversKnownIlluminant) {
  const Chromaticity gamma{0.40, 0.35, 0.25};
  const auto est = estimate_illuminant(dichromatic({0.5, 0.3, 0.2}, gamma, 1.2));
  EXPECT_EQ(est.fallback, IlluminantEstimate::Fallback::kNone);
  EXPECT_NEAR(est.gamma_r, 0.40, 0.03);
  EXPECT_NEAR(est.gamma_g, 0.35, 0.03);
  EXPECT_NEAR(est.gamma_b, 0.25, 0.03);
  EXPECT_NEAR(est.gamma_r + est.gamma_g + est.gamma_b, 1.0, 1e-9);
  EXPECT_GT(est.confidence, 0.0);
  EXPECT_FALSE(est.specular.empty());
}

TEST(Illuminant, WhiteLight) {
  const Chromaticity white{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const auto est = estimate_illuminant(dichromatic({0.2, 0.3, 0.5}, white, 1.0));
  EXPECT_NEAR(est.gamma_r, 1.0 / 3, 0.03);
  EXPECT_NEAR(est.gamma_g, 1.0 / 3, 0.03);
  EXPECT_NEAR(est.gamma_b, 1.0 / 3, 0.03);
}

TEST(Illuminant, DiffuseSceneFallsBackToNeutral) {
  // Shading ramp on one surface: no specular evidence at all.
  RgbImage img(64, 64);
  for (int v = 0; v < 64; ++v) {
    for (int u = 0; u < 64; ++u) {
      const double k = 0.2 + 0.8 * u / 63.0;
      img.set(u, v, {0.5 * k, 0.3 * k, 0.2 * k});
    }
  }
  const auto est = estimate_illuminant(img);
  EXPECT_NE(est.fallback, IlluminantEstimate::Fallback::kNone);
  EXPECT_EQ(est.confidence, 0.0);
  EXPECT_DOUBLE_EQ(est.gamma_r, 1.0 / 3);
  EXPECT_DOUBLE_EQ(est.gamma_g, 1.0 / 3);
  EXPECT_DOUBLE_EQ(est.gamma_b, 1.0 / 3);
}

TEST(Illuminant, TooFewCandidates) {
  const RgbImage img(4, 4, Rgb{0.4, 0.3, 0.2});
  const auto est = estimate_illuminant(img);
  EXPECT_EQ(est.fallback, IlluminantEstimate::Fallback::kTooFewCandidates);
  EXPECT_EQ(est.confidence, 0.0);
}

TEST(Illuminant, PermutationInvariant) {
  const RgbImage img = dichromatic({0.5, 0.3, 0.2}, {0.4, 0.35, 0.25}, 1.2);
  const auto mask = detect_highlight_candidates(img);
  auto pts = iic_project_all(img);
  const auto a = estimate_illuminant(pts, mask);
  std::mt19937_64 rng(5);
  for (auto& ch : pts) std::shuffle(ch.begin(), ch.end(), rng);
  const auto b = estimate_illuminant(pts, mask);
  EXPECT_EQ(a.gamma_r, b.gamma_r);
  EXPECT_EQ(a.gamma_g, b.gamma_g);
  EXPECT_EQ(a.gamma_b, b.gamma_b);
  EXPECT_EQ(a.confidence, b.confidence);
}

TEST(Normalize, ShadingRampIsConstant) {
  RgbImage img(40, 10);
  for (int v = 0; v < 10; ++v) {
    for (int u = 0; u < 40; ++u) {
      const double k = 0.2 + 0.8 * u / 39.0;
      img.set(u, v, {0.5 * k, 0.3 * k, 0.2 * k});
    }
  }
  const auto f = normalize_illumination(img, estimate_illuminant(img));
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_NEAR(f[i].f1, f[0].f1, 1e-6);
    EXPECT_NEAR(f[i].f2, f[0].f2, 1e-6);
  }
}

TEST(Normalize, TwoPatchesTwoFeatures) {
  RgbImage img(20, 10);
  for (int v = 0; v < 10; ++v) {
    for (int u = 0; u < 20; ++u) {
      img.set(u, v, u < 10 ? Rgb{0.6, 0.2, 0.2} : Rgb{0.1, 0.4, 0.3});
    }
  }
  const auto f = normalize_illumination(img, estimate_illuminant(img));
  for (int v = 0; v < 10; ++v) {
    for (int u = 0; u < 20; ++u) {
      const auto& x = f(u, v);
      const auto& ref = u < 10 ? f(0, 0) : f(19, 0);
      EXPECT_EQ(x, ref);
    }
  }
  EXPECT_GT(std::abs(f(0, 0).f1 - f(19, 0).f1), 0.2);
}

TEST(Normalize, HighlightBlobMatchesSurroundings) {
  const RgbImage img = dichromatic({0.5, 0.3, 0.2}, {0.4, 0.35, 0.25}, 1.2);
  const auto est = estimate_illuminant(img);
  const auto f = normalize_illumination(img, est);
  const auto diffuse = f(0, 0);  // far from the lobe
  const int c = 48;
  for (int v = c - 3; v <= c + 3; ++v) {
    for (int u = c - 3; u <= c + 3; ++u) {
      EXPECT_NEAR(f(u, v).f1, diffuse.f1, 0.05);
      EXPECT_NEAR(f(u, v).f2, diffuse.f2, 0.05);
    }
  }
}

TEST(Normalize, OutputInRangeAndScaleInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ch(0.0, 0.5), k(0.1, 2.0);
  RgbImage img(16, 16), scaled(16, 16);
  for (int v = 0; v < 16; ++v) {
    for (int u = 0; u < 16; ++u) {
      const Rgb p{ch(rng), ch(rng), ch(rng)};
      const double s = k(rng);
      img.set(u, v, p);
      scaled.set(u, v, {s * p.r, s * p.g, s * p.b});
    }
  }
  // No specular flags: the estimate is the neutral fallback for both.
  const IlluminantEstimate neutral;
  const auto a = normalize_illumination(img, neutral);
  const auto b = normalize_illumination(scaled, neutral);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_GE(a[i].f1, 0.0);
    EXPECT_LE(a[i].f1, 1.0);
    EXPECT_GE(a[i].f2, 0.0);
    EXPECT_LE(a[i].f2, 1.0);
    if (img[i].sum() >= kBlackThreshold && scaled[i].sum() >= kBlackThreshold) {
      EXPECT_NEAR(a[i].f1, b[i].f1, 1e-12);
      EXPECT_NEAR(a[i].f2, b[i].f2, 1e-12);
    }
  }
}
