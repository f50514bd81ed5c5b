#pragma once

// Fixtures and reference implementations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "hwloc/fuse.hpp"
#include "hwloc/image.hpp"
#include "hwloc/segment.hpp"
#include "hwloc/synth.hpp"

namespace hwloc::testing {

struct LabeledImage {
  RgbImage image;
  Grid<int> truth;
};

// Piecewise-constant scene: a background plus overlapping axis-aligned
// rectangles, each a distinct chromaticity at its own brightness, with
// Gaussian noise on every channel.
inline LabeledImage mondrian(int w, int h, std::uint64_t seed, double noise_sigma,
                             int rectangles = 8) {
  // Chromaticities at least 0.1 apart in (r, g).
  static const Rgb palette[] = {{0.45, 0.35, 0.20}, {0.20, 0.50, 0.30}, {0.25, 0.25, 0.50},
                                {0.60, 0.20, 0.20}, {0.33, 0.33, 0.34}, {0.15, 0.30, 0.55},
                                {0.50, 0.45, 0.05}, {0.30, 0.60, 0.10}, {0.10, 0.15, 0.75}};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> x0(0, w - 40), y0(0, h - 40);
  std::uniform_real_distribution<double> bright(0.9, 1.6);
  Grid<int> truth(w, h, 0);
  std::vector<double> level{bright(rng)};
  const int n = std::min(rectangles, 8);
  for (int k = 1; k <= n; ++k) {
    const int u0 = x0(rng), v0 = y0(rng);
    std::uniform_int_distribution<int> sw(30, std::max(31, w - u0)), sh(30, std::max(31, h - v0));
    const int u1 = std::min(w, u0 + sw(rng)), v1 = std::min(h, v0 + sh(rng));
    for (int v = v0; v < v1; ++v) {
      for (int u = u0; u < u1; ++u) truth(u, v) = k;
    }
    level.push_back(bright(rng));
  }
  std::normal_distribution<double> noise(0.0, noise_sigma);
  RgbImage img(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int k = truth(u, v);
      const Rgb& c = palette[k];
      auto ch = [&](double x) { return std::clamp(level[k] * x + noise(rng), 0.0, 1.0); };
      const double r = ch(c.r), g = ch(c.g), b = ch(c.b);
      img.set(u, v, {r, g, b});
    }
  }
  return {std::move(img), std::move(truth)};
}

// Pixels with a 4-neighbor of another label.
inline Grid<std::uint8_t> boundary_pixels(const Grid<int>& labels) {
  Grid<std::uint8_t> b(labels.width(), labels.height(), 0);
  for (int v = 0; v < labels.height(); ++v) {
    for (int u = 0; u < labels.width(); ++u) {
      const int l = labels(u, v);
      const bool edge = (u + 1 < labels.width() && labels(u + 1, v) != l) ||
                        (v + 1 < labels.height() && labels(u, v + 1) != l) ||
                        (u > 0 && labels(u - 1, v) != l) || (v > 0 && labels(u, v - 1) != l);
      b(u, v) = edge ? 1 : 0;
    }
  }
  return b;
}

struct BoundaryScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// A boundary pixel counts as matched if the other map has a boundary pixel
// within Chebyshev distance `tol`.
inline BoundaryScore boundary_f1(const Grid<int>& predicted, const Grid<int>& truth, int tol) {
  const auto bp = boundary_pixels(predicted), bt = boundary_pixels(truth);
  auto matched = [&](const Grid<std::uint8_t>& from, const Grid<std::uint8_t>& to) {
    int hit = 0, total = 0;
    for (int v = 0; v < from.height(); ++v) {
      for (int u = 0; u < from.width(); ++u) {
        if (!from(u, v)) continue;
        ++total;
        bool found = false;
        for (int dv = -tol; dv <= tol && !found; ++dv) {
          for (int du = -tol; du <= tol && !found; ++du) {
            found = to.contains(u + du, v + dv) && to(u + du, v + dv);
          }
        }
        hit += found;
      }
    }
    return total == 0 ? 1.0 : static_cast<double>(hit) / total;
  };
  BoundaryScore s;
  s.precision = matched(bp, bt);
  s.recall = matched(bt, bp);
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0;
  return s;
}

// Mean shift mode seek written the slow way: every pixel of the image is
// tested against the joint window on every iteration.
inline RangeFeature brute_force_mode(const FeatureGrid& f, int u0, int v0,
                                     const MeanShiftParams& p) {
  double yu = u0, yv = v0, y1 = f(u0, v0).f1, y2 = f(u0, v0).f2;
  const double hs2 = p.spatial_bandwidth * p.spatial_bandwidth;
  const double hr2 = p.range_bandwidth * p.range_bandwidth;
  for (int it = 0; it < p.max_iter; ++it) {
    double su = 0, sv = 0, s1 = 0, s2 = 0;
    int n = 0;
    for (int v = 0; v < f.height(); ++v) {
      for (int u = 0; u < f.width(); ++u) {
        const double du = u - yu, dv = v - yv;
        const double d1 = f(u, v).f1 - y1, d2 = f(u, v).f2 - y2;
        if (du * du + dv * dv > hs2 || d1 * d1 + d2 * d2 > hr2) continue;
        su += u;
        sv += v;
        s1 += f(u, v).f1;
        s2 += f(u, v).f2;
        ++n;
      }
    }
    if (n == 0) break;
    const double nu = su / n, nv = sv / n, n1 = s1 / n, n2 = s2 / n;
    const double step = std::sqrt(((nu - yu) * (nu - yu) + (nv - yv) * (nv - yv)) / hs2 +
                                  ((n1 - y1) * (n1 - y1) + (n2 - y2) * (n2 - y2)) / hr2);
    yu = nu;
    yv = nv;
    y1 = n1;
    y2 = n2;
    if (step < p.eps) break;
  }
  return {y1, y2};
}

// Closed 8-connected digital contour through the polygon's vertices,
// counter-clockwise on screen when the vertices are.
inline std::vector<PixelCoord> digital_polygon(const std::vector<PixelCoord>& vertices) {
  std::vector<PixelCoord> out;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const PixelCoord a = vertices[i], b = vertices[(i + 1) % vertices.size()];
    const int n = std::max(std::abs(b.u - a.u), std::abs(b.v - a.v));
    for (int t = 0; t < n; ++t) {
      out.push_back({a.u + static_cast<int>(std::lround(static_cast<double>(t) * (b.u - a.u) / n)),
                     a.v + static_cast<int>(std::lround(static_cast<double>(t) * (b.v - a.v) / n))});
    }
  }
  return out;
}

// Solid disc of label 1 on a background of 0.
inline Grid<int> disc_labels(int size, double cx, double cy, double r) {
  Grid<int> g(size, size, 0);
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      if ((u - cx) * (u - cx) + (v - cy) * (v - cy) <= r * r) g(u, v) = 1;
    }
  }
  return g;
}

// Red square on a blue background.
inline RgbImage square_image(int size, int u0, int v0, int side) {
  RgbImage img(size, size, Rgb{0.15, 0.25, 0.55});
  for (int v = v0; v < v0 + side; ++v) {
    for (int u = u0; u < u0 + side; ++u) img.set(u, v, {0.60, 0.25, 0.15});
  }
  return img;
}

inline RgbImage disc_image(int size, double cx, double cy, double r) {
  RgbImage img(size, size, Rgb{0.15, 0.25, 0.55});
  const auto g = disc_labels(size, cx, cy, r);
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      if (g(u, v)) img.set(u, v, {0.60, 0.25, 0.15});
    }
  }
  return img;
}

// Detections in the camera ground frame for a random testbed pose: the
// `n_true` nearest plan landmarks in the field of view with Gaussian noise,
// plus `n_false` floor points that match nothing.
struct RansacScene {
  Pose2D truth;
  std::vector<GroundPoint> detections;
  std::vector<int> true_ids;  // plan landmark id per true detection, in order
  std::size_t n_true = 0;     // true detections come first
  CoarseEstimate coarse;
};

inline RansacScene ransac_scene(const FloorPlan& plan, std::uint64_t seed, std::size_t n_true = 12,
                                std::size_t n_false = 5, double noise = 0.03,
                                double max_range = 14.0) {
  std::mt19937_64 rng(seed);
  const auto spec = synth::testbed_scene();
  std::uniform_real_distribution<double> along(1.5, plan.depth - 1.5), lateral(-0.3, 0.3),
      jitter(-3.0, 3.0), unit(0.0, 1.0);
  std::bernoulli_distribution back(0.5);
  std::normal_distribution<double> n(0.0, noise);
  const double half_fov = 0.64;  // tan of half the default camera's field of view
  RansacScene scene;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double heading = (back(rng) ? -1.0 : 1.0) * std::numbers::pi / 2 + jitter(rng) * std::numbers::pi / 180;
    scene.truth = {spec.center_x + lateral(rng), along(rng), normalize_angle(heading)};
    std::vector<std::pair<double, const Landmark*>> seen;
    for (const auto& l : plan.landmarks) {
      const auto g = to_ground(scene.truth, l.position);
      if (g.x < 1.0 || g.x > max_range || std::abs(g.y) > half_fov * g.x) continue;
      seen.push_back({g.x, &l});
    }
    if (seen.size() < n_true) continue;
    std::sort(seen.begin(), seen.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    seen.resize(n_true);
    int left = 0, right = 0;
    for (const auto& [d, l] : seen) ++(to_ground(scene.truth, l->position).y > 0 ? left : right);
    if (left < 2 || right < 2) continue;
    scene.detections.clear();
    scene.true_ids.clear();
    for (const auto& [d, l] : seen) {
      const auto g = to_ground(scene.truth, l->position);
      scene.detections.push_back({g.x + n(rng), g.y + n(rng)});
      scene.true_ids.push_back(l->id);
    }
    break;
  }
  scene.n_true = scene.detections.size();
  // False corners on the hallway floor ahead of the camera.
  const double xl = spec.left_x(), xr = spec.right_x();
  while (scene.detections.size() < scene.n_true + n_false) {
    const double fwd = 1.0 + unit(rng) * (max_range - 1.0);
    const double x = xl + unit(rng) * (xr - xl);
    const Point2 m{x, scene.truth.y + std::sin(scene.truth.theta) * fwd};
    const auto g = to_ground(scene.truth, m);
    if (g.x < 1.0 || std::abs(g.y) > half_fov * g.x) continue;
    scene.detections.push_back(g);
  }
  // Coarse center off by up to 4 m per axis; the radius covers that offset
  // plus the sensing range so every visible landmark is a candidate.
  std::uniform_real_distribution<double> offset(-4.0, 4.0);
  const Point2 center{scene.truth.x + offset(rng), scene.truth.y + offset(rng)};
  double radius = 10.0;
  for (std::size_t i = 0; i < scene.n_true; ++i) {
    const Point2 m = to_map(scene.truth, scene.detections[i]);
    radius = std::max(radius, std::ceil(std::hypot(m.x - center.x, m.y - center.y) + 1.0));
  }
  scene.coarse = {center, radius, false};
  return scene;
}

}  // namespace hwloc::testing
