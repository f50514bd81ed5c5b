#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hwloc/image.hpp"

namespace hwloc {

enum class Channel { kR = 0, kG = 1, kB = 2 };

// Pixels with r+g+b below this are treated as black (no chromaticity).
inline constexpr double kBlackThreshold = 0.02;

struct Chromaticity {
  double r = 1.0 / 3.0;
  double g = 1.0 / 3.0;
  double b = 1.0 / 3.0;

  double operator[](Channel c) const {
    return c == Channel::kR ? r : (c == Channel::kG ? g : b);
  }
};

struct ChromaticityMap {
  Grid<Chromaticity> sigma;
  Mask black;  // 1 where s < s_min; sigma is neutral there
};

inline double channel_value(const Rgb& p, Channel c) {
  return c == Channel::kR ? p.r : (c == Channel::kG ? p.g : p.b);
}

inline ChromaticityMap chromaticity(const RgbImage& img,
                                    double s_min = kBlackThreshold) {
  ChromaticityMap out{Grid<Chromaticity>(img.width(), img.height()),
                      Mask(img.width(), img.height(), 0)};
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& p = img[i];
    const double s = p.sum();
    if (s < s_min) {
      out.black[i] = 1;
      continue;
    }
    out.sigma[i] = {p.r / s, p.g / s, p.b / s};
  }
  return out;
}

// A pixel in the (1/s, sigma_c) plane. `pixel` is the row-major index.
struct IicPoint {
  double x = 0.0;
  double y = 0.0;
  std::size_t pixel = 0;
};

inline std::vector<IicPoint> iic_project(const RgbImage& img, Channel channel,
                                         double s_min = kBlackThreshold) {
  std::vector<IicPoint> points;
  points.reserve(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& p = img[i];
    const double s = p.sum();
    if (s < s_min) continue;
    points.push_back({1.0 / s, channel_value(p, channel) / s, i});
  }
  return points;
}

using IicPointSet = std::array<std::vector<IicPoint>, 3>;

inline IicPointSet iic_project_all(const RgbImage& img,
                                   double s_min = kBlackThreshold) {
  return {iic_project(img, Channel::kR, s_min),
          iic_project(img, Channel::kG, s_min),
          iic_project(img, Channel::kB, s_min)};
}

struct HighlightOptions {
  double brightness_percentile = 0.90;
  double max_chroma_gradient = 0.02;  // per pixel, central differences
  double s_min = kBlackThreshold;
};

// Bright pixels (total intensity above the given percentile) whose local
// chromaticity is smooth. Surface boundaries fail the gradient test.
inline Mask detect_highlight_candidates(const RgbImage& img,
                                        const HighlightOptions& opts = {}) {
  const int w = img.width();
  const int h = img.height();
  Mask mask(w, h, 0);

  std::vector<double> sums;
  sums.reserve(img.size());
  for (const auto& p : img.data()) sums.push_back(p.sum());
  std::vector<double> sorted = sums;
  const auto rank = static_cast<std::size_t>(
      std::clamp(opts.brightness_percentile, 0.0, 1.0) *
      static_cast<double>(sorted.size() - 1));
  std::nth_element(sorted.begin(), sorted.begin() + rank, sorted.end());
  const double threshold = sorted[rank];

  const auto chroma = chromaticity(img, opts.s_min);
  auto grad = [&](int u, int v) {
    const int u0 = std::max(u - 1, 0), u1 = std::min(u + 1, w - 1);
    const int v0 = std::max(v - 1, 0), v1 = std::min(v + 1, h - 1);
    const auto& a = chroma.sigma(u0, v);
    const auto& b = chroma.sigma(u1, v);
    const auto& c = chroma.sigma(u, v0);
    const auto& d = chroma.sigma(u, v1);
    const double du = std::hypot(b.r - a.r, b.g - a.g) / std::max(1, u1 - u0);
    const double dv = std::hypot(d.r - c.r, d.g - c.g) / std::max(1, v1 - v0);
    return std::hypot(du, dv);
  };

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t i = mask.index(u, v);
      if (sums[i] <= threshold || chroma.black[i]) continue;
      if (grad(u, v) < opts.max_chroma_gradient) mask[i] = 1;
    }
  }
  return mask;
}

struct IlluminantOptions {
  std::size_t min_candidates = 50;
  int histogram_bins = 200;
  int pair_radius = 4;             // pixels; votes pair nearby candidates only
  double min_relative_dx = 0.10;   // |x1-x2| >= this * max(x1,x2)
  int inlier_bins = 2;             // votes within +-this many bins of the mode
  double min_confidence = 0.25;
};

struct IlluminantEstimate {
  enum class Fallback { kNone, kTooFewCandidates, kNoConsensus };

  double gamma_r = 1.0 / 3.0;
  double gamma_g = 1.0 / 3.0;
  double gamma_b = 1.0 / 3.0;
  double confidence = 0.0;
  Fallback fallback = Fallback::kNone;
  // Candidate pixels whose votes agreed with the estimate. Empty on fallback.
  Mask specular;

  double operator[](Channel c) const {
    return c == Channel::kR ? gamma_r : (c == Channel::kG ? gamma_g : gamma_b);
  }
};

inline const char* to_string(IlluminantEstimate::Fallback f) {
  switch (f) {
    case IlluminantEstimate::Fallback::kNone: return "none";
    case IlluminantEstimate::Fallback::kTooFewCandidates:
      return "too_few_candidates";
    case IlluminantEstimate::Fallback::kNoConsensus: return "no_consensus";
  }
  return "unknown";
}

// Specular pixels of one surface lie on a line in the (1/s, sigma_c) plane
// whose intercept at 1/s -> 0 is the illuminant chromaticity. Every pair of
// nearby candidates votes its implied intercept into a histogram; the modal
// bin, refined by the mean of its votes, is the estimate for that channel.
//
// Votes are enumerated by pixel position, so the result does not depend on
// the order of `points`.
inline IlluminantEstimate estimate_illuminant(const IicPointSet& points,
                                              const Mask& highlight_mask,
                                              const IlluminantOptions& opts = {}) {
  IlluminantEstimate est;
  if (highlight_mask.empty()) {
    est.fallback = IlluminantEstimate::Fallback::kTooFewCandidates;
    return est;
  }
  const int w = highlight_mask.width();
  const int h = highlight_mask.height();
  const int bins = std::max(1, opts.histogram_bins);

  std::array<double, 3> gamma{};
  std::array<double, 3> confidence{};
  Grid<std::uint8_t> agree_bits(w, h, 0);

  for (int c = 0; c < 3; ++c) {
    // pixel -> point for this channel (candidates only)
    std::vector<const IicPoint*> at(highlight_mask.size(), nullptr);
    for (const auto& p : points[c]) {
      if (p.pixel < at.size() && highlight_mask[p.pixel]) at[p.pixel] = &p;
    }

    struct Vote {
      double intercept;
      std::size_t a;
      std::size_t b;
    };
    std::vector<Vote> votes;
    std::vector<std::uint8_t> participates(at.size(), 0);
    const int r = opts.pair_radius;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const std::size_t i = highlight_mask.index(u, v);
        const IicPoint* p = at[i];
        if (!p) continue;
        // forward half of the neighborhood so each pair is visited once
        for (int dv = 0; dv <= r; ++dv) {
          for (int du = -r; du <= r; ++du) {
            if (dv == 0 && du <= 0) continue;
            const int u2 = u + du, v2 = v + dv;
            if (u2 < 0 || u2 >= w || v2 >= h) continue;
            const std::size_t j = highlight_mask.index(u2, v2);
            const IicPoint* q = at[j];
            if (!q) continue;
            const double dx = q->x - p->x;
            if (std::abs(dx) < opts.min_relative_dx * std::max(p->x, q->x)) {
              continue;
            }
            const double intercept = p->y - p->x * (q->y - p->y) / dx;
            if (!(intercept >= 0.0 && intercept <= 1.0)) continue;
            votes.push_back({intercept, i, j});
            participates[i] = participates[j] = 1;
          }
        }
      }
    }

    const auto n_candidates = static_cast<std::size_t>(
        std::count(participates.begin(), participates.end(), 1));
    if (n_candidates < opts.min_candidates) {
      est.fallback = IlluminantEstimate::Fallback::kTooFewCandidates;
      return est;
    }

    std::vector<std::size_t> hist(bins, 0);
    auto bin_of = [&](double y) {
      return std::min(bins - 1, static_cast<int>(y * bins));
    };
    for (const auto& vt : votes) ++hist[bin_of(vt.intercept)];
    const int mode = static_cast<int>(
        std::max_element(hist.begin(), hist.end()) - hist.begin());

    double sum = 0.0;
    std::size_t in_mode = 0;
    std::size_t inliers = 0;
    for (const auto& vt : votes) {
      const int b = bin_of(vt.intercept);
      if (b == mode) {
        sum += vt.intercept;
        ++in_mode;
      }
      if (std::abs(b - mode) <= opts.inlier_bins) {
        ++inliers;
        agree_bits[vt.a] |= static_cast<std::uint8_t>(1u << c);
        agree_bits[vt.b] |= static_cast<std::uint8_t>(1u << c);
      }
    }
    gamma[c] = sum / static_cast<double>(in_mode);
    confidence[c] = static_cast<double>(inliers) / static_cast<double>(votes.size());
  }

  const double total = gamma[0] + gamma[1] + gamma[2];
  const double conf = *std::min_element(confidence.begin(), confidence.end());
  if (!(total > 0.0) || conf < opts.min_confidence) {
    est.fallback = IlluminantEstimate::Fallback::kNoConsensus;
    return est;
  }
  est.gamma_r = gamma[0] / total;
  est.gamma_g = gamma[1] / total;
  est.gamma_b = 1.0 - est.gamma_r - est.gamma_g;
  est.confidence = conf;
  est.specular = Mask(w, h, 0);
  for (std::size_t i = 0; i < agree_bits.size(); ++i) {
    const unsigned bits = agree_bits[i];
    const int n = static_cast<int>((bits & 1u) + ((bits >> 1) & 1u) + ((bits >> 2) & 1u));
    if (n >= 2) est.specular[i] = 1;
  }
  return est;
}

// Convenience: candidates + estimate straight from an image.
inline IlluminantEstimate estimate_illuminant(const RgbImage& img,
                                              const HighlightOptions& hopts = {},
                                              const IlluminantOptions& opts = {}) {
  const auto mask = detect_highlight_candidates(img, hopts);
  return estimate_illuminant(iic_project_all(img, hopts.s_min), mask, opts);
}

// Per-pixel (sigma_r, sigma_g). Pixels flagged specular by `est` are replaced
// by the median chromaticity of their 5x5 non-specular neighborhood; flagged
// regions wider than the window are filled from their rim inwards.
inline FeatureGrid normalize_illumination(const RgbImage& img,
                                          const IlluminantEstimate& est,
                                          double s_min = kBlackThreshold) {
  const auto chroma = chromaticity(img, s_min);
  const int w = img.width();
  const int h = img.height();
  FeatureGrid out(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = {chroma.sigma[i].r, chroma.sigma[i].g};
  }
  if (est.specular.width() != w || est.specular.height() != h) return out;

  Mask known(w, h, 1);
  std::size_t unknown = 0;
  for (std::size_t i = 0; i < known.size(); ++i) {
    if (est.specular[i]) {
      known[i] = 0;
      ++unknown;
    }
  }

  auto median = [](std::vector<double>& v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double m = v[n / 2];
    if (n % 2 == 0) {
      const double lo = *std::max_element(v.begin(), v.begin() + n / 2);
      m = 0.5 * (m + lo);
    }
    return m;
  };

  std::vector<double> f1, f2;
  while (unknown > 0) {
    Mask next_known = known;
    FeatureGrid next = out;
    std::size_t filled = 0;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (known(u, v)) continue;
        f1.clear();
        f2.clear();
        for (int dv = -2; dv <= 2; ++dv) {
          for (int du = -2; du <= 2; ++du) {
            const int uu = u + du, vv = v + dv;
            if (!known.contains(uu, vv) || !known(uu, vv)) continue;
            f1.push_back(out(uu, vv).f1);
            f2.push_back(out(uu, vv).f2);
          }
        }
        if (f1.empty()) continue;
        next(u, v) = {median(f1), median(f2)};
        next_known(u, v) = 1;
        ++filled;
      }
    }
    if (filled == 0) break;  // every pixel flagged: nothing to borrow from
    out = std::move(next);
    known = std::move(next_known);
    unknown -= filled;
  }
  return out;
}

// Ablation feature: raw (r, g) intensities, no chromaticity normalization.
inline FeatureGrid intensity_features(const RgbImage& img) {
  FeatureGrid out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = {img[i].r, img[i].g};
  return out;
}

}  // namespace hwloc
