#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "hwloc/image.hpp"
#include "hwloc/parallel.hpp"

namespace hwloc {

struct MeanShiftParams {
  double spatial_bandwidth = 8.0;  // h_s, pixels
  double range_bandwidth = 0.04;   // h_r, feature units
  int max_iter = 30;
  double eps = 1e-3;
  int threads = 0;  // 0: hardware concurrency
};

inline void validate(const MeanShiftParams& p) {
  if (!(p.spatial_bandwidth >= 1.0)) {
    throw std::invalid_argument("mean shift: spatial bandwidth must be >= 1");
  }
  if (!(p.range_bandwidth > 0.0)) {
    throw std::invalid_argument("mean shift: range bandwidth must be > 0");
  }
  if (p.max_iter < 1) {
    throw std::invalid_argument("mean shift: max_iter must be >= 1");
  }
  if (!(p.eps > 0.0)) throw std::invalid_argument("mean shift: eps must be > 0");
}

// Flat-kernel mean shift filtering in the joint (u, v, f1, f2) domain. Each
// pixel's joint vector climbs to the mean of the samples within spatial
// radius h_s and range radius h_r of the current estimate; the pixel takes
// the range part of the converged mode.
inline FeatureGrid mean_shift_filter(const FeatureGrid& features,
                                     const MeanShiftParams& params = {}) {
  validate(params);
  const int w = features.width();
  const int h = features.height();
  const double hs = params.spatial_bandwidth;
  const double hr = params.range_bandwidth;
  const double hs2 = hs * hs;
  const double hr2 = hr * hr;
  const int reach = static_cast<int>(std::ceil(hs));
  FeatureGrid out(w, h);

  parallel_for(h, params.threads, [&](int row_begin, int row_end) {
    for (int v0 = row_begin; v0 < row_end; ++v0) {
      for (int u0 = 0; u0 < w; ++u0) {
        double yu = u0, yv = v0;
        double y1 = features(u0, v0).f1, y2 = features(u0, v0).f2;
        for (int it = 0; it < params.max_iter; ++it) {
          const int cu = static_cast<int>(std::lround(yu));
          const int cv = static_cast<int>(std::lround(yv));
          const int ua = std::max(0, cu - reach), ub = std::min(w - 1, cu + reach);
          const int va = std::max(0, cv - reach), vb = std::min(h - 1, cv + reach);
          double su = 0, sv = 0, s1 = 0, s2 = 0;
          int n = 0;
          for (int v = va; v <= vb; ++v) {
            const double dv = v - yv;
            const RangeFeature* row = &features(0, v);
            for (int u = ua; u <= ub; ++u) {
              const double du = u - yu;
              if (du * du + dv * dv > hs2) continue;
              const double d1 = row[u].f1 - y1;
              const double d2 = row[u].f2 - y2;
              if (d1 * d1 + d2 * d2 > hr2) continue;
              su += u;
              sv += v;
              s1 += row[u].f1;
              s2 += row[u].f2;
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
          if (step < params.eps) break;
        }
        out(u0, v0) = {y1, y2};
      }
    }
  });
  return out;
}

struct SegmentMap {
  Grid<int> labels;
  int region_count = 0;
  std::vector<std::size_t> sizes;     // indexed by label
  std::vector<RangeFeature> means;    // mean filtered feature per label
};

namespace detail {

inline int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

inline double feature_distance(const RangeFeature& a, const RangeFeature& b) {
  return std::hypot(a.f1 - b.f1, a.f2 - b.f2);
}

}  // namespace detail

// 4-connected pixels whose filtered features differ by less than h_r form a
// region. Regions below min_region_size are merged into their most similar
// neighbor (ties: smallest label). Labels are dense, numbered in raster order
// of first appearance.
inline SegmentMap label_segments(const FeatureGrid& filtered, double range_bandwidth,
                                 int min_region_size) {
  const int w = filtered.width();
  const int h = filtered.height();
  const std::size_t n = filtered.size();

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto unite = [&](int a, int b) {
    a = detail::find_root(parent, a);
    b = detail::find_root(parent, b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;  // smaller index stays root
  };
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int i = static_cast<int>(filtered.index(u, v));
      if (u + 1 < w &&
          detail::feature_distance(filtered[i], filtered[i + 1]) < range_bandwidth) {
        unite(i, i + 1);
      }
      if (v + 1 < h &&
          detail::feature_distance(filtered[i], filtered[i + w]) < range_bandwidth) {
        unite(i, i + w);
      }
    }
  }

  // Initial components, numbered in raster order.
  std::vector<int> comp(n, -1);
  std::vector<int> root_to_comp(n, -1);
  int n_comp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int r = detail::find_root(parent, static_cast<int>(i));
    if (root_to_comp[r] < 0) root_to_comp[r] = n_comp++;
    comp[i] = root_to_comp[r];
  }

  std::vector<std::size_t> size(n_comp, 0);
  std::vector<double> sum1(n_comp, 0.0), sum2(n_comp, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    ++size[comp[i]];
    sum1[comp[i]] += filtered[i].f1;
    sum2[comp[i]] += filtered[i].f2;
  }
  std::vector<std::set<int>> adj(n_comp);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t i = filtered.index(u, v);
      if (u + 1 < w && comp[i] != comp[i + 1]) {
        adj[comp[i]].insert(comp[i + 1]);
        adj[comp[i + 1]].insert(comp[i]);
      }
      if (v + 1 < h && comp[i] != comp[i + w]) {
        adj[comp[i]].insert(comp[i + w]);
        adj[comp[i + w]].insert(comp[i]);
      }
    }
  }

  std::vector<int> merged_into(n_comp);
  std::iota(merged_into.begin(), merged_into.end(), 0);
  using Item = std::pair<std::size_t, int>;  // (size, comp), smallest first
  std::priority_queue<Item, std::vector<Item>, std::greater<>> small;
  const auto min_size = static_cast<std::size_t>(std::max(0, min_region_size));
  for (int c = 0; c < n_comp; ++c) {
    if (size[c] < min_size) small.push({size[c], c});
  }
  auto mean_of = [&](int c) {
    return RangeFeature{sum1[c] / size[c], sum2[c] / size[c]};
  };
  while (!small.empty()) {
    const auto [sz, c] = small.top();
    small.pop();
    if (merged_into[c] != c || size[c] != sz || size[c] >= min_size) continue;
    if (adj[c].empty()) continue;
    int best = -1;
    double best_d = 0.0;
    const RangeFeature mc = mean_of(c);
    for (int nb : adj[c]) {  // std::set iterates ascending: ties keep smallest
      const double d = detail::feature_distance(mc, mean_of(nb));
      if (best < 0 || d < best_d) {
        best = nb;
        best_d = d;
      }
    }
    merged_into[c] = best;
    size[best] += size[c];
    sum1[best] += sum1[c];
    sum2[best] += sum2[c];
    for (int nb : adj[c]) {
      adj[nb].erase(c);
      if (nb != best) {
        adj[nb].insert(best);
        adj[best].insert(nb);
      }
    }
    adj[best].erase(c);
    adj[c].clear();
    if (size[best] < min_size) small.push({size[best], best});
  }
  auto resolve = [&](int c) {
    while (merged_into[c] != c) c = merged_into[c];
    return c;
  };

  SegmentMap map;
  map.labels = Grid<int>(w, h, -1);
  std::vector<int> dense(n_comp, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = resolve(comp[i]);
    if (dense[c] < 0) dense[c] = map.region_count++;
    map.labels[i] = dense[c];
  }
  map.sizes.assign(map.region_count, 0);
  map.means.assign(map.region_count, {});
  std::vector<double> m1(map.region_count, 0.0), m2(map.region_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = map.labels[i];
    ++map.sizes[l];
    m1[l] += filtered[i].f1;
    m2[l] += filtered[i].f2;
  }
  for (int l = 0; l < map.region_count; ++l) {
    map.means[l] = {m1[l] / map.sizes[l], m2[l] / map.sizes[l]};
  }
  return map;
}

struct SegmentParams {
  MeanShiftParams mean_shift;
  int min_region_size = 64;
};

inline SegmentMap segment(const FeatureGrid& features, const SegmentParams& params = {}) {
  const auto filtered = mean_shift_filter(features, params.mean_shift);
  return label_segments(filtered, params.mean_shift.range_bandwidth,
                        params.min_region_size);
}

// Outer boundary of one region: closed, consecutive points 8-adjacent,
// counter-clockwise as displayed (v pointing down), starting at the region's
// first pixel in raster order.
struct Contour {
  int region = 0;
  std::vector<PixelCoord> points;
};

namespace detail {

// Clockwise on screen, starting west.
inline constexpr std::array<PixelCoord, 8> kMooreRing{{
    {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

inline int ring_index(int du, int dv) {
  for (int k = 0; k < 8; ++k) {
    if (kMooreRing[k].u == du && kMooreRing[k].v == dv) return k;
  }
  return -1;
}

}  // namespace detail

inline Contour trace_region(const Grid<int>& labels, int region, PixelCoord start) {
  auto inside = [&](PixelCoord p) {
    return labels.contains(p) && labels(p.u, p.v) == region;
  };
  // Moore tracing walks clockwise; collected then reversed.
  auto step = [&](PixelCoord c, int back) -> std::pair<PixelCoord, int> {
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      const PixelCoord n{c.u + detail::kMooreRing[d].u, c.v + detail::kMooreRing[d].v};
      if (inside(n)) {
        const int pd = (d + 7) % 8;
        const PixelCoord prev{c.u + detail::kMooreRing[pd].u,
                              c.v + detail::kMooreRing[pd].v};
        return {n, detail::ring_index(prev.u - n.u, prev.v - n.v)};
      }
    }
    return {c, -1};
  };

  std::vector<PixelCoord> cw{start};
  auto [next, back] = step(start, 0);  // west of the first raster pixel is outside
  if (back < 0) return {region, cw};
  const PixelCoord second = next;
  PixelCoord cur = next;
  // 4 * area bounds the walk on pathological shapes.
  const std::size_t limit = 4 * labels.size() + 8;
  while (cw.size() < limit) {
    if (cur == start) {
      const auto [after, b2] = step(cur, back);
      if (after == second) break;
      cw.push_back(cur);
      cur = after;
      back = b2;
      continue;
    }
    cw.push_back(cur);
    std::tie(cur, back) = step(cur, back);
  }

  Contour c{region, {}};
  c.points.reserve(cw.size());
  c.points.push_back(cw.front());
  for (auto it = cw.rbegin(); it != cw.rend() - 1; ++it) c.points.push_back(*it);
  return c;
}

// One outer contour per region, ordered by region id. Pixels outside the
// image count as background.
inline std::vector<Contour> extract_boundaries(const SegmentMap& map) {
  const auto& labels = map.labels;
  std::vector<PixelCoord> first(map.region_count, PixelCoord{-1, -1});
  for (int v = 0; v < labels.height(); ++v) {
    for (int u = 0; u < labels.width(); ++u) {
      auto& f = first[labels(u, v)];
      if (f.u < 0) f = {u, v};
    }
  }
  std::vector<Contour> out;
  out.reserve(map.region_count);
  for (int r = 0; r < map.region_count; ++r) {
    out.push_back(trace_region(labels, r, first[r]));
  }
  return out;
}

// Debug rendering: label id -> hue stepped by the golden ratio.
inline RgbImage label_image(const SegmentMap& map) {
  const auto& labels = map.labels;
  std::vector<Rgb> palette(map.region_count);
  for (int l = 0; l < map.region_count; ++l) {
    const double hue = std::fmod(l * 0.618033988749895, 1.0) * 6.0;
    const double s = 0.65, v = 0.95;
    const int sector = static_cast<int>(hue) % 6;
    const double f = hue - std::floor(hue);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
      case 0: palette[l] = {v, t, p}; break;
      case 1: palette[l] = {q, v, p}; break;
      case 2: palette[l] = {p, v, t}; break;
      case 3: palette[l] = {p, q, v}; break;
      case 4: palette[l] = {t, p, v}; break;
      default: palette[l] = {v, p, q}; break;
    }
  }
  std::vector<Rgb> data(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) data[i] = palette[labels[i]];
  return RgbImage(labels.width(), labels.height(), std::move(data));
}

}  // namespace hwloc
