#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwloc/image.hpp"
#include "hwloc/segment.hpp"

namespace hwloc {

struct CornerPoint {
  PixelCoord coord;
  double cornerity = 0.0;
  int contour = 0;          // index into the contour list
  std::size_t index = 0;    // position along that contour
};

struct CornerParams {
  int k = 7;                // support half-width along the contour
  double threshold = 0.45;
  int nms_window = 7;
  // Move each corner to the contour point nearest the intersection of lines
  // fitted to its two arms. Mean shift rounds region corners, which shifts
  // the cornerity peak off the vertex.
  bool refine = true;
};

class ContourTooShort : public std::invalid_argument {
 public:
  ContourTooShort(std::size_t length, int k)
      : std::invalid_argument("contour of length " + std::to_string(length) +
                              " too short for k=" + std::to_string(k) +
                              ", need at least " + std::to_string(2 * k + 1)),
        min_length_(2 * static_cast<std::size_t>(k) + 1) {}
  std::size_t min_length() const { return min_length_; }

 private:
  std::size_t min_length_;
};

namespace detail {

inline std::size_t wrap_index(long i, std::size_t n) {
  const auto m = static_cast<long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

inline double cornerity_unchecked(std::span<const PixelCoord> pts, std::size_t i, int k) {
  const long ii = static_cast<long>(i);
  const PixelCoord& a = pts[wrap_index(ii - k, pts.size())];
  const PixelCoord& b = pts[wrap_index(ii + k, pts.size())];
  const PixelCoord& p = pts[i];
  const double cx = b.u - a.u, cy = b.v - a.v;
  const double chord = std::hypot(cx, cy);
  const double px = p.u - a.u, py = p.v - a.v;
  // Degenerate chord: the distance to the chord line is the distance to a.
  const double dperp = chord > 0.0 ? std::abs(cx * py - cy * px) / chord : std::hypot(px, py);
  return dperp / (0.5 * chord + 1e-9);
}

struct ArmLine {
  double px = 0, py = 0, dx = 1, dy = 0;
};

inline ArmLine fit_arm(std::span<const PixelCoord> pts, long from, long to) {
  const std::size_t n = pts.size();
  double mx = 0, my = 0;
  const double m = static_cast<double>(to - from + 1);
  for (long i = from; i <= to; ++i) {
    mx += pts[wrap_index(i, n)].u;
    my += pts[wrap_index(i, n)].v;
  }
  mx /= m;
  my /= m;
  double sxx = 0, syy = 0, sxy = 0;
  for (long i = from; i <= to; ++i) {
    const double x = pts[wrap_index(i, n)].u - mx, y = pts[wrap_index(i, n)].v - my;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double a = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  return {mx, my, std::cos(a), std::sin(a)};
}

// Contour index nearest the arm intersection, searched within +-k/2 of i;
// i itself when the arms are too close to parallel.
inline std::size_t refine_corner(std::span<const PixelCoord> pts, std::size_t i, int k) {
  if (k < 3) return i;
  const long ii = static_cast<long>(i);
  const ArmLine a = fit_arm(pts, ii - k, ii - 2);
  const ArmLine b = fit_arm(pts, ii + 2, ii + k);
  const double det = a.dx * b.dy - a.dy * b.dx;
  if (std::abs(det) < 0.2) return i;
  const double t = ((b.px - a.px) * b.dy - (b.py - a.py) * b.dx) / det;
  const double xx = a.px + t * a.dx, xy = a.py + t * a.dy;
  std::size_t best = i;
  double best_d = std::hypot(pts[i].u - xx, pts[i].v - xy);
  for (long d = -k / 2; d <= k / 2; ++d) {
    const std::size_t j = wrap_index(ii + d, pts.size());
    const double dd = std::hypot(pts[j].u - xx, pts[j].v - xy);
    if (dd < best_d) {
      best_d = dd;
      best = j;
    }
  }
  return best;
}

}  // namespace detail

// Perpendicular distance of p_i from the chord p_{i-k} -> p_{i+k}, divided by
// half the chord length. Indices wrap. 0 on straight runs, 1 at a right angle,
// above 1 for acute spikes.
inline double cornerity(const Contour& contour, std::size_t i, int k) {
  if (k < 1) throw std::invalid_argument("cornerity: k must be >= 1");
  if (contour.points.size() < 2 * static_cast<std::size_t>(k) + 1) {
    throw ContourTooShort(contour.points.size(), k);
  }
  if (i >= contour.points.size()) throw std::out_of_range("cornerity: index out of range");
  return detail::cornerity_unchecked(contour.points, i, k);
}

// Scores every boundary point, drops 1-px spur tips (and their immediate
// neighbors), then keeps local maxima over +-nms_window along the contour.
// With refine on, each maximum may move to a nearby point closer to its
// vertex whose score also clears the threshold; survivors stay more than nms_window apart. Contours shorter
// than 2k+1 yield nothing. Sorted by (contour, index).
inline std::vector<CornerPoint> detect_corners(std::span<const Contour> contours,
                                               const CornerParams& params = {}) {
  std::vector<CornerPoint> out;
  const int k = params.k;
  if (k < 1) throw std::invalid_argument("detect_corners: k must be >= 1");
  for (std::size_t ci = 0; ci < contours.size(); ++ci) {
    const auto& pts = contours[ci].points;
    const std::size_t n = pts.size();
    if (n < 2 * static_cast<std::size_t>(k) + 1) continue;

    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = detail::cornerity_unchecked(pts, i, k);

    std::vector<char> candidate(n, 0);
    for (std::size_t i = 0; i < n; ++i) candidate[i] = score[i] >= params.threshold;
    for (std::size_t i = 0; i < n; ++i) {
      if (pts[(i + n - 1) % n] == pts[(i + 1) % n]) {
        for (long d = -2; d <= 2; ++d) {
          candidate[detail::wrap_index(static_cast<long>(i) + d, n)] = 0;
        }
      }
    }

    const int win = std::max(0, params.nms_window);
    std::vector<CornerPoint> kept;
    for (std::size_t i = 0; i < n; ++i) {
      if (!candidate[i]) continue;
      bool is_max = true;
      for (long d = -win; d <= win && is_max; ++d) {
        if (d == 0) continue;
        const std::size_t j = detail::wrap_index(static_cast<long>(i) + d, n);
        if (j == i || !candidate[j]) continue;
        // Plateaus: the earliest index along the window wins.
        if (score[j] > score[i] || (score[j] == score[i] && d < 0)) is_max = false;
      }
      if (is_max) {
        std::size_t at = i;
        if (params.refine) {
          const std::size_t j = detail::refine_corner(pts, i, k);
          // Spur suppression only keeps spurs from seeding corners; a thin
          // wedge tip is a valid refined position.
          if (score[j] >= params.threshold) at = j;
        }
        kept.push_back({pts[at], score[at], static_cast<int>(ci), at});
      }
    }
    std::sort(kept.begin(), kept.end(),
              [](const CornerPoint& a, const CornerPoint& b) { return a.index < b.index; });
    // Refinement can pull two maxima together; keep the stronger one.
    std::vector<char> drop(kept.size(), 0);
    for (std::size_t a = 0; a < kept.size(); ++a) {
      for (std::size_t b = a + 1; b < kept.size(); ++b) {
        const std::size_t gap = kept[b].index - kept[a].index;
        if (std::min(gap, n - gap) > static_cast<std::size_t>(win)) continue;
        if (kept[b].cornerity > kept[a].cornerity) drop[a] = 1;
        else drop[b] = 1;
      }
    }
    for (std::size_t a = 0; a < kept.size(); ++a) {
      if (!drop[a]) out.push_back(kept[a]);
    }
    kept.clear();
  }
  return out;
}

struct MicroLandmarkParams {
  int border_margin = 7;       // px; the image frame is not a scene edge
  double merge_radius = 3.0;   // px; one corner per junction across contours
  int floor_reach = 2;         // px; Chebyshev radius searched for the floor boundary
  // Rows at or above this cannot see the floor (camera horizon); -inf keeps all.
  double horizon_row = -std::numeric_limits<double>::infinity();
};

struct MicroLandmarks {
  std::vector<CornerPoint> corners;
  int floor_region = -1;
  bool unfiltered = false;  // degenerate map: corners passed through
};

// The floor is the region owning the most pixels of the bottom image row.
inline int floor_region(const SegmentMap& map) {
  const auto& labels = map.labels;
  if (labels.empty() || map.region_count == 0) return -1;
  std::vector<int> count(map.region_count, 0);
  const int v = labels.height() - 1;
  for (int u = 0; u < labels.width(); ++u) ++count[labels(u, v)];
  // max_element returns the first maximum: smallest label on ties.
  return static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
}

// Keeps corners lying on the floor region's boundary: the (2r+1)^2 window
// around the corner, r = floor_reach, holds both floor and non-floor pixels.
// Corners within border_margin of the frame are dropped, and corners from
// different contours closer than merge_radius collapse to the highest-scoring
// one. Corners at or above horizon_row are dropped.
inline MicroLandmarks filter_micro_landmarks(std::span<const CornerPoint> corners,
                                             const SegmentMap& map,
                                             const MicroLandmarkParams& params = {}) {
  MicroLandmarks result;
  result.floor_region = floor_region(map);
  if (result.floor_region < 0) {
    result.corners.assign(corners.begin(), corners.end());
    result.unfiltered = true;
    return result;
  }
  const auto& labels = map.labels;
  const int floor = result.floor_region;
  const int w = labels.width(), h = labels.height();
  const int m = params.border_margin;

  const int r = std::max(1, params.floor_reach);
  auto on_floor_edge = [&](PixelCoord p) {
    bool seen_floor = false, seen_other = false;
    for (int v = p.v - r; v <= p.v + r; ++v) {
      for (int u = p.u - r; u <= p.u + r; ++u) {
        if (!labels.contains(u, v)) continue;
        (labels(u, v) == floor ? seen_floor : seen_other) = true;
      }
    }
    return seen_floor && seen_other;
  };

  std::vector<CornerPoint> kept;
  for (const auto& c : corners) {
    if (!labels.contains(c.coord)) continue;
    if (c.coord.u < m || c.coord.v < m || c.coord.u >= w - m || c.coord.v >= h - m) continue;
    if (c.coord.v <= params.horizon_row) continue;
    if (on_floor_edge(c.coord)) kept.push_back(c);
  }

  std::vector<std::size_t> order(kept.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return kept[a].cornerity > kept[b].cornerity;
  });
  std::vector<char> take(kept.size(), 0);
  const double r2 = params.merge_radius * params.merge_radius;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const auto& c = kept[order[oi]];
    bool clash = false;
    for (std::size_t oj = 0; oj < oi && !clash; ++oj) {
      if (!take[order[oj]]) continue;
      const auto& d = kept[order[oj]];
      const double du = c.coord.u - d.coord.u, dv = c.coord.v - d.coord.v;
      clash = du * du + dv * dv <= r2;
    }
    take[order[oi]] = !clash;
  }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (take[i]) result.corners.push_back(kept[i]);
  }
  return result;
}

}  // namespace hwloc
