#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwloc/image.hpp"

namespace hwloc {

// Pinhole camera at a fixed height above a flat floor, tilted down by pitch.
// No roll, no lens distortion.
struct CameraModel {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  double height = 1.4;  // meters above the floor
  double pitch = 0.3;   // radians, positive looks down

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera: focal lengths must be > 0");
    if (!(height > 0.0)) throw std::invalid_argument("camera: height must be > 0");
    if (!(pitch >= 0.0 && pitch < std::numbers::pi / 2)) {
      throw std::invalid_argument("camera: pitch must be in [0, pi/2)");
    }
  }

  // Image row of the horizon line (rays at or above it never reach the floor).
  double horizon_row() const { return cy - fy * std::tan(pitch); }
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Camera-centered floor frame: x forward, y to the left, meters.
struct GroundPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const GroundPoint&, const GroundPoint&) = default;
};

class NoGroundIntersection : public std::domain_error {
 public:
  explicit NoGroundIntersection(double horizon_row)
      : std::domain_error("pixel ray does not reach the floor; horizon is at row " +
                          std::to_string(horizon_row)),
        horizon_row_(horizon_row) {}
  double horizon_row() const { return horizon_row_; }

 private:
  double horizon_row_;
};

inline GroundPoint image_to_ground(double u, double v, const CameraModel& cam) {
  const double a = (u - cam.cx) / cam.fx;  // right
  const double b = (v - cam.cy) / cam.fy;  // down
  const double sp = std::sin(cam.pitch), cp = std::cos(cam.pitch);
  // Ray in (forward, left, up): optical axis (cp, 0, -sp), image down (-sp, 0, -cp).
  const double fwd = cp - b * sp;
  const double left = -a;
  const double drop = sp + b * cp;
  if (!(drop > 1e-12)) throw NoGroundIntersection(cam.horizon_row());
  const double t = cam.height / drop;
  const GroundPoint g{t * fwd, t * left};
  if (!(g.x > 0.0)) throw NoGroundIntersection(cam.horizon_row());
  return g;
}

inline GroundPoint image_to_ground(PixelCoord p, const CameraModel& cam) {
  return image_to_ground(static_cast<double>(p.u), static_cast<double>(p.v), cam);
}

struct Line2D {
  double dx = 1.0;  // unit direction, dx > 0 (pointing away from the camera)
  double dy = 0.0;
  double px = 0.0;  // a point on the line (centroid of the support)
  double py = 0.0;
  int support = 0;

  // Signed distance of the line from the origin (left positive).
  double offset() const { return dx * py - dy * px; }
  double along(const GroundPoint& g) const { return (g.x - px) * dx + (g.y - py) * dy; }
  double distance(const GroundPoint& g) const {
    return (g.y - py) * dx - (g.x - px) * dy;
  }
};

struct EdgeLineParams {
  double mad_factor = 3.0;
  double min_reject_distance = 0.05;  // m; keeps near-exact fits from shedding points
  int max_rounds = 5;
};

struct EdgeLines {
  std::optional<Line2D> left;
  std::optional<Line2D> right;
  // Surviving points of each side, nearer-to-camera first along the line.
  std::vector<GroundPoint> left_points;
  std::vector<GroundPoint> right_points;
  bool left_missing() const { return !left.has_value(); }
  bool right_missing() const { return !right.has_value(); }
};

class EdgeFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Line2D total_least_squares(std::span<const GroundPoint> pts) {
  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : pts) {
    sxx += (p.x - mx) * (p.x - mx);
    syy += (p.y - my) * (p.y - my);
    sxy += (p.x - mx) * (p.y - my);
  }
  const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Line2D line{std::cos(angle), std::sin(angle), mx, my, static_cast<int>(pts.size())};
  if (line.dx < 0.0 || (line.dx == 0.0 && line.dy < 0.0)) {
    line.dx = -line.dx;
    line.dy = -line.dy;
  }
  return line;
}

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Least median of squares over the lines through point pairs, so a few
// scattered points cannot drag the first fit off the edge. Plain TLS for
// large inputs. Earliest pair wins ties.
inline Line2D provisional_line(std::span<const GroundPoint> pts) {
  if (pts.size() < 3 || pts.size() > 64) return total_least_squares(pts);
  Line2D best = total_least_squares(pts);
  double best_med = std::numeric_limits<double>::infinity();
  std::vector<double> res(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double ex = pts[j].x - pts[i].x, ey = pts[j].y - pts[i].y;
      const double len = std::hypot(ex, ey);
      if (len < 1e-9) continue;
      Line2D l{ex / len, ey / len, pts[i].x, pts[i].y, 2};
      if (l.dx < 0.0 || (l.dx == 0.0 && l.dy < 0.0)) {
        l.dx = -l.dx;
        l.dy = -l.dy;
      }
      for (std::size_t k = 0; k < pts.size(); ++k) res[k] = std::abs(l.distance(pts[k]));
      const double med = median_of(res);
      if (med < best_med) {
        best_med = med;
        best = l;
      }
    }
  }
  return best;
}

// LMedS start, then TLS with repeated MAD rejection. Input is sorted first,
// so the result does not depend on point order.
inline std::optional<Line2D> robust_line(std::vector<GroundPoint> pts,
                                         const EdgeLineParams& params,
                                         std::vector<GroundPoint>& survivors) {
  std::sort(pts.begin(), pts.end(), [](const GroundPoint& a, const GroundPoint& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  survivors.clear();
  if (pts.size() < 2) return std::nullopt;
  Line2D line = provisional_line(pts);
  std::vector<GroundPoint> cur = pts;
  // Each round re-selects from all points, so points shed against a rough
  // early line come back once the line settles.
  for (int round = 0; round < params.max_rounds; ++round) {
    std::vector<double> res;
    res.reserve(pts.size());
    for (const auto& p : pts) res.push_back(std::abs(line.distance(p)));
    const double med = median_of(res);
    std::vector<double> dev;
    dev.reserve(res.size());
    for (double r : res) dev.push_back(std::abs(r - med));
    const double limit =
        std::max(med + params.mad_factor * median_of(dev), params.min_reject_distance);
    std::vector<GroundPoint> next;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (res[i] <= limit) next.push_back(pts[i]);
    }
    if (next.size() < 2) return std::nullopt;
    const bool settled = round > 0 && next == cur;
    cur = std::move(next);
    if (settled) break;
    line = total_least_squares(cur);
  }
  std::sort(cur.begin(), cur.end(), [&](const GroundPoint& a, const GroundPoint& b) {
    return line.along(a) < line.along(b);
  });
  survivors = std::move(cur);
  return line;
}

}  // namespace detail

// Splits points by the sign of y (left > 0, right < 0) and fits one robust
// line per side. Throws when neither side keeps two points.
inline EdgeLines fit_edge_lines(std::span<const GroundPoint> points,
                                const EdgeLineParams& params = {}) {
  std::vector<GroundPoint> left, right;
  for (const auto& p : points) {
    if (p.y > 0.0) left.push_back(p);
    else if (p.y < 0.0) right.push_back(p);
  }
  EdgeLines out;
  out.left = detail::robust_line(std::move(left), params, out.left_points);
  out.right = detail::robust_line(std::move(right), params, out.right_points);
  if (!out.left && !out.right) {
    throw EdgeFitError("fit_edge_lines: neither side has two consistent points");
  }
  return out;
}

// Camera pose in the map frame; theta is the heading of the forward axis.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]

  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

inline double normalize_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

inline Point2 to_map(const Pose2D& pose, const GroundPoint& g) {
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  return {pose.x + c * g.x - s * g.y, pose.y + s * g.x + c * g.y};
}

inline GroundPoint to_ground(const Pose2D& pose, const Point2& m) {
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const double dx = m.x - pose.x, dy = m.y - pose.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

class DegenerateCorrespondence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RigidFit {
  Pose2D pose;
  double rms = 0.0;
};

inline double rigid_rms(const Pose2D& pose, std::span<const GroundPoint> ground,
                        std::span<const Point2> map) {
  double sum = 0.0;
  for (std::size_t i = 0; i < ground.size(); ++i) {
    const Point2 p = to_map(pose, ground[i]);
    sum += (p.x - map[i].x) * (p.x - map[i].x) + (p.y - map[i].y) * (p.y - map[i].y);
  }
  return ground.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(ground.size()));
}

// Least-squares rotation + translation taking ground[i] onto map[i]
// (2-D orthogonal Procrustes).
inline RigidFit estimate_rigid_2d(std::span<const GroundPoint> ground,
                                  std::span<const Point2> map) {
  if (ground.size() != map.size()) {
    throw std::invalid_argument("estimate_rigid_2d: correspondence lists differ in length");
  }
  if (ground.size() < 2) {
    throw std::invalid_argument("estimate_rigid_2d: need at least 2 correspondences");
  }
  const double n = static_cast<double>(ground.size());
  double gx = 0, gy = 0, mx = 0, my = 0;
  for (std::size_t i = 0; i < ground.size(); ++i) {
    gx += ground[i].x;
    gy += ground[i].y;
    mx += map[i].x;
    my += map[i].y;
  }
  gx /= n;
  gy /= n;
  mx /= n;
  my /= n;
  double dot = 0, cross = 0, spread = 0;
  for (std::size_t i = 0; i < ground.size(); ++i) {
    const double ax = ground[i].x - gx, ay = ground[i].y - gy;
    const double bx = map[i].x - mx, by = map[i].y - my;
    dot += ax * bx + ay * by;
    cross += ax * by - ay * bx;
    spread += ax * ax + ay * ay;
  }
  if (spread < 1e-18) {
    throw DegenerateCorrespondence("estimate_rigid_2d: ground points are coincident");
  }
  const double theta = std::atan2(cross, dot);
  const double c = std::cos(theta), s = std::sin(theta);
  RigidFit fit;
  fit.pose = {mx - (c * gx - s * gy), my - (s * gx + c * gy), normalize_angle(theta)};
  fit.rms = rigid_rms(fit.pose, ground, map);
  return fit;
}

}  // namespace hwloc
