#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hwloc/floor_plan.hpp"
#include "hwloc/geometry.hpp"
#include "hwloc/illum.hpp"
#include "hwloc/image.hpp"
#include "hwloc/wlan.hpp"

// Deterministic flat-shaded hallway renderer with analytic ground truth.
//
// The hallway is an axis-aligned box running along +y from y0 to y1, centered
// on x = center_x. Facing +y, the left wall is at x = center_x - width/2.
// Doors are rectangles on the side walls standing on the floor; their bottom
// corners are the floor-plan landmarks. Every surface has a fixed
// chromaticity; appearance varies only through shading gain, defects and
// noise, so geometry-derived truth is unaffected by illumination defects.
namespace hwloc::synth {

struct DoorSpec {
  double along = 0.0;   // y of the door center
  double width = 0.9;
  double height = 2.1;
};

struct PosterSpec {
  Side side = Side::kLeft;
  double along = 0.0;   // center
  double width = 0.6;
  double bottom = 1.0;
  double top = 1.6;
};

// Shadow prism: polygon on the floor (map frame), extending up to max_height.
struct ShadowDefect {
  std::vector<Point2> polygon;
  double gain = 0.5;
  double max_height = 0.0;
};

// Dichromatic specular blob on the floor.
struct HighlightDefect {
  Point2 center;
  double radius = 0.5;   // m, Gaussian sigma of the specular term
  double peak = 0.5;     // specular intensity at the center
  Chromaticity illuminant;
};

// Recess in a side wall at floor level: same material, darker shading.
struct NotchDefect {
  Side side = Side::kLeft;
  double along = 0.0;
  double width = 0.5;
  double height = 1.2;
  double gain = 0.6;
};

struct Material {
  Chromaticity chroma;
  double intensity = 1.0;  // diffuse r+g+b before falloff
};

struct SceneSpec {
  double center_x = 6.858;
  double y0 = 0.0;
  double y1 = 32.004;
  double width = 2.4;
  double ceiling_height = 2.7;
  Pose2D camera{6.858, 2.0, std::numbers::pi / 2};
  std::vector<DoorSpec> left_doors;
  std::vector<DoorSpec> right_doors;
  std::vector<PosterSpec> posters;

  Material floor{{0.42, 0.34, 0.24}, 1.50};
  Material wall{{0.31, 0.34, 0.35}, 1.30};
  Material door{{0.50, 0.30, 0.20}, 1.10};
  Material ceiling{{0.34, 0.40, 0.26}, 1.40};
  Material end_wall{{0.26, 0.30, 0.44}, 1.20};
  Material poster{{0.28, 0.46, 0.26}, 1.20};
  double falloff_distance = 20.0;  // gain = 1 / (1 + d / falloff_distance)

  std::vector<ShadowDefect> shadows;
  std::vector<HighlightDefect> highlights;
  std::vector<NotchDefect> notches;

  std::uint64_t seed = 1;
  double noise_sigma = 0.003;
  int image_width = 640;
  int image_height = 480;

  double left_x() const { return center_x - 0.5 * width; }
  double right_x() const { return center_x + 0.5 * width; }
};

struct TruthCorner {
  double u = 0.0;
  double v = 0.0;
  bool floor = false;        // doorway/floor junction or hallway floor corner
  int landmark_id = -1;      // plan landmark for floor corners
  double depth = 0.0;        // along the optical axis, m
  bool resolvable = false;   // far enough from the frame and large enough to detect
};

// Surface ids in the truth label map.
enum SurfaceId : int {
  kFloor = 0,
  kCeiling = 1,
  kLeftWall = 2,
  kRightWall = 3,
  kEndNear = 4,   // wall at y0
  kEndFar = 5,    // wall at y1
  kDoorBase = 100,
  kPosterBase = 200,
};

struct GroundTruth {
  Pose2D pose;
  std::vector<TruthCorner> corners;
  std::vector<int> landmarks_in_view;  // ids, ascending
  Grid<int> surfaces;                  // per-pixel surface id
};

struct RenderOutput {
  RgbImage image;
  GroundTruth truth;
};

class SceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};
inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Camera axes in the world: x right, y down, z optical axis.
struct CameraFrame {
  Vec3 origin, right, down, axis;
};

inline CameraFrame camera_frame(const Pose2D& pose, const CameraModel& cam) {
  const Vec3 fwd{std::cos(pose.theta), std::sin(pose.theta), 0.0};
  const Vec3 up{0.0, 0.0, 1.0};
  CameraFrame f;
  f.origin = {pose.x, pose.y, cam.height};
  f.axis = std::cos(cam.pitch) * fwd - std::sin(cam.pitch) * up;
  f.down = -std::sin(cam.pitch) * fwd - std::cos(cam.pitch) * up;
  f.right = cross(f.down, f.axis);
  return f;
}

inline bool point_in_polygon(const std::vector<Point2>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

}  // namespace detail

inline std::optional<std::pair<double, double>> project_point(const Pose2D& pose,
                                                              const CameraModel& cam,
                                                              double x, double y, double z,
                                                              double* depth = nullptr) {
  const auto f = detail::camera_frame(pose, cam);
  const detail::Vec3 d = detail::Vec3{x, y, z} - f.origin;
  const double zc = detail::dot(d, f.axis);
  if (depth) *depth = zc;
  if (zc <= 1e-6) return std::nullopt;
  return std::make_pair(cam.cx + cam.fx * detail::dot(d, f.right) / zc,
                        cam.cy + cam.fy * detail::dot(d, f.down) / zc);
}

// Landmark ids: left doors by along (each near jamb then far jamb), then right
// doors likewise, then the four floor corners (y0 left, y0 right, y1 left,
// y1 right). Ids start at 1.
struct SceneLandmark {
  Landmark landmark;
  Side side = Side::kLeft;
  int door = -1;   // index into the side's door list, -1 for floor corners
};

inline std::vector<SceneLandmark> scene_landmarks(const SceneSpec& s) {
  std::vector<SceneLandmark> out;
  int id = 1;
  auto doors = [&](const std::vector<DoorSpec>& list, Side side, double x) {
    std::vector<std::size_t> order(list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return list[a].along < list[b].along; });
    for (std::size_t i : order) {
      const auto& d = list[i];
      out.push_back({{id++, {x, d.along - 0.5 * d.width}, LandmarkKind::kDoorwayJamb}, side,
                     static_cast<int>(i)});
      out.push_back({{id++, {x, d.along + 0.5 * d.width}, LandmarkKind::kDoorwayJamb}, side,
                     static_cast<int>(i)});
    }
  };
  doors(s.left_doors, Side::kLeft, s.left_x());
  doors(s.right_doors, Side::kRight, s.right_x());
  out.push_back({{id++, {s.left_x(), s.y0}, LandmarkKind::kFloorCorner}, Side::kLeft, -1});
  out.push_back({{id++, {s.right_x(), s.y0}, LandmarkKind::kFloorCorner}, Side::kRight, -1});
  out.push_back({{id++, {s.left_x(), s.y1}, LandmarkKind::kFloorCorner}, Side::kLeft, -1});
  out.push_back({{id++, {s.right_x(), s.y1}, LandmarkKind::kFloorCorner}, Side::kRight, -1});
  return out;
}

inline void validate(const SceneSpec& s) {
  if (!(s.width > 0.0) || !(s.y1 > s.y0) || !(s.ceiling_height > 0.0)) {
    throw SceneError("scene: degenerate hallway box");
  }
  auto check_doors = [&](const std::vector<DoorSpec>& doors) {
    for (const auto& d : doors) {
      if (d.along - 0.5 * d.width < s.y0 || d.along + 0.5 * d.width > s.y1 || !(d.width > 0.0) ||
          !(d.height > 0.0) || d.height > s.ceiling_height) {
        throw SceneError("scene: doorway outside the hallway extent");
      }
    }
  };
  check_doors(s.left_doors);
  check_doors(s.right_doors);
  for (const auto& sh : s.shadows) {
    if (!(sh.gain > 0.0 && sh.gain <= 1.0)) throw SceneError("scene: shadow gain must be in (0,1]");
    if (sh.polygon.size() < 3) throw SceneError("scene: shadow polygon needs 3 vertices");
  }
  for (const auto& n : s.notches) {
    if (!(n.gain > 0.0 && n.gain <= 1.0)) throw SceneError("scene: notch gain must be in (0,1]");
  }
  auto check_chroma = [](const Chromaticity& c) {
    if (std::abs(c.r + c.g + c.b - 1.0) > 1e-6 || c.r < 0 || c.g < 0 || c.b < 0) {
      throw SceneError("scene: chromaticity must be non-negative and sum to 1");
    }
  };
  for (const auto* m : {&s.floor, &s.wall, &s.door, &s.ceiling, &s.end_wall, &s.poster}) {
    check_chroma(m->chroma);
  }
  for (const auto& h : s.highlights) check_chroma(h.illuminant);
  if (s.image_width <= 0 || s.image_height <= 0) throw SceneError("scene: bad image size");
  if (s.noise_sigma < 0.0) throw SceneError("scene: noise sigma must be >= 0");
}

inline FloorPlan make_floor_plan(const SceneSpec& s, double plan_width, double plan_depth) {
  FloorPlan plan;
  plan.width = plan_width;
  plan.depth = plan_depth;
  plan.hallways.push_back({{{s.left_x(), s.y0}, {s.left_x(), s.y1}},
                           {{s.right_x(), s.y0}, {s.right_x(), s.y1}}});
  for (const auto& l : scene_landmarks(s)) plan.landmarks.push_back(l.landmark);
  validate(plan);
  return plan;
}

struct ResolvabilityRules {
  int border_margin = 8;          // px
  // Projected width of the door or poster a corner belongs to; two supports
  // of the default corner detector, below which its corners merge.
  double min_feature_px = 14;
  double max_depth = 14.0;        // m along the optical axis
};

inline RenderOutput render_hallway(const SceneSpec& s, const CameraModel& cam,
                                   const ResolvabilityRules& rules = {}) {
  validate(s);
  cam.validate();
  const double xl = s.left_x(), xr = s.right_x();
  const Pose2D& pose = s.camera;
  if (!(pose.x > xl && pose.x < xr && pose.y > s.y0 && pose.y < s.y1 &&
        cam.height < s.ceiling_height)) {
    throw SceneError("scene: camera is outside the hallway");
  }
  const auto frame = detail::camera_frame(pose, cam);
  const int W = s.image_width, H = s.image_height;

  std::vector<Rgb> pixels(static_cast<std::size_t>(W) * H);
  Grid<int> surfaces(W, H, kFloor);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto wall_feature = [&](Side side, double along, double z, int wall_id,
                          const Material** mat, int* id, double* gain) {
    *mat = &s.wall;
    *id = wall_id;
    const auto& doors = side == Side::kLeft ? s.left_doors : s.right_doors;
    for (std::size_t i = 0; i < doors.size(); ++i) {
      const auto& d = doors[i];
      if (std::abs(along - d.along) <= 0.5 * d.width && z <= d.height) {
        *mat = &s.door;
        *id = kDoorBase + (side == Side::kLeft ? 0 : 50) + static_cast<int>(i);
        return;
      }
    }
    for (std::size_t i = 0; i < s.posters.size(); ++i) {
      const auto& p = s.posters[i];
      if (p.side == side && std::abs(along - p.along) <= 0.5 * p.width && z >= p.bottom &&
          z <= p.top) {
        *mat = &s.poster;
        *id = kPosterBase + static_cast<int>(i);
        return;
      }
    }
    for (const auto& n : s.notches) {
      if (n.side == side && std::abs(along - n.along) <= 0.5 * n.width && z <= n.height) {
        *gain *= n.gain;
      }
    }
  };

  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      const double a = (u - cam.cx) / cam.fx;
      const double b = (v - cam.cy) / cam.fy;
      const detail::Vec3 d = a * frame.right + b * frame.down + frame.axis;
      const auto& o = frame.origin;
      double t = std::numeric_limits<double>::infinity();
      int face = -1;
      auto consider = [&](double tt, int f) {
        if (tt > 0.0 && tt < t) {
          t = tt;
          face = f;
        }
      };
      if (d.z < 0) consider(-o.z / d.z, kFloor);
      if (d.z > 0) consider((s.ceiling_height - o.z) / d.z, kCeiling);
      if (d.x < 0) consider((xl - o.x) / d.x, kLeftWall);
      if (d.x > 0) consider((xr - o.x) / d.x, kRightWall);
      if (d.y < 0) consider((s.y0 - o.y) / d.y, kEndNear);
      if (d.y > 0) consider((s.y1 - o.y) / d.y, kEndFar);
      const detail::Vec3 p = o + t * d;

      const Material* mat = &s.floor;
      int id = face;
      double gain = 1.0;
      switch (face) {
        case kFloor: mat = &s.floor; break;
        case kCeiling: mat = &s.ceiling; break;
        case kLeftWall: wall_feature(Side::kLeft, p.y, p.z, kLeftWall, &mat, &id, &gain); break;
        case kRightWall: wall_feature(Side::kRight, p.y, p.z, kRightWall, &mat, &id, &gain); break;
        default: mat = &s.end_wall; break;
      }
      const double dist = t * std::sqrt(detail::dot(d, d));
      gain *= 1.0 / (1.0 + dist / s.falloff_distance);
      for (const auto& sh : s.shadows) {
        if (p.z <= sh.max_height + 1e-9 && detail::point_in_polygon(sh.polygon, p.x, p.y)) {
          gain *= sh.gain;
        }
      }
      const double md = mat->intensity * gain;
      Rgb c{md * mat->chroma.r, md * mat->chroma.g, md * mat->chroma.b};
      if (face == kFloor) {
        for (const auto& hl : s.highlights) {
          const double r2 = (p.x - hl.center.x) * (p.x - hl.center.x) +
                            (p.y - hl.center.y) * (p.y - hl.center.y);
          const double ms = hl.peak * std::exp(-0.5 * r2 / (hl.radius * hl.radius));
          c.r += ms * hl.illuminant.r;
          c.g += ms * hl.illuminant.g;
          c.b += ms * hl.illuminant.b;
        }
      }
      if (s.noise_sigma > 0.0) {
        c.r += s.noise_sigma * noise(rng);
        c.g += s.noise_sigma * noise(rng);
        c.b += s.noise_sigma * noise(rng);
      }
      c = {std::clamp(c.r, 0.0, 1.0), std::clamp(c.g, 0.0, 1.0), std::clamp(c.b, 0.0, 1.0)};
      pixels[static_cast<std::size_t>(v) * W + u] = c;
      surfaces(u, v) = id;
    }
  }

  RenderOutput out{RgbImage(W, H, std::move(pixels)), {}};
  out.truth.pose = pose;
  out.truth.surfaces = std::move(surfaces);

  auto in_frame = [&](double u, double v, int margin) {
    return u >= margin && v >= margin && u <= W - 1 - margin && v <= H - 1 - margin;
  };
  auto add = [&](double x, double y, double z, bool floor, int landmark, double door_px) {
    double depth = 0.0;
    const auto px = project_point(pose, cam, x, y, z, &depth);
    if (!px || !in_frame(px->first, px->second, 0)) return;
    TruthCorner c{px->first, px->second, floor, landmark, depth, false};
    c.resolvable = in_frame(c.u, c.v, rules.border_margin) && depth <= rules.max_depth &&
                   door_px >= rules.min_feature_px;
    out.truth.corners.push_back(c);
    if (landmark >= 0) out.truth.landmarks_in_view.push_back(landmark);
  };
  auto pixel_gap = [&](double x, double ya, double yb, double z) {
    const auto a = project_point(pose, cam, x, ya, z);
    const auto b = project_point(pose, cam, x, yb, z);
    if (!a || !b) return 0.0;
    return std::hypot(a->first - b->first, a->second - b->second);
  };

  const auto landmarks = scene_landmarks(s);
  for (const auto& sl : landmarks) {
    const auto& l = sl.landmark;
    double gap = std::numeric_limits<double>::infinity();
    if (sl.door >= 0) {
      const auto& d = (sl.side == Side::kLeft ? s.left_doors : s.right_doors)[sl.door];
      gap = pixel_gap(l.position.x, d.along - 0.5 * d.width, d.along + 0.5 * d.width, 0.0);
    }
    add(l.position.x, l.position.y, 0.0, true, l.id, gap);
  }
  // Corners that are not floor-plan landmarks.
  auto door_tops = [&](const std::vector<DoorSpec>& doors, double x) {
    for (const auto& d : doors) {
      const double y0 = d.along - 0.5 * d.width, y1 = d.along + 0.5 * d.width;
      const double gap = pixel_gap(x, y0, y1, d.height);
      add(x, y0, d.height, false, -1, gap);
      add(x, y1, d.height, false, -1, gap);
    }
  };
  door_tops(s.left_doors, xl);
  door_tops(s.right_doors, xr);
  // End walls meet the side walls and ceiling.
  for (double y : {s.y0, s.y1}) {
    const auto a = project_point(pose, cam, xl, y, s.ceiling_height);
    const auto b = project_point(pose, cam, xr, y, s.ceiling_height);
    const double gap = a && b ? std::hypot(a->first - b->first, a->second - b->second) : 0.0;
    add(xl, y, s.ceiling_height, false, -1, gap);
    add(xr, y, s.ceiling_height, false, -1, gap);
  }
  for (const auto& p : s.posters) {
    const double x = p.side == Side::kLeft ? xl : xr;
    const double y0 = p.along - 0.5 * p.width, y1 = p.along + 0.5 * p.width;
    for (double z : {p.bottom, p.top}) {
      const double gap = pixel_gap(x, y0, y1, z);
      for (double y : {y0, y1}) add(x, y, z, false, -1, gap);
    }
  }
  std::sort(out.truth.landmarks_in_view.begin(), out.truth.landmarks_in_view.end());
  return out;
}

// ---------------------------------------------------------------------------
// Paper testbed: a 45 ft x 105 ft floor with one central hallway along its
// length and seven doorways per side at irregular spacing.

inline constexpr double kTestbedWidth = 13.716;
inline constexpr double kTestbedDepth = 32.004;

inline SceneSpec testbed_scene() {
  SceneSpec s;
  s.center_x = 0.5 * kTestbedWidth;
  s.y0 = 0.0;
  s.y1 = kTestbedDepth;
  s.width = 2.4;
  // Irregular and unlike each other, so that no shift or half-turn of the
  // hallway maps many jambs onto jambs.
  for (double a : {7.8, 12.5, 17.0, 20.9, 23.8, 28.3, 30.9}) s.left_doors.push_back({a});
  for (double a : {1.9, 4.9, 7.2, 12.5, 19.0, 24.5, 30.3}) s.right_doors.push_back({a});
  s.posters.push_back({Side::kLeft, 9.2, 0.7, 1.1, 1.7});
  s.posters.push_back({Side::kRight, 16.6, 0.8, 1.0, 1.6});
  s.posters.push_back({Side::kLeft, 22.4, 0.6, 1.2, 1.8});
  s.camera = {s.center_x, 2.0, std::numbers::pi / 2};
  return s;
}

inline FloorPlan testbed_plan() {
  return make_floor_plan(testbed_scene(), kTestbedWidth, kTestbedDepth);
}

inline CameraModel default_camera() { return CameraModel{}; }

// Signed direction (+1/-1) the camera looks along the hallway axis.
inline double facing(const SceneSpec& s) { return std::sin(s.camera.theta) >= 0.0 ? 1.0 : -1.0; }

// Illumination defect presets modelled on five observed hallway failure modes.
enum class DefectPreset { kA, kB, kC, kD, kE };

inline const char* to_string(DefectPreset p) {
  switch (p) {
    case DefectPreset::kA: return "A";
    case DefectPreset::kB: return "B";
    case DefectPreset::kC: return "C";
    case DefectPreset::kD: return "D";
    case DefectPreset::kE: return "E";
  }
  return "?";
}

// A: dark shadow over the left floor and lower left wall (poor lighting).
// B: sun shadow stripe across the floor.
// C: scattered occlusion shadows on the floor.
// D: architectural notch in the left wall.
// E: notches in both walls.
inline SceneSpec apply_preset(SceneSpec s, DefectPreset preset) {
  const double dir = facing(s);
  const double cy = s.camera.y;
  const double xl = s.left_x(), xr = s.right_x(), xc = s.center_x;
  // "left" as the camera sees it
  const double cam_left_x = dir > 0 ? xl : xr;
  const Side cam_left = dir > 0 ? Side::kLeft : Side::kRight;
  const Side cam_right = dir > 0 ? Side::kRight : Side::kLeft;
  auto ahead = [&](double d) { return cy + dir * d; };
  switch (preset) {
    case DefectPreset::kA:
      s.shadows.push_back({{{cam_left_x - 0.01, ahead(1.0)},
                            {xc, ahead(1.0)},
                            {xc, ahead(7.0)},
                            {cam_left_x - 0.01, ahead(7.0)}},
                           0.3,
                           1.0});
      break;
    case DefectPreset::kB:
      s.shadows.push_back({{{xl - 0.01, ahead(3.6)},
                            {xr + 0.01, ahead(3.6)},
                            {xr + 0.01, ahead(4.6)},
                            {xl - 0.01, ahead(4.6)}},
                           0.45,
                           0.0});
      break;
    case DefectPreset::kC: {
      std::mt19937_64 rng(s.seed ^ 0x5eedULL);
      std::uniform_real_distribution<double> along(2.0, 8.0), across(xl + 0.2, xr - 0.2),
          size(0.25, 0.5);
      for (int i = 0; i < 5; ++i) {
        const double y = ahead(along(rng)), x = across(rng), r = size(rng);
        s.shadows.push_back(
            {{{x - r, y - 0.6 * r}, {x + r, y - 0.4 * r}, {x + 0.7 * r, y + r}, {x - 0.8 * r, y + 0.7 * r}},
             0.5,
             0.0});
      }
      break;
    }
    case DefectPreset::kD:
      s.notches.push_back({cam_left, ahead(4.0), 0.5, 1.2, 0.6});
      break;
    case DefectPreset::kE:
      s.notches.push_back({cam_left, ahead(3.2), 0.5, 1.2, 0.6});
      s.notches.push_back({cam_right, ahead(5.5), 0.5, 1.2, 0.6});
      break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// RF

struct PathLossModel {
  double p0 = -40.0;       // dBm at 1 m
  double exponent = 3.0;
  double noise_sigma = 3.0;  // dB
};

inline std::string ap_name(std::size_t i) { return "ap" + std::to_string(i); }

// Log-distance path loss, distance clamped to >= 1 m, result clamped to
// [-120, 0] dBm.
inline RssScan simulate_rss(const std::vector<Point2>& aps, const Point2& query,
                            const PathLossModel& model, std::uint64_t seed) {
  if (aps.empty()) throw std::invalid_argument("simulate_rss: need at least one access point");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  RssScan scan;
  for (std::size_t i = 0; i < aps.size(); ++i) {
    const double d = std::max(1.0, std::hypot(aps[i].x - query.x, aps[i].y - query.y));
    double rss = model.p0 - 10.0 * model.exponent * std::log10(d);
    if (model.noise_sigma > 0.0) rss += model.noise_sigma * noise(rng);
    scan.readings[ap_name(i)] = std::clamp(rss, kMinRssDbm, kMaxRssDbm);
  }
  return scan;
}

inline RssScan simulate_rss(const FloorPlan& /*plan*/, const std::vector<Point2>& aps,
                            const Point2& query, const PathLossModel& model,
                            std::uint64_t seed) {
  return simulate_rss(aps, query, model, seed);
}

inline std::vector<Point2> testbed_access_points() {
  return {{1.0, 1.0}, {12.7, 8.0}, {1.0, 16.0}, {12.7, 24.0}, {1.0, 31.0}, {6.9, 16.0}};
}

// Noise-free survey on a regular grid (the survey averages many samples).
inline std::vector<FingerprintRow> fingerprint_grid(const FloorPlan& plan,
                                                    const std::vector<Point2>& aps,
                                                    double spacing, PathLossModel model) {
  model.noise_sigma = 0.0;
  std::vector<FingerprintRow> rows;
  for (double y = 0.5 * spacing; y < plan.depth; y += spacing) {
    for (double x = 0.5 * spacing; x < plan.width; x += spacing) {
      const auto scan = simulate_rss(aps, {x, y}, model, 0);
      for (const auto& [ap, rss] : scan.readings) rows.push_back({x, y, ap, rss});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// End-to-end bundles

struct Bundle {
  SceneSpec scene;
  RgbImage image;
  GroundTruth truth;
  RssScan scan;
};

// Random camera pose in the testbed hallway, looking along it, kept only if
// enough floor landmarks are resolvable to localize from vision, with at
// least two on each side of the image.
inline Bundle random_testbed_bundle(std::uint64_t seed, const CameraModel& cam,
                                    int min_resolvable = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> along(1.5, kTestbedDepth - 1.5), lateral(-0.3, 0.3),
      jitter(-3.0, 3.0);
  std::bernoulli_distribution back(0.5);
  SceneSpec s = testbed_scene();
  s.seed = seed;
  for (int attempt = 0; attempt < 200; ++attempt) {
    const bool b = back(rng);
    s.camera = {s.center_x + lateral(rng), along(rng),
                normalize_angle((b ? -1.0 : 1.0) * std::numbers::pi / 2 +
                                jitter(rng) * std::numbers::pi / 180.0)};
    // Cheap visibility check before rendering; RANSAC needs two per side.
    int left = 0, right = 0;
    for (const auto& sl : scene_landmarks(s)) {
      double depth = 0.0;
      const auto px = project_point(s.camera, cam, sl.landmark.position.x,
                                    sl.landmark.position.y, 0.0, &depth);
      if (px && px->first >= 8 && px->second >= 8 && px->first <= s.image_width - 9 &&
          px->second <= s.image_height - 9 && depth <= ResolvabilityRules{}.max_depth) {
        ++(to_ground(s.camera, sl.landmark.position).y > 0.0 ? left : right);
      }
    }
    if (left + right >= min_resolvable && left >= 2 && right >= 2) break;
  }
  auto render = render_hallway(s, cam);
  const Point2 where{s.camera.x, s.camera.y};
  return {s, std::move(render.image), std::move(render.truth),
          simulate_rss(testbed_access_points(), where, PathLossModel{}, seed * 7919 + 1)};
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json to_json(const SceneSpec& s) {
  using nlohmann::ordered_json;
  auto chroma = [](const Chromaticity& c) { return ordered_json::array({c.r, c.g, c.b}); };
  auto material = [&](const Material& m) {
    ordered_json j;
    j["chromaticity"] = chroma(m.chroma);
    j["intensity"] = m.intensity;
    return j;
  };
  auto side = [](Side sd) { return sd == Side::kLeft ? "left" : "right"; };
  auto doors = [](const std::vector<DoorSpec>& list) {
    ordered_json arr = ordered_json::array();
    for (const auto& d : list) {
      arr.push_back({{"along_m", d.along}, {"width_m", d.width}, {"height_m", d.height}});
    }
    return arr;
  };
  ordered_json j;
  j["center_x_m"] = s.center_x;
  j["y0_m"] = s.y0;
  j["y1_m"] = s.y1;
  j["width_m"] = s.width;
  j["ceiling_height_m"] = s.ceiling_height;
  j["camera"] = {{"x_m", s.camera.x}, {"y_m", s.camera.y}, {"theta_rad", s.camera.theta}};
  j["left_doors"] = doors(s.left_doors);
  j["right_doors"] = doors(s.right_doors);
  j["posters"] = ordered_json::array();
  for (const auto& p : s.posters) {
    j["posters"].push_back({{"side", side(p.side)},
                            {"along_m", p.along},
                            {"width_m", p.width},
                            {"bottom_m", p.bottom},
                            {"top_m", p.top}});
  }
  j["materials"] = {{"floor", material(s.floor)},       {"wall", material(s.wall)},
                    {"door", material(s.door)},         {"ceiling", material(s.ceiling)},
                    {"end_wall", material(s.end_wall)}, {"poster", material(s.poster)}};
  j["falloff_distance_m"] = s.falloff_distance;
  j["shadows"] = ordered_json::array();
  for (const auto& sh : s.shadows) {
    ordered_json poly = ordered_json::array();
    for (const auto& p : sh.polygon) poly.push_back({p.x, p.y});
    j["shadows"].push_back({{"polygon", poly}, {"gain", sh.gain}, {"max_height_m", sh.max_height}});
  }
  j["highlights"] = ordered_json::array();
  for (const auto& h : s.highlights) {
    j["highlights"].push_back({{"center", {h.center.x, h.center.y}},
                               {"radius_m", h.radius},
                               {"peak", h.peak},
                               {"illuminant", chroma(h.illuminant)}});
  }
  j["notches"] = ordered_json::array();
  for (const auto& n : s.notches) {
    j["notches"].push_back({{"side", side(n.side)},
                            {"along_m", n.along},
                            {"width_m", n.width},
                            {"height_m", n.height},
                            {"gain", n.gain}});
  }
  j["seed"] = s.seed;
  j["noise_sigma"] = s.noise_sigma;
  j["image_width"] = s.image_width;
  j["image_height"] = s.image_height;
  return j;
}

// Missing keys keep their testbed defaults.
inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s = testbed_scene();
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j[key].get<std::decay_t<decltype(dst)>>();
  };
  auto chroma = [](const nlohmann::json& a) {
    return Chromaticity{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
  };
  auto side = [](const nlohmann::json& v) {
    const auto str = v.get<std::string>();
    if (str == "left") return Side::kLeft;
    if (str == "right") return Side::kRight;
    throw SceneError("scene: side must be 'left' or 'right'");
  };
  try {
    get("center_x_m", s.center_x);
    get("y0_m", s.y0);
    get("y1_m", s.y1);
    get("width_m", s.width);
    get("ceiling_height_m", s.ceiling_height);
    if (j.contains("camera")) {
      const auto& c = j["camera"];
      s.camera = {c.at("x_m").get<double>(), c.at("y_m").get<double>(),
                  normalize_angle(c.at("theta_rad").get<double>())};
    }
    auto doors = [&](const char* key, std::vector<DoorSpec>& dst) {
      if (!j.contains(key)) return;
      dst.clear();
      for (const auto& d : j[key]) {
        DoorSpec door;
        door.along = d.at("along_m").get<double>();
        if (d.contains("width_m")) door.width = d["width_m"].get<double>();
        if (d.contains("height_m")) door.height = d["height_m"].get<double>();
        dst.push_back(door);
      }
    };
    doors("left_doors", s.left_doors);
    doors("right_doors", s.right_doors);
    if (j.contains("posters")) {
      s.posters.clear();
      for (const auto& p : j["posters"]) {
        s.posters.push_back({side(p.at("side")), p.at("along_m").get<double>(),
                             p.at("width_m").get<double>(), p.at("bottom_m").get<double>(),
                             p.at("top_m").get<double>()});
      }
    }
    if (j.contains("materials")) {
      const auto& m = j["materials"];
      auto mat = [&](const char* key, Material& dst) {
        if (!m.contains(key)) return;
        dst.chroma = chroma(m[key].at("chromaticity"));
        dst.intensity = m[key].at("intensity").get<double>();
      };
      mat("floor", s.floor);
      mat("wall", s.wall);
      mat("door", s.door);
      mat("ceiling", s.ceiling);
      mat("end_wall", s.end_wall);
      mat("poster", s.poster);
    }
    get("falloff_distance_m", s.falloff_distance);
    if (j.contains("shadows")) {
      s.shadows.clear();
      for (const auto& sh : j["shadows"]) {
        ShadowDefect d;
        for (const auto& p : sh.at("polygon")) d.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        d.gain = sh.at("gain").get<double>();
        if (sh.contains("max_height_m")) d.max_height = sh["max_height_m"].get<double>();
        s.shadows.push_back(std::move(d));
      }
    }
    if (j.contains("highlights")) {
      s.highlights.clear();
      for (const auto& h : j["highlights"]) {
        s.highlights.push_back({{h.at("center").at(0).get<double>(), h.at("center").at(1).get<double>()},
                                h.at("radius_m").get<double>(),
                                h.at("peak").get<double>(),
                                chroma(h.at("illuminant"))});
      }
    }
    if (j.contains("notches")) {
      s.notches.clear();
      for (const auto& n : j["notches"]) {
        s.notches.push_back({side(n.at("side")), n.at("along_m").get<double>(),
                             n.at("width_m").get<double>(), n.at("height_m").get<double>(),
                             n.at("gain").get<double>()});
      }
    }
    get("seed", s.seed);
    get("noise_sigma", s.noise_sigma);
    get("image_width", s.image_width);
    get("image_height", s.image_height);
  } catch (const nlohmann::json::exception& e) {
    throw SceneError(std::string("scene: ") + e.what());
  }
  validate(s);
  return s;
}

}  // namespace hwloc::synth
