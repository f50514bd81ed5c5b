#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hwloc/geometry.hpp"

namespace hwloc {

enum class LandmarkKind { kDoorwayJamb, kFloorCorner };

inline const char* to_string(LandmarkKind k) {
  return k == LandmarkKind::kDoorwayJamb ? "doorway_jamb" : "floor_corner";
}

inline LandmarkKind landmark_kind_from_string(const std::string& s) {
  if (s == "doorway_jamb") return LandmarkKind::kDoorwayJamb;
  if (s == "floor_corner") return LandmarkKind::kFloorCorner;
  throw std::invalid_argument("unknown landmark kind '" + s + "'");
}

struct Landmark {
  int id = 0;
  Point2 position;
  LandmarkKind kind = LandmarkKind::kDoorwayJamb;
};

// Left and right are relative to the direction in which the polylines run.
struct Hallway {
  std::vector<Point2> left;
  std::vector<Point2> right;
};

struct FloorPlan {
  double width = 0.0;   // x extent, m
  double depth = 0.0;   // y extent, m
  std::vector<Hallway> hallways;
  std::vector<Landmark> landmarks;  // sorted by id
  std::string floor_id = "0";

  Point2 center() const { return {0.5 * width, 0.5 * depth}; }
  double half_diagonal() const { return 0.5 * std::hypot(width, depth); }
};

class FloorPlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void validate(const FloorPlan& plan) {
  if (!(plan.width > 0.0) || !(plan.depth > 0.0)) {
    throw FloorPlanError("floor plan: width_m and depth_m must be positive");
  }
  if (plan.hallways.empty()) throw FloorPlanError("floor plan: no hallways");
  for (std::size_t h = 0; h < plan.hallways.size(); ++h) {
    if (plan.hallways[h].left.size() < 2 || plan.hallways[h].right.size() < 2) {
      throw FloorPlanError("floor plan: hallway " + std::to_string(h) +
                           " needs a left and a right edge polyline");
    }
  }
  for (const auto& l : plan.landmarks) {
    const auto& p = l.position;
    if (p.x < 0.0 || p.y < 0.0 || p.x > plan.width || p.y > plan.depth) {
      throw FloorPlanError("floor plan: landmark " + std::to_string(l.id) + " outside bounds");
    }
  }
  for (std::size_t i = 1; i < plan.landmarks.size(); ++i) {
    if (plan.landmarks[i].id <= plan.landmarks[i - 1].id) {
      throw FloorPlanError("floor plan: landmark ids must be unique");
    }
  }
}

enum class Side { kLeft, kRight };

struct PolylineProjection {
  double distance = std::numeric_limits<double>::infinity();
  double along = 0.0;  // arc length of the foot point
};

inline PolylineProjection project_onto(const std::vector<Point2>& line, const Point2& p) {
  PolylineProjection best;
  double s0 = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Point2& a = line[i];
    const Point2& b = line[i + 1];
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double len2 = ex * ex + ey * ey;
    const double len = std::sqrt(len2);
    double t = len2 > 0.0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double fx = a.x + t * ex, fy = a.y + t * ey;
    const double d = std::hypot(p.x - fx, p.y - fy);
    if (d < best.distance) best = {d, s0 + t * len};
    s0 += len;
  }
  return best;
}

// Which hallway edge a landmark sits on, and where along it.
struct LandmarkPlacement {
  std::size_t hallway = 0;
  Side side = Side::kLeft;
  double along = 0.0;
  double distance = 0.0;
};

inline LandmarkPlacement place_landmark(const FloorPlan& plan, const Point2& p) {
  LandmarkPlacement best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < plan.hallways.size(); ++h) {
    const auto l = project_onto(plan.hallways[h].left, p);
    if (l.distance < best.distance) best = {h, Side::kLeft, l.along, l.distance};
    const auto r = project_onto(plan.hallways[h].right, p);
    if (r.distance < best.distance) best = {h, Side::kRight, r.along, r.distance};
  }
  return best;
}

inline double distance_to_segment(const Point2& p, const Point2& a, const Point2& b) {
  return project_onto({a, b}, p).distance;
}

// JSON: {width_m, depth_m, floor_id?, hallways: [{left: [[x,y]..], right: [[x,y]..]}],
//        landmarks: [{id, x_m, y_m, kind}]}
inline FloorPlan floor_plan_from_json(const nlohmann::json& j) {
  FloorPlan plan;
  try {
    plan.width = j.at("width_m").get<double>();
    plan.depth = j.at("depth_m").get<double>();
    if (j.contains("floor_id")) {
      plan.floor_id = j["floor_id"].is_string() ? j["floor_id"].get<std::string>()
                                                : j["floor_id"].dump();
    }
    auto points = [](const nlohmann::json& arr) {
      std::vector<Point2> out;
      for (const auto& p : arr) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      return out;
    };
    for (const auto& h : j.at("hallways")) {
      plan.hallways.push_back({points(h.at("left")), points(h.at("right"))});
    }
    for (const auto& l : j.at("landmarks")) {
      plan.landmarks.push_back({l.at("id").get<int>(),
                                {l.at("x_m").get<double>(), l.at("y_m").get<double>()},
                                landmark_kind_from_string(l.at("kind").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FloorPlanError(std::string("floor plan: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FloorPlanError(std::string("floor plan: ") + e.what());
  }
  std::sort(plan.landmarks.begin(), plan.landmarks.end(),
            [](const Landmark& a, const Landmark& b) { return a.id < b.id; });
  validate(plan);
  return plan;
}

inline nlohmann::ordered_json floor_plan_to_json(const FloorPlan& plan) {
  nlohmann::ordered_json j;
  j["width_m"] = plan.width;
  j["depth_m"] = plan.depth;
  j["floor_id"] = plan.floor_id;
  auto points = [](const std::vector<Point2>& pts) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : pts) arr.push_back({p.x, p.y});
    return arr;
  };
  j["hallways"] = nlohmann::ordered_json::array();
  for (const auto& h : plan.hallways) {
    nlohmann::ordered_json hj;
    hj["left"] = points(h.left);
    hj["right"] = points(h.right);
    j["hallways"].push_back(hj);
  }
  j["landmarks"] = nlohmann::ordered_json::array();
  for (const auto& l : plan.landmarks) {
    nlohmann::ordered_json lj;
    lj["id"] = l.id;
    lj["x_m"] = l.position.x;
    lj["y_m"] = l.position.y;
    lj["kind"] = to_string(l.kind);
    j["landmarks"].push_back(lj);
  }
  return j;
}

}  // namespace hwloc
