#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwloc/corners.hpp"
#include "hwloc/floor_plan.hpp"
#include "hwloc/geometry.hpp"
#include "hwloc/illum.hpp"
#include "hwloc/segment.hpp"
#include "hwloc/wlan.hpp"

namespace hwloc {

// ---------------------------------------------------------------------------
// Candidate gating

struct CandidateSet {
  std::vector<Landmark> landmarks;  // ordered by id
  struct Edge {
    std::size_t hallway;
    Side side;
  };
  std::vector<Edge> edges;  // hallway edges crossing the disc
};

class NoCandidates : public std::runtime_error {
 public:
  explicit NoCandidates(double radius)
      : std::runtime_error("no floor-plan landmark within " + std::to_string(radius) +
                           " m of the coarse center; increase the search radius") {}
};

inline CandidateSet candidate_landmarks(const FloorPlan& plan, const CoarseEstimate& coarse) {
  CandidateSet out;
  for (const auto& l : plan.landmarks) {
    if (std::hypot(l.position.x - coarse.center.x, l.position.y - coarse.center.y) <=
        coarse.radius) {
      out.landmarks.push_back(l);
    }
  }
  if (out.landmarks.empty()) throw NoCandidates(coarse.radius);
  auto crosses = [&](const std::vector<Point2>& line) {
    return project_onto(line, coarse.center).distance <= coarse.radius;
  };
  for (std::size_t h = 0; h < plan.hallways.size(); ++h) {
    if (crosses(plan.hallways[h].left)) out.edges.push_back({h, Side::kLeft});
    if (crosses(plan.hallways[h].right)) out.edges.push_back({h, Side::kRight});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hypothesis space size

struct HypothesisCount {
  std::uint64_t count = 0;
  bool underflow = false;  // fewer than 4 points on a side
  bool overflow = false;   // saturated at uint64 max
};

// Ordered 4-tuples on both sides: P(n_image, 4) * P(n_map, 4).
inline HypothesisCount count_hypotheses(std::uint64_t n_image, std::uint64_t n_map) {
  if (n_image < 4 || n_map < 4) return {0, true, false};
  auto perm4 = [](std::uint64_t n) -> unsigned __int128 {
    return static_cast<unsigned __int128>(n) * (n - 1) * (n - 2) * (n - 3);
  };
  const unsigned __int128 a = perm4(n_image);
  const unsigned __int128 b = perm4(n_map);
  const auto max64 = static_cast<unsigned __int128>(std::numeric_limits<std::uint64_t>::max());
  if (a > max64 || b > max64 || (b != 0 && a > max64 / b)) {
    return {std::numeric_limits<std::uint64_t>::max(), false, true};
  }
  return {static_cast<std::uint64_t>(a * b), false, false};
}

// ---------------------------------------------------------------------------
// RANSAC

struct RansacConfig {
  int max_iterations = 2000;
  double inlier_threshold = 0.5;      // m
  double min_pair_separation = 0.5;   // m
  std::uint64_t seed = 0;
  int min_inliers = 6;
  int max_rejections = 64;            // attempts per hypothesis draw
  double pair_length_tolerance = 0.5; // m; |map pair length - image pair length|
  int refine_rounds = 3;              // refit-on-inliers passes per hypothesis, 0 = off
  double max_sample_range = 12.0;     // m; farther detections are scored but not sampled
  double layout_tolerance = 1.0;      // m; right map pair placement vs the left pair

  void validate() const {
    if (max_iterations < 1) throw std::invalid_argument("ransac: max_iterations must be >= 1");
    if (!(inlier_threshold > 0.0)) throw std::invalid_argument("ransac: inlier_threshold must be > 0");
    if (!(min_pair_separation > 0.0)) {
      throw std::invalid_argument("ransac: min_pair_separation must be > 0");
    }
    if (min_inliers < 1) throw std::invalid_argument("ransac: min_inliers must be >= 1");
    if (max_rejections < 1) throw std::invalid_argument("ransac: max_rejections must be >= 1");
    if (!(pair_length_tolerance > 0.0)) {
      throw std::invalid_argument("ransac: pair_length_tolerance must be > 0");
    }
    if (refine_rounds < 0) throw std::invalid_argument("ransac: refine_rounds must be >= 0");
    if (!(layout_tolerance > 0.0)) {
      throw std::invalid_argument("ransac: layout_tolerance must be > 0");
    }
    if (!(max_sample_range > 0.0)) {
      throw std::invalid_argument("ransac: max_sample_range must be > 0");
    }
  }
};

// Map landmarks of one hallway edge, ordered along the edge.
struct SideLandmarks {
  std::size_t hallway = 0;
  Side side = Side::kLeft;
  std::vector<Landmark> landmarks;
};

struct HallwayCandidates {
  std::size_t hallway = 0;
  SideLandmarks left;
  SideLandmarks right;
};

inline std::vector<HallwayCandidates> group_by_side(const FloorPlan& plan,
                                                    std::span<const Landmark> landmarks) {
  std::vector<HallwayCandidates> groups(plan.hallways.size());
  std::vector<std::vector<std::pair<double, Landmark>>> left(plan.hallways.size()),
      right(plan.hallways.size());
  for (const auto& l : landmarks) {
    const auto place = place_landmark(plan, l.position);
    (place.side == Side::kLeft ? left : right)[place.hallway].push_back({place.along, l});
  }
  for (std::size_t h = 0; h < groups.size(); ++h) {
    auto by_along = [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : a.second.id < b.second.id;
    };
    std::sort(left[h].begin(), left[h].end(), by_along);
    std::sort(right[h].begin(), right[h].end(), by_along);
    groups[h].hallway = h;
    groups[h].left = {h, Side::kLeft, {}};
    groups[h].right = {h, Side::kRight, {}};
    for (const auto& [s, l] : left[h]) groups[h].left.landmarks.push_back(l);
    for (const auto& [s, l] : right[h]) groups[h].right.landmarks.push_back(l);
  }
  std::erase_if(groups, [](const HallwayCandidates& g) {
    return g.left.landmarks.size() < 2 || g.right.landmarks.size() < 2;
  });
  return groups;
}

// Four pairs: [left near, left far, right near, right far].
struct CorrespondenceHypothesis {
  std::array<GroundPoint, 4> image;
  std::array<Point2, 4> map;
  std::array<int, 4> landmark_ids{};
};

// Index pair (i < j) drawn with probability proportional to weights[k] over
// the enumerated pairs; returns the pair index.
template <typename Rng>
std::size_t sample_weighted(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) {
    std::uniform_int_distribution<std::size_t> pick(0, weights.size() - 1);
    return pick(rng);
  }
  std::uniform_real_distribution<double> uni(0.0, total);
  const double r = uni(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (r < acc) return k;
  }
  return weights.size() - 1;
}

namespace detail {

inline double dist(const GroundPoint& a, const GroundPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}
inline double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct PairChoice {
  std::size_t near = 0;
  std::size_t far = 0;
};

// Separation-weighted image pair among those admitted by `usable`. Pairs
// closer than min_sep are never drawn; nullopt when nothing is admissible.
template <typename Rng, typename Usable>
std::optional<PairChoice> draw_image_pair(Rng& rng, std::span<const GroundPoint> pts,
                                          double min_sep, Usable&& usable) {
  std::vector<PairChoice> pairs;
  std::vector<double> seps;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = dist(pts[i], pts[j]);
      if (d < min_sep || !usable(i, j, d)) continue;
      pairs.push_back({i, j});
      seps.push_back(d);
    }
  }
  if (pairs.empty()) return std::nullopt;
  return pairs[sample_weighted(rng, std::span<const double>(seps))];
}

template <typename Rng>
std::optional<PairChoice> draw_image_pair(Rng& rng, std::span<const GroundPoint> pts,
                                          double min_sep) {
  return draw_image_pair(rng, pts, min_sep, [](std::size_t, std::size_t, double) { return true; });
}

// Ordered map pairs whose length matches the image pair.
inline std::vector<PairChoice> matching_map_pairs(const std::vector<Landmark>& ordered,
                                                  double target, double tolerance,
                                                  double min_sep) {
  std::vector<PairChoice> ok;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    for (std::size_t j = i + 1; j < ordered.size(); ++j) {
      const double d = dist(ordered[i].position, ordered[j].position);
      if (d >= min_sep && std::abs(d - target) <= tolerance) ok.push_back({i, j});
    }
  }
  return ok;
}

template <typename Rng>
std::optional<PairChoice> draw_map_pair(Rng& rng, const std::vector<Landmark>& ordered,
                                        double target, double tolerance, double min_sep) {
  const auto ok = matching_map_pairs(ordered, target, tolerance, min_sep);
  if (ok.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, ok.size() - 1);
  return ok[pick(rng)];
}

// Points eligible for sampling: within max_range of the camera, or all of
// them when fewer than two are.
inline std::vector<GroundPoint> sampling_points(std::span<const GroundPoint> pts,
                                                double max_range) {
  std::vector<GroundPoint> near;
  for (const auto& p : pts) {
    if (std::hypot(p.x, p.y) <= max_range) near.push_back(p);
  }
  if (near.size() < 2) return {pts.begin(), pts.end()};
  return near;
}

}  // namespace detail

// Draws a hallway and a facing, then per image line a separation-weighted
// pair of points, and an order-preserving map landmark pair of matching
// length on the corresponding hallway side. Facing forward, image-left
// matches the map's left edge in increasing order; facing back, it matches
// the right edge in decreasing order. Image pairs with no length-compatible
// map pair are not drawn, and the right map pair must be placed relative to
// the left one as in the image. nullopt after max_rejections failed attempts.
template <typename Rng>
std::optional<CorrespondenceHypothesis> generate_hypothesis(
    Rng& rng, std::span<const GroundPoint> left_pts, std::span<const GroundPoint> right_pts,
    std::span<const HallwayCandidates> candidates, const RansacConfig& cfg) {
  if (left_pts.size() < 2 || right_pts.size() < 2 || candidates.empty()) return std::nullopt;
  const auto left_near = detail::sampling_points(left_pts, cfg.max_sample_range);
  const auto right_near = detail::sampling_points(right_pts, cfg.max_sample_range);
  std::uniform_int_distribution<std::size_t> pick_hallway(0, candidates.size() - 1);
  std::bernoulli_distribution facing_back(0.5);
  for (int attempt = 0; attempt < cfg.max_rejections; ++attempt) {
    const auto& hall = candidates[pick_hallway(rng)];
    const bool back = facing_back(rng);
    std::vector<Landmark> map_left = back ? hall.right.landmarks : hall.left.landmarks;
    std::vector<Landmark> map_right = back ? hall.left.landmarks : hall.right.landmarks;
    if (back) {
      std::reverse(map_left.begin(), map_left.end());
      std::reverse(map_right.begin(), map_right.end());
    }
    auto admits = [&](const std::vector<Landmark>& side) {
      return [&side, &cfg](std::size_t, std::size_t, double d) {
        return !detail::matching_map_pairs(side, d, cfg.pair_length_tolerance,
                                           cfg.min_pair_separation)
                    .empty();
      };
    };
    const auto li = detail::draw_image_pair(rng, std::span<const GroundPoint>(left_near),
                                            cfg.min_pair_separation, admits(map_left));
    const auto ri = detail::draw_image_pair(rng, std::span<const GroundPoint>(right_near),
                                            cfg.min_pair_separation, admits(map_right));
    if (!li || !ri) continue;

    const double lsep = detail::dist(left_near[li->near], left_near[li->far]);
    const double rsep = detail::dist(right_near[ri->near], right_near[ri->far]);
    const auto lm = detail::draw_map_pair(rng, map_left, lsep, cfg.pair_length_tolerance,
                                          cfg.min_pair_separation);
    if (!lm) continue;
    // The right pair must sit where the image puts it relative to the left
    // pair: same offset along and across the left pair's direction.
    const auto frame_offset = [](double ax, double ay, double bx, double by, double px,
                                 double py) {
      const double len = std::hypot(bx - ax, by - ay);
      const double ux = (bx - ax) / len, uy = (by - ay) / len;
      return std::pair{(px - ax) * ux + (py - ay) * uy, (px - ax) * uy - (py - ay) * ux};
    };
    const auto& gl0 = left_near[li->near];
    const auto& gl1 = left_near[li->far];
    const auto& gr0 = right_near[ri->near];
    const auto& ml0 = map_left[lm->near].position;
    const auto& ml1 = map_left[lm->far].position;
    const auto img = frame_offset(gl0.x, gl0.y, gl1.x, gl1.y, gr0.x, gr0.y);
    std::vector<detail::PairChoice> right_ok;
    for (const auto& c : detail::matching_map_pairs(map_right, rsep, cfg.pair_length_tolerance,
                                                    cfg.min_pair_separation)) {
      const auto& mr0 = map_right[c.near].position;
      const auto map = frame_offset(ml0.x, ml0.y, ml1.x, ml1.y, mr0.x, mr0.y);
      if (std::abs(map.first - img.first) <= cfg.layout_tolerance &&
          std::abs(map.second - img.second) <= cfg.layout_tolerance) {
        right_ok.push_back(c);
      }
    }
    if (right_ok.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick_right(0, right_ok.size() - 1);
    const auto rm = std::optional<detail::PairChoice>(right_ok[pick_right(rng)]);

    CorrespondenceHypothesis h;
    h.image = {left_near[li->near], left_near[li->far], right_near[ri->near],
               right_near[ri->far]};
    const std::array<const Landmark*, 4> m{&map_left[lm->near], &map_left[lm->far],
                                           &map_right[rm->near], &map_right[rm->far]};
    for (int k = 0; k < 4; ++k) {
      h.map[k] = m[k]->position;
      h.landmark_ids[k] = m[k]->id;
    }
    return h;
  }
  return std::nullopt;
}

struct Match {
  std::size_t detection = 0;  // index into the micro-landmark list
  std::size_t landmark = 0;   // index into the landmark list scored against
  double distance = 0.0;
};

struct HypothesisScore {
  Pose2D pose;
  int inliers = 0;
  double rms = 0.0;
  std::vector<Match> matches;
};

// Greedy one-to-one nearest assignment of detections (mapped through pose)
// to landmarks, closest pairs first.
inline std::vector<Match> assign_inliers(const Pose2D& pose, std::span<const GroundPoint> detections,
                                         std::span<const Landmark> landmarks, double threshold) {
  std::vector<Match> all;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Point2 p = to_map(pose, detections[i]);
    for (std::size_t j = 0; j < landmarks.size(); ++j) {
      const double d = detail::dist(p, landmarks[j].position);
      if (d <= threshold) all.push_back({i, j, d});
    }
  }
  std::sort(all.begin(), all.end(), [](const Match& a, const Match& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.detection != b.detection) return a.detection < b.detection;
    return a.landmark < b.landmark;
  });
  std::vector<char> used_d(detections.size(), 0), used_l(landmarks.size(), 0);
  std::vector<Match> out;
  for (const auto& m : all) {
    if (used_d[m.detection] || used_l[m.landmark]) continue;
    used_d[m.detection] = used_l[m.landmark] = 1;
    out.push_back(m);
  }
  std::sort(out.begin(), out.end(),
            [](const Match& a, const Match& b) { return a.detection < b.detection; });
  return out;
}

inline double matches_rms(std::span<const Match> matches) {
  if (matches.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : matches) s += m.distance * m.distance;
  return std::sqrt(s / static_cast<double>(matches.size()));
}

// Throws DegenerateCorrespondence when the sample cannot fix a pose.
inline HypothesisScore score_hypothesis(const CorrespondenceHypothesis& h,
                                        std::span<const GroundPoint> detections,
                                        std::span<const Landmark> landmarks,
                                        const RansacConfig& cfg) {
  const auto fit = estimate_rigid_2d(h.image, h.map);
  HypothesisScore s;
  s.pose = fit.pose;
  s.matches = assign_inliers(fit.pose, detections, landmarks, cfg.inlier_threshold);
  s.inliers = static_cast<int>(s.matches.size());
  s.rms = matches_rms(s.matches);
  return s;
}

inline HypothesisScore score_hypothesis(const CorrespondenceHypothesis& h,
                                        std::span<const GroundPoint> detections,
                                        const FloorPlan& plan, const RansacConfig& cfg) {
  return score_hypothesis(h, detections, std::span<const Landmark>(plan.landmarks), cfg);
}

inline bool better(const HypothesisScore& a, const HypothesisScore& b) {
  return a.inliers > b.inliers || (a.inliers == b.inliers && a.rms < b.rms);
}

// Refits the pose on the current inliers and reassigns, while that improves
// the score. A 4-point pose from noisy far detections often misses inliers
// that the same correspondence recovers once the near ones anchor the fit.
inline HypothesisScore refine_hypothesis(HypothesisScore s, std::span<const GroundPoint> detections,
                                         std::span<const Landmark> landmarks,
                                         const RansacConfig& cfg) {
  for (int round = 0; round < cfg.refine_rounds && s.matches.size() >= 3; ++round) {
    std::vector<GroundPoint> g;
    std::vector<Point2> m;
    for (const auto& match : s.matches) {
      g.push_back(detections[match.detection]);
      m.push_back(landmarks[match.landmark].position);
    }
    HypothesisScore next;
    try {
      next.pose = estimate_rigid_2d(g, m).pose;
    } catch (const DegenerateCorrespondence&) {
      break;
    }
    next.matches = assign_inliers(next.pose, detections, landmarks, cfg.inlier_threshold);
    next.inliers = static_cast<int>(next.matches.size());
    next.rms = matches_rms(next.matches);
    if (!better(next, s)) break;
    s = std::move(next);
  }
  return s;
}

enum class LocalizationStatus { kOk, kDegradedWlanOnly, kFailed };

inline const char* to_string(LocalizationStatus s) {
  switch (s) {
    case LocalizationStatus::kOk: return "ok";
    case LocalizationStatus::kDegradedWlanOnly: return "degraded_wlan_only";
    case LocalizationStatus::kFailed: return "failed";
  }
  return "failed";
}

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

struct LocalizationResult {
  Pose2D pose;
  bool theta_valid = false;
  LocalizationStatus status = LocalizationStatus::kFailed;
  int inliers = 0;
  double rms = 0.0;             // refined pose, over the inlier set
  double hypothesis_rms = 0.0;  // best raw hypothesis, same inlier set
  int iterations = 0;
  int degenerate_hypotheses = 0;
  int exhausted_draws = 0;
  int outside_coarse = 0;       // hypotheses placing the camera outside the disc
  CoarseEstimate coarse;
  std::string reason;           // why the result is degraded; empty when ok
  std::vector<int> matched_landmarks;  // plan landmark ids of the inliers

  // Pipeline diagnostics (filled by locate()).
  int region_count = 0;
  int corner_count = 0;
  int micro_landmark_count = 0;
  double illuminant_confidence = 0.0;
  std::vector<StageTiming> timings;
};

namespace detail {

inline LocalizationResult degraded(const CoarseEstimate& coarse, std::string reason) {
  LocalizationResult r;
  r.status = LocalizationStatus::kDegradedWlanOnly;
  r.pose = {coarse.center.x, coarse.center.y, 0.0};
  r.theta_valid = false;
  r.coarse = coarse;
  r.reason = std::move(reason);
  return r;
}

}  // namespace detail

// Micro-landmarks already in the camera ground frame.
inline LocalizationResult ransac_locate(std::span<const GroundPoint> micro_landmarks,
                                        const FloorPlan& plan, const CoarseEstimate& coarse,
                                        const RansacConfig& cfg,
                                        const EdgeLineParams& edge_params = {}) {
  cfg.validate();
  if (micro_landmarks.size() < 4) {
    return detail::degraded(coarse, "fewer than 4 micro-landmarks");
  }
  EdgeLines edges;
  try {
    edges = fit_edge_lines(micro_landmarks, edge_params);
  } catch (const EdgeFitError&) {
    return detail::degraded(coarse, "no floor edge line could be fitted");
  }
  if (edges.left_points.size() < 2 || edges.right_points.size() < 2) {
    return detail::degraded(coarse, "need two points on each floor edge line");
  }
  CandidateSet cands;
  try {
    cands = candidate_landmarks(plan, coarse);
  } catch (const NoCandidates& e) {
    return detail::degraded(coarse, e.what());
  }
  const auto groups = group_by_side(plan, cands.landmarks);
  if (groups.empty()) {
    return detail::degraded(coarse, "no hallway with two candidate landmarks per side");
  }

  std::mt19937_64 rng(cfg.seed);
  std::optional<HypothesisScore> best;
  LocalizationResult result;
  result.coarse = coarse;
  int consecutive_exhausted = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    ++result.iterations;
    const auto h = generate_hypothesis(rng, std::span<const GroundPoint>(edges.left_points),
                                       std::span<const GroundPoint>(edges.right_points),
                                       std::span<const HallwayCandidates>(groups), cfg);
    if (!h) {
      ++result.exhausted_draws;
      if (++consecutive_exhausted >= cfg.max_rejections) break;
      continue;
    }
    consecutive_exhausted = 0;
    HypothesisScore s;
    try {
      s = score_hypothesis(*h, micro_landmarks, plan, cfg);
    } catch (const DegenerateCorrespondence&) {
      ++result.degenerate_hypotheses;
      continue;
    }
    if (s.inliers > 4) {
      s = refine_hypothesis(std::move(s), micro_landmarks,
                            std::span<const Landmark>(plan.landmarks), cfg);
    }
    if (std::hypot(s.pose.x - coarse.center.x, s.pose.y - coarse.center.y) > coarse.radius) {
      ++result.outside_coarse;
      continue;
    }
    // Ties keep the earlier iteration.
    if (!best || better(s, *best)) {
      best = std::move(s);
    }
  }

  if (!best || best->inliers < cfg.min_inliers) {
    auto r = detail::degraded(coarse, "best hypothesis has " +
                                          std::to_string(best ? best->inliers : 0) +
                                          " inliers, need " + std::to_string(cfg.min_inliers));
    r.iterations = result.iterations;
    r.degenerate_hypotheses = result.degenerate_hypotheses;
    r.exhausted_draws = result.exhausted_draws;
    r.outside_coarse = result.outside_coarse;
    r.inliers = best ? best->inliers : 0;
    return r;
  }

  std::vector<GroundPoint> g;
  std::vector<Point2> m;
  for (const auto& match : best->matches) {
    g.push_back(micro_landmarks[match.detection]);
    m.push_back(plan.landmarks[match.landmark].position);
    result.matched_landmarks.push_back(plan.landmarks[match.landmark].id);
  }
  const auto refined = estimate_rigid_2d(g, m);
  result.status = LocalizationStatus::kOk;
  result.pose = refined.pose;
  result.theta_valid = true;
  result.inliers = best->inliers;
  result.rms = refined.rms;
  result.hypothesis_rms = best->rms;
  return result;
}

// Image-space micro-landmarks: projected to the floor first; pixels at or
// above the horizon are dropped.
inline std::vector<GroundPoint> project_to_ground(std::span<const CornerPoint> corners,
                                                  const CameraModel& cam) {
  std::vector<GroundPoint> out;
  out.reserve(corners.size());
  for (const auto& c : corners) {
    try {
      out.push_back(image_to_ground(c.coord, cam));
    } catch (const NoGroundIntersection&) {
    }
  }
  return out;
}

inline LocalizationResult ransac_locate(std::span<const CornerPoint> micro_landmarks,
                                        const CameraModel& cam, const FloorPlan& plan,
                                        const CoarseEstimate& coarse, const RansacConfig& cfg,
                                        const EdgeLineParams& edge_params = {}) {
  const auto ground = project_to_ground(micro_landmarks, cam);
  return ransac_locate(std::span<const GroundPoint>(ground), plan, coarse, cfg, edge_params);
}

// ---------------------------------------------------------------------------
// Full pipeline

enum class FeatureMode { kChromaticity, kIntensity };

struct PipelineConfig {
  SegmentParams segmentation;
  CornerParams corners;
  MicroLandmarkParams micro;
  HighlightOptions highlight;
  IlluminantOptions illuminant;
  KnnParams wlan;
  RansacConfig ransac;
  EdgeLineParams edges;
  FeatureMode features = FeatureMode::kChromaticity;
};

// Vision front end up to micro-landmarks; exposed for stage debugging.
struct VisionOutput {
  IlluminantEstimate illuminant;
  FeatureGrid features;
  SegmentMap segments;
  std::vector<Contour> contours;
  std::vector<CornerPoint> corners;
  MicroLandmarks micro;
  std::vector<StageTiming> timings;
};

inline VisionOutput run_vision(const RgbImage& image, const PipelineConfig& cfg) {
  using clock = std::chrono::steady_clock;
  VisionOutput out;
  auto t0 = clock::now();
  auto lap = [&](const char* name) {
    const auto t1 = clock::now();
    out.timings.push_back(
        {name, std::chrono::duration<double, std::milli>(t1 - t0).count()});
    t0 = t1;
  };
  if (cfg.features == FeatureMode::kChromaticity) {
    out.illuminant = estimate_illuminant(image, cfg.highlight, cfg.illuminant);
    out.features = normalize_illumination(image, out.illuminant, cfg.highlight.s_min);
  } else {
    out.features = intensity_features(image);
  }
  lap("illumination");
  out.segments = segment(out.features, cfg.segmentation);
  lap("segmentation");
  out.contours = extract_boundaries(out.segments);
  lap("boundaries");
  out.corners = detect_corners(out.contours, cfg.corners);
  out.micro = filter_micro_landmarks(out.corners, out.segments, cfg.micro);
  lap("corners");
  return out;
}

inline CoarseEstimate whole_plan_estimate(const FloorPlan& plan) {
  return {plan.center(), plan.half_diagonal(), true};
}

// Camera branch and WLAN branch run concurrently, then RANSAC fuses them.
// Never throws on degraded input: the answer falls back to the coarse disc.
inline LocalizationResult locate(const RgbImage& image, const RssScan& scan,
                                 const FingerprintDb& db, const FloorPlan& plan,
                                 const CameraModel& cam, const PipelineConfig& cfg) {
  using clock = std::chrono::steady_clock;
  auto wlan = std::async(std::launch::async, [&]() -> std::pair<CoarseEstimate, double> {
    const auto t0 = clock::now();
    CoarseEstimate c = (db.empty() || !db.knows_any(scan)) ? whole_plan_estimate(plan)
                                                           : knn_locate(scan, db, cfg.wlan);
    return {c, std::chrono::duration<double, std::milli>(clock::now() - t0).count()};
  });
  PipelineConfig vision_cfg = cfg;
  vision_cfg.micro.horizon_row = cam.horizon_row();
  const VisionOutput vision = run_vision(image, vision_cfg);
  const auto [coarse, wlan_ms] = wlan.get();

  const auto t0 = clock::now();
  LocalizationResult result = ransac_locate(std::span<const CornerPoint>(vision.micro.corners),
                                            cam, plan, coarse, cfg.ransac, cfg.edges);
  const double ransac_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();

  result.region_count = vision.segments.region_count;
  result.corner_count = static_cast<int>(vision.corners.size());
  result.micro_landmark_count = static_cast<int>(vision.micro.corners.size());
  result.illuminant_confidence = vision.illuminant.confidence;
  result.timings = vision.timings;
  result.timings.push_back({"wlan", wlan_ms});
  result.timings.push_back({"ransac", ransac_ms});
  return result;
}

}  // namespace hwloc
