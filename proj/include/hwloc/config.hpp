#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hwloc/fuse.hpp"
#include "hwloc/geometry.hpp"

namespace hwloc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AppConfig {
  CameraModel camera;
  PipelineConfig pipeline;
  std::optional<std::filesystem::path> plan_path;
  std::optional<std::filesystem::path> fingerprints_path;
  bool seed_given = false;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& where,
                           std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_key(const nlohmann::json& obj, const char* key, T& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: '" + where + "." + key + "' has the wrong type");
  }
}

}  // namespace detail

// Every block is optional and falls back to module defaults, except
// ransac.seed, which must be given explicitly. Relative paths resolve against
// base_dir (the config file's directory).
inline AppConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  using detail::read_key;
  using detail::reject_unknown;
  AppConfig cfg;
  reject_unknown(j, "config",
                 {"camera", "segmentation", "corners", "wlan", "ransac", "paths", "features"});

  if (j.contains("camera")) {
    const auto& c = j["camera"];
    reject_unknown(c, "camera", {"fx", "fy", "cx", "cy", "height_m", "pitch_rad"});
    read_key(c, "fx", cfg.camera.fx, "camera");
    read_key(c, "fy", cfg.camera.fy, "camera");
    read_key(c, "cx", cfg.camera.cx, "camera");
    read_key(c, "cy", cfg.camera.cy, "camera");
    read_key(c, "height_m", cfg.camera.height, "camera");
    read_key(c, "pitch_rad", cfg.camera.pitch, "camera");
  }
  auto& ms = cfg.pipeline.segmentation.mean_shift;
  if (j.contains("segmentation")) {
    const auto& s = j["segmentation"];
    reject_unknown(s, "segmentation",
                   {"h_s", "h_r", "max_iter", "eps", "min_region_size", "threads"});
    read_key(s, "h_s", ms.spatial_bandwidth, "segmentation");
    read_key(s, "h_r", ms.range_bandwidth, "segmentation");
    read_key(s, "max_iter", ms.max_iter, "segmentation");
    read_key(s, "eps", ms.eps, "segmentation");
    read_key(s, "threads", ms.threads, "segmentation");
    read_key(s, "min_region_size", cfg.pipeline.segmentation.min_region_size, "segmentation");
  }
  auto& cp = cfg.pipeline.corners;
  if (j.contains("corners")) {
    const auto& c = j["corners"];
    reject_unknown(c, "corners", {"k", "threshold", "nms_window"});
    read_key(c, "k", cp.k, "corners");
    read_key(c, "threshold", cp.threshold, "corners");
    read_key(c, "nms_window", cp.nms_window, "corners");
  }
  auto& wl = cfg.pipeline.wlan;
  if (j.contains("wlan")) {
    const auto& w = j["wlan"];
    reject_unknown(w, "wlan", {"k", "missing_penalty", "radius_floor"});
    read_key(w, "k", wl.k, "wlan");
    read_key(w, "missing_penalty", wl.missing_penalty, "wlan");
    read_key(w, "radius_floor", wl.radius_floor, "wlan");
  }
  auto& rc = cfg.pipeline.ransac;
  if (j.contains("ransac")) {
    const auto& r = j["ransac"];
    reject_unknown(r, "ransac",
                   {"max_iterations", "inlier_threshold", "min_pair_separation", "seed",
                    "min_inliers"});
    read_key(r, "max_iterations", rc.max_iterations, "ransac");
    read_key(r, "inlier_threshold", rc.inlier_threshold, "ransac");
    read_key(r, "min_pair_separation", rc.min_pair_separation, "ransac");
    read_key(r, "min_inliers", rc.min_inliers, "ransac");
    if (r.contains("seed")) {
      read_key(r, "seed", rc.seed, "ransac");
      cfg.seed_given = true;
    }
  }
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    reject_unknown(p, "paths", {"plan", "fingerprints"});
    auto resolve = [&](const char* key) -> std::optional<std::filesystem::path> {
      if (!p.contains(key)) return std::nullopt;
      std::string s;
      read_key(p, key, s, "paths");
      std::filesystem::path path(s);
      return path.is_absolute() ? path : base_dir / path;
    };
    cfg.plan_path = resolve("plan");
    cfg.fingerprints_path = resolve("fingerprints");
  }
  if (j.contains("features")) {
    std::string f;
    read_key(j, "features", f, "config");
    if (f == "chromaticity") cfg.pipeline.features = FeatureMode::kChromaticity;
    else if (f == "intensity") cfg.pipeline.features = FeatureMode::kIntensity;
    else throw ConfigError("config: features must be 'chromaticity' or 'intensity'");
  }

  try {
    cfg.camera.validate();
    validate(ms);
    rc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.pipeline.segmentation.min_region_size < 1) {
    throw ConfigError("config: segmentation.min_region_size must be >= 1");
  }
  if (cp.k < 1) throw ConfigError("config: corners.k must be >= 1");
  if (!(cp.threshold > 0.0)) throw ConfigError("config: corners.threshold must be > 0");
  if (cp.nms_window < 0) throw ConfigError("config: corners.nms_window must be >= 0");
  if (wl.k < 1) throw ConfigError("config: wlan.k must be >= 1");
  if (wl.missing_penalty < 0.0) throw ConfigError("config: wlan.missing_penalty must be >= 0");
  if (!(wl.radius_floor > 0.0)) throw ConfigError("config: wlan.radius_floor must be > 0");
  if (!(rc.inlier_threshold < wl.radius_floor)) {
    throw ConfigError("config: ransac.inlier_threshold must be below wlan.radius_floor");
  }
  return cfg;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline AppConfig load_config(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  try {
    return parse_config(j, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace hwloc
