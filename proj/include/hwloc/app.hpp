#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <sodium.h>

#include "hwloc/config.hpp"
#include "hwloc/floor_plan.hpp"
#include "hwloc/fuse.hpp"
#include "hwloc/ppm.hpp"
#include "hwloc/wlan.hpp"

namespace hwloc {

// Bad input from the caller: missing files, malformed documents. Maps to
// exit status 1 on the command line and to 400 in the service.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a locate call needs besides the image and scan. Immutable once
// loaded, so concurrent requests can share it.
struct Resources {
  AppConfig config;
  FloorPlan plan;
  FingerprintDb db;
};

inline FloorPlan load_plan(const std::filesystem::path& path) {
  try {
    return floor_plan_from_json(read_json_file(path));
  } catch (const FloorPlanError& e) {
    throw InputError(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw InputError(e.what());
  }
}

inline FingerprintDb load_fingerprints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open");
  try {
    return ingest_fingerprints(read_fingerprint_csv(in));
  } catch (const IngestError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline RssScan load_scan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open");
  try {
    return read_scan_csv(in);
  } catch (const IngestError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline RgbImage load_image(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path.string());
  } catch (const std::runtime_error&) {
    throw InputError(path.string() + ": cannot open");
  }
  try {
    return decode_ppm(bytes);
  } catch (const std::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline Resources load_resources(const AppConfig& cfg) {
  if (!cfg.plan_path) throw InputError("config: paths.plan is required");
  if (!cfg.fingerprints_path) throw InputError("config: paths.fingerprints is required");
  return {cfg, load_plan(*cfg.plan_path), load_fingerprints(*cfg.fingerprints_path)};
}

// ---------------------------------------------------------------------------
// Result document

inline nlohmann::ordered_json coarse_to_json(const CoarseEstimate& c) {
  nlohmann::ordered_json j;
  j["x_m"] = c.center.x;
  j["y_m"] = c.center.y;
  j["radius_m"] = c.radius;
  j["whole_plan"] = c.whole_plan;
  return j;
}

// Fixed field order. Timings are wall-clock and would break byte-identical
// output, so they are only included on request.
inline nlohmann::ordered_json result_to_json(const LocalizationResult& r,
                                             bool with_timings = false) {
  nlohmann::ordered_json j;
  j["status"] = to_string(r.status);
  nlohmann::ordered_json pose;
  pose["x_m"] = r.pose.x;
  pose["y_m"] = r.pose.y;
  pose["theta_rad"] = r.theta_valid ? nlohmann::ordered_json(r.pose.theta) : nullptr;
  j["pose"] = pose;
  j["inliers"] = r.inliers;
  j["rms_m"] = r.rms;
  j["hypothesis_rms_m"] = r.hypothesis_rms;
  j["iterations"] = r.iterations;
  j["coarse"] = coarse_to_json(r.coarse);
  j["matched_landmarks"] = r.matched_landmarks;
  j["reason"] = r.reason;
  nlohmann::ordered_json d;
  d["region_count"] = r.region_count;
  d["corner_count"] = r.corner_count;
  d["micro_landmark_count"] = r.micro_landmark_count;
  d["illuminant_confidence"] = r.illuminant_confidence;
  d["degenerate_hypotheses"] = r.degenerate_hypotheses;
  d["exhausted_draws"] = r.exhausted_draws;
  d["outside_coarse"] = r.outside_coarse;
  j["diagnostics"] = d;
  if (with_timings) {
    nlohmann::ordered_json t;
    for (const auto& s : r.timings) t[s.stage] = s.milliseconds;
    j["timings_ms"] = t;
  }
  return j;
}

inline std::string render_document(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline int exit_status(LocalizationStatus s) { return s == LocalizationStatus::kOk ? 0 : 2; }

// ---------------------------------------------------------------------------
// Wire format

inline std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialize");
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), " \t\r\n", &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    return std::nullopt;
  }
  out.resize(len);
  return out;
}

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialize");
  const std::size_t n = sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(n, '\0');
  sodium_bin2base64(out.data(), n, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(n - 1);  // drop the terminator
  return out;
}

// Same rules as the scan CSV: rss in [-120, 0], repeated APs averaged.
inline RssScan scan_from_json(const nlohmann::json& arr) {
  if (!arr.is_array() || arr.empty()) throw InputError("scan must be a non-empty array");
  std::map<std::string, std::pair<double, int>> sums;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& e = arr[i];
    const std::string where = "scan[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("ap") || !e.contains("rss") || !e["ap"].is_string() ||
        !e["rss"].is_number()) {
      throw InputError(where + " must be {ap: string, rss: number}");
    }
    const auto ap = e["ap"].get<std::string>();
    const double rss = e["rss"].get<double>();
    if (ap.empty()) throw InputError(where + ": empty ap");
    if (!valid_rss(rss)) throw InputError(where + ": rss outside [-120, 0]");
    auto& s = sums[ap];
    s.first += rss;
    s.second += 1;
  }
  RssScan scan;
  for (const auto& [ap, s] : sums) scan.readings[ap] = s.first / s.second;
  return scan;
}

inline nlohmann::ordered_json scan_to_json(const RssScan& scan) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& [ap, rss] : scan.readings) arr.push_back({{"ap", ap}, {"rss", rss}});
  return arr;
}

// Pipeline config for one run. The seed is required: from the request or
// command line if given there, else from the config file.
inline PipelineConfig run_config(const AppConfig& cfg, std::optional<std::uint64_t> seed) {
  PipelineConfig p = cfg.pipeline;
  if (seed) p.ransac.seed = *seed;
  else if (!cfg.seed_given) throw InputError("no RANSAC seed: set ransac.seed or pass one");
  return p;
}

inline LocalizationResult run_locate(const Resources& res, const RgbImage& image,
                                     const RssScan& scan, std::optional<std::uint64_t> seed) {
  return locate(image, scan, res.db, res.plan, res.config.camera, run_config(res.config, seed));
}

struct Response {
  int status = 200;
  std::string body;
};

inline Response error_response(int status, const std::string& reason) {
  nlohmann::ordered_json j;
  j["error"] = reason;
  return {status, render_document(j)};
}

// One request, one pipeline run. Degraded localization is still a 200.
inline Response handle_locate(const Resources& res, std::string_view body) {
  if (body.empty()) return error_response(400, "empty body");
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  }
  try {
    if (!req.is_object()) throw InputError("body must be a JSON object");
    for (const auto& [key, value] : req.items()) {
      if (key != "image_ppm_b64" && key != "scan" && key != "seed") {
        throw InputError("unknown field '" + key + "'");
      }
    }
    if (!req.contains("image_ppm_b64") || !req["image_ppm_b64"].is_string()) {
      throw InputError("image_ppm_b64 must be a string");
    }
    if (!req.contains("scan")) throw InputError("scan is required");
    std::optional<std::uint64_t> seed;
    if (req.contains("seed")) {
      if (!req["seed"].is_number_unsigned()) throw InputError("seed must be a non-negative integer");
      seed = req["seed"].get<std::uint64_t>();
    }
    const auto bytes = base64_decode(req["image_ppm_b64"].get<std::string>());
    if (!bytes) throw InputError("image_ppm_b64 is not valid base64");
    RgbImage image;
    try {
      image = decode_ppm(*bytes);
    } catch (const std::exception& e) {
      throw InputError(std::string("image: ") + e.what());
    }
    const RssScan scan = scan_from_json(req["scan"]);
    return {200, render_document(result_to_json(run_locate(res, image, scan, seed)))};
  } catch (const InputError& e) {
    return error_response(400, e.what());
  }
}

inline std::string make_locate_request(std::span<const std::uint8_t> ppm, const RssScan& scan,
                                       std::optional<std::uint64_t> seed) {
  nlohmann::ordered_json j;
  j["image_ppm_b64"] = base64_encode(ppm);
  j["scan"] = scan_to_json(scan);
  if (seed) j["seed"] = *seed;
  return j.dump();
}

}  // namespace hwloc
