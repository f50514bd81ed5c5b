#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hwloc/annotate.hpp"
#include "hwloc/app.hpp"
#include "hwloc/service.hpp"
#include "hwloc/synth.hpp"

namespace hwloc {

inline constexpr const char* kLogLevelEnv = "HWLOC_LOG_LEVEL";

// Logs go to stderr; stdout carries result documents only.
inline void init_logging() {
  auto logger = spdlog::stderr_color_mt("hallway-loc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv(kLogLevelEnv)) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept the literal "off".
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("ignoring {}={}", kLogLevelEnv, env);
  }
}

namespace cli {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path.string() + ": cannot write");
  out << text;
  if (!out) throw InputError(path.string() + ": write failed");
}

inline void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) std::cout << text << std::flush;
  else write_text(out_path, text);
}

inline void save_ppm(const std::filesystem::path& path, const RgbImage& img) {
  try {
    write_ppm(path.string(), img);
  } catch (const std::runtime_error&) {
    throw InputError(path.string() + ": cannot write");
  }
}

// Stage commands work without a config file; module defaults apply then.
inline AppConfig optional_config(const std::string& path) {
  if (path.empty()) return {};
  return load_config(path);
}

inline PipelineConfig stage_pipeline(const AppConfig& cfg) {
  PipelineConfig p = cfg.pipeline;
  p.micro.horizon_row = cfg.camera.horizon_row();
  return p;
}

inline bool on_frame(PixelCoord p, int w, int h) {
  return p.u == 0 || p.v == 0 || p.u == w - 1 || p.v == h - 1;
}

struct Options {
  std::string config;
  std::string image;
  std::string scan;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool timings = false;
  // detect-corners
  std::string csv;
  std::string overlay;
  bool micro = false;
  bool keep_frame = false;
  // knn
  std::string fingerprints;
  // synth
  std::string out_dir;
  std::string scene;
  std::optional<std::uint64_t> bundle;
  std::string preset;
  double spacing = 3.0;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
};

inline int cmd_locate(const Options& o) {
  const AppConfig cfg = load_config(o.config);
  const Resources res = load_resources(cfg);
  const RgbImage image = load_image(o.image);
  const RssScan scan = load_scan(o.scan);
  const LocalizationResult r = run_locate(res, image, scan, o.seed);
  spdlog::info("status {} inliers {} coarse ({:.2f}, {:.2f}) r {:.1f}", to_string(r.status),
               r.inliers, r.coarse.center.x, r.coarse.center.y, r.coarse.radius);
  if (!r.reason.empty()) spdlog::warn("degraded: {}", r.reason);
  emit(o.out, render_document(result_to_json(r, o.timings)));
  return exit_status(r.status);
}

inline int cmd_segment(const Options& o) {
  const AppConfig cfg = optional_config(o.config);
  const RgbImage image = load_image(o.image);
  const PipelineConfig p = stage_pipeline(cfg);
  const FeatureGrid features = p.features == FeatureMode::kChromaticity
                                   ? normalize_illumination(
                                         image, estimate_illuminant(image, p.highlight, p.illuminant),
                                         p.highlight.s_min)
                                   : intensity_features(image);
  const SegmentMap map = segment(features, p.segmentation);
  if (!o.out.empty()) save_ppm(o.out, label_image(map));
  nlohmann::ordered_json j;
  j["regions"] = map.region_count;
  j["width"] = map.labels.width();
  j["height"] = map.labels.height();
  j["floor_region"] = floor_region(map);
  std::cout << render_document(j);
  return 0;
}

inline int cmd_detect_corners(const Options& o) {
  const AppConfig cfg = optional_config(o.config);
  const RgbImage image = load_image(o.image);
  const VisionOutput v = run_vision(image, stage_pipeline(cfg));
  std::vector<CornerPoint> corners = o.micro ? v.micro.corners : v.corners;
  if (!o.keep_frame) {
    // The image frame closes border regions; its corners are not scene corners.
    std::erase_if(corners, [&](const CornerPoint& c) {
      return on_frame(c.coord, image.width(), image.height());
    });
  }
  std::ostringstream csv;
  csv << "u,v,score,contour\n";
  csv.precision(6);
  for (const auto& c : corners) {
    csv << c.coord.u << ',' << c.coord.v << ',' << c.cornerity << ',' << c.contour << '\n';
  }
  emit(o.csv, csv.str());
  if (!o.overlay.empty()) {
    std::vector<PixelCoord> pts;
    for (const auto& c : corners) pts.push_back(c.coord);
    save_ppm(o.overlay, annotate(image, pts));
  }
  spdlog::info("{} corners ({} regions, {} micro-landmarks)", corners.size(),
               v.segments.region_count, v.micro.corners.size());
  return 0;
}

inline int cmd_iic_dump(const Options& o) {
  const AppConfig cfg = optional_config(o.config);
  const RgbImage image = load_image(o.image);
  const PipelineConfig p = cfg.pipeline;
  const IlluminantEstimate est = estimate_illuminant(image, p.highlight, p.illuminant);
  if (!o.out.empty()) {
    std::ostringstream csv;
    csv.precision(9);
    csv << "channel,u,v,inv_intensity,chromaticity,specular\n";
    const char* names[3] = {"r", "g", "b"};
    const auto sets = iic_project_all(image, p.highlight.s_min);
    for (int c = 0; c < 3; ++c) {
      for (const auto& pt : sets[c]) {
        const int u = static_cast<int>(pt.pixel % image.width());
        const int vv = static_cast<int>(pt.pixel / image.width());
        const bool spec = !est.specular.empty() && est.specular(u, vv);
        csv << names[c] << ',' << u << ',' << vv << ',' << pt.x << ',' << pt.y << ','
            << (spec ? 1 : 0) << '\n';
      }
    }
    write_text(o.out, csv.str());
  }
  nlohmann::ordered_json j;
  j["gamma_r"] = est.gamma_r;
  j["gamma_g"] = est.gamma_g;
  j["gamma_b"] = est.gamma_b;
  j["confidence"] = est.confidence;
  j["fallback"] = to_string(est.fallback);
  std::cout << render_document(j);
  return 0;
}

inline int cmd_knn(const Options& o) {
  const AppConfig cfg = optional_config(o.config);
  std::filesystem::path fp_path;
  if (!o.fingerprints.empty()) fp_path = o.fingerprints;
  else if (cfg.fingerprints_path) fp_path = *cfg.fingerprints_path;
  else throw InputError("knn: pass --fingerprints or set paths.fingerprints in the config");
  const FingerprintDb db = load_fingerprints(fp_path);
  const RssScan scan = load_scan(o.scan);
  CoarseEstimate c;
  if (db.knows_any(scan)) {
    c = knn_locate(scan, db, cfg.pipeline.wlan);
  } else if (cfg.plan_path) {
    spdlog::warn("scan shares no access point with the database; using the whole plan");
    c = whole_plan_estimate(load_plan(*cfg.plan_path));
  } else {
    throw InputError("knn: scan shares no access point with the database");
  }
  emit(o.out, render_document(coarse_to_json(c)));
  return 0;
}

inline synth::DefectPreset parse_preset(const std::string& s) {
  if (s == "A") return synth::DefectPreset::kA;
  if (s == "B") return synth::DefectPreset::kB;
  if (s == "C") return synth::DefectPreset::kC;
  if (s == "D") return synth::DefectPreset::kD;
  if (s == "E") return synth::DefectPreset::kE;
  throw InputError("synth: preset must be one of A, B, C, D, E");
}

inline std::string truth_csv(const synth::GroundTruth& t) {
  std::ostringstream csv;
  csv.precision(10);
  csv << "u,v,floor,landmark_id,depth_m,resolvable\n";
  for (const auto& c : t.corners) {
    csv << c.u << ',' << c.v << ',' << (c.floor ? 1 : 0) << ',' << c.landmark_id << ','
        << c.depth << ',' << (c.resolvable ? 1 : 0) << '\n';
  }
  return csv.str();
}

// Writes image.ppm, truth.csv, scene.json, plan.json, scan.csv,
// fingerprints.csv and a config.json tying them together.
inline int cmd_synth(const Options& o) {
  namespace fs = std::filesystem;
  using namespace synth;
  const AppConfig cfg = optional_config(o.config);
  if (!o.scene.empty() && o.bundle) throw InputError("synth: --scene and --bundle are exclusive");
  SceneSpec scene;
  if (o.bundle) {
    scene = random_testbed_bundle(*o.bundle, cfg.camera).scene;
  } else if (!o.scene.empty()) {
    try {
      scene = scene_from_json(read_json_file(o.scene));
    } catch (const std::exception& e) {
      throw InputError(o.scene + ": " + e.what());
    }
  } else {
    scene = testbed_scene();
  }
  if (!o.preset.empty()) scene = apply_preset(scene, parse_preset(o.preset));

  RenderOutput render;
  try {
    render = render_hallway(scene, cfg.camera);
  } catch (const SceneError& e) {
    throw InputError(e.what());
  }
  const FloorPlan plan = make_floor_plan(scene, 2.0 * scene.center_x, scene.y1);
  const auto aps = testbed_access_points();
  const RssScan scan =
      simulate_rss(aps, {scene.camera.x, scene.camera.y}, PathLossModel{}, scene.seed * 7919 + 1);
  const FingerprintDb db = ingest_fingerprints(fingerprint_grid(plan, aps, o.spacing, {}));

  const fs::path dir = o.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError(dir.string() + ": " + ec.message());
  save_ppm(dir / "image.ppm", render.image);
  write_text(dir / "truth.csv", truth_csv(render.truth));
  write_text(dir / "scene.json", to_json(scene).dump(2) + "\n");
  write_text(dir / "plan.json", floor_plan_to_json(plan).dump(2) + "\n");
  write_text(dir / "scan.csv", write_scan_csv(scan));
  write_text(dir / "fingerprints.csv", write_fingerprint_csv(db.fingerprints()));

  nlohmann::ordered_json c;
  c["camera"] = {{"fx", cfg.camera.fx},         {"fy", cfg.camera.fy},
                 {"cx", cfg.camera.cx},         {"cy", cfg.camera.cy},
                 {"height_m", cfg.camera.height}, {"pitch_rad", cfg.camera.pitch}};
  c["ransac"] = {{"seed", cfg.pipeline.ransac.seed}};
  c["paths"] = {{"plan", "plan.json"}, {"fingerprints", "fingerprints.csv"}};
  write_text(dir / "config.json", c.dump(2) + "\n");

  nlohmann::ordered_json j;
  j["pose"] = {{"x_m", scene.camera.x}, {"y_m", scene.camera.y}, {"theta_rad", scene.camera.theta}};
  j["landmarks_in_view"] = render.truth.landmarks_in_view;
  j["out_dir"] = dir.string();
  std::cout << render_document(j);
  return 0;
}

inline int cmd_serve(const Options& o) {
  const AppConfig cfg = load_config(o.config);
  const Resources res = load_resources(cfg);
  httplib::Server server;
  install_routes(server, res);
  int port = o.port;
  if (port == 0) {
    port = server.bind_to_any_port(o.host);
    if (port < 0) throw InputError("serve: cannot bind " + o.host);
  } else if (!server.bind_to_port(o.host, port)) {
    throw InputError("serve: cannot bind " + o.host + ":" + std::to_string(port));
  }
  // Announced on stdout so a parent process can find an ephemeral port.
  std::cout << "listening " << o.host << ':' << port << std::endl;
  spdlog::info("serving POST /locate on {}:{}", o.host, port);
  return server.listen_after_bind() ? 0 : 1;
}

}  // namespace cli

// Exit status: 0 ok, 2 degraded localization, 1 usage or input error.
inline int run_cli(int argc, char** argv) {
  using cli::Options;
  Options o;
  CLI::App app{"Hybrid WLAN and camera hallway localization"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  auto config_opt = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--config", o.config, "JSON configuration file");
    if (required) opt->required();
  };
  auto image_opt = [&](CLI::App* sub) {
    sub->add_option("--image", o.image, "Binary PPM (P6) image")->required();
  };

  auto* locate = app.add_subcommand("locate", "Full pipeline: image + scan -> pose document");
  config_opt(locate, true);
  image_opt(locate);
  locate->add_option("--scan", o.scan, "Scan CSV (ap_id,rss_dbm)")->required();
  locate->add_option("--seed", o.seed, "RANSAC seed, overrides the config");
  locate->add_option("--out", o.out, "Write the document here instead of stdout");
  locate->add_flag("--timings", o.timings, "Include per-stage wall-clock timings");

  auto* seg = app.add_subcommand("segment", "Mean shift segmentation; writes a label image");
  config_opt(seg, false);
  image_opt(seg);
  seg->add_option("--out", o.out, "Label image PPM");

  auto* det = app.add_subcommand("detect-corners", "Boundary corners as CSV plus overlay");
  config_opt(det, false);
  image_opt(det);
  det->add_option("--csv", o.csv, "Corner CSV (default stdout)");
  det->add_option("--overlay", o.overlay, "Annotated PPM");
  det->add_flag("--micro", o.micro, "Only floor-boundary micro-landmarks");
  det->add_flag("--keep-frame", o.keep_frame, "Keep corners on the image frame");

  auto* iic = app.add_subcommand("iic-dump", "Inverse intensity chromaticity points");
  config_opt(iic, false);
  image_opt(iic);
  iic->add_option("--out", o.out, "IIC CSV");

  auto* knn = app.add_subcommand("knn", "WLAN coarse estimate from a scan");
  config_opt(knn, false);
  knn->add_option("--scan", o.scan, "Scan CSV (ap_id,rss_dbm)")->required();
  knn->add_option("--fingerprints", o.fingerprints, "Fingerprint CSV, overrides the config");
  knn->add_option("--out", o.out, "Write the document here instead of stdout");

  auto* syn = app.add_subcommand("synth", "Render a synthetic hallway bundle");
  config_opt(syn, false);
  syn->add_option("--out-dir", o.out_dir, "Output directory")->required();
  syn->add_option("--scene", o.scene, "Scene JSON (default: the testbed hallway)");
  syn->add_option("--bundle", o.bundle, "Random testbed pose from this seed");
  syn->add_option("--preset", o.preset, "Illumination defect preset A-E");
  syn->add_option("--spacing", o.spacing, "Fingerprint grid spacing, m")
      ->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve", "HTTP service: POST /locate");
  config_opt(serve, true);
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port, 0 picks a free one")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (locate->parsed()) return cli::cmd_locate(o);
    if (seg->parsed()) return cli::cmd_segment(o);
    if (det->parsed()) return cli::cmd_detect_corners(o);
    if (iic->parsed()) return cli::cmd_iic_dump(o);
    if (knn->parsed()) return cli::cmd_knn(o);
    if (syn->parsed()) return cli::cmd_synth(o);
    if (serve->parsed()) return cli::cmd_serve(o);
  } catch (const std::exception& e) {
    // Anything escaping a command is an input problem: the pipeline itself
    // reports degradation through the result document.
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}

}  // namespace hwloc
