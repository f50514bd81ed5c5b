#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwloc/geometry.hpp"

namespace hwloc {

inline constexpr double kMinRssDbm = -120.0;
inline constexpr double kMaxRssDbm = 0.0;

// AP id (opaque, e.g. a BSSID) -> RSS in dBm.
using RssReadings = std::map<std::string, double>;

struct Fingerprint {
  Point2 position;
  RssReadings readings;
};

struct RssScan {
  RssReadings readings;
  std::string timestamp;
};

struct CoarseEstimate {
  Point2 center;
  double radius = 10.0;
  bool whole_plan = false;  // RF gave nothing usable; disc covers the plan
};

enum class IngestErrorKind { kEmpty, kMissingPosition, kRssOutOfRange, kMalformedRow };

class IngestError : public std::runtime_error {
 public:
  IngestError(IngestErrorKind kind, std::size_t row, const std::string& what)
      : std::runtime_error(row > 0 ? "row " + std::to_string(row) + ": " + what : what),
        kind_(kind),
        row_(row) {}
  IngestErrorKind kind() const { return kind_; }
  std::size_t row() const { return row_; }  // 1-based data row, 0 if none

 private:
  IngestErrorKind kind_;
  std::size_t row_;
};

struct FingerprintRow {
  std::optional<double> x;
  std::optional<double> y;
  std::string ap;
  double rss = 0.0;
};

class FingerprintDb {
 public:
  const std::vector<Fingerprint>& fingerprints() const { return fingerprints_; }
  const std::set<std::string>& access_points() const { return aps_; }
  std::size_t row_count() const { return rows_; }
  std::size_t size() const { return fingerprints_.size(); }
  bool empty() const { return fingerprints_.empty(); }

  bool knows_any(const RssScan& scan) const {
    return std::any_of(scan.readings.begin(), scan.readings.end(),
                       [&](const auto& kv) { return aps_.count(kv.first) > 0; });
  }

 private:
  friend FingerprintDb ingest_fingerprints(const std::vector<FingerprintRow>&, double);
  std::vector<Fingerprint> fingerprints_;
  std::set<std::string> aps_;
  std::size_t rows_ = 0;
};

inline bool valid_rss(double rss) { return rss >= kMinRssDbm && rss <= kMaxRssDbm; }

// Rows at the same position (within merge_distance) become one fingerprint;
// repeated readings of an AP there are averaged. Fingerprints keep the order
// in which their position first appeared.
inline FingerprintDb ingest_fingerprints(const std::vector<FingerprintRow>& rows,
                                         double merge_distance = 0.1) {
  if (rows.empty()) throw IngestError(IngestErrorKind::kEmpty, 0, "no fingerprint rows");
  FingerprintDb db;
  struct Acc {
    Point2 position;
    std::map<std::string, std::pair<double, int>> sums;
  };
  std::vector<Acc> acc;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (!row.x || !row.y || !std::isfinite(*row.x) || !std::isfinite(*row.y)) {
      throw IngestError(IngestErrorKind::kMissingPosition, r + 1, "missing position");
    }
    if (row.ap.empty()) throw IngestError(IngestErrorKind::kMalformedRow, r + 1, "empty ap_id");
    if (!valid_rss(row.rss)) {
      throw IngestError(IngestErrorKind::kRssOutOfRange, r + 1,
                        "rss " + std::to_string(row.rss) + " dBm outside [-120, 0]");
    }
    const Point2 p{*row.x, *row.y};
    auto it = std::find_if(acc.begin(), acc.end(), [&](const Acc& a) {
      return std::hypot(a.position.x - p.x, a.position.y - p.y) <= merge_distance;
    });
    if (it == acc.end()) {
      acc.push_back({p, {}});
      it = acc.end() - 1;
    }
    auto& s = it->sums[row.ap];
    s.first += row.rss;
    s.second += 1;
    db.aps_.insert(row.ap);
  }
  for (const auto& a : acc) {
    Fingerprint fp{a.position, {}};
    for (const auto& [ap, s] : a.sums) fp.readings[ap] = s.first / s.second;
    db.fingerprints_.push_back(std::move(fp));
  }
  db.rows_ = rows.size();
  return db;
}

// RMS difference over the union of AP ids; an AP seen on one side only
// contributes missing_penalty. Symmetric.
inline double signal_distance(const RssReadings& a, const RssReadings& b,
                              double missing_penalty = 15.0) {
  double sum = 0.0;
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    double d;
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      d = missing_penalty;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      d = missing_penalty;
      ++ib;
    } else {
      d = ia->second - ib->second;
      ++ia;
      ++ib;
    }
    sum += d * d;
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(n));
}

inline double signal_distance(const RssScan& scan, const Fingerprint& fp,
                              double missing_penalty = 15.0) {
  return signal_distance(scan.readings, fp.readings, missing_penalty);
}

struct KnnParams {
  int k = 4;
  double missing_penalty = 15.0;  // dB
  double radius_floor = 10.0;     // m
};

// Weighted mean of the k nearest fingerprints in signal space, weight
// 1/(distance + 1 dB). Radius is twice the weighted spread, never below the
// floor.
inline CoarseEstimate knn_locate(const RssScan& scan, const FingerprintDb& db,
                                 const KnnParams& params = {}) {
  if (db.empty()) throw std::invalid_argument("knn_locate: empty fingerprint database");
  if (params.k < 1) throw std::invalid_argument("knn_locate: k must be >= 1");
  const auto& fps = db.fingerprints();
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(fps.size());
  for (std::size_t i = 0; i < fps.size(); ++i) {
    dist.emplace_back(signal_distance(scan, fps[i], params.missing_penalty), i);
  }
  // pair ordering breaks distance ties by insertion index
  std::sort(dist.begin(), dist.end());
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params.k), dist.size());

  double wsum = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = 1.0 / (dist[j].first + 1.0);
    const auto& p = fps[dist[j].second].position;
    wsum += w;
    cx += w * p.x;
    cy += w * p.y;
  }
  cx /= wsum;
  cy /= wsum;
  double var = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = 1.0 / (dist[j].first + 1.0);
    const auto& p = fps[dist[j].second].position;
    var += w * ((p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy));
  }
  const double spread = std::sqrt(var / wsum);
  return {{cx, cy}, std::max(params.radius_floor, 2.0 * spread), false};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

// CSV with header `x_m,y_m,ap_id,rss_dbm`, one AP reading per row.
inline std::vector<FingerprintRow> read_fingerprint_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestError(IngestErrorKind::kEmpty, 0, "empty file");
  const auto header = detail::split_csv_line(line);
  if (header != std::vector<std::string>{"x_m", "y_m", "ap_id", "rss_dbm"}) {
    throw IngestError(IngestErrorKind::kMalformedRow, 0,
                      "expected header x_m,y_m,ap_id,rss_dbm");
  }
  std::vector<FingerprintRow> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::blank(line)) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 4) {
      throw IngestError(IngestErrorKind::kMalformedRow, row, "expected 4 columns");
    }
    FingerprintRow r;
    r.x = detail::parse_number(cells[0]);
    r.y = detail::parse_number(cells[1]);
    r.ap = cells[2];
    const auto rss = detail::parse_number(cells[3]);
    if (!rss) throw IngestError(IngestErrorKind::kMalformedRow, row, "rss_dbm is not a number");
    r.rss = *rss;
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IngestError(IngestErrorKind::kEmpty, 0, "no fingerprint rows");
  return rows;
}

// CSV with header `ap_id,rss_dbm`. Repeated APs are averaged.
inline RssScan read_scan_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestError(IngestErrorKind::kEmpty, 0, "empty scan file");
  if (detail::split_csv_line(line) != std::vector<std::string>{"ap_id", "rss_dbm"}) {
    throw IngestError(IngestErrorKind::kMalformedRow, 0, "expected header ap_id,rss_dbm");
  }
  std::map<std::string, std::pair<double, int>> sums;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::blank(line)) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2 || cells[0].empty()) {
      throw IngestError(IngestErrorKind::kMalformedRow, row, "expected ap_id,rss_dbm");
    }
    const auto rss = detail::parse_number(cells[1]);
    if (!rss) throw IngestError(IngestErrorKind::kMalformedRow, row, "rss_dbm is not a number");
    if (!valid_rss(*rss)) {
      throw IngestError(IngestErrorKind::kRssOutOfRange, row, "rss outside [-120, 0]");
    }
    auto& s = sums[cells[0]];
    s.first += *rss;
    s.second += 1;
  }
  if (sums.empty()) throw IngestError(IngestErrorKind::kEmpty, 0, "scan has no readings");
  RssScan scan;
  for (const auto& [ap, s] : sums) scan.readings[ap] = s.first / s.second;
  return scan;
}

inline std::string write_fingerprint_csv(const std::vector<Fingerprint>& fps) {
  std::ostringstream out;
  out.precision(17);
  out << "x_m,y_m,ap_id,rss_dbm\n";
  for (const auto& fp : fps) {
    for (const auto& [ap, rss] : fp.readings) {
      out << fp.position.x << ',' << fp.position.y << ',' << ap << ',' << rss << '\n';
    }
  }
  return out.str();
}

inline std::string write_scan_csv(const RssScan& scan) {
  std::ostringstream out;
  out.precision(17);
  out << "ap_id,rss_dbm\n";
  for (const auto& [ap, rss] : scan.readings) out << ap << ',' << rss << '\n';
  return out.str();
}

}  // namespace hwloc
