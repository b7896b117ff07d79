// Copyright 2026 The cascade-oam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CASCADE_REPORT_HPP
#define CASCADE_REPORT_HPP

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include "cascade/analysis.hpp"
#include "cascade/config.hpp"
#include "cascade/errors.hpp"
#include "cascade/montecarlo.hpp"
#include "cascade/statistics.hpp"
#include "cascade/tagstream.hpp"
#include "json.hpp"

namespace cascade {

// ---------------------------------------------------------------------------
// Correlation matrices.

inline Json matrix_to_json(const CorrelationMatrix& m) {
  Json j;
  j["format"] = "cascade-matrix";
  j["version"] = 1;
  j["pump_ell"] = m.pump_ell;
  j["heralded"] = m.heralded;
  j["time_bin_s"] = m.time_bin;
  j["config_hash"] = m.config_hash;
  j["cells"] = Json::object();
  for (const auto& [k, c] : m.cells) {
    j["cells"][std::to_string(k.ell_s) + "," + std::to_string(k.ell_i)] = {
        {"raw", c.raw},
        {"integration_time_s", c.integration_time},
        {"accidental_counts", c.accidental_counts},
        {"rate_per_hour", c.rate_per_hour},
        {"error_per_hour", c.error_per_hour}};
  }
  return j;
}

/// Parses a cell key of the form "ell_s,ell_i", e.g. "-1,1".
inline Setting parse_cell_key(const std::string& key) {
  const auto comma = key.find(',');
  Setting s{};
  auto whole = [](const char* b, const char* e, int& v) {
    const auto r = std::from_chars(b, e, v);
    return b != e && r.ec == std::errc() && r.ptr == e;
  };
  if (comma == std::string::npos || !whole(key.data(), key.data() + comma, s.ell_s) ||
      !whole(key.data() + comma + 1, key.data() + key.size(), s.ell_i)) {
    throw FormatError(FormatError::Kind::kValidation, "bad matrix cell key '" + key + "'");
  }
  return s;
}

inline CorrelationMatrix matrix_from_json(const Json& j) {
  auto bad = [](const std::string& what) { return FormatError(FormatError::Kind::kValidation, what); };
  if (!j.is_object() || j.value("format", "") != "cascade-matrix") throw bad("not a cascade-matrix document");
  if (j.value("version", 0) != 1) {
    throw FormatError(FormatError::Kind::kUnsupportedVersion, "unsupported matrix version");
  }
  CorrelationMatrix m;
  try {
    m.pump_ell = j.at("pump_ell").get<int>();
    m.heralded = j.at("heralded").get<bool>();
    m.time_bin = j.at("time_bin_s").get<double>();
    m.config_hash = j.value("config_hash", "");
    const Json& cells = j.at("cells");
    if (!cells.is_object()) throw bad("matrix cells must be an object keyed \"ell_s,ell_i\"");
    for (const auto& [key, c] : cells.items()) {
      const Setting k = parse_cell_key(key);
      CorrelationCell cell;
      cell.raw = c.at("raw").get<std::uint64_t>();
      cell.integration_time = c.at("integration_time_s").get<double>();
      cell.accidental_counts = c.value("accidental_counts", 0.0);
      cell.rate_per_hour = c.at("rate_per_hour").get<double>();
      cell.error_per_hour = c.at("error_per_hour").get<double>();
      m.cells[k] = cell;
    }
  } catch (const Json::exception& e) {
    throw bad(std::string("malformed matrix: ") + e.what());
  }
  if (m.cells.empty()) throw bad("matrix has no cells");
  return m;
}

inline CorrelationMatrix read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file '" + path + "'");
  try {
    return matrix_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw FormatError(FormatError::Kind::kCorrupt, "matrix file '" + path + "' is not JSON: " + e.what());
  }
}

inline void write_matrix_csv(const CorrelationMatrix& m, std::ostream& os) {
  os << "# config_hash=" << m.config_hash << '\n';
  os << "ell_s,ell_i,raw,integration_time_s,accidental_counts,rate_per_hour,error_per_hour\n";
  char buf[160];
  for (const auto& [k, c] : m.cells) {
    std::snprintf(buf, sizeof buf, "%d,%d,%llu,%.17g,%.17g,%.17g,%.17g\n", k.ell_s, k.ell_i,
                  static_cast<unsigned long long>(c.raw), c.integration_time, c.accidental_counts,
                  c.rate_per_hour, c.error_per_hour);
    os << buf;
  }
}

inline void write_histogram_csv(const DelayHistogram& h, const std::string& config_hash, std::ostream& os) {
  os << "# config_hash=" << config_hash << '\n';
  os << "bin_start_ps,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) os << h.bin_start(k) << ',' << h.counts[k] << '\n';
}

struct CompareResult {
  double pearson = 0.0;
  double diagonal_a = 0.0;
  double diagonal_b = 0.0;
  Json report;
};

inline CompareResult compare_matrices(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  CompareResult r;
  r.pearson = pearson(a, b);
  r.diagonal_a = diagonal_fraction(a);
  r.diagonal_b = diagonal_fraction(b);
  r.report["pearson"] = r.pearson;
  r.report["diagonal_fraction_a"] = r.diagonal_a;
  r.report["diagonal_fraction_b"] = r.diagonal_b;
  r.report["config_hash_a"] = a.config_hash;
  r.report["config_hash_b"] = b.config_hash;
  r.report["cells"] = Json::array();
  for (const auto& [k, ca] : a.cells) {
    const auto& cb = b.cells.at(k);
    r.report["cells"].push_back({{"ell_s", k.ell_s},
                                 {"ell_i", k.ell_i},
                                 {"rate_a", ca.rate_per_hour},
                                 {"rate_b", cb.rate_per_hour},
                                 {"delta", cb.rate_per_hour - ca.rate_per_hour}});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Photon statistics.

namespace detail {

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json distribution_json(const PhotonNumberDistribution& d) {
  return {{"probabilities", d.probs}, {"tail_bound", d.tail_bound}, {"mean", d.mean()}};
}

}  // namespace detail

/// Calibration, pump distribution before and after loss, and the
/// single-to-multi-photon ratio at the target drive power.
inline Json statistics_report(const ToolConfig& c) {
  Json j;
  double kappa;
  if (c.kappa.from_calibration) {
    const auto cal = gain_calibration(c);
    kappa = cal.kappa;
    j["calibration"] = {{"coincidence_rate_hz", c.kappa.coincidence_rate},
                        {"singles_rate_hz", c.kappa.singles_rate},
                        {"power_w", c.kappa.power},
                        {"eta_coup", cal.eta_coup},
                        {"p1", cal.p1},
                        {"gamma", cal.gamma},
                        {"alpha", cal.alpha},
                        {"kappa", cal.kappa},
                        {"low_gain_violation", cal.low_gain_violation}};
  } else {
    kappa = c.kappa.kappa;
  }
  j["kappa"] = kappa;
  const double alpha = alpha_from_drive(c.stats.target_power, c.drive_wavelength, c.t_coh);
  const double gamma = kappa * alpha;
  j["target"] = {{"drive_power_w", c.stats.target_power},
                 {"alpha", alpha},
                 {"gamma", gamma},
                 {"low_gain_violation", gamma >= kLowGainLimit}};
  const LossBudget budget = pump_budget(c);
  j["loss_budget"] = {{"eta_det", budget.eta_det},
                      {"eta_smf", budget.eta_smf},
                      {"eta_slm", budget.eta_slm},
                      {"eta_total", budget.eta_total()}};
  const PhotonNumberDistribution before =
      c.stats.n_max >= 0 ? pn_tmsv(gamma, c.stats.n_max) : pn_tmsv(gamma);
  const PhotonNumberDistribution after = apply_loss(before, budget.eta_total());
  j["p_n_before_loss"] = detail::distribution_json(before);
  j["p_n_after_loss"] = detail::distribution_json(after);
  const auto ratio = multipair_ratio(after);
  j["multipair_ratio"] = {{"ratio", detail::finite_or_null(ratio.ratio)},
                          {"lower", detail::finite_or_null(ratio.lower)},
                          {"upper", detail::finite_or_null(ratio.upper)},
                          {"infinite", ratio.infinite}};
  const auto oam = oam_fluctuation(after, c.pump.ell);
  j["pump_oam_hbar"] = {{"mean", oam.mean}, {"std", oam.std}};
  return j;
}

// ---------------------------------------------------------------------------
// Ground truth sidecars.

inline Json truth_to_json(const GroundTruth& t) {
  Json j;
  j["format"] = "cascade-truth";
  j["version"] = 1;
  j["pump_ell"] = t.pump_ell;
  j["pump_source"] = t.source == PumpSource::kHeralded ? "heralded" : "coherent";
  j["slots"] = t.slots;
  j["tracked_pairs"] = t.tracked_pairs;
  j["converted"] = t.converted;
  j["conservation_violations"] = t.conservation_violations();
  for (Channel ch : kAllChannels) {
    const auto k = static_cast<std::size_t>(ch);
    j["genuine_counts"][std::string(channel_name(ch))] = t.genuine_counts[k];
    j["dark_counts"][std::string(channel_name(ch))] = t.dark_counts[k];
  }
  j["emitted_columns"] = {"time_ps", "p_s", "ell_s", "p_i", "ell_i", "herald", "projected",
                          "signal_detected", "idler_detected"};
  Json rows = Json::array();
  for (const auto& e : t.emitted) {
    rows.push_back({e.time_ps, e.signal.p, e.signal.ell, e.idler.p, e.idler.ell, static_cast<int>(e.herald),
                    e.projected, e.signal_detected, e.idler_detected});
  }
  j["emitted"] = std::move(rows);
  return j;
}

// ---------------------------------------------------------------------------
// Scan index: one JSON file naming the tag file of every segment.

struct ScanEntry {
  Setting setting;
  double start_time = 0.0;
  std::string tags;   // path relative to the index
  std::string truth;  // optional sidecar
};

inline Json scan_index_json(int pump_ell, const std::string& config_hash, const std::vector<ScanEntry>& entries) {
  Json j;
  j["format"] = "cascade-scan";
  j["version"] = 1;
  j["pump_ell"] = pump_ell;
  j["config_hash"] = config_hash;
  j["segments"] = Json::array();
  for (const auto& e : entries) {
    Json s = {{"ell_s", e.setting.ell_s}, {"ell_i", e.setting.ell_i}, {"start_time_s", e.start_time},
              {"tags", e.tags}};
    if (!e.truth.empty()) s["truth"] = e.truth;
    j["segments"].push_back(std::move(s));
  }
  return j;
}

inline TagFile read_tag_file(const std::string& path) {
  const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  std::ifstream in(path, csv ? std::ios::in : std::ios::binary);
  if (!in) throw IoError("cannot open tag file '" + path + "'");
  return csv ? parse_tags_csv(in) : parse_tags(in);
}

/// Loads every segment named in a scan index. Tag paths are relative to the
/// index location.
inline Scan read_scan(const std::string& index_path) {
  std::ifstream in(index_path);
  if (!in) throw IoError("cannot open scan index '" + index_path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(FormatError::Kind::kCorrupt, "scan index is not JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || j.value("format", "") != "cascade-scan") {
    throw FormatError(FormatError::Kind::kValidation, "not a cascade-scan document");
  }
  if (j.value("version", 0) != 1) {
    throw FormatError(FormatError::Kind::kUnsupportedVersion, "unsupported scan index version");
  }
  const std::filesystem::path dir = std::filesystem::path(index_path).parent_path();
  Scan scan;
  try {
    scan.pump_ell = j.at("pump_ell").get<int>();
    scan.config_hash = j.value("config_hash", "");
    for (const auto& s : j.at("segments")) {
      ScanSegment seg;
      seg.setting = {s.at("ell_s").get<int>(), s.at("ell_i").get<int>()};
      seg.start_time = s.at("start_time_s").get<double>();
      seg.bundle = to_bundle(read_tag_file((dir / s.at("tags").get<std::string>()).string()));
      scan.segments.push_back(std::move(seg));
    }
  } catch (const Json::exception& e) {
    throw FormatError(FormatError::Kind::kValidation, std::string("malformed scan index: ") + e.what());
  }
  return scan;
}

}  // namespace cascade

#endif  // CASCADE_REPORT_HPP
