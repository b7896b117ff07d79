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

// cascade-cli: spectrum, stats, simulate, analyze and compare workflows.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical error,
// 4 I/O or format error. Outputs are staged in a hidden directory next to
// the destination and moved into place only after every file was written.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cascade/analysis.hpp"
#include "cascade/config.hpp"
#include "cascade/errors.hpp"
#include "cascade/montecarlo.hpp"
#include "cascade/report.hpp"
#include "cascade/tagstream.hpp"

namespace fs = std::filesystem;
using namespace cascade;

namespace {

constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { kOk = 0, kConfigFailure = 2, kNumericalFailure = 3, kIoFailure = 4 };

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  int threads = 1;
  std::string format = "json";
};

/// Collects output files in a staging directory and publishes them together.
class Staging {
 public:
  explicit Staging(const std::string& out_dir) : out_(out_dir) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw IoError("cannot create output directory '" + out_.string() + "': " + ec.message());
    for (int k = 0;; ++k) {
      dir_ = out_ / (".cascade-staging-" + std::to_string(k));
      if (fs::create_directory(dir_, ec)) break;
      if (ec || k > 10000) throw IoError("cannot create a staging directory in '" + out_.string() + "'");
    }
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  fs::path path(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }

  std::ofstream open(const std::string& name, bool binary = false) {
    std::ofstream f(path(name), binary ? std::ios::binary : std::ios::out);
    if (!f) throw IoError("cannot write '" + name + "'");
    return f;
  }

  void write_text(const std::string& name, const std::string& text) {
    auto f = open(name);
    f << text;
    if (!f) throw IoError("failed writing '" + name + "'");
  }

  const std::vector<std::string>& names() const { return names_; }

  void commit() {
    for (const auto& n : names_) {
      std::error_code ec;
      fs::rename(dir_ / n, out_ / n, ec);
      if (ec) throw IoError("cannot move '" + n + "' into '" + out_.string() + "': " + ec.message());
    }
  }

 private:
  fs::path out_;
  fs::path dir_;
  std::vector<std::string> names_;
};

ToolConfig load(const CommonOptions& o) {
  ToolConfig c = o.config_path.empty() ? parse_config(Json::object()) : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  return c;
}

void write_manifest(Staging& st, const std::string& command, const ToolConfig& c, const Json& extra = {}) {
  Json m;
  m["tool"] = "cascade-cli";
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["config_hash"] = config_hash(c);
  m["seed"] = c.seed;
  m["artifacts"] = st.names();
  m["config"] = canonical_json(c);
  if (!extra.is_null()) m["details"] = extra;
  st.write_text("manifest.json", m.dump(2) + "\n");
}

std::string setting_tag(Setting s) {
  auto one = [](int v) { return (v < 0 ? "m" : "p") + std::to_string(std::abs(v)); };
  return one(s.ell_s) + "_" + one(s.ell_i);
}

// --- spectrum --------------------------------------------------------------

int cmd_spectrum(const CommonOptions& o) {
  const ToolConfig c = load(o);
  const ModeWeightTable t = mode_table(c);
  Staging st(o.out_dir);
  const std::string hash = config_hash(c);
  if (o.format == "csv") {
    auto f = st.open("mode_weights.csv");
    f << "# config_hash=" << hash << '\n';
    write_mode_weights_csv(t, f);
    // Plot-ready ell_s x ell_i matrix summed over radial orders.
    std::map<Setting, double> cells;
    for (const auto& e : t.entries) cells[{e.signal.ell, e.idler.ell}] += e.weight;
    auto g = st.open("weight_matrix.csv");
    g << "# config_hash=" << hash << '\n' << "ell_s,ell_i,weight\n";
    for (const auto& [k, w] : cells) g << k.ell_s << ',' << k.ell_i << ',' << Json(w).dump() << '\n';
  } else {
    Json j;
    j["config_hash"] = hash;
    j["pump"] = {{"p", t.pump.p}, {"ell", t.pump.ell}, {"waist_m", t.pump.w0}};
    j["normalized"] = t.normalized;
    j["entries"] = Json::array();
    for (const auto& e : t.entries) {
      j["entries"].push_back({{"p_s", e.signal.p}, {"ell_s", e.signal.ell}, {"p_i", e.idler.p},
                              {"ell_i", e.idler.ell}, {"weight", e.weight}});
    }
    st.write_text("mode_weights.json", j.dump(2) + "\n");
  }
  write_manifest(st, "spectrum", c);
  st.commit();
  return kOk;
}

// --- stats -----------------------------------------------------------------

int cmd_stats(const CommonOptions& o) {
  const ToolConfig c = load(o);
  Json report = statistics_report(c);
  report["config_hash"] = config_hash(c);
  Staging st(o.out_dir);
  st.write_text("stats.json", report.dump(2) + "\n");
  if (o.format == "csv") {
    const double gamma = report["target"]["gamma"].get<double>();
    const auto before = c.stats.n_max >= 0 ? pn_tmsv(gamma, c.stats.n_max) : pn_tmsv(gamma);
    auto f = st.open("p_n_before_loss.csv");
    write_distribution_csv(before, f);
    auto g = st.open("p_n_after_loss.csv");
    write_distribution_csv(apply_loss(before, pump_budget(c).eta_total()), g);
  }
  write_manifest(st, "stats", c);
  st.commit();
  return kOk;
}

// --- simulate --------------------------------------------------------------

int cmd_simulate(const CommonOptions& o, bool single) {
  const ToolConfig c = load(o);
  const ResolvedExperiment resolved = resolve_experiment(c);
  const ExperimentConfig& base = resolved.config;
  const std::string hash = config_hash(c);

  std::vector<Setting> settings = single ? std::vector<Setting>{c.projection} : c.grid();
  const double seg_time = single ? c.duration : c.scan.time_per_setting;
  const int cycles = single ? 1 : c.scan.cycles;
  const std::size_t n = settings.size() * static_cast<std::size_t>(cycles);

  Staging st(o.out_dir);
  std::vector<ScanEntry> entries(n);
  Json summary = Json::array();
  const std::size_t batch = static_cast<std::size_t>(std::max(1, o.threads));
  for (std::size_t first = 0; first < n; first += batch) {
    // Segments of one batch run concurrently; each owns a derived seed.
    const std::size_t last = std::min(n, first + batch);
    std::vector<SimulationResult> results(last - first);
    std::vector<std::exception_ptr> errors(last - first);
    auto run = [&](std::size_t k) {
      try {
        ExperimentConfig e = base;
        e.projection = settings[k % settings.size()];
        e.duration = seg_time;
        e.seed = derive_seed(c.seed, k);
        results[k - first] = simulate(e);
      } catch (...) {
        errors[k - first] = std::current_exception();
      }
    };
    if (batch == 1) {
      run(first);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = first; k < last; ++k) pool.emplace_back(run, k);
      for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t k = first; k < last; ++k) {
      const auto& r = results[k - first];
      const Setting s = settings[k % settings.size()];
      char stem[64];
      std::snprintf(stem, sizeof stem, "seg%04zu_%s", k, setting_tag(s).c_str());
      ScanEntry& entry = entries[k];
      entry.setting = s;
      entry.start_time = static_cast<double>(k) * seg_time;
      entry.tags = std::string(stem) + (o.format == "csv" ? ".csv" : ".tags");
      entry.truth = std::string(stem) + ".truth.json";
      const TagFile tf = to_tag_file(r.bundle);
      auto f = st.open(entry.tags, o.format != "csv");
      if (o.format == "csv") {
        write_tags_csv(tf, f);
      } else {
        write_tags(tf, f);
      }
      if (!f) throw IoError("failed writing '" + entry.tags + "'");
      st.write_text(entry.truth, truth_to_json(r.truth).dump() + "\n");
      summary.push_back({{"segment", k},
                         {"ell_s", s.ell_s},
                         {"ell_i", s.ell_i},
                         {"converted", r.truth.converted},
                         {"conservation_violations", r.truth.conservation_violations()}});
    }
  }
  st.write_text("scan.json", scan_index_json(c.pump.ell, hash, entries).dump(2) + "\n");

  Json details;
  details["segments"] = summary;
  details["kappa1"] = base.kappa1;
  details["eta_total"] = base.pump_losses.eta_total();
  if (resolved.calibration) {
    const auto& cal = *resolved.calibration;
    details["fitted"] = {{"drive_power_w", cal.drive_power},
                         {"herald_coupling", cal.herald_coupling},
                         {"conversion_probability", cal.conversion_probability},
                         {"herald_rate_hz", cal.herald_rate},
                         {"gamma", cal.gamma},
                         {"flux_scale", c.rates.flux_scale}};
  }
  const auto expected = expected_rates(base, c.analysis.windows);
  details["expected_per_hour"] = {{"heralded", expected.heralded * 3600},
                                  {"unheralded", expected.unheralded * 3600},
                                  {"accidental", expected.accidental * 3600}};
  write_manifest(st, single ? "simulate --single" : "simulate", c, details);
  st.commit();
  return kOk;
}

// --- analyze ---------------------------------------------------------------

int cmd_analyze(const CommonOptions& o, const std::string& scan_path, std::optional<bool> heralded) {
  const ToolConfig c = load(o);
  MatrixOptions opt = c.analysis;
  if (heralded) opt.heralded = *heralded;
  const Scan scan = read_scan(scan_path);
  CorrelationMatrix m = build_matrix(scan, opt);
  m.config_hash = scan.config_hash;

  Staging st(o.out_dir);
  if (o.format == "csv") {
    auto f = st.open("matrix.csv");
    write_matrix_csv(m, f);
  } else {
    st.write_text("matrix.json", matrix_to_json(m).dump(2) + "\n");
  }
  // Delay histograms summed per setting.
  std::map<Setting, DelayHistogram> hists;
  for (const auto& seg : scan.segments) {
    const auto h = analyze_segment(seg.bundle, opt).hist;
    auto it = hists.find(seg.setting);
    if (it == hists.end()) {
      hists.emplace(seg.setting, h);
    } else {
      for (std::size_t k = 0; k < h.counts.size(); ++k) it->second.counts[k] += h.counts[k];
      it->second.integration_time += h.integration_time;
    }
  }
  for (const auto& [s, h] : hists) {
    auto f = st.open("histogram_" + setting_tag(s) + ".csv");
    write_histogram_csv(h, scan.config_hash, f);
  }
  Json details = {{"scan_config_hash", scan.config_hash},
                  {"heralded", opt.heralded},
                  {"total_raw", m.total_raw()}};
  write_manifest(st, "analyze", c, details);
  st.commit();
  return kOk;
}

// --- compare ---------------------------------------------------------------

int cmd_compare(const CommonOptions& o, const std::string& a, const std::string& b) {
  const CorrelationMatrix ma = read_matrix(a);
  const CorrelationMatrix mb = read_matrix(b);
  const CompareResult r = compare_matrices(ma, mb);
  Staging st(o.out_dir);
  st.write_text("compare.json", r.report.dump(2) + "\n");
  st.commit();
  std::printf("pearson %.6f  diagonal_fraction_a %.4f  diagonal_fraction_b %.4f\n", r.pearson, r.diagonal_a,
              r.diagonal_b);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded down-conversion with structured single-photon pumps"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonOptions o;
  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) sub->add_option("--config", o.config_path, "JSON configuration file");
    sub->add_option("--seed", o.seed, "Override the master seed");
    sub->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--threads", o.threads, "Maximum worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  };

  auto* spectrum = app.add_subcommand("spectrum", "Mode-coupling weights of the second source");
  add_common(spectrum);
  auto* stats = app.add_subcommand("stats", "Pump photon statistics report");
  add_common(stats);
  auto* sim = app.add_subcommand("simulate", "Simulate a projection scan into tag files");
  add_common(sim);
  bool single = false;
  sim->add_flag("--single", single, "Simulate one projection (measurement.projection) only");
  auto* analyze = app.add_subcommand("analyze", "Correlation matrix and histograms from a scan");
  add_common(analyze);
  std::string scan_path;
  analyze->add_option("--scan", scan_path, "scan.json written by simulate")->required();
  bool heralded_flag = false, unheralded_flag = false;
  analyze->add_flag("--heralded", heralded_flag, "Three-fold heralded coincidences");
  analyze->add_flag("--unheralded", unheralded_flag, "Two-fold signal-idler coincidences");
  auto* compare = app.add_subcommand("compare", "Pearson coefficient and diagonal fractions of two matrices");
  add_common(compare, false);
  std::string matrix_a, matrix_b;
  compare->add_option("matrix_a", matrix_a, "First matrix JSON")->required();
  compare->add_option("matrix_b", matrix_b, "Second matrix JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigFailure;
  }

  try {
    if (*spectrum) return cmd_spectrum(o);
    if (*stats) return cmd_stats(o);
    if (*sim) return cmd_simulate(o, single);
    if (*analyze) {
      if (heralded_flag && unheralded_flag) throw ConfigError("--heralded and --unheralded are exclusive");
      std::optional<bool> h;
      if (heralded_flag) h = true;
      if (unheralded_flag) h = false;
      return cmd_analyze(o, scan_path, h);
    }
    if (*compare) return cmd_compare(o, matrix_a, matrix_b);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfigFailure;
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfigFailure;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kNumericalFailure;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIoFailure;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kIoFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoFailure;
  }
  return kConfigFailure;
}
