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

// End-to-end acceptance run. Prints one line per criterion:
//
//   [PASS] criterion N: <what was measured>
//
// and exits nonzero when any criterion fails. Every tolerance is a named
// constant below. Usage: acceptance [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cascade/analysis.hpp"
#include "cascade/config.hpp"
#include "cascade/modes.hpp"
#include "cascade/montecarlo.hpp"
#include "cascade/statistics.hpp"
#include "cascade/tagstream.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

// Calibration inputs.
constexpr double kCalCoincidences = 216e3;  // [1/s]
constexpr double kCalSingles = 1.13e6;      // [1/s]
constexpr double kCalPower = 614e-6;        // [W]
constexpr double kDriveWavelength = 524.59e-9;
constexpr double kCoherenceTime = 0.3e-9;
constexpr double kTargetPower = 72.7e-3;
constexpr double kEtaCoupling = 0.191;
constexpr double kEtaDet = 0.5;
constexpr double kEtaSlm = 0.7;

// Tolerances.
constexpr double kAlphaExpected = 697.0, kAlphaTol = 1.0;
constexpr double kP1Expected = 1.8e-3, kP1RelTol = 0.05;
constexpr double kKappaExpected = 6.07e-5, kKappaRelTol = 0.02;
constexpr double kRatioExpected = 16.56, kRatioTol = 0.5;
constexpr double kOracleRelTol = 1e-9;
constexpr double kStructureTol = 1e-12;
constexpr std::uint64_t kMinEmittedPairs = 100000;
constexpr double kRateSigmas = 3.0;
constexpr double kFluxScale = 1e4;
constexpr double kRateRunSeconds = 60.0;
constexpr double kHeraldedPerHour = 1.3, kUnheraldedPerHour = 40.2, kAccidentalPerHour = 0.14;
constexpr double kDiagonalTarget = 0.76, kDiagonalTol = 0.03;
constexpr double kPearsonMin = 0.99;
constexpr std::uint64_t kMinMatrixCounts = 10000;
constexpr int kOracleTrials = 1000;
constexpr int kRoundTripFiles = 1000;
constexpr int kFuzzTrials = 5000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

int thread_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// --- 1-3: pump statistics --------------------------------------------------

Outcome drive_amplitude() {
  const double alpha = alpha_from_drive(kCalPower, kDriveWavelength, kCoherenceTime);
  return {std::abs(alpha - kAlphaExpected) <= kAlphaTol,
          fmt("alpha_d = %.3f (expected %.0f +- %.0f)", alpha, kAlphaExpected, kAlphaTol)};
}

Outcome gain_calibration() {
  const auto g = calibrate_kappa(kCalCoincidences, kCalSingles, kCoherenceTime, kCalPower, kDriveWavelength);
  const bool p1_ok = std::abs(g.p1 / kP1Expected - 1.0) <= kP1RelTol;
  const bool kappa_ok = std::abs(g.kappa / kKappaExpected - 1.0) <= kKappaRelTol;
  return {p1_ok && kappa_ok, fmt("P(1) = %.4e (1.8e-3 +- 5%%), kappa = %.4e (6.07e-5 +- 2%%)", g.p1, g.kappa)};
}

Outcome multipair_ratio_check() {
  const auto g = calibrate_kappa(kCalCoincidences, kCalSingles, kCoherenceTime, kCalPower, kDriveWavelength);
  const double gamma = g.gamma_at(kTargetPower);
  const double eta = loss_budget_from_coupling(kEtaCoupling, kEtaDet, kEtaSlm).eta_total();
  const auto r = multipair_ratio(apply_loss(pn_tmsv(gamma), eta));
  return {!r.infinite && std::abs(r.ratio - kRatioExpected) <= kRatioTol,
          fmt("gamma = %.5f, eta = %.4f, P(1)/P(>1) = %.3f (expected %.2f +- %.1f)", gamma, eta, r.ratio,
              kRatioExpected, kRatioTol)};
}

// --- 4-5: modes ------------------------------------------------------------

Outcome selection_rule() {
  // Every (p, ell) combination of pump, signal and idler with p <= 3 and |ell| <= 3.
  std::uint64_t nonconserving = 0, nonzero = 0;
  for (int pp = 0; pp <= 3; ++pp)
    for (int ps = 0; ps <= 3; ++ps)
      for (int pi = 0; pi <= 3; ++pi)
        for (int lp = -3; lp <= 3; ++lp)
          for (int ls = -3; ls <= 3; ++ls)
            for (int li = -3; li <= 3; ++li) {
              if (lp == ls + li) continue;
              ++nonconserving;
              if (overlap_integral({pp, lp, 2.4}, {ps, ls, 1.0}, {pi, li, 1.0}) != Complex(0.0, 0.0)) ++nonzero;
            }

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pdist(0, 3), ldist(-3, 3);
  std::uniform_real_distribution<double> wdist(0.5, 4.5);
  int compared = 0;
  double worst = 0.0;
  while (compared < 20) {
    const int ls = ldist(rng), li = ldist(rng);
    if (std::abs(ls + li) > 3) continue;
    const LGModeSpec p{pdist(rng), ls + li, wdist(rng)}, s{pdist(rng), ls, 1.0}, i{pdist(rng), li, 1.0};
    const Complex ref = oracle::overlap_2d({p.p, p.ell, p.w0}, {s.p, s.ell, s.w0}, {i.p, i.ell, i.w0});
    if (std::abs(ref) < 1e-8) continue;  // relative error is meaningless at a node of the overlap
    worst = std::max(worst, std::abs(overlap_integral(p, s, i) - ref) / std::abs(ref));
    ++compared;
  }
  return {nonzero == 0 && worst <= kOracleRelTol,
          fmt("%llu nonconserving triples, %llu nonzero; worst 2D-oracle relative error %.2e over %d triples",
              static_cast<unsigned long long>(nonconserving), static_cast<unsigned long long>(nonzero), worst,
              compared)};
}

Outcome spectrum_structure() {
  const double w = 30e-6;
  const PhaseMatchParams pm{0.0, 25e-3};
  struct Case {
    int ell;
    double ratio;
    std::set<std::pair<int, int>> allowed;
  };
  const Case cases[] = {{-1, 3.3, {{0, -1}, {-1, 0}}}, {2, 4.3, {{1, 1}}}};
  bool ok = true;
  std::ostringstream detail;
  for (const auto& c : cases) {
    const auto t = spdc_mode_weights({0, c.ell, c.ratio * w}, w, 0, {-1, 1}, pm);
    double inside = 0.0, outside = 0.0;
    for (const auto& e : t.entries) {
      (c.allowed.count({e.signal.ell, e.idler.ell}) ? inside : outside) += e.weight;
    }
    ok = ok && std::abs(inside - 1.0) <= kStructureTol && outside == 0.0;
    detail << "l_p=" << c.ell << ": allowed weight " << inside << ", other " << outside << "; ";
  }
  return {ok, detail.str()};
}

// --- 6-8: Monte Carlo ------------------------------------------------------

ToolConfig tool_config(const char* json) { return parse_config(Json::parse(json)); }

Outcome event_conservation() {
  std::uint64_t emitted = 0, violations = 0;
  std::ostringstream detail;
  for (auto [ell, ratio] : {std::pair{0, 2.4}, {-1, 3.3}, {2, 4.3}}) {
    ToolConfig tc = tool_config(R"({"second_source": {"conversion_probability": 0.02}})");
    tc.pump.ell = ell;
    tc.spectrum.waist_ratio = ratio;
    tc.crosstalk_epsilon = 0.0;
    for (auto& d : tc.detectors) d.dark_rate = 0.0;
    ExperimentConfig c = resolve_experiment(tc).config;
    std::uint64_t pump_pairs = 0;
    for (std::uint64_t chunk = 0; pump_pairs < kMinEmittedPairs; ++chunk) {
      c.duration = 0.05;
      c.seed = derive_seed(static_cast<std::uint64_t>(17 + ell), chunk);
      const auto r = simulate(c);
      pump_pairs += r.truth.emitted.size();
      violations += r.truth.conservation_violations();
    }
    emitted += pump_pairs;
    detail << "l_p=" << ell << ": " << pump_pairs << " pairs; ";
  }
  detail << "violations " << violations;
  return {violations == 0 && emitted >= 3 * kMinEmittedPairs, detail.str()};
}

Outcome desk_scale_rates() {
  const ToolConfig tc = tool_config(R"({"rate_targets": {"flux_scale": 1e4}})");
  const ResolvedExperiment re = resolve_experiment(tc);
  ExperimentConfig c = re.config;
  const CoincidenceWindows& w = tc.analysis.windows;

  MatrixOptions her = tc.analysis, unh = tc.analysis;
  her.heralded = true;
  unh.heralded = false;
  std::uint64_t raw = 0, unheralded = 0;
  DelayHistogram hist;
  const int chunks = static_cast<int>(kRateRunSeconds);
  for (int k = 0; k < chunks; ++k) {
    c.duration = kRateRunSeconds / chunks;
    c.seed = derive_seed(tc.seed, static_cast<std::uint64_t>(k));
    const auto r = simulate(c);
    const auto seg = analyze_segment(r.bundle, her);
    raw += seg.raw;
    if (k == 0) {
      hist = seg.hist;
    } else {
      for (std::size_t b = 0; b < hist.counts.size(); ++b) hist.counts[b] += seg.hist.counts[b];
      hist.integration_time += seg.hist.integration_time;
    }
    unheralded += analyze_segment(r.bundle, unh).raw;
  }
  const double T = kRateRunSeconds;
  const auto acc = accidental_rate(hist, w.herald_window, peak_exclusion(hist, w.herald_window, her.exclusion_factor));

  // Rescale to experimental flux, per hour.
  const double s = 3600.0 / kFluxScale;
  const double h_rate = (static_cast<double>(raw) / T - acc.rate) * s;
  const double h_err = std::sqrt(static_cast<double>(raw) / (T * T) + acc.rate_error * acc.rate_error) * s;
  const double u_rate = static_cast<double>(unheralded) / T * s;
  const double u_err = std::sqrt(static_cast<double>(unheralded)) / T * s;
  const double a_rate = acc.rate * s, a_err = acc.rate_error * s;

  const bool ok = std::abs(h_rate - kHeraldedPerHour) <= kRateSigmas * h_err &&
                  std::abs(u_rate - kUnheraldedPerHour) <= kRateSigmas * u_err &&
                  std::abs(a_rate - kAccidentalPerHour) <= kRateSigmas * a_err;
  return {ok, fmt("%.0f s at 1e4 flux; per hour after rescaling: heralded %.3f +- %.3f (1.3), unheralded %.2f +- "
                  "%.2f (40.2), accidental %.4f +- %.4f (0.14); fitted drive %.2f mW, conversion %.3e",
                  T, h_rate, h_err, u_rate, u_err, a_rate, a_err, re.calibration->drive_power * 1e3,
                  re.calibration->conversion_probability)};
}

Outcome matrix_comparisons() {
  // Reduced drive and strong conversion give >= 1e4 heralded counts in seconds.
  ToolConfig tc = tool_config(R"({
    "first_source": {"drive_power": "4 mW"},
    "second_source": {"conversion_probability": 0.03},
    "analysis": {"time_bin": "0.25 s"}
  })");
  ExperimentConfig c = resolve_experiment(tc).config;
  const auto grid = tc.grid();
  c.crosstalk_epsilon = calibrate_crosstalk(c, grid, kDiagonalTarget);
  const double per_setting = 3.0;
  const int threads = thread_count();

  MatrixOptions her = tc.analysis, unh = tc.analysis;
  her.heralded = true;
  unh.heralded = false;
  CorrelationMatrix m_her, m_unh, m_cls;
  {
    const auto scan = run_projection_scan(c, grid, per_setting, 1, threads);
    m_her = build_matrix(scan.scan, her);
    m_unh = build_matrix(scan.scan, unh);
  }
  {
    ExperimentConfig cc = c;
    cc.pump_source = PumpSource::kCoherent;
    cc.second_source.conversion_probability = 1e-9;
    cc.seed = derive_seed(c.seed, 1000);
    const auto scan = run_projection_scan(cc, grid, per_setting, 1, threads);
    m_cls = build_matrix(scan.scan, unh);
  }
  const double diag = diagonal_fraction(m_her);
  const double cp_pump = pearson(m_her, m_cls);
  const double cp_herald = pearson(m_her, m_unh);
  const std::uint64_t min_counts = std::min({m_her.total_raw(), m_unh.total_raw(), m_cls.total_raw()});
  const bool ok = std::abs(diag - kDiagonalTarget) <= kDiagonalTol && cp_pump >= kPearsonMin &&
                  cp_herald >= kPearsonMin && min_counts >= kMinMatrixCounts;
  return {ok, fmt("eps = %.4f, diagonal fraction %.4f; c_P single-photon vs classical %.5f, heralded vs "
                  "unheralded %.5f; counts heralded %llu, unheralded %llu, classical %llu",
                  c.crosstalk_epsilon, diag, cp_pump, cp_herald,
                  static_cast<unsigned long long>(m_her.total_raw()),
                  static_cast<unsigned long long>(m_unh.total_raw()),
                  static_cast<unsigned long long>(m_cls.total_raw()))};
}

// --- 9-10: analysis and format ---------------------------------------------

EventStream make_stream(std::vector<std::uint64_t> ts) {
  EventStream s;
  s.timestamps = std::move(ts);
  return s;
}

std::vector<std::uint64_t> random_small(std::mt19937_64& rng, std::size_t max_n, std::uint64_t span) {
  std::vector<std::uint64_t> v(rng() % (max_n + 1));
  for (auto& t : v) t = 100000 + rng() % span;
  std::sort(v.begin(), v.end());
  return v;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(909);
  int mismatches = 0;
  for (int trial = 0; trial < kOracleTrials; ++trial) {
    const auto a = random_small(rng, 80, 30000), b = random_small(rng, 80, 30000), h = random_small(rng, 80, 30000);
    const Picoseconds bin = 1 + static_cast<Picoseconds>(rng() % 300);
    const Picoseconds lo = -static_cast<Picoseconds>(rng() % 6000);
    const Picoseconds hi = lo + bin * static_cast<Picoseconds>(1 + rng() % 80);
    const Picoseconds win = 1 + static_cast<Picoseconds>(rng() % 4000);
    const Picoseconds off = static_cast<Picoseconds>(rng() % 3001) - 1500;
    const CoincidenceWindows cw{1 + static_cast<Picoseconds>(rng() % 4000), 1 + static_cast<Picoseconds>(rng() % 3000),
                                400};
    if (cross_histogram(make_stream(a), make_stream(b), bin, lo, hi).counts != oracle::brute_histogram(a, b, bin, lo, hi))
      ++mismatches;
    if (count_coincidences(make_stream(a), make_stream(b), win, off) != oracle::brute_greedy(a, b, win, off).size())
      ++mismatches;
    if (heralded_coincidences(make_stream(h), make_stream(a), make_stream(b), cw, off) !=
        oracle::brute_heralded(h, a, b, cw.pair_window, cw.herald_window, off))
      ++mismatches;
  }
  return {mismatches == 0, fmt("%d randomized stream sets, %d mismatches against all-pairs oracles", kOracleTrials,
                               mismatches)};
}

std::string to_bytes(const TagFile& f) {
  std::ostringstream os(std::ios::binary);
  write_tags(f, os);
  return os.str();
}

TagFile from_bytes(const std::string& s) {
  std::istringstream is(s, std::ios::binary);
  return parse_tags(is);
}

Outcome format_round_trip() {
  std::mt19937_64 rng(1010);
  int bad_round_trips = 0;
  for (int trial = 0; trial < kRoundTripFiles; ++trial) {
    StreamBundle b;
    b.duration_ps = 1 + rng() % 10'000'000;
    for (auto& s : b.streams) {
      const std::size_t n = rng() % 60;
      for (std::size_t k = 0; k < n; ++k) s.timestamps.push_back(rng() % (b.duration_ps + 1));
      std::sort(s.timestamps.begin(), s.timestamps.end());
    }
    const TagFile f = to_tag_file(b);
    if (!(from_bytes(to_bytes(f)) == f)) ++bad_round_trips;
  }

  TagFile big;
  big.channels = standard_channel_table();
  std::uint64_t t = 0;
  for (int i = 0; i < 1'000'000; ++i) {
    t += 1 + rng() % 1000;
    big.records.push_back({static_cast<std::uint8_t>(rng() % 4), t});
  }
  big.duration_ps = t;
  const bool big_ok = from_bytes(to_bytes(big)) == big;

  int structured = 0, accepted = 0, other = 0;
  for (int trial = 0; trial < kFuzzTrials; ++trial) {
    StreamBundle b;
    b.duration_ps = 1000;
    for (auto& s : b.streams) {
      for (int k = 0; k < static_cast<int>(rng() % 10); ++k) s.timestamps.push_back(rng() % 1001);
      std::sort(s.timestamps.begin(), s.timestamps.end());
    }
    std::string bytes = to_bytes(to_tag_file(b));
    switch (rng() % 4) {
      case 0:
        bytes.resize(rng() % (bytes.size() + 1));
        break;
      case 1:
        for (int k = 0; k < 1 + static_cast<int>(rng() % 6); ++k) bytes[rng() % bytes.size()] = static_cast<char>(rng());
        break;
      case 2:
        for (int k = 24; k < 32; ++k) bytes[k] = static_cast<char>(rng());
        break;
      default:
        for (auto& ch : bytes) ch = static_cast<char>(rng());
        break;
    }
    try {
      validate(from_bytes(bytes));
      ++accepted;
    } catch (const FormatError&) {
      ++structured;
    } catch (...) {
      ++other;
    }
  }
  return {bad_round_trips == 0 && big_ok && other == 0,
          fmt("%d random files, %d mismatches; 1e6-record file %s; fuzz: %d structured errors, %d valid, %d "
              "unstructured",
              kRoundTripFiles, bad_round_trips, big_ok ? "identical" : "DIFFERS", structured, accepted, other)};
}

}  // namespace

int main(int argc, char** argv) {
  using Criterion = Outcome (*)();
  const std::vector<Criterion> criteria = {
      drive_amplitude,    gain_calibration, multipair_ratio_check, selection_rule,     spectrum_structure,
      event_conservation, desk_scale_rates, matrix_comparisons,    oracle_equivalence, format_round_trip};
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %d: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
