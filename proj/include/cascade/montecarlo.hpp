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

#ifndef CASCADE_MONTECARLO_HPP
#define CASCADE_MONTECARLO_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cascade/analysis.hpp"
#include "cascade/errors.hpp"
#include "cascade/event_stream.hpp"
#include "cascade/modes.hpp"
#include "cascade/rng.hpp"
#include "cascade/statistics.hpp"
#include "cascade/units.hpp"

namespace cascade {

struct DetectorSpec {
  double efficiency = 0.8;
  double dark_rate = 100.0;       // [Hz]
  double jitter_sigma = 25e-12;   // [s]
  double delay = 0.0;             // [s] fixed cable/electronic delay
};

enum class PumpSource {
  kHeralded,  // single photons from the first source, announced by the herald arm
  kCoherent,  // stimulated, quasi-classical pump with Poissonian photon statistics
};

struct SecondSource {
  ModeWeightTable table;
  double conversion_probability = 0.0;  // per pump photon reaching the crystal
  /// Fiber acceptance per radial order p of a projected photon; orders past
  /// the end of the vector are rejected.
  std::vector<double> radial_acceptance{1.0};
};

/// One run of the cascaded experiment at a fixed projection setting.
struct ExperimentConfig {
  // First source.
  double drive_power = 43e-3;            // [W]
  double drive_wavelength = 524.59e-9;   // [m]
  double kappa1 = 6.04e-5;
  double t_coh = 0.3e-9;                 // [s]
  double herald_coupling = 0.34;         // fiber coupling of the herald arm
  double herald_nd_transmission = 0.1;
  int herald_split = 2;

  // Pump delivery.
  PumpSource pump_source = PumpSource::kHeralded;
  LossBudget pump_losses{0.5, 0.382, 0.7};
  int pump_ell = 0;
  double coherent_power = 12e-6;         // [W] at the second crystal input
  double pump_wavelength = 783e-9;       // [m]

  SecondSource second_source;
  double crosstalk_epsilon = 0.0;
  std::array<DetectorSpec, kChannelCount> detectors{};
  Setting projection{0, 0};
  double duration = 1.0;                 // [s]
  std::uint64_t seed = 1;

  DetectorSpec& detector(Channel c) { return detectors[static_cast<std::size_t>(c)]; }
  const DetectorSpec& detector(Channel c) const { return detectors[static_cast<std::size_t>(c)]; }
};

inline void validate(const ExperimentConfig& c) {
  auto prob = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
  };
  if (!(c.drive_power >= 0.0)) throw ConfigError("drive_power must be >= 0");
  if (!(c.drive_wavelength > 0.0)) throw ConfigError("drive_wavelength must be positive");
  if (!(c.kappa1 >= 0.0)) throw ConfigError("kappa1 must be >= 0");
  if (!(c.t_coh > 0.0)) throw ConfigError("t_coh must be positive");
  prob(c.herald_coupling, "herald_coupling");
  prob(c.herald_nd_transmission, "herald_nd_transmission");
  if (c.herald_split != 1 && c.herald_split != 2) throw ConfigError("herald_split must be 1 or 2");
  try {
    validate(c.pump_losses);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("pump losses: ") + e.what());
  }
  if (!(c.coherent_power >= 0.0)) throw ConfigError("coherent_power must be >= 0");
  if (!(c.pump_wavelength > 0.0)) throw ConfigError("pump_wavelength must be positive");
  prob(c.second_source.conversion_probability, "conversion_probability");
  for (double a : c.second_source.radial_acceptance) prob(a, "radial_acceptance");
  prob(c.crosstalk_epsilon, "crosstalk_epsilon");
  for (const auto& d : c.detectors) {
    prob(d.efficiency, "detector efficiency");
    if (!(d.dark_rate >= 0.0)) throw ConfigError("dark_rate must be >= 0");
    if (!(d.jitter_sigma >= 0.0)) throw ConfigError("jitter_sigma must be >= 0");
    if (!std::isfinite(d.delay)) throw ConfigError("detector delay must be finite");
  }
  if (!(c.duration >= 0.0)) throw ConfigError("duration must be >= 0");

  const auto& t = c.second_source.table;
  if (t.entries.empty() || !(t.total() > 0.0)) throw ConfigError("mode weight table is empty");
  if (t.pump.ell != c.pump_ell) throw ConfigError("mode weight table was built for another pump_ell");
  for (const auto& e : t.entries) {
    if (!(e.weight >= 0.0)) throw ConfigError("mode weights must be >= 0");
    if (e.weight > 0.0 && e.signal.ell + e.idler.ell != c.pump_ell) {
      throw ConfigError("mode weight table violates ell_s + ell_i = ell_p");
    }
  }
}

/// One down-converted pair from the second crystal.
struct EmittedPair {
  double time_ps = 0.0;      // emission time before delays and jitter
  ModeIndex signal;
  ModeIndex idler;
  std::int8_t herald = -1;   // channel id that detected the partner herald photon, -1 if none
  bool projected = false;
  bool signal_detected = false;
  bool idler_detected = false;
};

struct GroundTruth {
  int pump_ell = 0;
  PumpSource source = PumpSource::kHeralded;
  std::uint64_t slots = 0;           // coherence-time slots simulated
  std::uint64_t tracked_pairs = 0;   // first-source pairs with a detected herald or a conversion
  std::uint64_t converted = 0;       // pump photons down-converted in the second crystal
  std::array<std::uint64_t, kChannelCount> genuine_counts{};
  std::array<std::uint64_t, kChannelCount> dark_counts{};
  std::vector<EmittedPair> emitted;

  std::uint64_t conservation_violations() const {
    std::uint64_t n = 0;
    for (const auto& e : emitted) n += e.signal.ell + e.idler.ell != pump_ell;
    return n;
  }
};

struct SimulationResult {
  StreamBundle bundle;
  GroundTruth truth;
};

namespace detail {

/// Number of distinct (ell_s, ell_i) combinations in the table.
inline std::size_t projection_classes(const ModeWeightTable& t) {
  std::set<std::pair<int, int>> s;
  for (const auto& e : t.entries) s.insert({e.signal.ell, e.idler.ell});
  return s.size();
}

inline double radial_factor(const std::vector<double>& acc, int p) {
  return p >= 0 && static_cast<std::size_t>(p) < acc.size() ? acc[static_cast<std::size_t>(p)] : 0.0;
}

/// Probability that a pair emitted into `e` passes the projection `s`.
inline double projection_probability(const ModeWeightEntry& e, Setting s, double epsilon,
                                      std::size_t classes, const std::vector<double>& radial) {
  const bool match = e.signal.ell == s.ell_s && e.idler.ell == s.ell_i;
  double pass;
  if (match) {
    pass = 1.0 - epsilon;
  } else {
    pass = classes > 1 ? epsilon / static_cast<double>(classes - 1) : 0.0;
  }
  return pass * radial_factor(radial, e.signal.p) * radial_factor(radial, e.idler.p);
}

struct Record {
  std::uint64_t t;
  Origin origin;
  std::int32_t pair;
};

class ChannelSink {
 public:
  ChannelSink(const DetectorSpec& spec, std::uint64_t duration_ps)
      : spec_(spec), duration_ps_(duration_ps),
        delay_ps_(spec.delay * 1e12), sigma_ps_(spec.jitter_sigma * 1e12) {}

  /// Registers a detection at true time t_ps; returns false if it falls
  /// outside the run.
  bool add(double t_ps, Origin origin, std::int32_t pair, Rng& rng) {
    double t = t_ps + delay_ps_;
    if (sigma_ps_ > 0.0) t += sigma_ps_ * rng.normal();
    const double r = std::nearbyint(t);
    if (r < 0.0 || r > static_cast<double>(duration_ps_)) return false;
    records_.push_back({static_cast<std::uint64_t>(r), origin, pair});
    return true;
  }

  EventStream finish(Channel channel, const std::vector<std::uint64_t>& darks) {
    sort_records();
    EventStream s;
    s.channel = channel;
    const std::size_t n = records_.size() + darks.size();
    s.timestamps.reserve(n);
    s.origins.reserve(n);
    s.pair_index.reserve(n);
    std::size_t j = 0;
    for (const Record& r : records_) {
      while (j < darks.size() && darks[j] < r.t) push_dark(s, darks[j++]);
      s.timestamps.push_back(r.t);
      s.origins.push_back(r.origin);
      s.pair_index.push_back(r.pair);
    }
    while (j < darks.size()) push_dark(s, darks[j++]);
    records_.clear();
    records_.shrink_to_fit();
    return s;
  }

  std::size_t size() const { return records_.size(); }

 private:
  static void push_dark(EventStream& s, std::uint64_t t) {
    s.timestamps.push_back(t);
    s.origins.push_back(Origin::kDark);
    s.pair_index.push_back(-1);
  }

  // Records arrive in emission order, so jitter leaves only local
  // inversions; insertion sort handles those in linear time.
  void sort_records() {
    std::size_t moves = 0;
    const std::size_t budget = 16 * records_.size() + 64;
    for (std::size_t i = 1; i < records_.size(); ++i) {
      Record r = records_[i];
      std::size_t k = i;
      while (k > 0 && records_[k - 1].t > r.t) {
        records_[k] = records_[k - 1];
        --k;
        if (++moves > budget) break;
      }
      records_[k] = r;
      if (moves > budget) {
        std::stable_sort(records_.begin(), records_.end(),
                         [](const Record& a, const Record& b) { return a.t < b.t; });
        return;
      }
    }
  }

  DetectorSpec spec_;
  std::uint64_t duration_ps_;
  double delay_ps_;
  double sigma_ps_;
  std::vector<Record> records_;
};

inline std::vector<std::uint64_t> dark_times(double rate, std::uint64_t duration_ps, Rng& rng) {
  std::vector<std::uint64_t> out;
  if (!(rate > 0.0) || duration_ps == 0) return out;
  const double rate_per_ps = rate * 1e-12;
  const double end = static_cast<double>(duration_ps);
  double t = rng.exponential(rate_per_ps);
  while (t <= end) {
    out.push_back(static_cast<std::uint64_t>(std::nearbyint(std::min(t, end))));
    t += rng.exponential(rate_per_ps);
  }
  return out;
}

/// Samples table entries by weight.
class ModeSampler {
 public:
  explicit ModeSampler(const ModeWeightTable& t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < t.entries.size(); ++k) {
      if (t.entries[k].weight > 0.0) {
        acc += t.entries[k].weight;
        cumulative_.push_back(acc);
        index_.push_back(k);
      }
    }
  }
  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const std::size_t k = std::min<std::size_t>(it - cumulative_.begin(), index_.size() - 1);
    return index_[k];
  }

 private:
  std::vector<double> cumulative_;
  std::vector<std::size_t> index_;
};

/// Parametric gain of the first source.
inline double first_source_gain(const ExperimentConfig& c) {
  return c.kappa1 * alpha_from_drive(c.drive_power, c.drive_wavelength, c.t_coh);
}

/// Per-pair herald detection probabilities for herald_a and herald_b.
inline std::array<double, 2> herald_probabilities(const ExperimentConfig& c) {
  const double base = c.herald_coupling * c.herald_nd_transmission / c.herald_split;
  const double a = base * c.detector(Channel::kHeraldA).efficiency;
  const double b = c.herald_split == 2 ? base * c.detector(Channel::kHeraldB).efficiency : 0.0;
  return {a, b};
}

/// Rate of pump photons converted in the second crystal under a coherent pump.
inline double coherent_conversion_rate(const ExperimentConfig& c) {
  return c.coherent_power / photon_energy(c.pump_wavelength) * c.pump_losses.eta_total() *
         c.second_source.conversion_probability;
}

}  // namespace detail

/// Simulates one projection setting. Deterministic in (config, seed).
///
/// Heralded pump: the slot photon number follows the two-mode squeezed
/// vacuum distribution. Pairs whose herald photon is not detected and whose
/// pump photon does not convert leave no trace, so only the remaining
/// ("tracked") pairs are drawn; thinning a geometric law keeps it geometric,
/// with ratio x q / (1 - x + x q) for tracking probability q. Slots without
/// tracked pairs are skipped in one geometric draw.
inline SimulationResult simulate(const ExperimentConfig& config) {
  validate(config);
  SimulationResult out;
  GroundTruth& truth = out.truth;
  truth.pump_ell = config.pump_ell;
  truth.source = config.pump_source;
  const std::uint64_t duration_ps = static_cast<std::uint64_t>(std::llround(config.duration * 1e12));
  out.bundle.duration_ps = duration_ps;

  Rng rng(derive_seed(config.seed, 0));
  std::array<detail::ChannelSink, kChannelCount> sinks{
      detail::ChannelSink(config.detectors[0], duration_ps),
      detail::ChannelSink(config.detectors[1], duration_ps),
      detail::ChannelSink(config.detectors[2], duration_ps),
      detail::ChannelSink(config.detectors[3], duration_ps)};
  auto sink = [&](Channel c) -> detail::ChannelSink& { return sinks[static_cast<std::size_t>(c)]; };

  const auto& table = config.second_source.table;
  const detail::ModeSampler sampler(table);
  const std::size_t classes = detail::projection_classes(table);
  std::vector<double> pass(table.entries.size());
  for (std::size_t k = 0; k < pass.size(); ++k) {
    pass[k] = detail::projection_probability(table.entries[k], config.projection, config.crosstalk_epsilon,
                                             classes, config.second_source.radial_acceptance);
  }
  const double eff_s = config.detector(Channel::kSignal).efficiency;
  const double eff_i = config.detector(Channel::kIdler).efficiency;

  auto convert = [&](double t_ps, std::int8_t herald) {
    if (truth.emitted.size() >= static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
      throw NumericalError("too many emitted pairs for one run", static_cast<double>(truth.emitted.size()));
    }
    const std::size_t k = sampler.draw(rng);
    EmittedPair p;
    p.time_ps = t_ps;
    p.signal = table.entries[k].signal;
    p.idler = table.entries[k].idler;
    p.herald = herald;
    p.projected = rng.bernoulli(pass[k]);
    if (p.projected) {
      p.signal_detected = rng.bernoulli(eff_s);
      p.idler_detected = rng.bernoulli(eff_i);
    }
    const auto index = static_cast<std::int32_t>(truth.emitted.size());
    if (p.signal_detected) sink(Channel::kSignal).add(t_ps, Origin::kGenuine, index, rng);
    if (p.idler_detected) sink(Channel::kIdler).add(t_ps, Origin::kGenuine, index, rng);
    truth.emitted.push_back(p);
    ++truth.converted;
    return index;
  };

  const double end_ps = static_cast<double>(duration_ps);
  if (config.pump_source == PumpSource::kHeralded) {
    const double t_coh_ps = config.t_coh * 1e12;
    const std::uint64_t slots = static_cast<std::uint64_t>(std::floor(end_ps / t_coh_ps));
    truth.slots = slots;
    const double gamma = detail::first_source_gain(config);
    const double x = std::pow(std::tanh(gamma), 2);
    const auto [ha, hb] = detail::herald_probabilities(config);
    const double c = config.pump_losses.eta_total() * config.second_source.conversion_probability;
    const double none = 1.0 - ha - hb;
    const double q = 1.0 - none * (1.0 - c);
    if (x > 0.0 && q > 0.0 && slots > 0) {
      const double xq = x * q / (1.0 - x + x * q);
      // Outcome categories of a tracked pair, cumulative.
      double cat[4];
      cat[0] = ha * (1 - c) / q;
      cat[1] = cat[0] + hb * (1 - c) / q;
      cat[2] = cat[1] + ha * c / q;
      cat[3] = cat[2] + hb * c / q;
      std::uint64_t slot = 0;
      while (true) {
        const std::uint64_t skip = rng.geometric_failures(xq);
        if (skip >= slots - slot) break;
        slot += skip;
        std::uint64_t k = 1 + rng.geometric_failures(1.0 - xq);
        for (; k > 0; --k) {
          ++truth.tracked_pairs;
          const double t_ps = (static_cast<double>(slot) + rng.uniform()) * t_coh_ps;
          const double u = rng.uniform();
          std::int8_t herald = -1;
          bool converted;
          if (u < cat[0]) {
            herald = 0, converted = false;
          } else if (u < cat[1]) {
            herald = 1, converted = false;
          } else if (u < cat[2]) {
            herald = 0, converted = true;
          } else if (u < cat[3]) {
            herald = 1, converted = true;
          } else {
            converted = true;
          }
          std::int32_t index = -1;
          if (converted) index = convert(t_ps, herald);
          if (herald >= 0) {
            const Channel hc = herald == 0 ? Channel::kHeraldA : Channel::kHeraldB;
            sink(hc).add(t_ps, Origin::kGenuine, index, rng);
          }
        }
        if (++slot >= slots) break;
      }
    }
  } else {
    const double rate_per_ps = detail::coherent_conversion_rate(config) * 1e-12;
    if (rate_per_ps > 0.0) {
      double t = rng.exponential(rate_per_ps);
      while (t < end_ps) {
        convert(t, -1);
        t += rng.exponential(rate_per_ps);
      }
    }
  }

  for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
    Rng dark_rng(derive_seed(config.seed, 1 + ch));
    const auto darks = detail::dark_times(config.detectors[ch].dark_rate, duration_ps, dark_rng);
    truth.genuine_counts[ch] = sinks[ch].size();
    truth.dark_counts[ch] = darks.size();
    out.bundle.streams[ch] = sinks[ch].finish(kAllChannels[ch], darks);
  }
  return out;
}

struct ProjectionScan {
  Scan scan;
  std::vector<GroundTruth> truths;  // one per segment
};

/// Cycles through the settings, simulating each segment with seed
/// derive_seed(config.seed, segment index). Segments are independent, so up
/// to `threads` of them run concurrently; the result does not depend on the
/// thread count.
inline ProjectionScan run_projection_scan(const ExperimentConfig& config, const std::vector<Setting>& settings,
                                          double time_per_setting, int cycles = 1, int threads = 1) {
  if (settings.empty()) throw ConfigError("projection scan needs at least one setting");
  if (!(time_per_setting >= 0.0)) throw ConfigError("time per setting must be >= 0");
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  const std::size_t n = settings.size() * static_cast<std::size_t>(cycles);
  ProjectionScan out;
  out.scan.pump_ell = config.pump_ell;
  out.scan.segments.resize(n);
  out.truths.resize(n);

  auto run_one = [&](std::size_t k) {
    ExperimentConfig c = config;
    c.projection = settings[k % settings.size()];
    c.duration = time_per_setting;
    c.seed = derive_seed(config.seed, k);
    SimulationResult r = simulate(c);
    ScanSegment& seg = out.scan.segments[k];
    seg.setting = c.projection;
    seg.start_time = static_cast<double>(k) * time_per_setting;
    seg.bundle = std::move(r.bundle);
    out.truths[k] = std::move(r.truth);
  };

  const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, n);
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) run_one(k);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n; k += workers) run_one(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analytic rate model.

/// Long-run rates [1/s] the analysis of a simulated run should report.
struct ExpectedRates {
  double pair_rate = 0.0;       // first-source pairs (heralded pump) or converted photons (coherent)
  std::array<double, kChannelCount> singles{};
  double unheralded = 0.0;      // signal-idler coincidences in the unheralded window
  double pair_window = 0.0;     // signal-idler coincidences in the pair window
  double heralded_raw = 0.0;
  double accidental = 0.0;      // heralded accidentals per herald window
  double heralded = 0.0;        // heralded_raw - accidental
};

namespace detail {

/// P(|N(mean, sigma^2)| <= half).
inline double window_catch(double half, double mean, double sigma) {
  if (sigma <= 0.0) return std::abs(mean) <= half ? 1.0 : 0.0;
  const double s = sigma * std::numbers::sqrt2;
  return 0.5 * (std::erf((half - mean) / s) + std::erf((half + mean) / s));
}

/// Window catch when the partner's emission time differs by (u1 - u2) t_coh
/// with u1, u2 uniform: triangular density on [-t_coh, t_coh].
inline double window_catch_other_slot_pair(double half, double mean, double sigma, double t_coh) {
  const int n = 2000;
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double u = -1.0 + 2.0 * k / n;
    const double wgt = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += wgt * (1.0 - std::abs(u)) * window_catch(half, mean + u * t_coh, sigma);
  }
  return acc * (2.0 / n) / 3.0;
}

/// Effective half window of the closed integer-picosecond interval.
inline double half_window_s(Picoseconds w) { return (static_cast<double>(w / 2) + 0.5) * 1e-12; }

/// Projection pass probability averaged over the weight table.
inline double mean_projection(const ExperimentConfig& c, Setting s) {
  const auto& t = c.second_source.table;
  const std::size_t classes = projection_classes(t);
  double acc = 0.0;
  for (const auto& e : t.entries) {
    acc += e.weight * projection_probability(e, s, c.crosstalk_epsilon, classes, c.second_source.radial_acceptance);
  }
  return acc / t.total();
}

}  // namespace detail

inline ExpectedRates expected_rates(const ExperimentConfig& c, const CoincidenceWindows& w,
                                    Picoseconds herald_offset = 0, Picoseconds pair_offset = 0) {
  validate(c);
  validate(w);
  ExpectedRates r;
  const auto& ds = c.detector(Channel::kSignal);
  const auto& di = c.detector(Channel::kIdler);
  const double pi = detail::mean_projection(c, c.projection);

  double converted;  // conversions per second
  double x = 0.0;
  std::array<double, 2> h{0.0, 0.0};
  if (c.pump_source == PumpSource::kHeralded) {
    const double gamma = detail::first_source_gain(c);
    r.pair_rate = std::pow(std::sinh(gamma), 2) / c.t_coh;
    x = std::pow(std::tanh(gamma), 2);
    h = detail::herald_probabilities(c);
    converted = r.pair_rate * c.pump_losses.eta_total() * c.second_source.conversion_probability;
  } else {
    converted = detail::coherent_conversion_rate(c);
    r.pair_rate = converted;
  }
  const double detected_pairs = converted * pi * ds.efficiency * di.efficiency;
  r.singles[0] = r.pair_rate * h[0] + c.detectors[0].dark_rate;
  r.singles[1] = r.pair_rate * h[1] + c.detectors[1].dark_rate;
  r.singles[2] = converted * pi * ds.efficiency + ds.dark_rate;
  r.singles[3] = converted * pi * di.efficiency + di.dark_rate;

  const double si_sigma = std::hypot(ds.jitter_sigma, di.jitter_sigma);
  const double si_mean = di.delay - ds.delay - pair_offset * 1e-12;
  auto si_rate = [&](Picoseconds window) {
    const double half = detail::half_window_s(window);
    // Uncorrelated signal-idler pairs add the singles product times the window.
    const double acc = (r.singles[2] - detected_pairs) * (r.singles[3] - detected_pairs) * 2.0 * half;
    return detected_pairs * detail::window_catch(half, si_mean, si_sigma) + acc;
  };
  r.unheralded = si_rate(w.unheralded_window);
  r.pair_window = si_rate(w.pair_window);

  const double herald_rate = r.singles[0] + r.singles[1];
  const double half_h = detail::half_window_s(w.herald_window);
  double miss_own = 1.0, hg = 0.0;
  // Expected heralds from other slots and dark counts inside the window of a genuine pair.
  double foreign = 0.0;
  for (int k = 0; k < 2; ++k) {
    const auto& dh = c.detectors[static_cast<std::size_t>(k)];
    foreign += dh.dark_rate * 2.0 * half_h;
    if (h[k] <= 0.0) continue;
    const double sigma = std::hypot(dh.jitter_sigma, ds.jitter_sigma);
    const double mean = dh.delay - ds.delay - herald_offset * 1e-12;
    miss_own -= h[k] * detail::window_catch(half_h, mean, sigma);
    const double g = detail::window_catch_other_slot_pair(half_h, mean, sigma, c.t_coh);
    hg += h[k] * g;
    // The own slot covers t_coh * g of the window on average; the rest sees
    // heralds of independent slots.
    foreign += r.pair_rate * h[k] * (2.0 * half_h - c.t_coh * g);
  }
  // Other pairs in the slot follow a negative binomial law of order 2.
  const double ratio = (1.0 - x) / (1.0 - x * (1.0 - hg));
  const double miss_multi = ratio * ratio;
  const double foreign_herald = 1.0 - std::exp(-foreign);
  const double random_herald = 1.0 - std::exp(-herald_rate * 2.0 * half_h);
  // Only genuine pairs have correlated heralds; accidental pairs see background.
  const double genuine_pairs = detected_pairs * detail::window_catch(detail::half_window_s(w.pair_window),
                                                                      si_mean, si_sigma);
  const double accidental_pairs = r.pair_window - genuine_pairs;
  r.heralded_raw = genuine_pairs * (1.0 - miss_own * miss_multi * (1.0 - foreign_herald)) +
                   accidental_pairs * random_herald;
  r.accidental = r.pair_window * herald_rate * static_cast<double>(w.herald_window) * 1e-12;
  r.heralded = r.heralded_raw - r.accidental;
  return r;
}

/// Rates [1/s] the calibration should reproduce, already multiplied by any
/// flux scale.
struct RateTargets {
  double heralded = 0.0;
  double unheralded = 0.0;
  double accidental = 0.0;
};

struct RateCalibration {
  ExperimentConfig config;   // input with drive_power, herald_coupling, conversion_probability set
  double drive_power = 0.0;
  double herald_coupling = 0.0;
  double conversion_probability = 0.0;
  double herald_rate = 0.0;  // [1/s] total herald singles
  double gamma = 0.0;
  ExpectedRates rates;
};

/// Solves drive power, herald coupling and conversion probability so the
/// rate model reproduces the three targets for config.projection.
inline RateCalibration calibrate_rates(const ExperimentConfig& base, const RateTargets& target,
                                       const CoincidenceWindows& w) {
  if (!(target.heralded > 0.0 && target.unheralded > 0.0 && target.accidental > 0.0)) {
    throw ParameterError("rate targets must be positive");
  }
  if (base.pump_source != PumpSource::kHeralded) throw ParameterError("rate calibration needs a heralded pump");
  if (!(base.kappa1 > 0.0)) throw ParameterError("kappa1 must be positive");
  ExperimentConfig c = base;
  if (c.second_source.conversion_probability <= 0.0) c.second_source.conversion_probability = 1e-9;
  const double darks = c.detectors[0].dark_rate + (c.herald_split == 2 ? c.detectors[1].dark_rate : 0.0);

  // Sets the first-source pair rate G [1/s] through the drive power.
  auto set_pair_rate = [&](double G) {
    const double gamma = std::asinh(std::sqrt(G * c.t_coh));
    const double alpha = gamma / c.kappa1;
    c.drive_power = alpha * alpha * photon_energy(c.drive_wavelength) / c.t_coh;
  };
  auto per_pair_herald = [&](double coupling) {
    ExperimentConfig t = c;
    t.herald_coupling = coupling;
    const auto h = detail::herald_probabilities(t);
    return h[0] + h[1];
  };

  double pair_window = target.unheralded;
  for (int iter = 0; iter < 60; ++iter) {
    const double herald_rate = target.accidental / (pair_window * static_cast<double>(w.herald_window) * 1e-12);
    if (!(herald_rate > darks)) throw NumericalError("accidental target below the dark-count floor", herald_rate);
    const double want = target.heralded / pair_window;

    auto ratio_at = [&](double coupling) {
      c.herald_coupling = coupling;
      set_pair_rate((herald_rate - darks) / per_pair_herald(coupling));
      const auto r = expected_rates(c, w);
      return r.heralded / r.pair_window;
    };
    double lo = 1e-9, hi = 1.0;
    if (ratio_at(hi) < want) throw NumericalError("heralded target needs herald coupling above 1", ratio_at(hi));
    for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
      const double mid = 0.5 * (lo + hi);
      (ratio_at(mid) < want ? lo : hi) = mid;
    }
    ratio_at(0.5 * (lo + hi));

    // Conversion from the unheralded target; the model is linear in it up to
    // the tiny accidental term.
    const auto r = expected_rates(c, w);
    const double scale = target.unheralded / r.unheralded;
    const double conv = c.second_source.conversion_probability * scale;
    if (conv > 1.0) throw NumericalError("unheralded target needs conversion probability above 1", conv);
    c.second_source.conversion_probability = conv;
    const auto r2 = expected_rates(c, w);
    const double moved = std::abs(r2.pair_window - pair_window) / pair_window;
    pair_window = r2.pair_window;
    if (moved < 1e-13 && std::abs(scale - 1.0) < 1e-13) break;
  }

  RateCalibration out;
  out.rates = expected_rates(c, w);
  out.config = c;
  out.drive_power = c.drive_power;
  out.herald_coupling = c.herald_coupling;
  out.conversion_probability = c.second_source.conversion_probability;
  out.herald_rate = out.rates.singles[0] + out.rates.singles[1];
  out.gamma = detail::first_source_gain(c);
  return out;
}

/// Diagonal fraction predicted for a full scan over `grid`: the share of
/// detections in cells with ell_s + ell_i = pump_ell.
inline double model_diagonal_fraction(const ExperimentConfig& c, const std::vector<Setting>& grid) {
  double diag = 0.0, total = 0.0;
  for (const Setting& s : grid) {
    const double v = detail::mean_projection(c, s);
    total += v;
    if (s.ell_s + s.ell_i == c.pump_ell) diag += v;
  }
  if (!(total > 0.0)) throw NumericalError("scan grid collects no counts", total);
  return diag / total;
}

/// Crosstalk probability for which the model diagonal fraction equals target.
inline double calibrate_crosstalk(const ExperimentConfig& base, const std::vector<Setting>& grid, double target) {
  ExperimentConfig c = base;
  auto f = [&](double eps) {
    c.crosstalk_epsilon = eps;
    return model_diagonal_fraction(c, grid);
  };
  double lo = 0.0, hi = 1.0;
  const double f_lo = f(lo), f_hi = f(hi);
  if ((target - f_lo) * (target - f_hi) > 0.0) {
    throw NumericalError("target diagonal fraction is out of reach", target);
  }
  const bool decreasing = f_hi < f_lo;
  for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
    const double mid = 0.5 * (lo + hi);
    ((f(mid) > target) == decreasing ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace cascade

#endif  // CASCADE_MONTECARLO_HPP
