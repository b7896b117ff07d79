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

// JSON run configuration: parsing with explicit units, defaults, the
// canonical form used for hashing, and resolution into an ExperimentConfig.
//
// Quantities are either bare numbers in SI units or strings with a unit
// ("614 uW", "0.3 ns"). Unknown keys are rejected.

#ifndef CASCADE_CONFIG_HPP
#define CASCADE_CONFIG_HPP

#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cascade/analysis.hpp"
#include "cascade/errors.hpp"
#include "cascade/modes.hpp"
#include "cascade/montecarlo.hpp"
#include "cascade/statistics.hpp"
#include "cascade/units.hpp"
#include "json.hpp"

namespace cascade {

using Json = nlohmann::json;

struct SpectrumSpec {
  double waist_ratio = 2.4;         // pump waist / signal-idler waist
  double signal_waist = 30e-6;      // [m]
  int p_max = 0;
  EllRange ells{-1, 1};
  PhaseMatchParams phasematch{0.0, 25e-3};
};

/// Where the first-source gain coefficient comes from.
struct KappaSpec {
  bool from_calibration = true;
  double kappa = 0.0;
  double coincidence_rate = 216e3;  // [Hz]
  double singles_rate = 1.13e6;     // [Hz]
  double power = 614e-6;            // [W]
};

struct PumpSpec {
  PumpSource source = PumpSource::kHeralded;
  int ell = 0;
  double coherent_power = 12e-6;
  double wavelength = 783e-9;
  double eta_det = 0.5;
  std::optional<double> eta_coupling;  // defaults to the calibration ratio C/S
  std::optional<double> eta_smf;       // overrides eta_coupling when given
  double eta_slm = 0.7;
};

struct ScanSpec {
  std::vector<int> ell_values{-1, 0, 1};
  double time_per_setting = 600.0;  // [s]
  int cycles = 1;
};

struct StatsSpec {
  double target_power = 72.7e-3;  // [W]
  int n_max = -1;                 // automatic when negative
};

struct RateTargetSpec {
  bool calibrate = false;
  double heralded_per_hour = 1.3;
  double unheralded_per_hour = 40.2;
  double accidental_per_hour = 0.14;
  double flux_scale = 1.0;
};

struct ToolConfig {
  std::uint64_t seed = 1;
  // First source.
  double drive_power = 38.7e-3;
  double drive_wavelength = 524.59e-9;
  double t_coh = 0.3e-9;
  double herald_coupling = 0.375;
  double herald_nd_transmission = 0.1;
  int herald_split = 2;
  KappaSpec kappa;

  PumpSpec pump;
  SpectrumSpec spectrum;
  double conversion_probability = 6.07e-10;
  std::vector<double> radial_acceptance{1.0};

  double crosstalk_epsilon = 0.32;
  Setting projection{0, 0};
  double duration = 1.0;  // single-setting simulate runs [s]
  ScanSpec scan;
  std::array<DetectorSpec, kChannelCount> detectors{};

  MatrixOptions analysis;
  StatsSpec stats;
  RateTargetSpec rates;

  std::vector<Setting> grid() const {
    std::vector<Setting> g;
    for (int s : scan.ell_values)
      for (int i : scan.ell_values) g.push_back({s, i});
    return g;
  }
};

namespace detail {

/// Read cursor over one JSON object that remembers which keys were used.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  double quantity(const std::string& key, Dimension dim, double fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (v->is_number()) return v->get<double>();
    if (v->is_string()) {
      try {
        return parse_quantity(v->get<std::string>(), dim);
      } catch (const ConfigError& e) {
        throw ConfigError(where(key) + ": " + e.what());
      }
    }
    throw ConfigError(where(key) + " must be a number or a quantity string");
  }

  double number(const std::string& key, double fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(where(key) + " must be a number");
    return v->get<double>();
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key, 0.0);
  }

  long long integer(const std::string& key, long long fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    return v->get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(where(key) + " must be true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(where(key) + " must be a string");
    return v->get<std::string>();
  }

  template <class T>
  std::vector<T> array(const std::string& key, std::vector<T> fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_array()) throw ConfigError(where(key) + " must be an array");
    std::vector<T> out;
    for (const auto& e : *v) {
      if (!e.is_number()) throw ConfigError(where(key) + " must hold numbers");
      if constexpr (std::is_integral_v<T>) {
        if (!e.is_number_integer()) throw ConfigError(where(key) + " must hold integers");
      }
      out.push_back(e.get<T>());
    }
    return out;
  }

  std::optional<Section> child(const std::string& key) {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    return Section(*v, path_.empty() ? key : path_ + "." + key);
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
    }
  }

 private:
  const Json* get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Picoseconds to_ps(double seconds) { return static_cast<Picoseconds>(std::llround(seconds * 1e12)); }

inline void read_detector(Section& s, DetectorSpec& d) {
  d.efficiency = s.number("efficiency", d.efficiency);
  d.dark_rate = s.quantity("dark_rate", Dimension::kFrequency, d.dark_rate);
  d.jitter_sigma = s.quantity("jitter_sigma", Dimension::kTime, d.jitter_sigma);
  d.delay = s.quantity("delay", Dimension::kTime, d.delay);
  s.finish();
}

}  // namespace detail

inline ToolConfig parse_config(const Json& root) {
  using detail::Section;
  ToolConfig c;
  Section top(root, "");
  c.seed = top.unsigned_integer("seed", c.seed);

  if (auto s = top.child("first_source")) {
    c.drive_power = s->quantity("drive_power", Dimension::kPower, c.drive_power);
    c.drive_wavelength = s->quantity("drive_wavelength", Dimension::kLength, c.drive_wavelength);
    c.t_coh = s->quantity("coherence_time", Dimension::kTime, c.t_coh);
    c.herald_coupling = s->number("herald_coupling", c.herald_coupling);
    c.herald_nd_transmission = s->number("herald_nd_transmission", c.herald_nd_transmission);
    c.herald_split = static_cast<int>(s->integer("herald_split", c.herald_split));
    if (s->has("kappa") && s->has("calibration")) {
      throw ConfigError("first_source: give either 'kappa' or 'calibration', not both");
    }
    if (s->has("kappa")) {
      c.kappa.from_calibration = false;
      c.kappa.kappa = s->number("kappa", 0.0);
    }
    if (auto k = s->child("calibration")) {
      c.kappa.coincidence_rate = k->quantity("coincidence_rate", Dimension::kFrequency, c.kappa.coincidence_rate);
      c.kappa.singles_rate = k->quantity("singles_rate", Dimension::kFrequency, c.kappa.singles_rate);
      c.kappa.power = k->quantity("power", Dimension::kPower, c.kappa.power);
      k->finish();
    }
    s->finish();
  }

  if (auto s = top.child("pump")) {
    const std::string src = s->string("source", "heralded");
    if (src == "heralded") {
      c.pump.source = PumpSource::kHeralded;
    } else if (src == "coherent") {
      c.pump.source = PumpSource::kCoherent;
    } else {
      throw ConfigError("pump.source must be 'heralded' or 'coherent'");
    }
    c.pump.ell = static_cast<int>(s->integer("ell", c.pump.ell));
    c.pump.coherent_power = s->quantity("coherent_power", Dimension::kPower, c.pump.coherent_power);
    c.pump.wavelength = s->quantity("wavelength", Dimension::kLength, c.pump.wavelength);
    c.pump.eta_det = s->number("eta_det", c.pump.eta_det);
    c.pump.eta_coupling = s->optional_number("eta_coupling");
    c.pump.eta_smf = s->optional_number("eta_smf");
    c.pump.eta_slm = s->number("eta_slm", c.pump.eta_slm);
    s->finish();
  }

  if (auto s = top.child("second_source")) {
    c.spectrum.waist_ratio = s->number("waist_ratio", c.spectrum.waist_ratio);
    c.spectrum.signal_waist = s->quantity("signal_waist", Dimension::kLength, c.spectrum.signal_waist);
    c.spectrum.p_max = static_cast<int>(s->integer("p_max", c.spectrum.p_max));
    c.spectrum.ells.min = static_cast<int>(s->integer("ell_min", c.spectrum.ells.min));
    c.spectrum.ells.max = static_cast<int>(s->integer("ell_max", c.spectrum.ells.max));
    c.spectrum.phasematch.delta_k = s->number("delta_k", c.spectrum.phasematch.delta_k);
    c.spectrum.phasematch.crystal_length =
        s->quantity("crystal_length", Dimension::kLength, c.spectrum.phasematch.crystal_length);
    c.conversion_probability = s->number("conversion_probability", c.conversion_probability);
    c.radial_acceptance = s->array<double>("radial_acceptance", c.radial_acceptance);
    s->finish();
  }

  if (auto s = top.child("measurement")) {
    c.crosstalk_epsilon = s->number("crosstalk_epsilon", c.crosstalk_epsilon);
    const auto proj = s->array<int>("projection", {c.projection.ell_s, c.projection.ell_i});
    if (proj.size() != 2) throw ConfigError("measurement.projection must be [ell_s, ell_i]");
    c.projection = {proj[0], proj[1]};
    c.duration = s->quantity("duration", Dimension::kTime, c.duration);
    c.scan.ell_values = s->array<int>("ell_values", c.scan.ell_values);
    c.scan.time_per_setting = s->quantity("time_per_setting", Dimension::kTime, c.scan.time_per_setting);
    c.scan.cycles = static_cast<int>(s->integer("cycles", c.scan.cycles));
    s->finish();
  }

  if (auto s = top.child("detectors")) {
    if (auto d = s->child("default")) {
      DetectorSpec spec;
      detail::read_detector(*d, spec);
      c.detectors.fill(spec);
    }
    for (Channel ch : kAllChannels) {
      if (auto d = s->child(std::string(channel_name(ch)))) {
        detail::read_detector(*d, c.detectors[static_cast<std::size_t>(ch)]);
      }
    }
    s->finish();
  }

  if (auto s = top.child("analysis")) {
    auto& a = c.analysis;
    a.windows.pair_window = detail::to_ps(s->quantity("pair_window", Dimension::kTime, a.windows.pair_window * 1e-12));
    a.windows.herald_window =
        detail::to_ps(s->quantity("herald_window", Dimension::kTime, a.windows.herald_window * 1e-12));
    a.windows.unheralded_window =
        detail::to_ps(s->quantity("unheralded_window", Dimension::kTime, a.windows.unheralded_window * 1e-12));
    a.time_bin = s->quantity("time_bin", Dimension::kTime, a.time_bin);
    a.heralded = s->boolean("heralded", a.heralded);
    a.hist_bin = detail::to_ps(s->quantity("histogram_bin", Dimension::kTime, a.hist_bin * 1e-12));
    a.hist_half_range =
        detail::to_ps(s->quantity("histogram_half_range", Dimension::kTime, a.hist_half_range * 1e-12));
    a.exclusion_factor = s->number("exclusion_factor", a.exclusion_factor);
    a.herald_offset = detail::to_ps(s->quantity("herald_offset", Dimension::kTime, a.herald_offset * 1e-12));
    a.pair_offset = detail::to_ps(s->quantity("pair_offset", Dimension::kTime, a.pair_offset * 1e-12));
    s->finish();
  }

  if (auto s = top.child("statistics")) {
    c.stats.target_power = s->quantity("target_drive_power", Dimension::kPower, c.stats.target_power);
    c.stats.n_max = static_cast<int>(s->integer("n_max", c.stats.n_max));
    s->finish();
  }

  if (auto s = top.child("rate_targets")) {
    c.rates.calibrate = s->boolean("calibrate", true);
    c.rates.heralded_per_hour = s->number("heralded_per_hour", c.rates.heralded_per_hour);
    c.rates.unheralded_per_hour = s->number("unheralded_per_hour", c.rates.unheralded_per_hour);
    c.rates.accidental_per_hour = s->number("accidental_per_hour", c.rates.accidental_per_hour);
    c.rates.flux_scale = s->number("flux_scale", c.rates.flux_scale);
    s->finish();
  }
  top.finish();

  // Structural checks that do not need the mode table.
  if (c.spectrum.ells.min > c.spectrum.ells.max) throw ConfigError("second_source: ell_min > ell_max");
  if (c.spectrum.p_max < 0) throw ConfigError("second_source.p_max must be >= 0");
  if (!(c.spectrum.waist_ratio > 0.0) || !(c.spectrum.signal_waist > 0.0)) {
    throw ConfigError("second_source: waists must be positive");
  }
  if (c.scan.ell_values.empty()) throw ConfigError("measurement.ell_values must not be empty");
  if (c.scan.cycles < 1) throw ConfigError("measurement.cycles must be >= 1");
  if (!(c.scan.time_per_setting >= 0.0)) throw ConfigError("measurement.time_per_setting must be >= 0");
  if (!(c.rates.flux_scale > 0.0)) throw ConfigError("rate_targets.flux_scale must be positive");
  if (!(c.stats.target_power >= 0.0)) throw ConfigError("statistics.target_drive_power must be >= 0");
  try {
    validate(c.analysis.windows);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("analysis: ") + e.what());
  }
  return c;
}

/// Reads and parses a config file. Missing or unreadable files raise
/// IoError; malformed JSON and invalid values raise ConfigError.
inline ToolConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Fully resolved configuration in SI units with sorted keys. Equal
/// configurations give equal dumps however they were written.
namespace detail {

/// Rounds every floating-point number to 12 significant digits, so unit
/// conversions ("30 um" vs 3e-5) give the same canonical text.
inline void round_numbers(Json& j) {
  if (j.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", j.get<double>());
    j = std::strtod(buf, nullptr);
  } else if (j.is_structured()) {
    for (auto& v : j) round_numbers(v);
  }
}

}  // namespace detail

inline Json canonical_json(const ToolConfig& c) {
  Json j;
  j["seed"] = c.seed;
  Json& fs = j["first_source"];
  fs["drive_power"] = c.drive_power;
  fs["drive_wavelength"] = c.drive_wavelength;
  fs["coherence_time"] = c.t_coh;
  fs["herald_coupling"] = c.herald_coupling;
  fs["herald_nd_transmission"] = c.herald_nd_transmission;
  fs["herald_split"] = c.herald_split;
  if (c.kappa.from_calibration) {
    fs["calibration"] = {{"coincidence_rate", c.kappa.coincidence_rate},
                         {"singles_rate", c.kappa.singles_rate},
                         {"power", c.kappa.power}};
  } else {
    fs["kappa"] = c.kappa.kappa;
  }
  Json& p = j["pump"];
  p["source"] = c.pump.source == PumpSource::kHeralded ? "heralded" : "coherent";
  p["ell"] = c.pump.ell;
  p["coherent_power"] = c.pump.coherent_power;
  p["wavelength"] = c.pump.wavelength;
  p["eta_det"] = c.pump.eta_det;
  if (c.pump.eta_coupling) p["eta_coupling"] = *c.pump.eta_coupling;
  if (c.pump.eta_smf) p["eta_smf"] = *c.pump.eta_smf;
  p["eta_slm"] = c.pump.eta_slm;
  Json& s = j["second_source"];
  s["waist_ratio"] = c.spectrum.waist_ratio;
  s["signal_waist"] = c.spectrum.signal_waist;
  s["p_max"] = c.spectrum.p_max;
  s["ell_min"] = c.spectrum.ells.min;
  s["ell_max"] = c.spectrum.ells.max;
  s["delta_k"] = c.spectrum.phasematch.delta_k;
  s["crystal_length"] = c.spectrum.phasematch.crystal_length;
  s["conversion_probability"] = c.conversion_probability;
  s["radial_acceptance"] = c.radial_acceptance;
  Json& m = j["measurement"];
  m["crosstalk_epsilon"] = c.crosstalk_epsilon;
  m["projection"] = {c.projection.ell_s, c.projection.ell_i};
  m["duration"] = c.duration;
  m["ell_values"] = c.scan.ell_values;
  m["time_per_setting"] = c.scan.time_per_setting;
  m["cycles"] = c.scan.cycles;
  for (Channel ch : kAllChannels) {
    const auto& d = c.detectors[static_cast<std::size_t>(ch)];
    j["detectors"][std::string(channel_name(ch))] = {{"efficiency", d.efficiency},
                                                     {"dark_rate", d.dark_rate},
                                                     {"jitter_sigma", d.jitter_sigma},
                                                     {"delay", d.delay}};
  }
  const auto& a = c.analysis;
  j["analysis"] = {{"pair_window", a.windows.pair_window * 1e-12},
                   {"herald_window", a.windows.herald_window * 1e-12},
                   {"unheralded_window", a.windows.unheralded_window * 1e-12},
                   {"time_bin", a.time_bin},
                   {"heralded", a.heralded},
                   {"histogram_bin", a.hist_bin * 1e-12},
                   {"histogram_half_range", a.hist_half_range * 1e-12},
                   {"exclusion_factor", a.exclusion_factor},
                   {"herald_offset", a.herald_offset * 1e-12},
                   {"pair_offset", a.pair_offset * 1e-12}};
  j["statistics"] = {{"target_drive_power", c.stats.target_power}, {"n_max", c.stats.n_max}};
  j["rate_targets"] = {{"calibrate", c.rates.calibrate},
                       {"heralded_per_hour", c.rates.heralded_per_hour},
                       {"unheralded_per_hour", c.rates.unheralded_per_hour},
                       {"accidental_per_hour", c.rates.accidental_per_hour},
                       {"flux_scale", c.rates.flux_scale}};
  detail::round_numbers(j);
  return j;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

inline std::string config_hash(const ToolConfig& c) { return sha256_hex(canonical_json(c).dump()); }

inline GainCalibration gain_calibration(const ToolConfig& c) {
  return calibrate_kappa(c.kappa.coincidence_rate, c.kappa.singles_rate, c.t_coh, c.kappa.power,
                         c.drive_wavelength);
}

inline double kappa_of(const ToolConfig& c) {
  return c.kappa.from_calibration ? gain_calibration(c).kappa : c.kappa.kappa;
}

inline LossBudget pump_budget(const ToolConfig& c) {
  try {
    if (c.pump.eta_smf) {
      LossBudget b{c.pump.eta_det, *c.pump.eta_smf, c.pump.eta_slm};
      validate(b);
      return b;
    }
    const double coup = c.pump.eta_coupling ? *c.pump.eta_coupling
                                            : c.kappa.coincidence_rate / c.kappa.singles_rate;
    return loss_budget_from_coupling(coup, c.pump.eta_det, c.pump.eta_slm);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("pump losses: ") + e.what());
  }
}

inline ModeWeightTable mode_table(const ToolConfig& c) {
  const LGModeSpec pump{0, c.pump.ell, c.spectrum.waist_ratio * c.spectrum.signal_waist};
  return spdc_mode_weights(pump, c.spectrum.signal_waist, c.spectrum.p_max, c.spectrum.ells,
                           c.spectrum.phasematch);
}

struct ResolvedExperiment {
  ExperimentConfig config;
  std::optional<RateCalibration> calibration;
};

/// Builds the simulator configuration: mode table from the second-source
/// geometry, kappa, pump budget, and (when requested) the rate calibration
/// of drive power, herald coupling and conversion probability.
inline ResolvedExperiment resolve_experiment(const ToolConfig& c) {
  ResolvedExperiment r;
  ExperimentConfig& e = r.config;
  e.drive_power = c.drive_power;
  e.drive_wavelength = c.drive_wavelength;
  e.t_coh = c.t_coh;
  e.kappa1 = kappa_of(c);
  e.herald_coupling = c.herald_coupling;
  e.herald_nd_transmission = c.herald_nd_transmission;
  e.herald_split = c.herald_split;
  e.pump_source = c.pump.source;
  e.pump_losses = pump_budget(c);
  e.pump_ell = c.pump.ell;
  e.coherent_power = c.pump.coherent_power;
  e.pump_wavelength = c.pump.wavelength;
  e.second_source.table = mode_table(c);
  e.second_source.conversion_probability = c.conversion_probability;
  e.second_source.radial_acceptance = c.radial_acceptance;
  e.crosstalk_epsilon = c.crosstalk_epsilon;
  e.detectors = c.detectors;
  e.projection = c.projection;
  e.duration = c.duration;
  e.seed = c.seed;
  validate(e);
  if (c.rates.calibrate) {
    if (e.pump_source != PumpSource::kHeralded) {
      throw ConfigError("rate_targets calibration needs pump.source = heralded");
    }
    const double k = c.rates.flux_scale / 3600.0;
    const RateTargets t{c.rates.heralded_per_hour * k, c.rates.unheralded_per_hour * k,
                        c.rates.accidental_per_hour * k};
    // Targets refer to measurement.projection.
    auto cal = calibrate_rates(e, t, c.analysis.windows);
    e.drive_power = cal.drive_power;
    e.herald_coupling = cal.herald_coupling;
    e.second_source.conversion_probability = cal.conversion_probability;
    r.calibration = std::move(cal);
  }
  return r;
}

}  // namespace cascade

#endif  // CASCADE_CONFIG_HPP
