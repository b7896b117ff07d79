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

// Photon-number statistics of a heralded down-conversion source: the
// two-mode squeezed vacuum, gain calibration from measured rates, and
// beam-splitter loss.

#ifndef CASCADE_STATISTICS_HPP
#define CASCADE_STATISTICS_HPP

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/units.hpp"

namespace cascade {

/// Truncated photon-number distribution. tail_bound bounds the probability
/// mass above n_max that is not represented in probs.
struct PhotonNumberDistribution {
  std::vector<double> probs;
  double tail_bound = 0.0;

  int n_max() const { return static_cast<int>(probs.size()) - 1; }
  double prob(int n) const {
    return n >= 0 && n < static_cast<int>(probs.size()) ? probs[n] : 0.0;
  }
  double sum() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }
  double mean() const {
    double m = 0.0;
    for (std::size_t n = 0; n < probs.size(); ++n) m += n * probs[n];
    return m;
  }
  double variance() const {
    const double mu = mean();
    double v = 0.0;
    for (std::size_t n = 0; n < probs.size(); ++n) v += (n - mu) * (n - mu) * probs[n];
    return v;
  }
};

inline void validate(const PhotonNumberDistribution& d) {
  if (d.probs.empty()) throw ParameterError("distribution has no support");
  for (double p : d.probs) {
    if (!(p >= 0.0) || p > 1.0 + 1e-12) throw ParameterError("probability outside [0,1]");
  }
  if (!(d.tail_bound >= 0.0)) throw ParameterError("tail bound must be non-negative");
  const double s = d.sum();
  if (s > 1.0 + 1e-12 || s + d.tail_bound < 1.0 - 1e-12) {
    throw ParameterError("distribution is not normalized within its tail bound");
  }
}

inline constexpr double kDefaultTailBound = 1e-12;
/// Gains at or above this are outside the low-gain approximation P(1) = gamma^2.
inline constexpr double kLowGainLimit = 0.1;

/// Smallest n_max whose geometric tail x^(n_max+1) is below max_tail.
inline int tmsv_n_max_for_tail(double gamma, double max_tail) {
  const double t = std::tanh(gamma);
  const double x = t * t;
  if (x == 0.0) return 0;
  // x^(n+1) <= max_tail  <=>  n + 1 >= log(max_tail)/log(x)
  int n = std::max(0, static_cast<int>(std::ceil(std::log(max_tail) / std::log(x))) - 1);
  while (n > 0 && std::pow(x, n) <= max_tail) --n;
  while (std::pow(x, n + 1) > max_tail) ++n;
  return n;
}

/// Two-mode squeezed vacuum: P(n) = tanh^{2n}(gamma) / cosh^2(gamma).
/// The unrepresented tail is exactly tanh^{2(n_max+1)}(gamma). When a
/// max_tail is given and exceeded, throws NumericalError whose achieved()
/// carries the suggested n_max.
inline PhotonNumberDistribution pn_tmsv(double gamma, int n_max, double max_tail = 1.0) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ParameterError("gain must be >= 0");
  if (n_max < 0) throw ParameterError("n_max must be >= 0");
  const double t = std::tanh(gamma);
  const double x = t * t;
  PhotonNumberDistribution d;
  d.probs.resize(n_max + 1);
  double term = 1.0 - x;  // 1/cosh^2 = 1 - tanh^2
  for (int n = 0; n <= n_max; ++n) {
    d.probs[n] = term;
    term *= x;
  }
  d.tail_bound = std::pow(x, n_max + 1);
  if (d.tail_bound > max_tail) {
    const int suggested = tmsv_n_max_for_tail(gamma, max_tail);
    throw NumericalError("n_max=" + std::to_string(n_max) + " leaves a tail above the requested " +
                             "bound; use n_max >= " + std::to_string(suggested),
                         suggested);
  }
  return d;
}

/// pn_tmsv truncated so the tail is below 1e-12.
inline PhotonNumberDistribution pn_tmsv(double gamma) {
  return pn_tmsv(gamma, tmsv_n_max_for_tail(gamma, kDefaultTailBound));
}

/// Poissonian reference with the same tail policy; the tail is the exact
/// remainder 1 - sum.
inline PhotonNumberDistribution poisson_distribution(double mean,
                                                     double max_tail = kDefaultTailBound) {
  if (!(mean >= 0.0)) throw ParameterError("mean must be >= 0");
  PhotonNumberDistribution d;
  double term = std::exp(-mean);
  double acc = 0.0;
  int n = 0;
  for (;; ++n) {
    d.probs.push_back(term);
    acc += term;
    // Remaining terms decrease geometrically once n > mean.
    if (n > mean && 1.0 - acc < max_tail) break;
    if (n > 100000) throw NumericalError("Poisson truncation failed");
    term *= mean / (n + 1);
  }
  d.tail_bound = std::max(0.0, 1.0 - acc);
  return d;
}

inline PhotonNumberDistribution fock_distribution(int n) {
  if (n < 0) throw ParameterError("photon number must be >= 0");
  PhotonNumberDistribution d;
  d.probs.assign(n + 1, 0.0);
  d.probs[n] = 1.0;
  return d;
}

/// Mean drive photon number amplitude within one coherence time:
/// sqrt(P t_coh / (hbar 2 pi c / lambda)).
inline double alpha_from_drive(double power, double lambda_d, double t_coh) {
  if (!(power >= 0.0)) throw ParameterError("drive power must be >= 0");
  if (!(lambda_d > 0.0)) throw ParameterError("drive wavelength must be positive");
  if (!(t_coh > 0.0)) throw ParameterError("coherence time must be positive");
  return std::sqrt(power * t_coh / photon_energy(lambda_d));
}

struct LossBudget {
  double eta_det = 1.0;  // pump-arm detector efficiency used for the estimate
  double eta_smf = 1.0;  // fiber coupling
  double eta_slm = 1.0;  // modulator diffraction efficiency

  double eta_total() const { return eta_smf * eta_slm; }
};

inline void validate(const LossBudget& b) {
  for (double v : {b.eta_det, b.eta_smf, b.eta_slm}) {
    if (!(v > 0.0 && v <= 1.0)) throw ParameterError("loss factors must lie in (0, 1]");
  }
}

/// Builds the budget from a measured coupling efficiency: eta_smf = eta_coup / eta_det.
inline LossBudget loss_budget_from_coupling(double eta_coup, double eta_det, double eta_slm) {
  LossBudget b{eta_det, eta_coup / eta_det, eta_slm};
  validate(b);
  return b;
}

struct GainCalibration {
  double kappa = 0.0;   // gamma per sqrt(drive photon)
  double t_coh = 0.0;   // [s]
  double lambda_d = 0;  // [m]

  // Intermediate values of the calibration.
  double eta_coup = 0.0;
  double p1 = 0.0;
  double gamma = 0.0;
  double alpha = 0.0;
  bool low_gain_violation = false;

  /// Parametric gain at another drive power.
  double gamma_at(double power) const { return kappa * alpha_from_drive(power, lambda_d, t_coh); }
};

inline GainCalibration calibrate_kappa(double coincidence_rate, double singles_rate, double t_coh,
                                       double power, double lambda_d) {
  if (!(coincidence_rate > 0.0)) throw ParameterError("coincidence rate must be positive");
  if (coincidence_rate > singles_rate) {
    throw ParameterError("coincidence rate exceeds singles rate");
  }
  if (!(power > 0.0)) throw ParameterError("calibration power must be positive");
  GainCalibration cal;
  cal.t_coh = t_coh;
  cal.lambda_d = lambda_d;
  cal.eta_coup = coincidence_rate / singles_rate;
  cal.p1 = singles_rate / cal.eta_coup * t_coh;
  cal.gamma = std::sqrt(cal.p1);
  cal.alpha = alpha_from_drive(power, lambda_d, t_coh);
  cal.kappa = cal.gamma / cal.alpha;
  cal.low_gain_violation = cal.gamma >= kLowGainLimit;
  return cal;
}

/// Measured rates predicted by the low-gain forward model.
struct CalibrationRates {
  double coincidence_rate;
  double singles_rate;
};

inline CalibrationRates forward_rates(double kappa, double power, double lambda_d, double t_coh,
                                      double eta_coup) {
  const double gamma = kappa * alpha_from_drive(power, lambda_d, t_coh);
  const double p1 = gamma * gamma;
  const double singles = p1 * eta_coup / t_coh;
  return {eta_coup * singles, singles};
}

/// Beam-splitter loss: P'(n) = sum_{j>=n} P(j) C(j,n) eta^n (1-eta)^{j-n}.
inline PhotonNumberDistribution apply_loss(const PhotonNumberDistribution& dist, double eta) {
  validate(dist);
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("transmission must lie in [0, 1]");
  PhotonNumberDistribution out;
  out.tail_bound = dist.tail_bound;
  const int nmax = dist.n_max();
  out.probs.assign(nmax + 1, 0.0);
  if (eta == 1.0) {
    out.probs = dist.probs;
    return out;
  }
  if (eta == 0.0) {
    out.probs[0] = dist.sum();
    return out;
  }
  const double le = std::log(eta);
  const double l1e = std::log1p(-eta);
  for (int j = 0; j <= nmax; ++j) {
    const double pj = dist.probs[j];
    if (pj == 0.0) continue;
    for (int n = 0; n <= j; ++n) {
      const double log_binom =
          std::lgamma(j + 1.0) - std::lgamma(n + 1.0) - std::lgamma(j - n + 1.0);
      out.probs[n] += pj * std::exp(log_binom + n * le + (j - n) * l1e);
    }
  }
  return out;
}

/// P(1) / P(>1). The bounds account for the unrepresented tail mass.
struct MultipairRatio {
  double ratio = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool infinite = false;  // P(>1) vanishes within the tail bound
};

inline MultipairRatio multipair_ratio(const PhotonNumberDistribution& dist) {
  validate(dist);
  const double p1 = dist.prob(1);
  double multi = 0.0;
  for (int n = 2; n <= dist.n_max(); ++n) multi += dist.probs[n];
  MultipairRatio r;
  if (multi <= 0.0) {
    r.infinite = true;
    r.ratio = r.upper = std::numeric_limits<double>::infinity();
    r.lower = dist.tail_bound > 0.0 ? p1 / dist.tail_bound : r.upper;
    return r;
  }
  r.ratio = p1 / multi;
  r.lower = p1 / (multi + dist.tail_bound);
  r.upper = (p1 + dist.tail_bound) / multi;
  return r;
}

struct OamMoments {
  double mean = 0.0;  // units of hbar
  double std = 0.0;   // units of hbar
};

/// Total OAM carried by a pump of charge ell_p with the given photon statistics.
inline OamMoments oam_fluctuation(const PhotonNumberDistribution& dist, int ell_p) {
  validate(dist);
  return {ell_p * dist.mean(), std::abs(ell_p) * std::sqrt(std::max(0.0, dist.variance()))};
}

/// CSV: header "n,prob", trailing "# tail_bound=<value>".
inline void write_distribution_csv(const PhotonNumberDistribution& d, std::ostream& os) {
  char buf[64];
  os << "n,prob\n";
  for (std::size_t n = 0; n < d.probs.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%.17g", d.probs[n]);
    os << n << ',' << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.17g", d.tail_bound);
  os << "# tail_bound=" << buf << '\n';
}

inline PhotonNumberDistribution read_distribution_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "n,prob") {
    throw FormatError(FormatError::Kind::kCorrupt, "missing 'n,prob' header");
  }
  PhotonNumberDistribution d;
  bool have_tail = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# tail_bound=", 0) == 0) {
      d.tail_bound = std::stod(line.substr(13));
      have_tail = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(FormatError::Kind::kCorrupt, "malformed line '" + line + "'");
    }
    const long n = std::stol(line.substr(0, comma));
    if (n != static_cast<long>(d.probs.size())) {
      throw FormatError(FormatError::Kind::kCorrupt, "photon numbers must be consecutive from 0");
    }
    d.probs.push_back(std::stod(line.substr(comma + 1)));
  }
  if (!have_tail) throw FormatError(FormatError::Kind::kCorrupt, "missing tail_bound line");
  validate(d);
  return d;
}

}  // namespace cascade

#endif  // CASCADE_STATISTICS_HPP
