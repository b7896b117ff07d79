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

// Laguerre-Gaussian modes, the three-mode transverse overlap and the
// longitudinal phase-matching factor of a down-conversion crystal.
//
// All profiles are evaluated in the waist plane. Lengths are in meters.

#ifndef CASCADE_MODES_HPP
#define CASCADE_MODES_HPP

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "cascade/errors.hpp"

namespace cascade {

using Complex = std::complex<double>;

struct LGModeSpec {
  int p = 0;      // radial index
  int ell = 0;    // topological charge
  double w0 = 1;  // waist radius [m]
};

inline void validate(const LGModeSpec& mode) {
  if (mode.p < 0) throw ParameterError("LG mode radial index must be >= 0");
  if (!(mode.w0 > 0.0) || !std::isfinite(mode.w0)) {
    throw ParameterError("LG mode waist must be positive");
  }
}

struct PhaseMatchParams {
  double delta_k = 0.0;         // k_p - k_s - k_i [rad/m]
  double crystal_length = 1.0;  // [m]
};

inline void validate(const PhaseMatchParams& pm) {
  if (!(pm.crystal_length > 0.0)) throw ParameterError("crystal length must be positive");
  if (!std::isfinite(pm.delta_k)) throw ParameterError("delta_k must be finite");
}

/// Generalized Laguerre polynomial L_n^{(alpha)}(x) by upward recurrence.
inline double laguerre(int n, double alpha, double x) {
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = 1.0 + alpha - x;
  for (int k = 1; k < n; ++k) {
    double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Real radial profile R(rho) with u(rho, phi) = R(rho) exp(i ell phi).
inline double lg_radial(const LGModeSpec& mode, double rho) {
  const int al = std::abs(mode.ell);
  const double w = mode.w0;
  const double log_norm = 0.5 * (std::log(2.0) + std::lgamma(mode.p + 1.0) -
                                 std::log(std::numbers::pi) - std::lgamma(mode.p + al + 1.0));
  const double s = std::sqrt(2.0) * rho / w;
  const double x = s * s;
  return std::exp(log_norm) / w * std::pow(s, al) * laguerre(mode.p, al, x) *
         std::exp(-rho * rho / (w * w));
}

/// Normalized LG mode value at the waist plane.
inline Complex eval_lg(const LGModeSpec& mode, double rho, double phi) {
  validate(mode);
  if (rho < 0.0) throw ParameterError("radius must be non-negative");
  return lg_radial(mode, rho) * std::polar(1.0, mode.ell * phi);
}

/// Nodes and weights of an n-point Gauss-Laguerre rule for
/// integral_0^inf e^{-t} f(t) dt.
struct GaussLaguerreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussLaguerreRule gauss_laguerre(int n) {
  if (n < 1) throw ParameterError("Gauss-Laguerre rule needs at least one node");
  GaussLaguerreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    // Initial guesses from Stroud & Secrest.
    if (i == 0) {
      z = 3.0 / (1.0 + 2.4 * n);
    } else if (i == 1) {
      z += 15.0 / (1.0 + 2.5 * n);
    } else {
      const double ai = i - 1;
      z += ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - rule.nodes[i - 2]);
    }
    double pn = 0.0;
    double pnm1 = 0.0;
    int it = 0;
    for (; it < 100; ++it) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0 - z) * p2 - j * p3) / (j + 1.0);
      }
      pn = p1;
      pnm1 = p2;
      const double deriv = n * (pn - pnm1) / z;
      const double dz = pn / deriv;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    if (it == 100) throw NumericalError("Gauss-Laguerre node iteration did not converge");
    // Recompute L_{n-1} at the converged node for the weight.
    double p1 = 1.0;
    double p2 = 0.0;
    for (int j = 0; j < n - 1; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j + 1.0 - z) * p2 - j * p3) / (j + 1.0);
    }
    rule.nodes[i] = z;
    rule.weights[i] = z / (static_cast<double>(n) * n * p1 * p1);
  }
  return rule;
}

struct QuadratureOptions {
  double rel_tol = 1e-10;
  int initial_nodes = 8;
  int max_nodes = 128;
};

/// Transverse overlap integral of a pump mode with the conjugated product of
/// signal and idler modes. Zero exactly unless ell_p == ell_s + ell_i.
///
/// The azimuthal integral is done analytically (2 pi); the remaining radial
/// integrand is a polynomial in t = a rho^2 times e^{-t}, with
/// a = sum of 1/w^2, and is integrated by Gauss-Laguerre quadrature with the
/// node count doubled until two successive estimates agree.
inline Complex overlap_integral(const LGModeSpec& pump, const LGModeSpec& signal,
                                const LGModeSpec& idler, const QuadratureOptions& opts = {}) {
  validate(pump);
  validate(signal);
  validate(idler);
  if (pump.ell != signal.ell + idler.ell) return Complex(0.0, 0.0);

  const double a = 1.0 / (pump.w0 * pump.w0) + 1.0 / (signal.w0 * signal.w0) +
                   1.0 / (idler.w0 * idler.w0);
  // The Gaussian envelopes are absorbed into e^{-t}; evaluate the remaining
  // polynomial factor of each mode at rho^2 = t / a.
  auto envelope_free = [a](const LGModeSpec& m, double t) {
    const int al = std::abs(m.ell);
    const double log_norm = 0.5 * (std::log(2.0) + std::lgamma(m.p + 1.0) -
                                   std::log(std::numbers::pi) - std::lgamma(m.p + al + 1.0));
    const double x = 2.0 * t / (a * m.w0 * m.w0);
    return std::exp(log_norm) / m.w0 * std::pow(x, 0.5 * al) * laguerre(m.p, al, x);
  };
  auto integrate = [&](int n, double* abs_sum) {
    const GaussLaguerreRule rule = gauss_laguerre(n);
    double sum = 0.0;
    double asum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double t = rule.nodes[k];
      const double f = envelope_free(pump, t) * envelope_free(signal, t) * envelope_free(idler, t);
      sum += rule.weights[k] * f;
      asum += rule.weights[k] * std::abs(f);
    }
    if (abs_sum) *abs_sum = asum;
    return sum;
  };

  int n = std::max(1, opts.initial_nodes);
  double scale = 0.0;
  double prev = integrate(n, &scale);
  double err = 0.0;
  while (2 * n <= opts.max_nodes) {
    n *= 2;
    const double cur = integrate(n, &scale);
    err = std::abs(cur - prev);
    // Cancellation can leave a result far below the integrand's magnitude;
    // measure agreement against that magnitude in that case.
    const double ref = std::max(std::abs(cur), 1e-6 * scale);
    if (err <= opts.rel_tol * ref) {
      // rho d rho = dt / (2a); azimuthal integral contributes 2 pi.
      return Complex(2.0 * std::numbers::pi * cur / (2.0 * a), 0.0);
    }
    prev = cur;
  }
  throw NumericalError("overlap quadrature did not converge within " +
                           std::to_string(opts.max_nodes) + " nodes",
                       err);
}

/// integral_0^L exp(i dk z) dz = L exp(i dk L / 2) sinc(dk L / 2).
inline Complex phasematch_amplitude(const PhaseMatchParams& pm) {
  validate(pm);
  const double half = 0.5 * pm.delta_k * pm.crystal_length;
  const double sinc = half == 0.0 ? 1.0 : std::sin(half) / half;
  return pm.crystal_length * sinc * std::polar(1.0, half);
}

struct ModeIndex {
  int p = 0;
  int ell = 0;
  friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

struct ModeWeightEntry {
  ModeIndex signal;
  ModeIndex idler;
  double weight = 0.0;
};

struct ModeWeightTable {
  LGModeSpec pump;
  std::vector<ModeWeightEntry> entries;
  bool normalized = false;

  double total() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight;
    return s;
  }
  /// Weight of one (signal, idler) entry, 0 if absent.
  double weight(ModeIndex s, ModeIndex i) const {
    for (const auto& e : entries) {
      if (e.signal == s && e.idler == i) return e.weight;
    }
    return 0.0;
  }
};

struct EllRange {
  int min = -1;
  int max = 1;
};

/// Down-conversion weights |Lambda * Phi|^2 over all (signal, idler) modes with
/// p <= p_max and ell in the given range, normalized over the table when the
/// total is nonzero.
inline ModeWeightTable spdc_mode_weights(const LGModeSpec& pump, double signal_idler_waist,
                                         int p_max, EllRange ells,
                                         const PhaseMatchParams& phasematch,
                                         const QuadratureOptions& opts = {}) {
  validate(pump);
  if (p_max < 0) throw ParameterError("p_max must be >= 0");
  if (ells.min > ells.max) throw ParameterError("empty ell range");
  if (!(signal_idler_waist > 0.0)) throw ParameterError("signal/idler waist must be positive");
  const double pm2 = std::norm(phasematch_amplitude(phasematch));

  ModeWeightTable table;
  table.pump = pump;
  for (int ps = 0; ps <= p_max; ++ps) {
    for (int ls = ells.min; ls <= ells.max; ++ls) {
      for (int pi = 0; pi <= p_max; ++pi) {
        for (int li = ells.min; li <= ells.max; ++li) {
          const LGModeSpec s{ps, ls, signal_idler_waist};
          const LGModeSpec i{pi, li, signal_idler_waist};
          const double w = std::norm(overlap_integral(pump, s, i, opts)) * pm2;
          table.entries.push_back({{ps, ls}, {pi, li}, w});
        }
      }
    }
  }
  const double total = table.total();
  if (total > 0.0) {
    for (auto& e : table.entries) e.weight /= total;
    table.normalized = true;
  }
  return table;
}

/// CSV export: header p_s,ell_s,p_i,ell_i,weight; 12 significant digits.
inline void write_mode_weights_csv(const ModeWeightTable& table, std::ostream& os) {
  os << "p_s,ell_s,p_i,ell_i,weight\n";
  char buf[64];
  for (const auto& e : table.entries) {
    std::snprintf(buf, sizeof buf, "%.11e", e.weight);
    os << e.signal.p << ',' << e.signal.ell << ',' << e.idler.p << ',' << e.idler.ell << ','
       << buf << '\n';
  }
}

}  // namespace cascade

#endif  // CASCADE_MODES_HPP
