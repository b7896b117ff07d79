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

// Test-only reference implementations. Nothing here may call into the
// library code paths it is used to check.

#ifndef CASCADE_TESTS_ORACLES_HPP
#define CASCADE_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/laguerre.hpp>

namespace oracle {

using Complex = std::complex<double>;

struct Mode {
  int p;
  int ell;
  double w;
};

/// LG mode in Cartesian coordinates; the vortex factor is (x +- i y)^|ell|.
inline Complex lg_cartesian(const Mode& m, double x, double y) {
  const unsigned al = static_cast<unsigned>(std::abs(m.ell));
  const double norm = std::sqrt(2.0 * boost::math::factorial<double>(m.p) /
                                (std::numbers::pi * boost::math::factorial<double>(m.p + al)));
  const double r2 = x * x + y * y;
  const Complex z(x, m.ell >= 0 ? y : -y);
  const Complex vortex = std::pow(z * (std::sqrt(2.0) / m.w), static_cast<int>(al));
  const double radial = boost::math::laguerre(static_cast<unsigned>(m.p), al, 2.0 * r2 / (m.w * m.w)) *
                        std::exp(-r2 / (m.w * m.w));
  return norm / m.w * vortex * radial;
}

/// Nested adaptive Gauss-Kronrod over a square, real part or imaginary part.
template <class F>
double integrate_2d(F f, double half_width, double tol) {
  using boost::math::quadrature::gauss_kronrod;
  auto outer = [&](double x) {
    auto inner = [&](double y) { return f(x, y); };
    return gauss_kronrod<double, 31>::integrate(inner, -half_width, half_width, 20, tol);
  };
  return gauss_kronrod<double, 31>::integrate(outer, -half_width, half_width, 20, tol);
}

/// Brute-force overlap integral of u_p u_s^* u_i^* over the plane.
inline Complex overlap_2d(const Mode& p, const Mode& s, const Mode& i) {
  const double a = 1.0 / (p.w * p.w) + 1.0 / (s.w * s.w) + 1.0 / (i.w * i.w);
  const double half = std::sqrt(120.0 / a);
  auto integrand = [&](double x, double y) {
    return lg_cartesian(p, x, y) * std::conj(lg_cartesian(s, x, y)) *
           std::conj(lg_cartesian(i, x, y));
  };
  const double re = integrate_2d([&](double x, double y) { return integrand(x, y).real(); }, half,
                                 1e-13);
  const double im = integrate_2d([&](double x, double y) { return integrand(x, y).imag(); }, half,
                                 1e-13);
  return {re, im};
}

/// Closed form for three fundamental Gaussians.
inline double three_gaussian_overlap(double wp, double ws, double wi) {
  const double a = 1.0 / (wp * wp) + 1.0 / (ws * ws) + 1.0 / (wi * wi);
  return std::pow(2.0 / std::numbers::pi, 1.5) / (wp * ws * wi) * std::numbers::pi / a;
}

// ---------------------------------------------------------------------------
// Coincidence-counting oracles: quadratic all-pairs scans.

inline std::vector<std::uint64_t> brute_histogram(const std::vector<std::uint64_t>& a,
                                                  const std::vector<std::uint64_t>& b,
                                                  std::int64_t bin, std::int64_t lo,
                                                  std::int64_t hi) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>((hi - lo) / bin), 0);
  for (auto ta : a) {
    for (auto tb : b) {
      const std::int64_t d = static_cast<std::int64_t>(tb) - static_cast<std::int64_t>(ta);
      if (d >= lo && d < hi) ++counts[static_cast<std::size_t>((d - lo) / bin)];
    }
  }
  return counts;
}

/// For each a in time order, pair with the earliest unused b inside
/// [t_a + offset - w/2, t_a + offset + w/2]. Returns matched (a index, b index).
inline std::vector<std::pair<std::size_t, std::size_t>> brute_greedy(
    const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b, std::int64_t window,
    std::int64_t offset) {
  std::vector<bool> used(b.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::int64_t half = window / 2;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::int64_t c = static_cast<std::int64_t>(a[i]) + offset;
    std::size_t best = b.size();
    for (std::size_t j = 0; j < b.size(); ++j) {
      const std::int64_t t = static_cast<std::int64_t>(b[j]);
      if (!used[j] && t >= c - half && t <= c + half) {
        if (best == b.size() || b[j] < b[best]) best = j;
      }
    }
    if (best != b.size()) {
      used[best] = true;
      out.emplace_back(i, best);
    }
  }
  return out;
}

inline std::uint64_t brute_heralded(const std::vector<std::uint64_t>& herald,
                                    const std::vector<std::uint64_t>& signal,
                                    const std::vector<std::uint64_t>& idler,
                                    std::int64_t pair_window, std::int64_t herald_window,
                                    std::int64_t herald_offset) {
  const auto pairs = brute_greedy(signal, idler, pair_window, 0);
  std::vector<std::uint64_t> pair_times;
  for (auto [si, ii] : pairs) pair_times.push_back(signal[si]);
  return brute_greedy(pair_times, herald, herald_window, herald_offset).size();
}

// Statistical test helpers.

/// Asymptotic Kolmogorov p-value of a one-sample test against U(0,1), with
/// Stephens' finite-sample correction.
inline double ks_uniform_pvalue(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, std::max((i + 1) / n - u[i], u[i] - i / n));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k < 100; ++k) {
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

/// Pearson chi-square homogeneity test of two count vectors.
inline double chi2_two_sample_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  double na = 0.0, nb = 0.0;
  for (double v : a) na += v;
  for (double v : b) nb += v;
  double chi2 = 0.0;
  int dof = -1;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double tot = a[k] + b[k];
    if (tot <= 0.0) continue;
    const double ea = tot * na / (na + nb), eb = tot * nb / (na + nb);
    chi2 += (a[k] - ea) * (a[k] - ea) / ea + (b[k] - eb) * (b[k] - eb) / eb;
    ++dof;
  }
  if (dof < 1) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
}

/// Goodness of fit of observed counts to expected counts.
inline double chi2_gof_pvalue(const std::vector<double>& obs, const std::vector<double>& expect) {
  double chi2 = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) chi2 += (obs[k] - expect[k]) * (obs[k] - expect[k]) / expect[k];
  const int dof = static_cast<int>(obs.size()) - 1;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
}

}  // namespace oracle

#endif  // CASCADE_TESTS_ORACLES_HPP
