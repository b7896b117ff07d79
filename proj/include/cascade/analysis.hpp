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

// Coincidence analysis of time-tag streams: delay histograms, greedy
// window matching, accidental background estimation and assembly of OAM
// correlation matrices from projection scans.
//
// Delays and windows are signed picoseconds. A coincidence window of width
// w around a center c is the closed interval [c - w/2, c + w/2] with w/2
// rounded down.

#ifndef CASCADE_ANALYSIS_HPP
#define CASCADE_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/event_stream.hpp"

namespace cascade {

using Picoseconds = std::int64_t;

struct DelayHistogram {
  Picoseconds bin_width = 1;
  Picoseconds min_delay = 0;  // inclusive
  Picoseconds max_delay = 0;  // exclusive
  std::vector<std::uint64_t> counts;
  double integration_time = 0.0;  // [s]

  Picoseconds bin_start(std::size_t i) const {
    return min_delay + static_cast<Picoseconds>(i) * bin_width;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

struct CoincidenceWindows {
  Picoseconds pair_window = 1000;        // signal-idler, heralded analysis
  Picoseconds herald_window = 300;       // pair-herald
  Picoseconds unheralded_window = 400;   // signal-idler, unheralded analysis
};

inline void validate(const CoincidenceWindows& w) {
  if (w.pair_window <= 0 || w.herald_window <= 0 || w.unheralded_window <= 0) {
    throw ParameterError("coincidence windows must be positive");
  }
}

namespace detail {

inline void require_sorted(const EventStream& s) {
  if (!is_sorted(s)) {
    throw ParameterError("stream '" + std::string(channel_name(s.channel)) + "' is not time-ordered");
  }
}

inline Picoseconds as_signed(std::uint64_t t) { return static_cast<Picoseconds>(t); }

/// Greedy earliest matching of a against b. Calls on_match(i, j) for each
/// a[i] paired with b[j]; every b is used at most once.
template <class OnMatch>
void greedy_match(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b,
                  Picoseconds window, Picoseconds offset, OnMatch&& on_match) {
  const Picoseconds half = window / 2;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Picoseconds center = as_signed(a[i]) + offset;
    while (j < b.size() && as_signed(b[j]) < center - half) ++j;
    if (j < b.size() && as_signed(b[j]) <= center + half) {
      on_match(i, j);
      ++j;
    }
  }
}

}  // namespace detail

/// Histogram of all pairwise delays t_b - t_a in [min_delay, max_delay).
inline DelayHistogram cross_histogram(const EventStream& a, const EventStream& b,
                                      Picoseconds bin_width, Picoseconds min_delay,
                                      Picoseconds max_delay, double integration_time = 0.0) {
  if (bin_width <= 0) throw ParameterError("bin width must be positive");
  if (max_delay <= min_delay) throw ParameterError("empty delay range");
  if ((max_delay - min_delay) % bin_width != 0) {
    throw ParameterError("bin width must divide the delay range");
  }
  detail::require_sorted(a);
  detail::require_sorted(b);
  DelayHistogram h;
  h.bin_width = bin_width;
  h.min_delay = min_delay;
  h.max_delay = max_delay;
  h.integration_time = integration_time;
  h.counts.assign(static_cast<std::size_t>((max_delay - min_delay) / bin_width), 0);
  std::size_t lo = 0;
  for (std::uint64_t ta_u : a.timestamps) {
    const Picoseconds ta = detail::as_signed(ta_u);
    while (lo < b.size() && detail::as_signed(b.timestamps[lo]) - ta < min_delay) ++lo;
    for (std::size_t k = lo; k < b.size(); ++k) {
      const Picoseconds d = detail::as_signed(b.timestamps[k]) - ta;
      if (d >= max_delay) break;
      ++h.counts[static_cast<std::size_t>((d - min_delay) / bin_width)];
    }
  }
  return h;
}

/// Number of a-records that find an unused b-record within the window
/// centered at t_a + offset (greedy earliest pairing).
inline std::uint64_t count_coincidences(const EventStream& a, const EventStream& b,
                                        Picoseconds window, Picoseconds offset = 0) {
  if (window <= 0) throw ParameterError("window must be positive");
  detail::require_sorted(a);
  detail::require_sorted(b);
  std::uint64_t n = 0;
  detail::greedy_match(a.timestamps, b.timestamps, window, offset,
                       [&](std::size_t, std::size_t) { ++n; });
  return n;
}

/// Signal timestamps of signal-idler pairs found within the window.
inline EventStream pair_times(const EventStream& signal, const EventStream& idler,
                              Picoseconds window, Picoseconds offset = 0) {
  detail::require_sorted(signal);
  detail::require_sorted(idler);
  EventStream out;
  out.channel = Channel::kSignal;
  detail::greedy_match(signal.timestamps, idler.timestamps, window, offset,
                       [&](std::size_t i, std::size_t) { out.timestamps.push_back(signal.timestamps[i]); });
  return out;
}

/// Three-fold coincidences: signal-idler pairs within pair_window whose
/// signal time has a herald record within herald_window around
/// t_signal + herald_offset.
inline std::uint64_t heralded_coincidences(const EventStream& herald, const EventStream& signal,
                                           const EventStream& idler,
                                           const CoincidenceWindows& windows,
                                           Picoseconds herald_offset = 0) {
  validate(windows);
  detail::require_sorted(herald);
  const EventStream pairs = pair_times(signal, idler, windows.pair_window);
  std::uint64_t n = 0;
  detail::greedy_match(pairs.timestamps, herald.timestamps, windows.herald_window, herald_offset,
                       [&](std::size_t, std::size_t) { ++n; });
  return n;
}

struct AccidentalEstimate {
  double counts_per_window = 0.0;  // expected accidentals in one window over the integration time
  double counts_error = 0.0;       // standard error of counts_per_window
  double rate = 0.0;               // per window per second
  double rate_error = 0.0;
  std::size_t bins_used = 0;
};

struct DelayInterval {
  Picoseconds lo = 0;  // inclusive
  Picoseconds hi = 0;  // exclusive
};

/// Mean background level outside the exclusion interval, rescaled to one
/// coincidence window. A bin is used only when it lies entirely outside.
inline AccidentalEstimate accidental_rate(const DelayHistogram& hist, Picoseconds window,
                                          DelayInterval exclusion) {
  if (window <= 0) throw ParameterError("window must be positive");
  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const Picoseconds b0 = hist.bin_start(i);
    const Picoseconds b1 = b0 + hist.bin_width;
    if (b1 <= exclusion.lo || b0 >= exclusion.hi) {
      const double c = static_cast<double>(hist.counts[i]);
      sum += c;
      sum2 += c * c;
      ++n;
    }
  }
  if (n == 0) throw ParameterError("exclusion interval covers the whole histogram");
  AccidentalEstimate est;
  est.bins_used = n;
  const double mean = sum / n;
  // Standard error of the mean bin level: the larger of the sample spread
  // and the Poisson expectation (sparse histograms have tiny sample spread).
  const double var_sample = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1)) : mean;
  const double se = std::sqrt(std::max(var_sample, mean) / n);
  const double scale = static_cast<double>(window) / static_cast<double>(hist.bin_width);
  est.counts_per_window = mean * scale;
  est.counts_error = se * scale;
  if (hist.integration_time > 0.0) {
    est.rate = est.counts_per_window / hist.integration_time;
    est.rate_error = est.counts_error / hist.integration_time;
  }
  return est;
}

/// Center of the window-wide stretch of bins holding the most counts.
inline Picoseconds find_peak(const DelayHistogram& hist, Picoseconds window) {
  if (hist.counts.empty()) return 0;
  const std::size_t span =
      std::max<std::size_t>(1, static_cast<std::size_t>(window / hist.bin_width));
  std::uint64_t best = 0;
  std::size_t best_i = 0;
  std::uint64_t run = 0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    run += hist.counts[i];
    if (i >= span) run -= hist.counts[i - span];
    if (i + 1 >= span && run > best) {
      best = run;
      best_i = i + 1 - span;
    }
  }
  if (best == 0) {
    // Flat/empty: center the exclusion on zero delay.
    return 0;
  }
  return hist.bin_start(best_i) + static_cast<Picoseconds>(span) * hist.bin_width / 2;
}

/// Exclusion of +-factor windows around the histogram peak.
inline DelayInterval peak_exclusion(const DelayHistogram& hist, Picoseconds window,
                                    double factor = 3.0) {
  const Picoseconds c = find_peak(hist, window);
  const auto half = static_cast<Picoseconds>(std::llround(factor * static_cast<double>(window)));
  return {c - half, c + half};
}

// ---------------------------------------------------------------------------
// Correlation matrices

struct Setting {
  int ell_s = 0;
  int ell_i = 0;
  friend auto operator<=>(const Setting&, const Setting&) = default;
};

/// One measurement segment of a projection scan.
struct ScanSegment {
  Setting setting;
  double start_time = 0.0;  // wall-clock start [s], used for error time bins
  StreamBundle bundle;

  double duration() const { return static_cast<double>(bundle.duration_ps) * 1e-12; }
};

struct Scan {
  int pump_ell = 0;
  std::vector<ScanSegment> segments;
  std::string config_hash;
};

struct MatrixOptions {
  CoincidenceWindows windows;
  double time_bin = 5400.0;  // [s]
  bool heralded = true;
  Picoseconds hist_bin = 50;
  Picoseconds hist_half_range = 20000;
  double exclusion_factor = 3.0;
  Picoseconds herald_offset = 0;  // herald minus signal
  Picoseconds pair_offset = 0;    // idler minus signal
  std::vector<Setting> grid;      // expected cells; empty = product of seen ell values
};

struct CorrelationCell {
  std::uint64_t raw = 0;
  double integration_time = 0.0;     // [s]
  double accidental_counts = 0.0;    // estimated over the integration time
  double rate_per_hour = 0.0;        // accidental-corrected
  double error_per_hour = 0.0;
};

struct CorrelationMatrix {
  int pump_ell = 0;
  double time_bin = 5400.0;
  bool heralded = true;
  std::string config_hash;
  std::map<Setting, CorrelationCell> cells;  // ordered by (ell_s, ell_i)

  std::uint64_t total_raw() const {
    std::uint64_t s = 0;
    for (const auto& [k, c] : cells) s += c.raw;
    return s;
  }
};

/// Raw coincidences and the delay histogram used for accidental estimation
/// of one segment.
struct SegmentCounts {
  std::uint64_t raw = 0;
  DelayHistogram hist;
};

inline SegmentCounts analyze_segment(const StreamBundle& b, const MatrixOptions& opt) {
  const double T = static_cast<double>(b.duration_ps) * 1e-12;
  const auto& w = opt.windows;
  SegmentCounts out;
  if (opt.heralded) {
    const EventStream herald = merge_streams(b[Channel::kHeraldA], b[Channel::kHeraldB], Channel::kHeraldA);
    const EventStream pairs = pair_times(b[Channel::kSignal], b[Channel::kIdler], w.pair_window, opt.pair_offset);
    detail::greedy_match(pairs.timestamps, herald.timestamps, w.herald_window, opt.herald_offset,
                         [&](std::size_t, std::size_t) { ++out.raw; });
    out.hist = cross_histogram(pairs, herald, opt.hist_bin, opt.herald_offset - opt.hist_half_range,
                               opt.herald_offset + opt.hist_half_range, T);
  } else {
    out.raw = count_coincidences(b[Channel::kSignal], b[Channel::kIdler], w.unheralded_window,
                                 opt.pair_offset);
    out.hist = cross_histogram(b[Channel::kSignal], b[Channel::kIdler], opt.hist_bin,
                               opt.pair_offset - opt.hist_half_range,
                               opt.pair_offset + opt.hist_half_range, T);
  }
  return out;
}

/// Assembles per-cell raw counts, accidental-corrected rates and time-bin
/// error bars. Negative corrected rates are kept.
inline CorrelationMatrix build_matrix(const Scan& scan, const MatrixOptions& opt) {
  validate(opt.windows);
  if (!(opt.time_bin > 0.0)) throw ParameterError("time bin must be positive");
  if (opt.hist_half_range <= 0 || (2 * opt.hist_half_range) % opt.hist_bin != 0) {
    throw ParameterError("histogram range must be a positive multiple of the bin width");
  }

  struct Acc {
    std::uint64_t raw = 0;
    double T = 0.0;
    DelayHistogram hist;
    std::map<long long, std::pair<std::uint64_t, double>> bins;  // time bin -> (raw, T)
  };
  std::map<Setting, Acc> acc;
  for (const auto& seg : scan.segments) {
    const SegmentCounts sc = analyze_segment(seg.bundle, opt);
    Acc& a = acc[seg.setting];
    if (a.hist.counts.empty()) {
      a.hist = sc.hist;
      a.hist.integration_time = 0.0;
    } else {
      for (std::size_t i = 0; i < sc.hist.counts.size(); ++i) a.hist.counts[i] += sc.hist.counts[i];
    }
    a.raw += sc.raw;
    a.T += seg.duration();
    auto& bin = a.bins[static_cast<long long>(std::floor(seg.start_time / opt.time_bin))];
    bin.first += sc.raw;
    bin.second += seg.duration();
  }

  std::vector<Setting> grid = opt.grid;
  if (grid.empty()) {
    std::vector<int> ls, li;
    for (const auto& [k, v] : acc) {
      ls.push_back(k.ell_s);
      li.push_back(k.ell_i);
    }
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    std::sort(li.begin(), li.end());
    li.erase(std::unique(li.begin(), li.end()), li.end());
    for (int s : ls)
      for (int i : li) grid.push_back({s, i});
  }
  if (grid.empty()) throw ParameterError("scan has no segments");

  CorrelationMatrix m;
  m.pump_ell = scan.pump_ell;
  m.time_bin = opt.time_bin;
  m.heralded = opt.heralded;
  m.config_hash = scan.config_hash;
  const Picoseconds window = opt.heralded ? opt.windows.herald_window : opt.windows.unheralded_window;
  for (const Setting& s : grid) {
    auto it = acc.find(s);
    if (it == acc.end() || !(it->second.T > 0.0)) {
      throw ParameterError("no measurement time for cell (" + std::to_string(s.ell_s) + "," +
                           std::to_string(s.ell_i) + ")");
    }
    Acc& a = it->second;
    a.hist.integration_time = a.T;
    const AccidentalEstimate bg =
        accidental_rate(a.hist, window, peak_exclusion(a.hist, window, opt.exclusion_factor));
    CorrelationCell c;
    c.raw = a.raw;
    c.integration_time = a.T;
    c.accidental_counts = bg.counts_per_window;
    c.rate_per_hour = (static_cast<double>(a.raw) - bg.counts_per_window) / a.T * 3600.0;
    std::vector<double> rates;
    for (const auto& [k, b] : a.bins) {
      if (b.second > 0.0) rates.push_back((static_cast<double>(b.first) / b.second - bg.rate) * 3600.0);
    }
    if (rates.size() >= 2) {
      double mean = 0.0;
      for (double r : rates) mean += r;
      mean /= rates.size();
      double var = 0.0;
      for (double r : rates) var += (r - mean) * (r - mean);
      var /= (rates.size() - 1);
      c.error_per_hour = std::sqrt(var / rates.size());
    } else {
      c.error_per_hour = std::sqrt(static_cast<double>(a.raw) + bg.counts_error * bg.counts_error) /
                         a.T * 3600.0;
    }
    m.cells[s] = c;
  }
  return m;
}

/// Sample Pearson coefficient of the corrected rates, cells in (ell_s, ell_i) order.
inline double pearson(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  if (a.cells.size() != b.cells.size()) throw ParameterError("matrices have different cell sets");
  std::vector<double> x, y;
  for (auto ia = a.cells.begin(), ib = b.cells.begin(); ia != a.cells.end(); ++ia, ++ib) {
    if (ia->first != ib->first) throw ParameterError("matrices have different cell sets");
    x.push_back(ia->second.rate_per_hour);
    y.push_back(ib->second.rate_per_hour);
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericalError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Share of the corrected rate on cells with ell_s + ell_i = pump_ell, clamped to [0,1].
inline double diagonal_fraction(const CorrelationMatrix& m) {
  double diag = 0.0;
  double total = 0.0;
  for (const auto& [k, c] : m.cells) {
    total += c.rate_per_hour;
    if (k.ell_s + k.ell_i == m.pump_ell) diag += c.rate_per_hour;
  }
  if (!(total > 0.0)) throw NumericalError("diagonal fraction undefined: no positive counts");
  return std::clamp(diag / total, 0.0, 1.0);
}

}  // namespace cascade

#endif  // CASCADE_ANALYSIS_HPP
