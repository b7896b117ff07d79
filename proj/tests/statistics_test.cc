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

#include "cascade/statistics.hpp"

#include <random>
#include <sstream>

#include "gtest/gtest.h"

using namespace cascade;

namespace {

constexpr double kLambdaDrive = 524.59e-9;
constexpr double kTcoh = 0.3e-9;

void expect_valid(const PhotonNumberDistribution& d) { EXPECT_NO_THROW(validate(d)); }

}  // namespace

TEST(Tmsv, VacuumAtZeroGain) {
  const auto d = pn_tmsv(0.0, 4);
  EXPECT_EQ(d.probs[0], 1.0);
  for (int n = 1; n <= 4; ++n) EXPECT_EQ(d.probs[n], 0.0);
  EXPECT_EQ(d.tail_bound, 0.0);
}

TEST(Tmsv, LowGainSinglePairProbability) {
  const auto d = pn_tmsv(0.0424, 10);
  EXPECT_NEAR(d.probs[1], 1.8e-3, 0.05e-3);
  EXPECT_NEAR(d.probs[1], 0.0424 * 0.0424, 1e-5);
}

TEST(Tmsv, NormalizationAgainstGeometricSeries) {
  const auto d = pn_tmsv(0.5, 50);
  // Independent: closed-form geometric series sum_{n<=N} (1-x) x^n = 1 - x^{N+1}.
  const double x = std::pow(std::tanh(0.5), 2);
  EXPECT_NEAR(d.sum(), 1.0 - std::pow(x, 51), 1e-14);
  EXPECT_NEAR(d.sum() + d.tail_bound, 1.0, 1e-12);
}

TEST(Tmsv, GeometricRatioIsConstant) {
  const double gamma = 0.37;
  const auto d = pn_tmsv(gamma, 30);
  const double x = std::pow(std::tanh(gamma), 2);
  for (int n = 0; n < 30; ++n) EXPECT_NEAR(d.probs[n + 1] / d.probs[n], x, 1e-13);
}

TEST(Tmsv, TooSmallTruncationSuggestsNmax) {
  try {
    pn_tmsv(0.8, 3, 1e-12);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const int suggested = static_cast<int>(e.achieved());
    EXPECT_GT(suggested, 3);
    EXPECT_NO_THROW(pn_tmsv(0.8, suggested, 1e-12));
    EXPECT_THROW(pn_tmsv(0.8, suggested - 1, 1e-12), NumericalError);
  }
}

TEST(Tmsv, DefaultTruncationMeetsTailPolicy) {
  for (double g : {0.01, 0.2, 0.46, 1.0}) {
    const auto d = pn_tmsv(g);
    EXPECT_LT(d.tail_bound, 1e-12);
    expect_valid(d);
  }
}

TEST(Drive, AlphaAtCalibrationPower) {
  EXPECT_NEAR(alpha_from_drive(614e-6, kLambdaDrive, kTcoh), 697.0, 1.0);
  EXPECT_EQ(alpha_from_drive(0.0, kLambdaDrive, kTcoh), 0.0);
  EXPECT_NEAR(alpha_from_drive(4 * 614e-6, kLambdaDrive, kTcoh),
              2 * alpha_from_drive(614e-6, kLambdaDrive, kTcoh), 1e-9);
  EXPECT_THROW(alpha_from_drive(1e-3, 0.0, kTcoh), ParameterError);
  EXPECT_THROW(alpha_from_drive(1e-3, kLambdaDrive, -1.0), ParameterError);
}

TEST(Calibration, MeasuredRates) {
  const auto cal = calibrate_kappa(216e3, 1.13e6, kTcoh, 614e-6, kLambdaDrive);
  EXPECT_NEAR(cal.p1, 1.8e-3, 0.05 * 1.8e-3);
  EXPECT_NEAR(cal.kappa, 6.07e-5, 0.02 * 6.07e-5);
  EXPECT_FALSE(cal.low_gain_violation);
}

TEST(Calibration, PowerIndependent) {
  const auto a = calibrate_kappa(216e3, 1.13e6, kTcoh, 614e-6, kLambdaDrive);
  const auto b = calibrate_kappa(4 * 216e3, 4 * 1.13e6, kTcoh, 4 * 614e-6, kLambdaDrive);
  EXPECT_NEAR(b.kappa / a.kappa, 1.0, 1e-6);
}

TEST(Calibration, ForwardModelRoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> k(1e-5, 2e-4);
  std::uniform_real_distribution<double> p(1e-4, 2e-3);
  std::uniform_real_distribution<double> e(0.05, 0.9);
  for (int i = 0; i < 50; ++i) {
    const double kappa = k(rng);
    const double power = p(rng);
    const double eta = e(rng);
    const auto rates = forward_rates(kappa, power, kLambdaDrive, kTcoh, eta);
    const auto cal =
        calibrate_kappa(rates.coincidence_rate, rates.singles_rate, kTcoh, power, kLambdaDrive);
    EXPECT_NEAR(cal.kappa / kappa, 1.0, 1e-9);
    EXPECT_NEAR(cal.eta_coup / eta, 1.0, 1e-12);
  }
}

TEST(Calibration, Errors) {
  EXPECT_THROW(calibrate_kappa(2e6, 1e6, kTcoh, 1e-3, kLambdaDrive), ParameterError);
  const auto high = calibrate_kappa(1e6, 1.1e6, 1e-6, 1e-3, kLambdaDrive);
  EXPECT_TRUE(high.low_gain_violation);
}

TEST(Loss, IdentityAndTotalLoss) {
  const auto d = pn_tmsv(0.6, 40);
  const auto same = apply_loss(d, 1.0);
  EXPECT_EQ(same.probs, d.probs);
  const auto gone = apply_loss(d, 0.0);
  EXPECT_NEAR(gone.probs[0], 1.0, 1e-12);
  for (int n = 1; n <= gone.n_max(); ++n) EXPECT_EQ(gone.probs[n], 0.0);
}

TEST(Loss, MeanScalesWithTransmission) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> g(0.0, 1.2);
  std::uniform_real_distribution<double> e(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const auto d = pn_tmsv(g(rng));
    const double eta = e(rng);
    const auto out = apply_loss(d, eta);
    expect_valid(out);
    if (d.mean() > 0) EXPECT_NEAR(out.mean() / (eta * d.mean()), 1.0, 1e-10);
  }
}

TEST(Loss, Composes) {
  const auto d = pn_tmsv(0.9);
  const auto twice = apply_loss(apply_loss(d, 0.6), 0.3);
  const auto once = apply_loss(d, 0.18);
  for (int n = 0; n <= d.n_max(); ++n) EXPECT_NEAR(twice.probs[n], once.probs[n], 1e-13);
}

TEST(Loss, ThermalStaysThermal) {
  // A lossy two-mode squeezed vacuum marginal is thermal with mean eta*sinh^2.
  const double gamma = 0.46;
  const double eta = 0.27;
  const auto out = apply_loss(pn_tmsv(gamma), eta);
  const double nbar = eta * std::pow(std::sinh(gamma), 2);
  for (int n = 0; n < 10; ++n) {
    const double thermal = std::pow(nbar, n) / std::pow(1 + nbar, n + 1);
    EXPECT_NEAR(out.probs[n], thermal, 1e-12);
  }
}

TEST(Multipair, DirectRatio) {
  PhotonNumberDistribution d;
  d.probs = {0.89, 0.1, 0.01, 0.0};
  const auto r = multipair_ratio(d);
  EXPECT_FALSE(r.infinite);
  EXPECT_NEAR(r.ratio, 10.0, 1e-12);
}

TEST(Multipair, InfiniteWhenNoMultiPairs) {
  const auto r = multipair_ratio(fock_distribution(1));
  EXPECT_TRUE(r.infinite);
}

TEST(Multipair, HighPowerPumpAfterLoss) {
  const auto cal = calibrate_kappa(216e3, 1.13e6, kTcoh, 614e-6, kLambdaDrive);
  const auto budget = loss_budget_from_coupling(cal.eta_coup, 0.5, 0.7);
  EXPECT_NEAR(budget.eta_total(), 0.27, 0.005);
  const auto before = pn_tmsv(cal.gamma_at(72.7e-3));
  const auto r = multipair_ratio(apply_loss(before, budget.eta_total()));
  EXPECT_NEAR(r.ratio, 16.56, 0.5);
  EXPECT_LE(r.lower, r.ratio);
  EXPECT_GE(r.upper, r.ratio);
}

TEST(Multipair, SmallGainSeries) {
  // 1/(eta sinh^2 g) = (1/eta) (g^-2 - 1/3 + g^2/15 + ...)
  for (double eta : {1.0, 0.27}) {
    for (double g : {0.005, 0.01, 0.02, 0.05}) {
      const auto r = multipair_ratio(apply_loss(pn_tmsv(g), eta));
      const double series = (1.0 / (g * g) - 1.0 / 3.0 + g * g / 15.0) / eta;
      EXPECT_NEAR(r.ratio / series, 1.0, 0.01) << g << " " << eta;
    }
  }
}

TEST(Oam, FockPumpHasNoFluctuation) {
  const auto m = oam_fluctuation(fock_distribution(1), 2);
  EXPECT_DOUBLE_EQ(m.mean, 2.0);
  EXPECT_DOUBLE_EQ(m.std, 0.0);
}

TEST(Oam, PoissonianPump) {
  const auto m = oam_fluctuation(poisson_distribution(4.0), 1);
  EXPECT_NEAR(m.mean, 4.0, 1e-10);
  EXPECT_NEAR(m.std, 2.0, 1e-9);
  EXPECT_NEAR(m.std / m.mean, 0.5, 1e-9);
}

TEST(Oam, Vacuum) {
  const auto m = oam_fluctuation(pn_tmsv(0.0, 3), 5);
  EXPECT_EQ(m.mean, 0.0);
  EXPECT_EQ(m.std, 0.0);
}

TEST(DistributionCsv, RoundTrip) {
  const auto d = apply_loss(pn_tmsv(0.46), 0.27);
  std::stringstream ss;
  write_distribution_csv(d, ss);
  const std::string text = ss.str();
  EXPECT_EQ(text.rfind("n,prob\n0,", 0), 0u);
  EXPECT_NE(text.find("# tail_bound="), std::string::npos);
  const auto back = read_distribution_csv(ss);
  EXPECT_EQ(back.probs, d.probs);
  EXPECT_EQ(back.tail_bound, d.tail_bound);
}

TEST(DistributionCsv, RejectsGarbage) {
  std::stringstream ss("n,prob\n0,1\n2,0\n# tail_bound=0\n");
  EXPECT_THROW(read_distribution_csv(ss), FormatError);
}
