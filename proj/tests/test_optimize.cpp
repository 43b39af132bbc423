#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qreadout/analysis.h"
#include "qreadout/error.h"
#include "qreadout/optimize.h"
#include "qreadout/units.h"

using namespace qreadout;

namespace {

double chi_rate(const DeviceParams& p) { return std::abs(angular(derive(p).chi)); }

std::vector<double> taus_for(const DeviceParams& p, std::initializer_list<double> chi_tau) {
  std::vector<double> t;
  for (double x : chi_tau) t.push_back(x / chi_rate(p));
  return t;
}

}  // namespace

TEST(OptimalRatio, QssAsymptoteIsOneHalf) {
  const DeviceParams p;
  const auto taus = taus_for(p, {20.0, 25.0, 40.0, 80.0});
  for (const RatioPoint& r : optimal_ratio_vs_tau(p, taus, SignalModel::qss)) {
    EXPECT_NEAR(r.ratio, 0.5, 0.005) << r.chi_tau;
    EXPECT_TRUE(r.unimodal);
  }
}

TEST(OptimalRatio, ShortTimesFavorWiderLinewidth) {
  const DeviceParams p;
  const auto r = optimal_ratio_vs_tau(p, taus_for(p, {2.0, 4.0}), SignalModel::qss);
  EXPECT_LT(r[0].ratio, 0.45);
  EXPECT_LT(r[1].ratio, 0.5);
  EXPECT_NEAR(r[0].chi_tau, 2.0, 1e-12);
}

TEST(OptimalRatio, QssAsymptoteIndependentOfDevice) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    DeviceParams p;
    p.alpha = -(200e6 + 200e6 * u(rng));
    p.omega_q = p.omega_r + 1000e6 + 1000e6 * u(rng);
    p.g = 80e6 + 110e6 * u(rng);
    p.n_drive = (0.05 + 0.2 * u(rng)) * derive(p).n_crit;
    SCOPED_TRACE(trial);
    const auto r = optimal_ratio_vs_tau(p, taus_for(p, {25.0}), SignalModel::qss);
    EXPECT_NEAR(r.front().ratio, 0.5, 0.005);
  }
}

TEST(OptimalRatio, RisesUntilFirstReachingAsymptote) {
  const DeviceParams p;
  std::vector<double> chi_tau;
  for (double x = 0.5; x <= 40.0; x *= 1.15) chi_tau.push_back(x);
  std::vector<double> taus;
  for (double x : chi_tau) taus.push_back(x / chi_rate(p));
  const auto r = optimal_ratio_vs_tau(p, taus, SignalModel::qss);
  std::size_t k = 1;
  for (; k < r.size() && r[k - 1].ratio < 0.5; ++k) EXPECT_GT(r[k].ratio, r[k - 1].ratio);
  // Past the first crossing the curve rings about 0.5 with a small overshoot.
  for (; k < r.size(); ++k) EXPECT_NEAR(r[k].ratio, 0.5, 0.01) << r[k].chi_tau;
  EXPECT_NEAR(r.back().ratio, 0.5, 1e-4);
}

TEST(OptimalRatio, SteadyStateOptimum) {
  const DeviceParams p;
  // d S_ss / d kappa_eff vanishes at kappa_eff = 2 |chi|.
  EXPECT_NEAR(steady_state_optimal_ratio(p, SignalModel::qss), 0.5, 0.5e-3);
  EXPECT_NEAR(steady_state_optimal_ratio(p, SignalModel::full), 0.5, 0.005);
}

TEST(OptimalRatio, FullModelTrailsQss) {
  const DeviceParams p;
  const std::vector<double> taus{24e-9, 40e-9, 56e-9, 100e-9, 200e-9};
  const auto q = optimal_ratio_vs_tau(p, taus, SignalModel::qss);
  const auto f = optimal_ratio_vs_tau(p, taus, SignalModel::full);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    EXPECT_LT(f[i].ratio, q[i].ratio) << taus[i];
    if (i > 0) EXPECT_GT(f[i].ratio, f[i - 1].ratio);
  }
}

TEST(OptimalRatio, ArgmaxInvariantUnderDriveScaling) {
  DeviceParams p;
  const std::vector<double> taus{30e-9, 56e-9, 150e-9};
  for (SignalModel model : {SignalModel::qss, SignalModel::full}) {
    const auto base = optimal_ratio_vs_tau(p, taus, model);
    for (double c : {0.1, 3.7}) {
      DeviceParams q = p;
      q.n_drive = c * p.n_drive;
      const auto scaled = optimal_ratio_vs_tau(q, taus, model);
      for (std::size_t i = 0; i < taus.size(); ++i) {
        EXPECT_NEAR(scaled[i].ratio, base[i].ratio, 1e-5 * base[i].ratio);
        EXPECT_NEAR(scaled[i].rate, std::sqrt(c) * base[i].rate, 1e-6 * base[i].rate);
      }
    }
  }
}

TEST(OptimalRatio, Errors) {
  DeviceParams p;
  const std::vector<double> bad{56e-9, -1e-9};
  EXPECT_THROW(optimal_ratio_vs_tau(p, bad, SignalModel::qss), ConfigError);
  p.alpha = 0.0;
  const std::vector<double> ok{56e-9};
  EXPECT_THROW(optimal_ratio_vs_tau(p, ok, SignalModel::qss), ConfigError);
  EXPECT_THROW(rate_at_kappa(DeviceParams{}, -7.7e6, 15e6, 0.0, SignalModel::qss), ConfigError);
}

TEST(OptimalRatio, CouplingForLinewidthInvertsDerive) {
  DeviceParams p;
  for (double k : {5e6, 20e6, 38.7481442e6, 90e6}) {
    p.J = coupling_for_linewidth(DeviceParams{}, k);
    EXPECT_NEAR(derive(p).kappa_eff, k, 1e-9 * k);
  }
}

TEST(SignalFamily, SettlingTimeScalesInverselyWithChi) {
  const std::vector<double> chis{-3e6, -7.9e6, -15.8e6};
  const std::vector<double> ratio{0.5};
  const auto fam = signal_family(chis, ratio, TimeGrid{0.0, 0.02e-9, 40001});
  ASSERT_EQ(fam.size(), 3u);
  std::vector<double> product;
  for (const auto& m : fam) {
    const auto t = time_to_fraction(m.signal, m.steady_state, 0.95);
    ASSERT_TRUE(t.has_value());
    product.push_back(*t * std::abs(m.chi));
  }
  for (double x : product) EXPECT_NEAR(x, product[1], 0.05 * product[1]);
}

TEST(SignalFamily, SmallRatioWinsAtShortTimes) {
  const std::vector<double> chis{-7.9e6};
  const std::vector<double> ratios{0.2, 0.5};
  const TimeGrid grid{0.0, 0.1e-9, 501};
  const auto fam = signal_family(chis, ratios, grid);
  EXPECT_GT(fam[0].rate.back(), fam[1].rate.back());
  EXPECT_NEAR(grid.at(grid.n - 1), 50e-9, 1e-15);
}

TEST(SignalFamily, RateNondecreasingWhereSignalIsMonotone) {
  const std::vector<double> chis{-2e6, -7.9e6};
  const std::vector<double> ratios{0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  const auto fam = signal_family(chis, ratios, TimeGrid{0.0, 0.5e-9, 801});
  int checked = 0;
  for (const auto& m : fam) {
    EXPECT_GT(m.g, 0.0);
    EXPECT_NEAR(m.n_drive, 0.2 * critical_photon_number(m.g, 1562e6), 1e-9);
    EXPECT_NEAR(dispersive_shift(m.g, 1562e6, -340e6), m.chi, 1e-6 * std::abs(m.chi));
    bool monotone = true;
    for (std::size_t i = 1; i < m.signal.values.size(); ++i) {
      monotone = monotone && m.signal.values[i] >= m.signal.values[i - 1] * (1.0 - 1e-12);
    }
    if (!monotone) continue;
    ++checked;
    for (std::size_t i = 2; i < m.rate.size(); ++i) EXPECT_GE(m.rate[i], m.rate[i - 1] * (1 - 1e-12));
  }
  EXPECT_GT(checked, 0);
}

TEST(SignalFamily, TimeToFraction) {
  SignalTrace s;
  s.times = {0.0, 1.0, 2.0, 3.0};
  s.values = {0.0, 0.5, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(*time_to_fraction(s, 1.0, 0.75), 1.5);
  EXPECT_FALSE(time_to_fraction(s, 2.0, 0.95).has_value());
}

TEST(Tradeoff, MoreDriveNeverHurtsWithoutMixing) {
  DeviceParams p;
  ShotConfig c;
  c.n_shots = 40000;
  c.p_thermal = 0.0;
  c.master_seed = 5;
  const std::vector<double> n{0.5, 1.0, 2.0, 4.0};
  const PulseEnvelope pulse = PulseEnvelope::gated(500e-9);
  const TradeoffResult t = power_tradeoff(p, pulse, n, 56e-9, MixingModel{}, c);
  ASSERT_EQ(t.rows.size(), n.size());
  const auto eps = overlap_vs_power(p, pulse, n, 56e-9);
  for (std::size_t i = 0; i < n.size(); ++i) {
    EXPECT_EQ(t.rows[i].eps_o, eps[i]);
    EXPECT_EQ(t.rows[i].gamma_mix, 0.0);
    if (i == 0) continue;
    EXPECT_LT(t.rows[i].eps_o, t.rows[i - 1].eps_o);
    const double f = t.rows[i - 1].infidelity_mc;
    const double se = std::sqrt(2.0 * f * (1.0 - f) / (0.5 * static_cast<double>(c.n_shots)));
    EXPECT_LE(t.rows[i].infidelity_mc, f + 3.0 * se) << n[i];
  }
  EXPECT_FALSE(t.interior_argmin.has_value());
}

TEST(Tradeoff, DriveInducedMixingCreatesInteriorOptimum) {
  DeviceParams p;
  ShotConfig c;
  c.n_shots = 40000;
  c.preselect = true;
  c.master_seed = 9;
  MixingModel m;
  m.kind = MixingModel::Kind::lambda_scaled;
  const std::vector<double> n{0.5, 2.5, 10.0};
  const TradeoffResult t = power_tradeoff(p, PulseEnvelope::gated(500e-9), n, 56e-9, m, c);
  ASSERT_TRUE(t.interior_argmin.has_value());
  EXPECT_EQ(*t.interior_argmin, 1u);
  EXPECT_LT(t.rows[0].gamma_mix, t.rows[1].gamma_mix);
  EXPECT_LT(t.rows[1].gamma_mix, t.rows[2].gamma_mix);
}

TEST(Constraints, ReferenceDevicePasses) {
  const ConstraintReport r = constraint_report(DeviceParams{});
  EXPECT_NEAR(r.n_crit, 14.1, 0.01);
  EXPECT_NEAR(r.drive_fraction, 2.5 / 14.0985808, 1e-6);
  EXPECT_NEAR(r.lambda, 0.0525, 1e-4);
  EXPECT_TRUE(r.dispersive_ok);
  EXPECT_TRUE(r.drive_ok);
  EXPECT_NEAR(r.ratio, 7.70643202 / 38.7481442, 1e-6);
  EXPECT_NEAR(r.recommended_ratio, 0.2864, 0.002);
  EXPECT_EQ(r.target_tau, 56e-9);
}

TEST(Constraints, StrongDriveFails) {
  DeviceParams p;
  p.n_drive = derive(p).n_crit;
  const ConstraintReport r = constraint_report(p);
  EXPECT_FALSE(r.drive_ok);
  EXPECT_TRUE(r.dispersive_ok);
  EXPECT_FALSE(r.advisories.empty());
}

TEST(Constraints, VanishingCouplingHasNoSignal) {
  DeviceParams p;
  p.g = 1e-6;
  ConstraintReport r = constraint_report(p);
  EXPECT_TRUE(std::isinf(r.n_crit) || r.n_crit > 1e12);
  EXPECT_TRUE(r.drive_ok);

  p.alpha = 0.0;
  r = constraint_report(p);
  EXPECT_FALSE(r.dispersive_ok);
  EXPECT_EQ(r.recommended_ratio, 0.0);
  ASSERT_FALSE(r.advisories.empty());
  EXPECT_NE(r.advisories.front().find("no dispersive shift"), std::string::npos);
}
