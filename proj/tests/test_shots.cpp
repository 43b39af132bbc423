#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <limits>

#include "qreadout/analysis.h"
#include "qreadout/error.h"
#include "qreadout/shots.h"

using namespace qreadout;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DeviceParams quiet_device() {
  DeviceParams p;
  p.T1 = kInf;
  return p;
}

ShotConfig quiet_config(std::size_t n, double record = 56e-9) {
  ShotConfig c;
  c.n_shots = n;
  c.record_duration = record;
  c.p_thermal = 0.0;
  c.master_seed = 42;
  return c;
}

// Per-bin means and standard errors of one preparation.
struct BinStats {
  std::vector<double> mean, se;
};

BinStats bin_stats(const std::vector<ShotRecord>& batch, Qubit prep) {
  const std::size_t bins = batch.front().samples.size();
  std::vector<double> s(bins, 0.0), s2(bins, 0.0);
  double n = 0.0;
  for (const auto& r : batch) {
    if (r.prep != prep) continue;
    n += 1.0;
    for (std::size_t k = 0; k < bins; ++k) {
      s[k] += r.samples[k];
      s2[k] += r.samples[k] * r.samples[k];
    }
  }
  BinStats out;
  for (std::size_t k = 0; k < bins; ++k) {
    const double m = s[k] / n;
    out.mean.push_back(m);
    out.se.push_back(std::sqrt((s2[k] / n - m * m) / n));
  }
  return out;
}

WeightFunction flat_weight(std::size_t bins, double dt) {
  WeightFunction w;
  w.dt = dt;
  const double tau = dt * static_cast<double>(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    w.times.push_back(static_cast<double>(k) * dt);
    w.w.push_back(1.0 / std::sqrt(tau));
  }
  return w;
}

}  // namespace

TEST(ShotConfig, Validation) {
  auto bad = [](auto mutate) {
    ShotConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](ShotConfig& c) { c.n_shots = 0; });
  bad([](ShotConfig& c) { c.dt_bin = 0.0; });
  bad([](ShotConfig& c) { c.p_thermal = 1.2; });
  bad([](ShotConfig& c) { c.prep_error = -0.1; });
  bad([](ShotConfig& c) { c.gamma_mix_up = -1.0; });
  bad([](ShotConfig& c) {
    c.preselect = true;
    c.premeas_window = 200e-9;
  });
  EXPECT_NO_THROW(ShotConfig{}.validate());
  EXPECT_EQ(ShotConfig{}.n_bins(), 25u);
}

TEST(ShotSimulator, RejectsShortPulse) {
  ShotConfig c = quiet_config(10, 200e-9);
  EXPECT_THROW(ShotSimulator(DeviceParams{}, PulseEnvelope::gated(100e-9), c), ConfigError);
}

TEST(ShotSimulator, MeanOfExcitedShotsMatchesMeanTrace) {
  DeviceParams p = quiet_device();
  p.eta = 1.0;
  ShotConfig c = quiet_config(20000, 200e-9);
  const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
  const auto batch = sim.simulate_batch();
  for (Qubit q : {Qubit::ground, Qubit::excited}) {
    const BinStats s = bin_stats(batch, q);
    const auto& ref = sim.binned_mean(q);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      EXPECT_LE(std::abs(s.mean[k] - ref[k]), 3.0 * s.se[k] + 1e-12) << to_string(q) << " bin " << k;
    }
  }
}

TEST(ShotSimulator, DecayedShotFollowsGroundResponse) {
  DeviceParams p;
  p.T1 = 0.05e-9;  // decays essentially at t = 0
  ShotConfig c = quiet_config(20000, 200e-9);
  const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
  const auto batch = sim.simulate_batch();
  const BinStats s = bin_stats(batch, Qubit::excited);
  const auto& ref = sim.binned_mean(Qubit::ground);
  for (std::size_t k = 0; k < ref.size(); ++k) {
    EXPECT_LE(std::abs(s.mean[k] - ref[k]), 3.5 * s.se[k]) << "bin " << k;
  }
}

TEST(ShotSimulator, JumpFractionFollowsLifetime) {
  DeviceParams p;
  p.T1 = 7.6e-6;
  ShotConfig c = quiet_config(200000, 56e-9);
  const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
  const auto batch = sim.simulate_batch();
  double n_e = 0.0, jumped = 0.0;
  for (const auto& r : batch) {
    if (r.prep != Qubit::excited) continue;
    n_e += 1.0;
    for (const auto& j : r.jump_times) {
      if (j.t >= 0.0 && j.t < 56e-9) {
        jumped += 1.0;
        break;
      }
    }
  }
  const double expected = 1.0 - std::exp(-56e-9 / 7.6e-6);
  const double se = std::sqrt(expected * (1.0 - expected) / n_e);
  EXPECT_NEAR(jumped / n_e, expected, 3.0 * se);
}

TEST(ShotSimulator, RecordsAreFiniteAndJumpsOrdered) {
  DeviceParams p;
  p.T1 = 0.3e-6;
  ShotConfig c = quiet_config(2000, 200e-9);
  c.gamma_mix_up = 2e6;
  c.gamma_mix_down = 2e6;
  c.p_thermal = 0.1;
  c.preselect = true;
  const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
  std::size_t with_jumps = 0;
  for (const auto& r : sim.simulate_batch()) {
    ASSERT_EQ(r.samples.size(), 25u);
    for (double x : r.samples) ASSERT_TRUE(std::isfinite(x));
    ASSERT_TRUE(std::isfinite(r.preselect_value));
    for (std::size_t i = 1; i < r.jump_times.size(); ++i) {
      ASSERT_LT(r.jump_times[i - 1].t, r.jump_times[i].t);
    }
    with_jumps += r.jump_times.empty() ? 0 : 1;
  }
  EXPECT_GT(with_jumps, 100u);
}

TEST(ShotSimulator, NoDriveMakesStatesIdentical) {
  DeviceParams p = quiet_device();
  p.n_drive = 0.0;
  ShotConfig c = quiet_config(40000, 56e-9);
  const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
  const auto batch = sim.simulate_batch();
  const BinStats g = bin_stats(batch, Qubit::ground);
  const BinStats e = bin_stats(batch, Qubit::excited);
  const double sigma = sim.bin_sigma();
  for (std::size_t k = 0; k < g.mean.size(); ++k) {
    EXPECT_EQ(sim.binned_mean(Qubit::ground)[k], 0.0);
    EXPECT_EQ(sim.binned_mean(Qubit::excited)[k], 0.0);
    EXPECT_LE(std::abs(g.mean[k] - e.mean[k]), 4.0 * std::hypot(g.se[k], e.se[k]));
    EXPECT_NEAR(g.se[k] * std::sqrt(20000.0) / sigma, 1.0, 0.03);
    EXPECT_NEAR(e.se[k] * std::sqrt(20000.0) / sigma, 1.0, 0.03);
  }
}

TEST(ShotSimulator, NoiseCalibrationOfIntegratedValue) {
  for (double eta : {0.66, 1.0}) {
    DeviceParams p = quiet_device();
    p.n_drive = 0.0;
    p.eta = eta;
    ShotConfig c = quiet_config(100000, 56e-9);
    const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
    const auto batch = sim.simulate_batch();
    const IntegratedBatch q = integrate_batch(batch, flat_weight(7, 8e-9), p.kappa_p(), 8e-9);
    double s = 0.0, s2 = 0.0, n = 0.0;
    for (const auto* v : {&q.q_g, &q.q_e}) {
      for (double x : *v) {
        s += x;
        s2 += x * x;
        n += 1.0;
      }
    }
    const double var = s2 / n - (s / n) * (s / n);
    EXPECT_NEAR(var * 4.0 * eta, 1.0, 0.05);
  }
}

TEST(ShotSimulator, IntegratedValuesAreGaussianWithoutTransitions) {
  const DeviceParams p = quiet_device();
  ShotConfig c = quiet_config(200000, 56e-9);
  const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
  const auto batch = sim.simulate_batch();
  const WeightFunction w = build_weights(sim.binned_mean(Qubit::ground), sim.binned_mean(Qubit::excited), 8e-9, 56e-9);
  const IntegratedBatch q = integrate_batch(batch, w, p.kappa_p(), 8e-9);
  // Jarque-Bera statistic against the chi^2(2) critical value at alpha = 0.01.
  for (const auto* v : {&q.q_g, &q.q_e}) {
    const double n = static_cast<double>(v->size());
    double m = 0.0;
    for (double x : *v) m += x;
    m /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : *v) {
      const double d = x - m;
      m2 += d * d;
      m3 += d * d * d;
      m4 += d * d * d * d;
    }
    m2 /= n, m3 /= n, m4 /= n;
    const double skew = m3 / std::pow(m2, 1.5);
    const double kurt = m4 / (m2 * m2) - 3.0;
    const double jb = n / 6.0 * (skew * skew + kurt * kurt / 4.0);
    EXPECT_LT(jb, 9.21) << "skew " << skew << " excess kurtosis " << kurt;
  }
}

TEST(ShotSimulator, BatchIsBitReproducibleAcrossScheduling) {
  DeviceParams p;
  ShotConfig c = quiet_config(3000, 200e-9);
  c.p_thermal = 0.05;
  c.gamma_mix_up = 1e6;
  c.gamma_mix_down = 1e6;
  c.preselect = true;
  const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
  const auto serial = sim.simulate_batch_serial();
  const int saved = omp_get_max_threads();
  for (int threads : {1, 3, 4}) {
    omp_set_num_threads(threads);
    const auto par = sim.simulate_batch();
    ASSERT_EQ(par.size(), serial.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
      ASSERT_EQ(par[i].prep, serial[i].prep);
      ASSERT_EQ(par[i].samples, serial[i].samples) << "shot " << i;
      ASSERT_EQ(par[i].jump_times.size(), serial[i].jump_times.size());
      ASSERT_EQ(par[i].preselect_value, serial[i].preselect_value);
    }
  }
  omp_set_num_threads(saved);
  const ShotRecord again = sim.simulate_index(17);
  EXPECT_EQ(again.samples, serial[17].samples);
  EXPECT_EQ(again.prep, Qubit::excited);

  ShotConfig other = c;
  other.master_seed = 43;
  const ShotSimulator sim2(p, PulseEnvelope::gated(500e-9), other);
  EXPECT_NE(sim2.simulate_index(17).samples, serial[17].samples);
}

TEST(Preselection, ThresholdAloneRejectsOnePercent) {
  DeviceParams p = quiet_device();
  ShotConfig c = quiet_config(40000, 8e-9);
  c.preselect = true;
  const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
  const auto batch = sim.simulate_batch();
  const PreselectionResult r = run_preselection(batch);
  const double se = std::sqrt(0.01 * 0.99 / 40000.0);
  EXPECT_NEAR(r.rejection_fraction, 0.01, 3.5 * se);
  EXPECT_EQ(r.kept.size() + static_cast<std::size_t>(std::llround(r.rejection_fraction * 40000.0)), 40000u);
  for (const auto& k : r.kept) EXPECT_LE(k.preselect_value, r.threshold);
}

TEST(Preselection, RejectionGrowsWithUpwardMixing) {
  double prev = 0.0;
  for (double up : {0.0, 1e5, 3e5}) {
    DeviceParams p;
    ShotConfig c = quiet_config(40000, 8e-9);
    c.p_thermal = 0.003;
    c.preselect = true;
    c.gamma_mix_up = up;
    const ShotSimulator sim(p, PulseEnvelope::gated(500e-9), c);
    const double f = run_preselection(sim.simulate_batch()).rejection_fraction;
    EXPECT_GT(f, prev) << up;
    prev = f;
  }
}

TEST(Preselection, NeedsEnoughRecords) {
  std::vector<ShotRecord> few(99);
  EXPECT_THROW(run_preselection(few), NumericalError);
}

TEST(MixingModel, Apply) {
  const DeviceParams p;
  ShotConfig c;
  c.gamma_mix_up = 5.0;
  MixingModel m;
  m.kind = MixingModel::Kind::fixed;
  m.up = 1e4;
  m.down = 2e4;
  m.apply(p, c);
  EXPECT_EQ(c.gamma_mix_up, 1e4);
  EXPECT_EQ(c.gamma_mix_down, 2e4);
  m.kind = MixingModel::Kind::none;
  m.apply(p, c);
  EXPECT_EQ(c.gamma_mix_up, 0.0);
  EXPECT_EQ(c.gamma_mix_down, 0.0);
  m.kind = MixingModel::Kind::lambda_scaled;
  m.apply(p, c);
  const double rate = MixingModel::kDefaultLambdaConstant * derive(p).lambda_mix * p.n_drive;
  EXPECT_DOUBLE_EQ(c.gamma_mix_up, rate);
  EXPECT_DOUBLE_EQ(c.gamma_mix_down, rate);
}
