#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qreadout/calib.h"
#include "qreadout/error.h"

using namespace qreadout;

namespace {

// Coarse background plus dense sampling across both resonator dips, which
// carry the information on gamma.
std::vector<double> spectrum_grid(const SpectrumParams& p) {
  std::vector<double> w;
  for (double x = p.omega_r - 250e6; x <= p.omega_r + 250e6; x += 1e6) w.push_back(x);
  for (double c : {p.omega_r - p.chi, p.omega_r + p.chi}) {
    for (double x = c - 1e6; x <= c + 1e6; x += 5e3) w.push_back(x);
  }
  std::sort(w.begin(), w.end());
  w.erase(std::unique(w.begin(), w.end(), [](double a, double b) { return std::abs(a - b) < 1.0; }),
          w.end());
  return w;
}

SpectrumParams reference_spectrum() {
  SpectrumParams p;
  p.gamma = 0.05e6;
  p.scale = 0.8;
  return p;
}

void expect_recovered(const SpectrumParams& fit, const SpectrumParams& truth, double rel) {
  EXPECT_NEAR(fit.omega_p, truth.omega_p, rel * truth.omega_p);
  EXPECT_NEAR(fit.omega_r, truth.omega_r, rel * truth.omega_r);
  EXPECT_NEAR(fit.J, truth.J, rel * truth.J);
  EXPECT_NEAR(fit.chi, truth.chi, rel * std::abs(truth.chi));
  EXPECT_NEAR(fit.Q_p, truth.Q_p, rel * truth.Q_p);
  EXPECT_NEAR(fit.gamma, truth.gamma, rel * truth.gamma);
}

}  // namespace

TEST(Transmission, DecoupledFilterIsLorentzian) {
  SpectrumParams p;
  p.J = 0.0;
  p.gamma = 0.0;
  const double k = p.kappa_p();
  for (double x : {-3.0, -1.0, -0.5, 0.0, 0.25, 2.0}) {
    const double w = p.omega_p + x * k;
    const double expected = k / std::sqrt(0.25 * k * k + x * x * k * k);
    EXPECT_NEAR(transmission(w, p, Qubit::ground), expected, 1e-12 * expected);
    EXPECT_DOUBLE_EQ(transmission(w, p, Qubit::ground), transmission(w, p, Qubit::excited));
  }
  EXPECT_NEAR(transmission(p.omega_p, p, Qubit::ground), 2.0, 1e-12);
}

TEST(Transmission, StateSwapMirrorsAboutResonator) {
  SpectrumParams p = reference_spectrum();
  p.omega_r = p.omega_p;
  SpectrumParams flipped = p;
  flipped.chi = -p.chi;
  for (double x = -150e6; x <= 150e6; x += 7.3e6) {
    EXPECT_NEAR(transmission(p.omega_r + x, p, Qubit::ground),
                transmission(p.omega_r - x, p, Qubit::excited), 1e-12);
    EXPECT_NEAR(transmission(p.omega_r + x, p, Qubit::ground),
                transmission(p.omega_r + x, flipped, Qubit::excited), 1e-12);
  }
}

TEST(Transmission, NormalModeSplittingIsTwoJ) {
  SpectrumParams p;
  p.omega_r = p.omega_p;
  p.chi = 0.0;
  p.gamma = 0.0;
  std::vector<double> w, mag;
  for (double x = -100e6; x <= 100e6; x += 1e3) w.push_back(p.omega_p + x);
  mag = transmission(w, p, Qubit::ground);
  std::vector<double> peaks;
  for (std::size_t i = 1; i + 1 < mag.size(); ++i) {
    if (mag[i] > mag[i - 1] && mag[i] >= mag[i + 1]) peaks.push_back(w[i]);
  }
  ASSERT_EQ(peaks.size(), 2u);
  EXPECT_NEAR(peaks[1] - peaks[0], 2.0 * p.J, 0.05 * 2.0 * p.J);
}

TEST(Transmission, VanishesFarFromFilter) {
  const SpectrumParams p = reference_spectrum();
  double prev = transmission(p.omega_p + 1e9, p, Qubit::ground);
  for (double x : {1e10, 1e11, 1e12}) {
    const double t = transmission(p.omega_p + x, p, Qubit::ground);
    EXPECT_LT(t, prev);
    EXPECT_GE(t, 0.0);
    prev = t;
  }
  EXPECT_LT(prev, 1e-4);
}

TEST(SpectrumFit, NoiselessRoundTrip) {
  const SpectrumParams p = reference_spectrum();
  const auto w = spectrum_grid(p);
  const SpectrumFit f =
      fit_transmission(w, transmission(w, p, Qubit::ground), transmission(w, p, Qubit::excited));
  EXPECT_TRUE(f.converged);
  expect_recovered(f.params, p, 1e-6);
  EXPECT_NEAR(f.params.scale, p.scale, 1e-6 * p.scale);
}

TEST(SpectrumFit, NoisyRoundTripOverRandomDevices) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int trial = 0; trial < 20; ++trial) {
    SpectrumParams p;
    p.omega_p = 4756e6 + (u(rng) - 0.5) * 40e6;
    p.omega_r = p.omega_p - 2e6 + (u(rng) - 0.5) * 8e6;
    p.J = 18e6 + 14e6 * u(rng);
    p.chi = -(5e6 + 5e6 * u(rng));
    p.Q_p = 60.0 + 30.0 * u(rng);
    p.gamma = 0.03e6 + 0.05e6 * u(rng);
    p.scale = 0.5 + u(rng);
    const auto w = spectrum_grid(p);
    auto g = transmission(w, p, Qubit::ground);
    auto e = transmission(w, p, Qubit::excited);
    for (auto& x : g) x *= 1.0 + noise(rng);
    for (auto& x : e) x *= 1.0 + noise(rng);
    SCOPED_TRACE(trial);
    const SpectrumFit f = fit_transmission(w, g, e);
    expect_recovered(f.params, p, 0.01);
  }
}

TEST(SpectrumFit, SwappedSpectraFlipChi) {
  const SpectrumParams p = reference_spectrum();
  const auto w = spectrum_grid(p);
  const auto g = transmission(w, p, Qubit::ground);
  const auto e = transmission(w, p, Qubit::excited);
  const SpectrumFit a = fit_transmission(w, g, e);
  const SpectrumFit b = fit_transmission(w, e, g);
  EXPECT_LT(a.params.chi, 0.0);
  EXPECT_GT(b.params.chi, 0.0);
  EXPECT_NEAR(a.params.chi, -b.params.chi, 1e-6 * std::abs(p.chi));
  EXPECT_NEAR(a.params.omega_r, b.params.omega_r, 1.0);
}

TEST(SpectrumFit, InputValidation) {
  const std::vector<double> w{1.0, 2.0, 3.0};
  EXPECT_THROW(fit_transmission(w, w, w), ConfigError);
  std::vector<double> grid(32), mag(32, 1.0), zero(32, 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 4.7e9 + 1e6 * static_cast<double>(i);
  EXPECT_THROW(fit_transmission(grid, zero, zero), NumericalError);
  auto bad = mag;
  bad[3] = -1.0;
  EXPECT_THROW(fit_transmission(grid, bad, mag), ConfigError);
  auto unsorted = grid;
  std::swap(unsorted[4], unsorted[5]);
  EXPECT_THROW(fit_transmission(unsorted, mag, mag), ConfigError);
}

TEST(Stark, LinearRoundTrip) {
  const double chi = -7.9e6, k = 1.0, nu0 = 6316e6;
  std::vector<double> power, freq;
  for (int i = 0; i <= 10; ++i) {
    power.push_back(0.5 * i);
    freq.push_back(nu0 + 2.0 * chi * k * power.back());
  }
  const StarkCalibration s = stark_calibration(power, freq, chi);
  EXPECT_NEAR(s.photons_per_power, k, 1e-3 * k);
  EXPECT_NEAR(s.nu_q0, nu0, 1.0);
  EXPECT_NEAR(s.slope, 2.0 * chi * k, 1e-3 * std::abs(2.0 * chi * k));
  EXPECT_FALSE(s.degenerate);
}

TEST(Stark, NoisyRoundTrip) {
  const double chi = -7.9e6, k = 0.37;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 5e3);
  std::vector<double> power, freq;
  for (int i = 0; i < 40; ++i) {
    power.push_back(0.25 * i);
    freq.push_back(6.3e9 + 2.0 * chi * k * power.back() + noise(rng));
  }
  EXPECT_NEAR(stark_calibration(power, freq, chi).photons_per_power, k, 1e-3 * k);
}

TEST(Stark, FlatDataIsDegenerate) {
  const std::vector<double> power{0.0, 1.0, 2.0, 3.0}, freq(4, 6.3e9);
  const StarkCalibration s = stark_calibration(power, freq, -7.9e6);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.photons_per_power, 0.0);
}

TEST(Stark, SaturationIsDetected) {
  const double chi = -7.9e6;
  std::vector<double> power, freq;
  for (int i = 0; i < 12; ++i) {
    const double P = 0.5 * i;
    power.push_back(P);
    freq.push_back(6.3e9 + 2.0 * chi * P / (1.0 + 0.15 * P));
  }
  EXPECT_THROW(stark_calibration(power, freq, chi), NumericalError);
}

TEST(Stark, Errors) {
  const std::vector<double> two{0.0, 1.0};
  EXPECT_THROW(stark_calibration(two, two, -7.9e6), ConfigError);
  const std::vector<double> p{0.0, 1.0, 2.0};
  EXPECT_THROW(stark_calibration(p, p, 0.0), ConfigError);
  const std::vector<double> zeros(3, 0.0);
  EXPECT_THROW(stark_calibration(zeros, p, -7.9e6), ConfigError);
}

TEST(Efficiency, AmplifierChain) {
  EXPECT_NEAR(phase_sensitive_efficiency(93.3, 19.78), 0.904, 5e-4);
  EXPECT_NEAR(phase_sensitive_efficiency(gain_from_db(19.7), 19.78), 0.904, 5e-4);
  EXPECT_NEAR(phase_sensitive_efficiency(gain_from_db(35.0) / 4.0, 19.78), 0.988, 5e-4);
  EXPECT_EQ(phase_sensitive_efficiency(93.3, 0.0), 1.0);
  EXPECT_EQ(phase_sensitive_efficiency(1.0, 2.0), 0.5);
  EXPECT_THROW(phase_sensitive_efficiency(0.5, 1.0), ConfigError);
  EXPECT_THROW(phase_sensitive_efficiency(10.0, -1.0), ConfigError);
}

TEST(Efficiency, Monotonicity) {
  for (double G = 1.0; G < 1e4; G *= 1.7) {
    EXPECT_LT(phase_sensitive_efficiency(G, 19.78), phase_sensitive_efficiency(1.7 * G, 19.78));
    EXPECT_GT(phase_sensitive_efficiency(G, 10.0), phase_sensitive_efficiency(G, 20.0));
  }
  EXPECT_NEAR(phase_sensitive_efficiency(1e12, 19.78), 1.0, 1e-10);
}

TEST(Efficiency, OutputPower) {
  EXPECT_NEAR(output_power(-7.9e6, 25e6, 4756e6 / 74.0, 2.5), 16.05e6, 0.01e6);
  EXPECT_EQ(output_power(-7.9e6, 25e6, 64e6, 0.0), 0.0);
  EXPECT_NEAR(output_power(-7.9e6, 50e6, 64e6, 2.5), 0.25 * output_power(-7.9e6, 25e6, 64e6, 2.5),
              1e-6);
  EXPECT_THROW(output_power(-7.9e6, 0.0, 64e6, 2.5), ConfigError);
}

TEST(Efficiency, TotalAndReport) {
  EXPECT_NEAR(total_efficiency(0.92, 0.75), 0.69, 1e-12);
  EXPECT_NEAR(total_efficiency(0.99, 0.75), 0.7425, 1e-12);
  EXPECT_EQ(total_efficiency(1.0, 0.37), 0.37);
  EXPECT_THROW(total_efficiency(0.0, 0.5), ConfigError);
  EXPECT_THROW(total_efficiency(0.5, 1.2), ConfigError);

  const EfficiencyReport r = efficiency_report(93.3, 19.78, 12.0, 16.0);
  EXPECT_DOUBLE_EQ(r.eta_loss, 0.75);
  EXPECT_DOUBLE_EQ(r.eta_total, r.eta_phi_amp * r.eta_loss);
  EXPECT_GT(r.eta_total, 0.0);
  EXPECT_LE(r.eta_total, 1.0);
  EXPECT_THROW(efficiency_report(93.3, 19.78, 20.0, 16.0), ConfigError);
  EXPECT_DOUBLE_EQ(hemt_noise_from_offset(9.89), 19.78);
}
