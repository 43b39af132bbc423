#include "qreadout/calib.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "qreadout/error.h"
#include "qreadout/fitting.h"

namespace qreadout {

double transmission(double omega, const SpectrumParams& p, Qubit q) {
  const double kappa = p.kappa_p();
  const cplx coupling =
      p.J == 0.0 ? cplx{}
                 : 2.0 * p.J * p.J /
                       cplx(p.gamma, 2.0 * (p.omega_r + qubit_sign(q) * p.chi - omega));
  const cplx denom = cplx(0.5 * (p.gamma + kappa), p.omega_p - omega) + coupling;
  return p.scale * kappa / std::abs(denom);
}

std::vector<double> transmission(std::span<const double> omega, const SpectrumParams& p,
                                 Qubit q) {
  std::vector<double> out(omega.size());
  for (std::size_t i = 0; i < omega.size(); ++i) out[i] = transmission(omega[i], p, q);
  return out;
}

namespace {

struct ModeGuess {
  bool found = false;
  double peak_lo = 0.0;
  double peak_hi = 0.0;
  double dip = 0.0;
  double dip_value = 0.0;
  double peak_value = 0.0;
};

// Two strongest local maxima of a smoothed spectrum and the minimum between them.
ModeGuess read_modes(std::span<const double> omega, std::span<const double> mag) {
  const std::size_t n = mag.size();
  const std::size_t half = std::max<std::size_t>(1, n / 200);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i >= half ? i - half : 0;
    const std::size_t b = std::min(n - 1, i + half);
    double acc = 0.0;
    for (std::size_t j = a; j <= b; ++j) acc += mag[j];
    s[i] = acc / static_cast<double>(b - a + 1);
  }
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (s[i] >= s[i - 1] && s[i] > s[i + 1]) maxima.push_back(i);
  }
  ModeGuess g;
  if (maxima.size() < 2) return g;
  std::sort(maxima.begin(), maxima.end(), [&](auto x, auto y) { return s[x] > s[y]; });
  std::size_t i1 = maxima[0];
  std::size_t i2 = maxima[1];
  // Skip maxima produced by residual noise on the flank of the first peak.
  for (std::size_t k = 1; k < maxima.size(); ++k) {
    const std::size_t c = maxima[k];
    const auto [lo, hi] = std::minmax(i1, c);
    const double valley = *std::min_element(s.begin() + lo, s.begin() + hi + 1);
    if (valley < 0.9 * s[c]) {
      i2 = c;
      break;
    }
  }
  const auto [lo, hi] = std::minmax(i1, i2);
  const auto dip = std::min_element(s.begin() + lo, s.begin() + hi + 1) - s.begin();
  g.found = true;
  g.peak_lo = omega[lo];
  g.peak_hi = omega[hi];
  g.dip = omega[static_cast<std::size_t>(dip)];
  g.dip_value = s[static_cast<std::size_t>(dip)];
  g.peak_value = std::max(s[lo], s[hi]);
  return g;
}

}  // namespace

SpectrumFit fit_transmission(std::span<const double> omega, std::span<const double> mag_g,
                             std::span<const double> mag_e) {
  const std::size_t n = omega.size();
  if (n < 16 || mag_g.size() != n || mag_e.size() != n) {
    throw ConfigError("fit_transmission: need two spectra of equal length (>= 16 points)");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(omega[i] > omega[i - 1])) throw ConfigError("fit_transmission: frequencies must increase");
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(mag_g[i] >= 0.0) || !(mag_e[i] >= 0.0)) {
      throw ConfigError("fit_transmission: magnitudes must be finite and >= 0");
    }
    peak = std::max({peak, mag_g[i], mag_e[i]});
  }
  if (!(peak > 0.0)) throw NumericalError("fit_transmission: spectra are identically zero");

  // Work in MHz relative to the window center, with magnitudes scaled to 1.
  constexpr double kMHz = 1e6;
  const double center = 0.5 * (omega.front() + omega.back());
  const double span = (omega.back() - omega.front()) / kMHz;
  std::vector<double> w(n), yg(n), ye(n), floor_g(n), floor_e(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = (omega[i] - center) / kMHz;
    yg[i] = mag_g[i] / peak;
    ye[i] = mag_e[i] / peak;
  }
  const double tiny = 1e-6;

  auto model = [&](const Eigen::VectorXd& x, double wi, int s) {
    const double kappa = x[4];
    const cplx coupling = 2.0 * x[2] * x[2] / cplx(x[5], 2.0 * (x[1] + s * x[3] - wi));
    return x[6] * kappa / std::abs(cplx(0.5 * (x[5] + kappa), x[0] - wi) + coupling);
  };
  ResidualFn residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      r[k] = model(x, w[i], -1) / std::max(yg[i], tiny) - 1.0;
      r[k + static_cast<Eigen::Index>(n)] = model(x, w[i], 1) / std::max(ye[i], tiny) - 1.0;
    }
  };

  // Starting point from the normal-mode peaks and the resonator dip:
  // with no loss the peaks p1, p2 and dip d satisfy
  // omega_p = p1 + p2 - d and J^2 = (p2 - d)(d - p1).
  const ModeGuess mg = read_modes(w, yg);
  const ModeGuess me = read_modes(w, ye);
  double wp = 0.0, wr = 0.0, J = 0.1 * span, chi = 0.0, amp = 0.5, dip_value = 0.0;
  if (mg.found && me.found) {
    wr = 0.5 * (mg.dip + me.dip);
    chi = 0.5 * (me.dip - mg.dip);
    wp = 0.5 * ((mg.peak_lo + mg.peak_hi - mg.dip) + (me.peak_lo + me.peak_hi - me.dip));
    const double j2 = 0.5 * ((mg.peak_hi - mg.dip) * (mg.dip - mg.peak_lo) +
                             (me.peak_hi - me.dip) * (me.dip - me.peak_lo));
    if (j2 > 0.0) J = std::sqrt(j2);
    amp = 0.5 * std::max(mg.peak_value, me.peak_value);
    dip_value = 0.5 * (mg.dip_value + me.dip_value);
  } else {
    const auto it = std::max_element(yg.begin(), yg.end());
    wp = wr = w[static_cast<std::size_t>(it - yg.begin())];
    amp = 0.5 * *it;
  }

  Eigen::VectorXd scale(7), lower(7), upper(7);
  const double inf = std::numeric_limits<double>::infinity();
  scale << 1.0, 1.0, 1.0, 1.0, 1.0, 0.1, 0.1;
  lower << -inf, -inf, tiny, -inf, tiny, 0.0, tiny;
  upper << inf, inf, inf, inf, inf, inf, inf;
  LmOptions opt;
  opt.max_iterations = 200;
  opt.ftol = 1e-15;
  opt.xtol = 1e-12;

  LmResult best;
  best.cost = inf;
  for (double factor : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double kappa = factor * 2.0 * J;
    const double gamma = std::clamp(dip_value * 2.0 * J * J / (amp * kappa), 0.0, 0.5 * kappa);
    Eigen::VectorXd x0(7);
    x0 << wp, wr, J, chi, kappa, gamma, amp;
    LmResult res;
    try {
      res = levenberg_marquardt(residual, x0, 2 * n, scale, lower, upper, opt);
    } catch (const NumericalError&) {
      continue;
    }
    if (res.cost < best.cost) best = res;
  }
  if (!std::isfinite(best.cost) || !best.converged) {
    throw NumericalError("fit_transmission: least squares did not converge");
  }
  if (best.x[2] <= 1.0001 * tiny || best.x[4] <= 1.0001 * tiny) {
    throw NumericalError("fit_transmission: J or kappa_p ended on its lower bound");
  }

  SpectrumFit fit;
  fit.params.omega_p = center + best.x[0] * kMHz;
  fit.params.omega_r = center + best.x[1] * kMHz;
  fit.params.J = best.x[2] * kMHz;
  fit.params.chi = best.x[3] * kMHz;
  fit.params.Q_p = fit.params.omega_p / (best.x[4] * kMHz);
  fit.params.gamma = best.x[5] * kMHz;
  fit.params.scale = best.x[6] * peak;
  fit.cost = best.cost;
  fit.iterations = best.iterations;
  fit.converged = best.converged;
  return fit;
}

// ---------------------------------------------------------------------------

StarkCalibration stark_calibration(std::span<const double> power,
                                   std::span<const double> qubit_freq, double chi) {
  const std::size_t n = power.size();
  if (n < 3 || qubit_freq.size() != n) {
    throw ConfigError("stark_calibration: need at least 3 (power, frequency) pairs");
  }
  if (chi == 0.0) throw ConfigError("stark_calibration: chi must be nonzero");
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd y(n);
  double p_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(power[i] >= 0.0)) throw ConfigError("stark_calibration: powers must be >= 0");
    A(static_cast<Eigen::Index>(i), 0) = 1.0;
    A(static_cast<Eigen::Index>(i), 1) = power[i];
    y[static_cast<Eigen::Index>(i)] = qubit_freq[i];
    p_max = std::max(p_max, power[i]);
  }
  if (!(p_max > 0.0)) throw ConfigError("stark_calibration: all powers are zero");
  const Eigen::VectorXd lin = A.colPivHouseholderQr().solve(y);

  if (n >= 4) {
    Eigen::MatrixXd B(n, 3);
    B.leftCols(2) = A;
    for (std::size_t i = 0; i < n; ++i) B(static_cast<Eigen::Index>(i), 2) = power[i] * power[i];
    const Eigen::VectorXd quad = B.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd res = y - B * quad;
    const double dof = static_cast<double>(n) - 3.0;
    const double s2 = dof > 0.0 ? res.squaredNorm() / dof : 0.0;
    const Eigen::MatrixXd cov = s2 * (B.transpose() * B).inverse();
    const double se_c = std::sqrt(std::max(cov(2, 2), 0.0));
    const double curvature = std::abs(quad[2]) * p_max * p_max;
    const double linear = std::abs(lin[1]) * p_max;
    const bool significant = se_c == 0.0 ? curvature > 0.0 : std::abs(quad[2]) > 3.0 * se_c;
    if (significant && curvature > 0.05 * linear) {
      throw NumericalError("stark_calibration: data leaves the linear regime");
    }
  }

  StarkCalibration out;
  out.nu_q0 = lin[0];
  out.slope = lin[1];
  const double scale = std::max(std::abs(lin[0]), y.cwiseAbs().maxCoeff());
  out.degenerate = std::abs(lin[1]) * p_max <= 1e-12 * std::max(scale, 1.0);
  out.photons_per_power = out.degenerate ? 0.0 : lin[1] / (2.0 * chi);
  if (out.degenerate) out.slope = 0.0;
  return out;
}

double phase_sensitive_efficiency(double G0, double n_hemt) {
  if (!(G0 >= 1.0)) throw ConfigError("phase_sensitive_efficiency: G0 must be >= 1");
  if (!(n_hemt >= 0.0)) throw ConfigError("phase_sensitive_efficiency: n_hemt must be >= 0");
  return 1.0 / (1.0 + n_hemt / (2.0 * G0));
}

double output_power(double chi, double J, double kappa_p, double n_drive) {
  if (J == 0.0) throw ConfigError("output_power: J must be nonzero");
  const double r = chi / J;
  return r * r * kappa_p * n_drive;
}

double total_efficiency(double eta_phi_amp, double eta_loss) {
  auto check = [](double e, const char* name) {
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError(std::string(name) + " must lie in (0, 1]");
  };
  check(eta_phi_amp, "eta_phi_amp");
  check(eta_loss, "eta_loss");
  return eta_phi_amp * eta_loss;
}

EfficiencyReport efficiency_report(double G0, double n_hemt, double measured_power,
                                   double expected_power) {
  if (!(expected_power > 0.0)) throw ConfigError("efficiency_report: expected power must be > 0");
  EfficiencyReport r;
  r.G0 = G0;
  r.n_hemt = n_hemt;
  r.eta_phi_amp = phase_sensitive_efficiency(G0, n_hemt);
  r.eta_loss = measured_power / expected_power;
  r.eta_total = total_efficiency(r.eta_phi_amp, r.eta_loss);
  return r;
}

}  // namespace qreadout
