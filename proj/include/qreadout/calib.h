#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "qreadout/dynamics.h"

namespace qreadout {

/// Circuit parameters seen in transmission through the Purcell filter.
/// Frequencies in Hz; scale is the free proportionality constant of |S21|.
struct SpectrumParams {
  double omega_p = 4756e6;
  double omega_r = 4754e6;
  double J = 25e6;
  double chi = -7.9e6;
  double Q_p = 74.0;
  double gamma = 0.0;
  double scale = 1.0;

  double kappa_p() const { return omega_p / Q_p; }
};

/// |S21| = scale * kappa_p / | (gamma + kappa_p)/2 + i(omega_p - w)
///                             + 2 J^2 / (gamma + 2i(omega_r + s chi - w)) |
/// with s = +1 for the excited state. The ratio is homogeneous in the rates,
/// so ordinary and angular units give the same value.
double transmission(double omega, const SpectrumParams& p, Qubit q);
std::vector<double> transmission(std::span<const double> omega, const SpectrumParams& p, Qubit q);

struct SpectrumFit {
  SpectrumParams params;
  double cost = 0.0;  // 0.5 * sum of squared relative residuals
  int iterations = 0;
  bool converged = false;
};

/// Joint least-squares fit of both qubit-state spectra with shared circuit
/// parameters and +-chi. The starting point is read off the data (peak and
/// dip positions) and refined from several linewidth guesses; the lowest
/// cost wins. Throws NumericalError on non-convergence or when J or Q_p
/// ends on its bound.
SpectrumFit fit_transmission(std::span<const double> omega, std::span<const double> mag_g,
                             std::span<const double> mag_e);

struct StarkCalibration {
  /// Photons per unit drive power.
  double photons_per_power = 0.0;
  /// Qubit frequency at zero power (Hz).
  double nu_q0 = 0.0;
  /// d nu_q / dP (Hz per unit power).
  double slope = 0.0;
  /// True when the data carries no measurable shift.
  bool degenerate = false;
};

/// Linear fit nu_q(P) = nu_q0 + 2 chi k P. Needs at least 3 points; with 4
/// or more a quadratic term that is both significant and larger than 5% of
/// the linear shift at the top power is reported as a NumericalError
/// (the drive has left the linear regime).
StarkCalibration stark_calibration(std::span<const double> power,
                                   std::span<const double> qubit_freq, double chi);

/// (1 + n_hemt / (2 G0))^-1. Requires G0 >= 1 and n_hemt >= 0.
double phase_sensitive_efficiency(double G0, double n_hemt);

/// (chi/J)^2 kappa_p n_drive, in the units of kappa_p times photons.
double output_power(double chi, double J, double kappa_p, double n_drive);

/// Product of the two efficiencies, each in (0, 1].
double total_efficiency(double eta_phi_amp, double eta_loss);

/// Added noise referred to the HEMT from the measured noise offset (vacuum units).
inline double hemt_noise_from_offset(double offset) { return 2.0 * offset; }

struct EfficiencyReport {
  double G0 = 1.0;
  double n_hemt = 0.0;
  double eta_phi_amp = 1.0;
  double eta_loss = 1.0;
  double eta_total = 1.0;
};

/// eta_loss = measured output power / expected output power.
EfficiencyReport efficiency_report(double G0, double n_hemt, double measured_power,
                                   double expected_power);

/// Single-quadrature power gain from a gain quoted in dB.
inline double gain_from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace qreadout
