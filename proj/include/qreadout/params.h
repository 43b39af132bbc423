#pragma once

#include <limits>

namespace qreadout {

/// Raw device parameters. Every frequency is an ordinary frequency in Hz
/// (the "/2pi" values quoted for circuit QED devices); angular conversion
/// happens only inside the integrators.
struct DeviceParams {
  double g = 208e6;            // qubit-resonator coupling
  double omega_q = 6316e6;     // qubit transition frequency
  double omega_r = 4754e6;     // readout resonator
  double omega_p = 4756e6;     // Purcell filter
  double alpha = -340e6;       // transmon anharmonicity
  double J = 25e6;             // resonator-filter coupling
  double Q_p = 74.0;           // Purcell filter quality factor
  double gamma_int = 0.0;      // internal loss of resonator and filter
  double T1 = 7.6e-6;          // may be +inf (no decay)
  double eta = 0.66;           // total measurement efficiency
  double n_drive = 2.5;        // steady-state resonator photons at amplitude 1
  double omega_d = 4754e6;     // drive frequency

  /// Guard on |Delta| / g; the dispersive regime requires it to be large.
  double dispersive_guard = 5.0;

  double delta() const { return omega_q - omega_r; }
  /// delta_p = omega_r - omega_p.
  double delta_p() const { return omega_r - omega_p; }
  double kappa_p() const { return omega_p / Q_p; }

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

struct DerivedParams {
  double chi = 0.0;
  double n_crit = 0.0;
  double kappa_eff = 0.0;
  double kappa_p = 0.0;
  double lambda_mix = 0.0;
  double delta = 0.0;
};

/// chi = g^2/Delta * alpha/(Delta + alpha), signed, in Hz.
/// Throws StraddleError when Delta == 0 or Delta + alpha == 0.
double dispersive_shift(double g, double delta, double alpha);

/// n_crit = Delta^2 / (4 g^2). Requires g > 0.
double critical_photon_number(double g, double delta);

/// kappa_eff = 4 Q_p J^2 / (omega_p + 4 delta_p^2 Q_p^2 / omega_p).
double effective_linewidth(double J, double Q_p, double omega_p, double delta_p);

/// lambda = sin^2(atan(sqrt((n_drive + 1) / n_crit)) / 2). An infinite
/// n_crit gives 0.
double lambda_param(double n_drive, double n_crit);

/// Evaluates every derived quantity; validates the parameters first.
DerivedParams derive(const DeviceParams& p);

}  // namespace qreadout
