#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "qreadout/params.h"

namespace qreadout {

using cplx = std::complex<double>;

enum class Qubit { ground, excited };

/// The resonator sits at omega_r + chi for the excited state and
/// omega_r - chi for the ground state.
constexpr int qubit_sign(Qubit q) { return q == Qubit::excited ? 1 : -1; }
constexpr Qubit flipped(Qubit q) { return q == Qubit::excited ? Qubit::ground : Qubit::excited; }
const char* to_string(Qubit q);

enum class PulseKind { gated, two_step };
const char* to_string(PulseKind k);

/// Readout drive amplitude vs time. Amplitude 1 produces n_drive steady-state
/// photons in the readout resonator at the symmetric drive point.
struct PulseEnvelope {
  PulseKind kind = PulseKind::gated;
  double amplitude = 1.0;
  double boost_factor = 1.0;
  double boost_duration = 4e-9;
  double total_duration = 500e-9;
  double start_time = 0.0;

  static PulseEnvelope gated(double duration, double amplitude = 1.0);
  /// Two-step pulse with the default 2.5x amplitude, 4 ns leading segment.
  static PulseEnvelope two_step(double duration, double amplitude = 1.0,
                                double boost_factor = 2.5, double boost_duration = 4e-9);

  /// Amplitude on the half-open support [start, start + total_duration).
  double value(double t) const;
  double end_time() const { return start_time + total_duration; }
  void validate() const;
};

struct CavityState {
  cplx alpha{};  // readout resonator, sqrt(photons)
  cplx beta{};   // Purcell filter, sqrt(photons)
  double t = 0.0;
};

struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.5e-9;
  std::size_t n = 0;

  static TimeGrid span(double t_end, double dt, double t0 = 0.0);
  double at(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  double back() const { return at(n == 0 ? 0 : n - 1); }
};

enum class SignalModel { qss, full };
const char* to_string(SignalModel m);

/// S(t) sampled on a uniform grid, in sqrt(Hz) with angular linewidths.
struct SignalTrace {
  std::vector<double> times;
  std::vector<double> values;
  SignalModel model = SignalModel::full;

  double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

struct DynamicsOptions {
  double rk_step = 0.05e-9;
  double photon_ceiling = 100.0;
  /// Output grids coarser than this are rejected.
  double max_grid_step = 0.5e-9;
};

/// Coupled readout resonator + Purcell filter, linear coherent-state
/// dynamics in the frame rotating at the drive frequency:
///   da/dt = -i(d_r + s chi) a - (gamma/2) a - i J b
///   db/dt = -i d_p b - ((kappa_p + gamma)/2) b - i J a + sqrt(kappa_p) eps(t)
/// with all rates angular and s = qubit_sign.
class ReadoutCircuit {
 public:
  explicit ReadoutCircuit(const DeviceParams& p, DynamicsOptions opt = {});
  /// Uses the given dispersive shift instead of the closed form from g, Delta, alpha.
  ReadoutCircuit(const DeviceParams& p, double chi, DynamicsOptions opt = {});

  /// Exact steady state of the linear system for a constant amplitude.
  CavityState steady_state(Qubit q, double amplitude) const;

  /// One classical RK4 step with the drive amplitude held constant.
  void step(CavityState& s, Qubit q, double amplitude, double h) const;

  /// Integrates n_steps internal steps from `init`, holding the drive at its
  /// step-midpoint value. Returns n_steps + 1 states including `init`.
  /// Throws NumericalError when |alpha|^2 exceeds the photon ceiling.
  std::vector<CavityState> evolve(Qubit q, const PulseEnvelope& pulse, CavityState init,
                                  std::size_t n_steps) const;

  /// Drive (sqrt(photons/s)) per unit pulse amplitude.
  double drive_scale() const { return drive_scale_; }
  /// Angular Purcell filter linewidth (1/s).
  double kappa_p_rate() const { return kappa_p_; }
  double chi() const { return chi_hz_; }
  double step_size() const { return opt_.rk_step; }
  const DynamicsOptions& options() const { return opt_; }
  /// Copy integrating with a different internal step.
  ReadoutCircuit with_step(double rk_step) const {
    ReadoutCircuit c = *this;
    c.opt_.rk_step = rk_step;
    return c;
  }

 private:
  void init(const DeviceParams& p, double chi);
  // eps is the raw drive in sqrt(photons/s).
  CavityState steady_state_at(Qubit q, double eps, double det_r, double det_p) const;

  DynamicsOptions opt_;
  double chi_hz_ = 0.0;
  double chi_ = 0.0;
  double J_ = 0.0;
  double kappa_p_ = 0.0;
  double gamma_ = 0.0;
  double det_r_ = 0.0;
  double det_p_ = 0.0;
  double drive_scale_ = 0.0;
};

/// Filter and resonator fields for both qubit states on a grid.
struct FieldTraces {
  TimeGrid grid;
  std::vector<CavityState> ground;
  std::vector<CavityState> excited;
};

/// Integrates both qubit states from vacuum at grid.t0. The grid step must
/// be a multiple of the internal RK4 step (or smaller, in which case the
/// grid step is used directly).
FieldTraces simulate_fields(const ReadoutCircuit& circuit, const PulseEnvelope& pulse,
                            const TimeGrid& grid);

/// Closed-form single-cavity (quasi-steady-state) signal for a gated pulse
/// starting at t = 0 with omega_d = omega_r:
///   S(t) = S_ss / (2|r|) |2r - exp(-pi k t)(sin(2 pi chi t) + 2r cos(2 pi chi t))|,
///   r = chi / kappa_eff, S_ss^2 = 16 n (2 pi chi)^2 / (2 pi kappa_eff) / (1 + 4 r^2).
double qss_signal(double chi, double kappa_eff, double n_drive, double t);
double qss_signal(const DeviceParams& p, const DerivedParams& d, double t);
double qss_steady_state(double chi, double kappa_eff, double n_drive);

/// Closed-form single-cavity fields alpha_g(t), alpha_e(t).
std::pair<cplx, cplx> qss_fields(double chi, double kappa_eff, double n_drive, double t);

SignalTrace qss_signal_trace(double chi, double kappa_eff, double n_drive, const TimeGrid& grid);

/// S(t) = sqrt(kappa_p) |beta_e(t) - beta_g(t)| from the two-cavity model.
SignalTrace full_model_signal(const DeviceParams& p, const PulseEnvelope& pulse,
                              const TimeGrid& grid, DynamicsOptions opt = {});
SignalTrace full_model_signal(const ReadoutCircuit& circuit, const PulseEnvelope& pulse,
                              const TimeGrid& grid);
SignalTrace signal_from_fields(const FieldTraces& f, double kappa_p_rate);

/// s(tau) = (1/sqrt(tau)) * integral_0^tau S dt (trapezoid, linear
/// interpolation at tau). Throws ConfigError if tau is outside the trace.
double integrated_rate(const SignalTrace& trace, double tau);

/// Mean amplified-quadrature responses Q_x(t) = Re[exp(-i phi) beta_x(t)].
/// phi maximizes integral |Q_e - Q_g| dt and is oriented so that
/// integral (Q_e - Q_g) dt >= 0.
struct QuadratureTraces {
  std::vector<double> times;
  std::vector<double> q_g;
  std::vector<double> q_e;
  double phi_lo = 0.0;
};

double optimal_lo_phase(const FieldTraces& f);
QuadratureTraces project_quadrature(const FieldTraces& f, double phi_lo);
QuadratureTraces mean_quadrature_traces(const FieldTraces& f);
QuadratureTraces mean_quadrature_traces(const DeviceParams& p, const PulseEnvelope& pulse,
                                        const TimeGrid& grid, DynamicsOptions opt = {});

/// sqrt(kappa_p) |Q_e - Q_g|: the signal carried by the detected quadrature.
SignalTrace quadrature_signal(const QuadratureTraces& q, double kappa_p_rate);

}  // namespace qreadout
