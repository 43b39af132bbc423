#include "qreadout/dynamics.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qreadout/error.h"
#include "qreadout/numerics.h"
#include "qreadout/units.h"

namespace qreadout {

const char* to_string(Qubit q) { return q == Qubit::excited ? "e" : "g"; }
const char* to_string(PulseKind k) { return k == PulseKind::gated ? "gated" : "two_step"; }
const char* to_string(SignalModel m) { return m == SignalModel::qss ? "qss" : "full"; }

// ---------------------------------------------------------------------------
// Pulse

PulseEnvelope PulseEnvelope::gated(double duration, double amplitude) {
  PulseEnvelope p;
  p.kind = PulseKind::gated;
  p.amplitude = amplitude;
  p.boost_factor = 1.0;
  p.total_duration = duration;
  return p;
}

PulseEnvelope PulseEnvelope::two_step(double duration, double amplitude, double boost_factor,
                                      double boost_duration) {
  PulseEnvelope p;
  p.kind = PulseKind::two_step;
  p.amplitude = amplitude;
  p.boost_factor = boost_factor;
  p.boost_duration = boost_duration;
  p.total_duration = duration;
  return p;
}

double PulseEnvelope::value(double t) const {
  const double rel = t - start_time;
  if (rel < 0.0 || rel >= total_duration) return 0.0;
  if (kind == PulseKind::two_step && rel < boost_duration) return amplitude * boost_factor;
  return amplitude;
}

void PulseEnvelope::validate() const {
  if (!(amplitude >= 0.0) || !(boost_factor >= 0.0)) {
    throw ConfigError("pulse amplitudes must be >= 0");
  }
  if (!(total_duration > 0.0)) throw ConfigError("pulse total_duration must be > 0");
  if (kind == PulseKind::gated && boost_factor != 1.0) {
    throw ConfigError("gated pulses require boost_factor = 1");
  }
  if (kind == PulseKind::two_step && !(boost_duration >= 0.0 && boost_duration < total_duration)) {
    throw ConfigError("two-step pulse requires 0 <= boost_duration < total_duration");
  }
}

TimeGrid TimeGrid::span(double t_end, double dt, double t0) {
  if (!(dt > 0.0) || !(t_end >= t0)) throw ConfigError("TimeGrid: invalid span");
  TimeGrid g;
  g.t0 = t0;
  g.dt = dt;
  g.n = static_cast<std::size_t>(std::llround((t_end - t0) / dt)) + 1;
  return g;
}

// ---------------------------------------------------------------------------
// Two-cavity circuit

ReadoutCircuit::ReadoutCircuit(const DeviceParams& p, DynamicsOptions opt) : opt_(opt) {
  init(p, derive(p).chi);
}

ReadoutCircuit::ReadoutCircuit(const DeviceParams& p, double chi, DynamicsOptions opt)
    : opt_(opt) {
  p.validate();
  init(p, chi);
}

void ReadoutCircuit::init(const DeviceParams& p, double chi) {
  if (!(opt_.rk_step > 0.0)) throw ConfigError("rk_step must be > 0");
  if (!(opt_.photon_ceiling > 0.0)) throw ConfigError("photon_ceiling must be > 0");
  chi_hz_ = chi;
  chi_ = angular(chi);
  J_ = angular(p.J);
  kappa_p_ = angular(p.kappa_p());
  gamma_ = angular(p.gamma_int);
  det_r_ = angular(p.omega_r - p.omega_d);
  det_p_ = angular(p.omega_p - p.omega_d);

  drive_scale_ = 0.0;
  if (p.n_drive > 0.0) {
    // Calibrate at the symmetric drive point omega_d = omega_r.
    const double det_p_sym = angular(p.omega_p - p.omega_r);
    const CavityState sg = steady_state_at(Qubit::ground, 1.0, 0.0, det_p_sym);
    const CavityState se = steady_state_at(Qubit::excited, 1.0, 0.0, det_p_sym);
    const double mean_n = 0.5 * (std::norm(sg.alpha) + std::norm(se.alpha));
    if (!(mean_n > 0.0) || !std::isfinite(mean_n)) {
      throw ConfigError("drive cannot populate the readout resonator (J = 0?)");
    }
    drive_scale_ = std::sqrt(p.n_drive / mean_n);
  }
}

CavityState ReadoutCircuit::steady_state_at(Qubit q, double eps, double det_r,
                                            double det_p) const {
  const cplx i1(0.0, 1.0);
  const double s = qubit_sign(q);
  const cplx a11 = -i1 * (det_r + s * chi_) - 0.5 * gamma_;
  const cplx a12 = -i1 * J_;
  const cplx a21 = -i1 * J_;
  const cplx a22 = -i1 * det_p - 0.5 * (kappa_p_ + gamma_);
  const cplx b = std::sqrt(kappa_p_) * eps;
  const cplx det = a11 * a22 - a12 * a21;
  if (std::abs(det) == 0.0) throw NumericalError("steady state: singular circuit matrix");
  CavityState st;
  st.alpha = a12 * b / det;
  st.beta = -a11 * b / det;
  return st;
}

CavityState ReadoutCircuit::steady_state(Qubit q, double amplitude) const {
  return steady_state_at(q, amplitude * drive_scale_, det_r_, det_p_);
}

void ReadoutCircuit::step(CavityState& s, Qubit q, double amplitude, double h) const {
  const cplx i1(0.0, 1.0);
  const double sg = qubit_sign(q);
  const cplx a11 = -i1 * (det_r_ + sg * chi_) - 0.5 * gamma_;
  const cplx a12 = -i1 * J_;
  const cplx a22 = -i1 * det_p_ - 0.5 * (kappa_p_ + gamma_);
  const cplx drive = std::sqrt(kappa_p_) * drive_scale_ * amplitude;

  auto f = [&](cplx a, cplx b, cplx& da, cplx& db) {
    da = a11 * a + a12 * b;
    db = a12 * a + a22 * b + drive;
  };
  cplx ka1, kb1, ka2, kb2, ka3, kb3, ka4, kb4;
  f(s.alpha, s.beta, ka1, kb1);
  f(s.alpha + 0.5 * h * ka1, s.beta + 0.5 * h * kb1, ka2, kb2);
  f(s.alpha + 0.5 * h * ka2, s.beta + 0.5 * h * kb2, ka3, kb3);
  f(s.alpha + h * ka3, s.beta + h * kb3, ka4, kb4);
  s.alpha += h / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
  s.beta += h / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
  s.t += h;
}

std::vector<CavityState> ReadoutCircuit::evolve(Qubit q, const PulseEnvelope& pulse,
                                                CavityState init, std::size_t n_steps) const {
  std::vector<CavityState> out;
  out.reserve(n_steps + 1);
  out.push_back(init);
  const double h = opt_.rk_step;
  const double t0 = init.t;
  CavityState s = init;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t_left = t0 + static_cast<double>(k) * h;
    step(s, q, pulse.value(t_left + 0.5 * h), h);
    s.t = t0 + static_cast<double>(k + 1) * h;
    if (std::norm(s.alpha) > opt_.photon_ceiling) {
      std::ostringstream msg;
      msg << "resonator photon number " << std::norm(s.alpha) << " exceeds ceiling "
          << opt_.photon_ceiling << " at t = " << s.t;
      throw NumericalError(msg.str());
    }
    out.push_back(s);
  }
  return out;
}

FieldTraces simulate_fields(const ReadoutCircuit& circuit, const PulseEnvelope& pulse,
                            const TimeGrid& grid) {
  const auto& opt = circuit.options();
  if (grid.n == 0) throw ConfigError("simulate_fields: empty grid");
  if (grid.dt > opt.max_grid_step * (1.0 + 1e-9)) {
    std::ostringstream msg;
    msg << "grid step " << grid.dt << " s is coarser than " << opt.max_grid_step << " s";
    throw ConfigError(msg.str());
  }
  pulse.validate();

  // Internal step divides the grid step exactly.
  std::size_t sub = 1;
  DynamicsOptions inner = opt;
  if (grid.dt > opt.rk_step) {
    sub = static_cast<std::size_t>(std::llround(grid.dt / opt.rk_step));
    if (std::abs(static_cast<double>(sub) * opt.rk_step - grid.dt) > 1e-9 * grid.dt) {
      sub = static_cast<std::size_t>(std::ceil(grid.dt / opt.rk_step));
    }
  }
  inner.rk_step = grid.dt / static_cast<double>(sub);
  const ReadoutCircuit* c = &circuit;
  ReadoutCircuit resized = circuit;
  if (inner.rk_step != opt.rk_step) {
    resized = circuit.with_step(inner.rk_step);
    c = &resized;
  }

  FieldTraces out;
  out.grid = grid;
  for (Qubit q : {Qubit::ground, Qubit::excited}) {
    CavityState init;
    init.t = grid.t0;
    const auto fine = c->evolve(q, pulse, init, (grid.n - 1) * sub);
    auto& dst = q == Qubit::ground ? out.ground : out.excited;
    dst.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) dst[i] = fine[i * sub];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form single-cavity limit

double qss_steady_state(double chi, double kappa_eff, double n_drive) {
  if (!(kappa_eff > 0.0)) throw ConfigError("qss: kappa_eff must be > 0");
  const double r = chi / kappa_eff;
  const double chi_a = angular(chi);
  return std::sqrt(16.0 * n_drive * chi_a * chi_a / angular(kappa_eff) / (1.0 + 4.0 * r * r));
}

double qss_signal(double chi, double kappa_eff, double n_drive, double t) {
  if (t < 0.0) throw ConfigError("qss_signal requires t >= 0");
  if (chi == 0.0 || n_drive == 0.0) return 0.0;
  const double r = chi / kappa_eff;
  const double decay = std::exp(-std::numbers::pi * kappa_eff * t);
  const double phase = kTwoPi * chi * t;
  const double bracket = 2.0 * r - decay * (std::sin(phase) + 2.0 * r * std::cos(phase));
  return qss_steady_state(chi, kappa_eff, n_drive) / (2.0 * std::abs(r)) * std::abs(bracket);
}

double qss_signal(const DeviceParams& p, const DerivedParams& d, double t) {
  return qss_signal(d.chi, d.kappa_eff, p.n_drive, t);
}

std::pair<cplx, cplx> qss_fields(double chi, double kappa_eff, double n_drive, double t) {
  const double k = 0.5 * angular(kappa_eff);
  const double x = angular(chi);
  const double eps = std::sqrt(n_drive * (k * k + x * x));
  auto field = [&](Qubit q) {
    const cplx rate(k, qubit_sign(q) * x);
    return eps / rate * (1.0 - std::exp(-rate * t));
  };
  return {field(Qubit::ground), field(Qubit::excited)};
}

SignalTrace qss_signal_trace(double chi, double kappa_eff, double n_drive, const TimeGrid& grid) {
  SignalTrace tr;
  tr.model = SignalModel::qss;
  tr.times.resize(grid.n);
  tr.values.resize(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    tr.times[i] = grid.at(i);
    tr.values[i] = qss_signal(chi, kappa_eff, n_drive, std::max(0.0, tr.times[i]));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Full model

SignalTrace signal_from_fields(const FieldTraces& f, double kappa_p_rate) {
  SignalTrace tr;
  tr.model = SignalModel::full;
  tr.times.resize(f.grid.n);
  tr.values.resize(f.grid.n);
  const double root = std::sqrt(kappa_p_rate);
  for (std::size_t i = 0; i < f.grid.n; ++i) {
    tr.times[i] = f.grid.at(i);
    tr.values[i] = root * std::abs(f.excited[i].beta - f.ground[i].beta);
  }
  return tr;
}

SignalTrace full_model_signal(const ReadoutCircuit& circuit, const PulseEnvelope& pulse,
                              const TimeGrid& grid) {
  return signal_from_fields(simulate_fields(circuit, pulse, grid), circuit.kappa_p_rate());
}

SignalTrace full_model_signal(const DeviceParams& p, const PulseEnvelope& pulse,
                              const TimeGrid& grid, DynamicsOptions opt) {
  return full_model_signal(ReadoutCircuit(p, opt), pulse, grid);
}

double integrated_rate(const SignalTrace& trace, double tau) {
  const std::size_t n = trace.times.size();
  if (n < 2) throw ConfigError("integrated_rate: trace too short");
  const double t0 = trace.times.front();
  const double dt = trace.dt();
  if (!(tau > t0) || tau > trace.times.back() * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "integrated_rate: tau = " << tau << " s outside trace support";
    throw ConfigError(msg.str());
  }
  const double pos = (tau - t0) / dt;
  auto full = static_cast<std::size_t>(std::floor(pos + 1e-9));
  full = std::min(full, n - 1);
  double integral = num::trapezoid(std::span(trace.values).first(full + 1), dt);
  const double frac = pos - static_cast<double>(full);
  if (frac > 1e-9 && full + 1 < n) {
    const double y0 = trace.values[full];
    const double y1 = y0 + frac * (trace.values[full + 1] - y0);
    integral += 0.5 * (y0 + y1) * frac * dt;
  }
  return integral / std::sqrt(tau - t0);
}

// ---------------------------------------------------------------------------
// Quadratures

namespace {

double contrast(const FieldTraces& f, double phi) {
  const cplx rot = std::polar(1.0, -phi);
  std::vector<double> d(f.grid.n);
  for (std::size_t i = 0; i < f.grid.n; ++i) {
    d[i] = std::abs(std::real(rot * (f.excited[i].beta - f.ground[i].beta)));
  }
  return num::trapezoid(d, f.grid.dt);
}

}  // namespace

double optimal_lo_phase(const FieldTraces& f) {
  const auto best = num::scan_then_refine_max([&](double phi) { return contrast(f, phi); }, 0.0,
                                              std::numbers::pi, 65, 1e-10);
  double phi = best.x;
  double signed_sum = 0.0;
  const cplx rot = std::polar(1.0, -phi);
  for (std::size_t i = 0; i < f.grid.n; ++i) {
    signed_sum += std::real(rot * (f.excited[i].beta - f.ground[i].beta));
  }
  if (signed_sum < 0.0) phi += std::numbers::pi;
  return phi;
}

QuadratureTraces project_quadrature(const FieldTraces& f, double phi_lo) {
  QuadratureTraces q;
  q.phi_lo = phi_lo;
  const cplx rot = std::polar(1.0, -phi_lo);
  q.times.resize(f.grid.n);
  q.q_g.resize(f.grid.n);
  q.q_e.resize(f.grid.n);
  for (std::size_t i = 0; i < f.grid.n; ++i) {
    q.times[i] = f.grid.at(i);
    q.q_g[i] = std::real(rot * f.ground[i].beta);
    q.q_e[i] = std::real(rot * f.excited[i].beta);
  }
  return q;
}

QuadratureTraces mean_quadrature_traces(const FieldTraces& f) {
  return project_quadrature(f, optimal_lo_phase(f));
}

QuadratureTraces mean_quadrature_traces(const DeviceParams& p, const PulseEnvelope& pulse,
                                        const TimeGrid& grid, DynamicsOptions opt) {
  return mean_quadrature_traces(simulate_fields(ReadoutCircuit(p, opt), pulse, grid));
}

SignalTrace quadrature_signal(const QuadratureTraces& q, double kappa_p_rate) {
  SignalTrace tr;
  tr.model = SignalModel::full;
  tr.times = q.times;
  tr.values.resize(q.times.size());
  const double root = std::sqrt(kappa_p_rate);
  for (std::size_t i = 0; i < q.times.size(); ++i) {
    tr.values[i] = root * std::abs(q.q_e[i] - q.q_g[i]);
  }
  return tr;
}

}  // namespace qreadout
