#include "qreadout/optimize.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>

#include "qreadout/error.h"
#include "qreadout/numerics.h"
#include "qreadout/units.h"

namespace qreadout {
namespace {

double qss_rate(double chi, double kappa_eff, double n_drive, double tau, std::size_t intervals) {
  const double h = tau / static_cast<double>(intervals);
  double acc = 0.5 * (qss_signal(chi, kappa_eff, n_drive, 0.0) +
                      qss_signal(chi, kappa_eff, n_drive, tau));
  for (std::size_t i = 1; i < intervals; ++i) {
    acc += qss_signal(chi, kappa_eff, n_drive, static_cast<double>(i) * h);
  }
  return acc * h / std::sqrt(tau);
}

// Maximizes f over log(kappa_eff); returns kappa_eff and the value.
num::Extremum maximize_over_kappa(double chi, const RatioSearch& s,
                                  const std::function<double(double)>& f, bool* unimodal) {
  if (!(s.min_ratio > 0.0) || !(s.max_ratio > s.min_ratio) || s.n_scan < 3) {
    throw ConfigError("ratio search: invalid range");
  }
  const double a = std::log(std::abs(chi) / s.max_ratio);
  const double b = std::log(std::abs(chi) / s.min_ratio);
  auto g = [&](double u) { return f(std::exp(u)); };
  bool single = true;
  num::Extremum best = num::scan_then_refine_max(g, a, b, s.n_scan, s.log_tol, &single);
  if (!single) {
    // Several local maxima in the coarse scan: take the best of a dense scan.
    best = num::scan_then_refine_max(g, a, b, 16 * s.n_scan + 1, s.log_tol, nullptr);
  }
  if (unimodal != nullptr) *unimodal = single;
  best.x = std::exp(best.x);
  return best;
}

double require_chi(const DeviceParams& p) {
  const double chi = derive(p).chi;
  if (chi == 0.0) throw ConfigError("ratio search needs a nonzero dispersive shift");
  return chi;
}

}  // namespace

double coupling_for_linewidth(const DeviceParams& p, double kappa_eff) {
  if (!(kappa_eff > 0.0)) throw ConfigError("kappa_eff must be > 0");
  const double dp = p.delta_p();
  const double denom = p.omega_p + 4.0 * dp * dp * p.Q_p * p.Q_p / p.omega_p;
  return std::sqrt(kappa_eff * denom / (4.0 * p.Q_p));
}

double rate_at_kappa(const DeviceParams& p, double chi, double kappa_eff, double tau,
                     SignalModel model, const RatioSearch& search) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (model == SignalModel::qss) {
    return qss_rate(chi, kappa_eff, p.n_drive, tau, search.qss_intervals);
  }
  DeviceParams q = p;
  q.J = coupling_for_linewidth(p, kappa_eff);
  const ReadoutCircuit circuit(q, chi, search.dynamics);
  const double h = search.dynamics.rk_step;
  const auto steps = static_cast<std::size_t>(std::ceil(tau / h - 1e-9));
  const SignalTrace tr = full_model_signal(circuit, PulseEnvelope::gated(steps * h + h),
                                           TimeGrid{0.0, h, steps + 1});
  return integrated_rate(tr, tau);
}

std::vector<RatioPoint> optimal_ratio_vs_tau(const DeviceParams& p, std::span<const double> taus,
                                             SignalModel model, const RatioSearch& search) {
  const double chi = require_chi(p);
  for (double t : taus) {
    if (!(t > 0.0)) throw ConfigError("optimal_ratio_vs_tau: tau grid must be positive");
  }
  std::vector<RatioPoint> out(taus.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::int64_t>(taus.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const double tau = taus[static_cast<std::size_t>(i)];
      bool unimodal = true;
      const auto best = maximize_over_kappa(
          chi, search, [&](double k) { return rate_at_kappa(p, chi, k, tau, model, search); },
          &unimodal);
      RatioPoint& pt = out[static_cast<std::size_t>(i)];
      pt.tau = tau;
      pt.chi_tau = std::abs(angular(chi)) * tau;
      pt.kappa_eff = best.x;
      pt.ratio = std::abs(chi) / best.x;
      pt.rate = best.value;
      pt.unimodal = unimodal;
    } catch (...) {
#pragma omp critical(qreadout_ratio_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double steady_state_optimal_ratio(const DeviceParams& p, SignalModel model,
                                  const RatioSearch& search) {
  const double chi = require_chi(p);
  std::function<double(double)> f;
  if (model == SignalModel::qss) {
    f = [&](double k) { return qss_steady_state(chi, k, p.n_drive); };
  } else {
    f = [&](double k) {
      DeviceParams q = p;
      q.J = coupling_for_linewidth(p, k);
      const ReadoutCircuit c(q, chi, search.dynamics);
      const cplx d = c.steady_state(Qubit::excited, 1.0).beta - c.steady_state(Qubit::ground, 1.0).beta;
      return std::sqrt(c.kappa_p_rate()) * std::abs(d);
    };
  }
  return std::abs(chi) / maximize_over_kappa(chi, search, f, nullptr).x;
}

// ---------------------------------------------------------------------------

std::vector<FamilyMember> signal_family(std::span<const double> chis,
                                        std::span<const double> ratios, const TimeGrid& grid,
                                        const FamilyContext& ctx) {
  if (grid.n < 2) throw ConfigError("signal_family: grid needs at least two points");
  if (ctx.delta == 0.0 || ctx.alpha == 0.0 || ctx.delta + ctx.alpha == 0.0) {
    throw ConfigError("signal_family: invalid detuning or anharmonicity");
  }
  std::vector<FamilyMember> out;
  for (double chi : chis) {
    const double g2 = chi * ctx.delta * (ctx.delta + ctx.alpha) / ctx.alpha;
    if (!(g2 > 0.0)) throw ConfigError("signal_family: chi has the wrong sign for this alpha, Delta");
    for (double ratio : ratios) {
      if (!(ratio > 0.0)) throw ConfigError("signal_family: ratios must be > 0");
      FamilyMember m;
      m.chi = chi;
      m.ratio = ratio;
      m.g = std::sqrt(g2);
      m.kappa_eff = std::abs(chi) / ratio;
      m.n_drive = ctx.drive_fraction * critical_photon_number(m.g, ctx.delta);
      m.signal = qss_signal_trace(chi, m.kappa_eff, m.n_drive, grid);
      m.steady_state = qss_steady_state(chi, m.kappa_eff, m.n_drive);
      m.rate.assign(grid.n, 0.0);
      double acc = 0.0;
      for (std::size_t i = 1; i < grid.n; ++i) {
        acc += 0.5 * (m.signal.values[i - 1] + m.signal.values[i]) * grid.dt;
        const double t = grid.at(i) - grid.t0;
        m.rate[i] = t > 0.0 ? acc / std::sqrt(t) : 0.0;
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::optional<double> time_to_fraction(const SignalTrace& trace, double level, double fraction) {
  const double target = fraction * level;
  for (std::size_t i = 0; i < trace.values.size(); ++i) {
    if (trace.values[i] >= target) {
      if (i == 0) return trace.times[0];
      const double y0 = trace.values[i - 1];
      const double y1 = trace.values[i];
      return trace.times[i - 1] + (target - y0) / (y1 - y0) * (trace.times[i] - trace.times[i - 1]);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

TradeoffResult power_tradeoff(const DeviceParams& p, const PulseEnvelope& pulse,
                              std::span<const double> n_drive, double tau,
                              const MixingModel& mixing, const ShotConfig& cfg,
                              const FilterChain& chain) {
  TradeoffResult res;
  const std::vector<double> eps = overlap_vs_power(p, pulse, n_drive, tau, chain);
  for (std::size_t i = 0; i < n_drive.size(); ++i) {
    DeviceParams q = p;
    q.n_drive = n_drive[i];
    ShotConfig c = cfg;
    mixing.apply(q, c);
    const ReadoutRun run = run_readout(q, pulse, c, tau);
    TradeoffRow row;
    row.n_drive = n_drive[i];
    row.eps_o = eps[i];
    row.infidelity_mc = 1.0 - run.budget.fidelity;
    row.eps_o_fit = run.budget.eps_o;
    row.rejection_fraction = run.rejection_fraction;
    row.gamma_mix = c.gamma_mix_up;
    res.rows.push_back(row);
  }
  if (res.rows.size() >= 3) {
    const auto it = std::min_element(res.rows.begin(), res.rows.end(), [](const auto& a, const auto& b) {
      return a.infidelity_mc < b.infidelity_mc;
    });
    const auto idx = static_cast<std::size_t>(it - res.rows.begin());
    if (idx > 0 && idx + 1 < res.rows.size()) res.interior_argmin = idx;
  }
  return res;
}

double calibrate_mixing_constant(const DeviceParams& p, const PulseEnvelope& pulse,
                                 const ShotConfig& cfg, double tau, double target_eps_t_g,
                                 double lo, double hi, int iterations) {
  auto excess = [&](double c) {
    MixingModel m;
    m.kind = MixingModel::Kind::lambda_scaled;
    m.constant = c;
    ShotConfig sc = cfg;
    m.apply(p, sc);
    return run_readout(p, pulse, sc, tau).budget.eps_t_g - target_eps_t_g;
  };
  if (excess(lo) >= 0.0) return lo;
  if (excess(hi) < 0.0) {
    throw NumericalError("calibrate_mixing_constant: target not reached within the bracket");
  }
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------

ConstraintReport constraint_report(const DeviceParams& p, const ConstraintThresholds& th) {
  const DerivedParams d = derive(p);
  ConstraintReport r;
  r.n_crit = d.n_crit;
  r.drive_fraction = std::isfinite(d.n_crit) ? p.n_drive / d.n_crit : 0.0;
  r.lambda = d.lambda_mix;
  r.chi = d.chi;
  r.kappa_eff = d.kappa_eff;
  r.ratio = d.kappa_eff > 0.0 ? std::abs(d.chi) / d.kappa_eff : 0.0;
  r.target_tau = th.target_tau;
  r.drive_ok = r.drive_fraction <= th.max_drive_fraction;
  r.dispersive_ok = d.n_crit >= th.min_n_crit && d.chi != 0.0;

  char buf[256];
  if (d.chi == 0.0) {
    r.advisories.emplace_back("no dispersive shift: the two qubit states give the same response");
  } else {
    if (d.n_crit < th.min_n_crit) {
      std::snprintf(buf, sizeof buf, "n_crit = %.9g is below %.9g", d.n_crit, th.min_n_crit);
      r.advisories.emplace_back(buf);
    }
    const double target[] = {th.target_tau};
    r.recommended_ratio = optimal_ratio_vs_tau(p, target, SignalModel::qss).front().ratio;
    if (std::abs(r.recommended_ratio - r.ratio) > 0.05) {
      std::snprintf(buf, sizeof buf,
                    "at tau = %.9g ns the closed-form optimum is |chi/kappa_eff| = %.9g "
                    "(current %.9g)",
                    th.target_tau / kNs, r.recommended_ratio, r.ratio);
      r.advisories.emplace_back(buf);
    }
  }
  if (!r.drive_ok) {
    std::snprintf(buf, sizeof buf, "n_drive / n_crit = %.9g exceeds %.9g", r.drive_fraction,
                  th.max_drive_fraction);
    r.advisories.emplace_back(buf);
  }
  return r;
}

}  // namespace qreadout
