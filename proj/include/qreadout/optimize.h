#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qreadout/analysis.h"
#include "qreadout/dynamics.h"
#include "qreadout/params.h"
#include "qreadout/shots.h"

namespace qreadout {

struct RatioSearch {
  /// Search range of |chi / kappa_eff|.
  double min_ratio = 0.02;
  double max_ratio = 5.0;
  /// Coarse pre-scan points (log-spaced in kappa_eff) before golden refinement.
  std::size_t n_scan = 17;
  /// Tolerance on log(kappa_eff).
  double log_tol = 1e-7;
  /// Trapezoid intervals for the closed-form signal.
  std::size_t qss_intervals = 4000;
  DynamicsOptions dynamics{};
};

struct RatioPoint {
  double tau = 0.0;
  /// Angular chi times tau.
  double chi_tau = 0.0;
  /// |chi / kappa_eff| maximizing s(tau).
  double ratio = 0.0;
  double kappa_eff = 0.0;
  double rate = 0.0;
  /// False when the pre-scan saw several maxima and a dense scan was used.
  bool unimodal = true;
};

/// s(tau) for the given kappa_eff at fixed chi. For the full model kappa_eff
/// is set through J at fixed kappa_p and detuning.
double rate_at_kappa(const DeviceParams& p, double chi, double kappa_eff, double tau,
                     SignalModel model, const RatioSearch& search = {});

/// For each tau, the |chi/kappa_eff| maximizing s(tau) with chi, n_drive and
/// the filter fixed. Parallel over tau.
std::vector<RatioPoint> optimal_ratio_vs_tau(const DeviceParams& p, std::span<const double> taus,
                                             SignalModel model, const RatioSearch& search = {});

/// The tau -> infinity limit: the ratio maximizing the steady-state signal.
double steady_state_optimal_ratio(const DeviceParams& p, SignalModel model,
                                  const RatioSearch& search = {});

/// J giving the requested kappa_eff at fixed Q_p, omega_p and detuning.
double coupling_for_linewidth(const DeviceParams& p, double kappa_eff);

struct FamilyContext {
  double alpha = -340e6;
  double delta = 1562e6;
  /// n_drive as a fraction of n_crit.
  double drive_fraction = 0.2;
};

struct FamilyMember {
  double chi = 0.0;
  double ratio = 0.0;
  double kappa_eff = 0.0;
  double g = 0.0;
  double n_drive = 0.0;
  SignalTrace signal;
  /// s(t) on the same grid (0 at t = 0).
  std::vector<double> rate;
  double steady_state = 0.0;
};

/// Closed-form S(t) and s(t) for every (chi, ratio) pair. g follows from chi
/// at the context's alpha and Delta, and the drive sits at a fixed fraction
/// of n_crit.
std::vector<FamilyMember> signal_family(std::span<const double> chis,
                                        std::span<const double> ratios, const TimeGrid& grid,
                                        const FamilyContext& ctx = {});

/// First time the trace reaches `fraction` of `level` (linear interpolation);
/// nullopt if it never does.
std::optional<double> time_to_fraction(const SignalTrace& trace, double level, double fraction);

struct TradeoffRow {
  double n_drive = 0.0;
  /// Analytic overlap error.
  double eps_o = 0.0;
  /// 1 - F from the Monte Carlo pipeline.
  double infidelity_mc = 0.0;
  double eps_o_fit = 0.0;
  double rejection_fraction = 0.0;
  double gamma_mix = 0.0;
};

struct TradeoffResult {
  std::vector<TradeoffRow> rows;
  /// Index of the minimum of 1 - F when it lies strictly inside the grid.
  std::optional<std::size_t> interior_argmin;
};

TradeoffResult power_tradeoff(const DeviceParams& p, const PulseEnvelope& pulse,
                              std::span<const double> n_drive, double tau,
                              const MixingModel& mixing, const ShotConfig& cfg,
                              const FilterChain& chain = {});

/// Finds the lambda_scaled rate constant giving the target normalized ground
/// state error at tau (bisection on a fixed seed).
double calibrate_mixing_constant(const DeviceParams& p, const PulseEnvelope& pulse,
                                 const ShotConfig& cfg, double tau, double target_eps_t_g,
                                 double lo = 0.0, double hi = 3e6, int iterations = 12);

struct ConstraintThresholds {
  double min_n_crit = 10.0;
  /// Largest allowed n_drive / n_crit.
  double max_drive_fraction = 0.25;
  double target_tau = 56e-9;
};

struct ConstraintReport {
  double n_crit = 0.0;
  double drive_fraction = 0.0;
  double lambda = 0.0;
  double chi = 0.0;
  double kappa_eff = 0.0;
  double ratio = 0.0;
  bool dispersive_ok = false;
  bool drive_ok = false;
  double target_tau = 0.0;
  /// Closed-form optimum |chi/kappa_eff| at target_tau (0 without signal).
  double recommended_ratio = 0.0;
  std::vector<std::string> advisories;
};

ConstraintReport constraint_report(const DeviceParams& p, const ConstraintThresholds& th = {});

}  // namespace qreadout
