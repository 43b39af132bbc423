#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qreadout/dynamics.h"
#include "qreadout/fitting.h"
#include "qreadout/params.h"
#include "qreadout/shots.h"

namespace qreadout {

/// Piecewise-constant integration weight: w[k] applies on
/// [k dt, (k+1) dt). Normalized so that sum w[k]^2 dt = 1.
struct WeightFunction {
  std::vector<double> times;  // left cell edges (s)
  std::vector<double> w;      // 1/sqrt(s)
  double dt = 0.0;

  std::size_t size() const { return w.size(); }
  double tau() const { return dt * static_cast<double>(w.size()); }
};

/// w proportional to |mean_e - mean_g| on the first tau/dt cells, unit L2
/// norm. Throws ConfigError when tau is not a whole number of cells or the
/// traces are too short, NumericalError when the difference vanishes.
WeightFunction build_weights(std::span<const double> mean_g, std::span<const double> mean_e,
                             double dt, double tau);

/// q = sqrt(kappa_p) * sum_k Q_k w_k dt with kappa_p given in Hz (converted
/// to an angular rate here). Throws ConfigError on a grid mismatch.
double integrate_shot(const ShotRecord& record, const WeightFunction& w, double kappa_p,
                      double dt_bin);

struct IntegratedBatch {
  std::vector<double> q_g;  // prepared in g
  std::vector<double> q_e;  // prepared in e
};

/// OpenMP-parallel over shots; order of each class follows the batch.
IntegratedBatch integrate_batch(std::span<const ShotRecord> batch, const WeightFunction& w,
                                double kappa_p, double dt_bin);
IntegratedBatch integrate_batch_serial(std::span<const ShotRecord> batch,
                                       const WeightFunction& w, double kappa_p, double dt_bin);

/// Two-Gaussian model fitted jointly to both prepared-state histograms:
///   C_g = A_gg N(mu_g, sigma_g) + A_eg N(mu_e, sigma_e)
///   C_e = A_ge N(mu_g, sigma_g) + A_ee N(mu_e, sigma_e)
/// Amplitudes are expected counts, so A_gg + A_eg ~ n_g.
struct MixtureFit {
  double mu_g = 0.0;
  double mu_e = 0.0;
  double sigma_g = 1.0;
  double sigma_e = 1.0;
  double A_gg = 0.0;
  double A_ge = 0.0;
  double A_eg = 0.0;
  double A_ee = 0.0;
  double n_g = 0.0;
  double n_e = 0.0;
  double threshold = 0.0;
  int iterations = 0;
  std::vector<double> edges;

  /// True when the excited component sits at larger q.
  bool excited_high() const { return mu_e > mu_g; }
  /// Normalized fitted densities of the two prepared-state distributions.
  double density_g(double q) const;
  double density_e(double q) const;
};

/// Intersection of the normalized fitted distributions between the means
/// (bisection). Throws NumericalError if they do not cross there.
double mixture_threshold(const MixtureFit& fit);

/// Needs >= 1000 samples per class. Throws NumericalError when the fit does
/// not converge or the sigma ratio exceeds 1e3.
MixtureFit fit_mixture(std::span<const double> q_g, std::span<const double> q_e);

struct ErrorBudget {
  double fidelity = 0.0;
  /// 1 - (eps_g + eps_e) / 2.
  double average_assignment_fidelity = 0.0;
  double eps_g = 0.0;
  double eps_e = 0.0;
  double eps_o = 0.0;
  double eps_o_g = 0.0;
  double eps_o_e = 0.0;
  /// eps_x - eps_o_x; reported unclipped, so sampling noise can make it
  /// slightly negative.
  double eps_t_g = 0.0;
  double eps_t_e = 0.0;
  std::size_t n_g = 0;
  std::size_t n_e = 0;
};

/// Misassignment counted against fit.threshold; overlap parts are the tail
/// masses of each class's dominant Gaussian beyond the threshold.
ErrorBudget error_budget(std::span<const double> q_g, std::span<const double> q_e,
                         const MixtureFit& fit);

/// Measurement chain between the cavity output and the integrated value:
/// a one-pole amplifier response, bin averaging in the digitizer and the
/// mode-matched weight built from the signal seen through both.
struct FilterChain {
  /// 3 dB bandwidth of the amplifier (Hz); 0 disables the pole.
  double amp_bandwidth = 27e6;
  /// Digitizer bin (s).
  double boxcar = 8e-9;
  /// Upper bound on the internal time step (s).
  double max_step = 0.05e-9;
};

struct OverlapResult {
  double eps_o = 1.0;
  /// Integral of S f dt.
  double separation = 0.0;
  /// sqrt(sigma^2 integral f^2 dt).
  double noise = 0.0;
  /// Effective kernel f(t) on [0, tau] and its time grid.
  std::vector<double> times;
  std::vector<double> kernel;
};

/// eps_o = erfc( sqrt(1/8) int S f dt / sqrt(int sigma^2 f^2 dt) ),
/// sigma^2 = 1/(4 eta), where f is the adjoint of `chain` applied to the
/// matched weight. Returns 1 when S vanishes on [0, tau].
OverlapResult overlap_analysis(double eta, const SignalTrace& trace, const FilterChain& chain,
                               double tau);
double overlap_model(const DeviceParams& p, const SignalTrace& trace, const FilterChain& chain,
                     double tau);

/// Same erfc form for an explicit kernel sampled on the trace grid over
/// [0, tau]. Throws NumericalError when int f^2 dt is zero.
double overlap_error(double eta, const SignalTrace& trace, std::span<const double> kernel,
                     double tau);

/// Full-model S(t) for each drive strength, then overlap_model. Parallel
/// over the grid; element i depends only on n_drive[i].
std::vector<double> overlap_vs_power(const DeviceParams& p, const PulseEnvelope& pulse,
                                     std::span<const double> n_drive, double tau,
                                     const FilterChain& chain = {}, DynamicsOptions opt = {});

/// Full-model signal of the paper-style gated readout on [0, tau].
SignalTrace readout_signal(const DeviceParams& p, const PulseEnvelope& pulse, double tau,
                           DynamicsOptions opt = {});

struct HistogramTable {
  std::vector<double> centers;
  std::vector<double> count_g;
  std::vector<double> count_e;
  std::vector<double> fit_g;
  std::vector<double> fit_e;
};

/// Histograms on the fit's bins plus the fitted expected counts.
HistogramTable histogram_table(std::span<const double> q_g, std::span<const double> q_e,
                               const MixtureFit& fit);

/// Result of the full single-shot pipeline at one integration time.
struct ReadoutRun {
  WeightFunction weights;
  IntegratedBatch values;
  MixtureFit fit;
  ErrorBudget budget;
  /// 0 when preselection is disabled.
  double rejection_fraction = 0.0;
  double preselect_threshold = 0.0;
};

/// Simulates cfg.n_shots shots on a record of length tau (whole bins),
/// applies preselection when enabled, weights with the binned mean
/// difference, integrates, fits and scores.
ReadoutRun run_readout(const DeviceParams& p, const PulseEnvelope& pulse, ShotConfig cfg,
                       double tau);

}  // namespace qreadout
