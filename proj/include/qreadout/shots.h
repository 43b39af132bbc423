#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qreadout/dynamics.h"
#include "qreadout/params.h"

namespace qreadout {

struct ShotConfig {
  std::size_t n_shots = 60000;
  double dt_bin = 8e-9;
  /// Length of the recorded main-readout window, starting at t = 0.
  double record_duration = 200e-9;
  std::uint64_t master_seed = 20170601;
  double p_thermal = 0.003;
  /// Drive-induced transition rates (1/s), active while the readout tone is on.
  double gamma_mix_up = 0.0;
  double gamma_mix_down = 0.0;
  bool preselect = false;
  /// Probability that the pi pulse preparing |e> fails.
  double prep_error = 0.0;

  /// Premeasurement timing relative to the main pulse at t = 0.
  double premeas_start = -250e-9;
  double premeas_duration = 150e-9;
  double premeas_window = 50e-9;

  std::size_t n_bins() const;
  void validate() const;
};

struct Jump {
  double t = 0.0;
  Qubit to = Qubit::ground;
};

struct ShotRecord {
  Qubit prep = Qubit::ground;
  /// Hidden qubit state at t = 0, after the preparation pulse.
  Qubit start_state = Qubit::ground;
  /// Bin-averaged quadrature on [k dt_bin, (k+1) dt_bin), sqrt(photons).
  std::vector<double> samples;
  /// Hidden qubit history, strictly increasing in t.
  std::vector<Jump> jump_times;
  /// Mean quadrature of the last premeas_window of the premeasurement
  /// (NaN when preselection is disabled).
  double preselect_value = 0.0;
};

/// Mixing rates proportional to lambda(n_drive) * n_drive.
struct MixingModel {
  enum class Kind { none, fixed, lambda_scaled };
  Kind kind = Kind::none;
  double up = 0.0;
  double down = 0.0;
  /// Rate constant (1/s) for lambda_scaled: gamma = c * lambda * n_drive.
  double constant = kDefaultLambdaConstant;

  /// Calibrated so that the transition error of prepared-g shots is 0.23% at
  /// the bundled device configuration, tau = 56 ns, gated pulse.
  static constexpr double kDefaultLambdaConstant = 3.2e5;

  /// Rates for a given drive; writes them into `cfg`.
  void apply(const DeviceParams& p, ShotConfig& cfg) const;
};

/// Precomputes the deterministic cavity response once and then draws
/// independent shots. Shot i is prepared in g for even i and e for odd i;
/// its random stream is seeded with derive_seed(master_seed, i), so batches
/// are identical regardless of how shots are scheduled.
class ShotSimulator {
 public:
  ShotSimulator(const DeviceParams& p, const PulseEnvelope& pulse, const ShotConfig& cfg,
                DynamicsOptions opt = {});

  ShotRecord simulate(Qubit prep, std::uint64_t seed) const;
  ShotRecord simulate_index(std::size_t index) const;

  /// OpenMP-parallel batch of cfg.n_shots shots.
  std::vector<ShotRecord> simulate_batch() const;
  /// Single-threaded reference for simulate_batch.
  std::vector<ShotRecord> simulate_batch_serial() const;

  const QuadratureTraces& mean_traces() const { return mean_; }
  /// Per-bin mean responses (noise-free, no transitions).
  const std::vector<double>& binned_mean(Qubit q) const {
    return q == Qubit::ground ? bin_g_ : bin_e_;
  }
  /// Per-bin noise standard deviation: sqrt(1 / (4 eta kappa_p dt_bin)).
  double bin_sigma() const { return bin_sigma_; }
  double kappa_p_rate() const { return circuit_.kappa_p_rate(); }
  const ShotConfig& config() const { return cfg_; }
  const DeviceParams& params() const { return params_; }

 private:
  std::vector<double> trajectory_quadrature(const std::vector<Jump>& jumps, Qubit start) const;
  double premeas_mean(const std::vector<Jump>& jumps, Qubit start) const;

  DeviceParams params_;
  PulseEnvelope pulse_;
  ShotConfig cfg_;
  ReadoutCircuit circuit_;
  std::size_t per_bin_ = 0;
  std::size_t n_fine_ = 0;
  FieldTraces fields_;
  QuadratureTraces mean_;
  std::vector<double> bin_g_;
  std::vector<double> bin_e_;
  double bin_sigma_ = 0.0;
  // Premeasurement: gated pulse of premeas_duration, projected with the main LO phase.
  PulseEnvelope premeas_pulse_;
  FieldTraces premeas_fields_;
  std::size_t premeas_window_steps_ = 0;
  double premeas_sigma_ = 0.0;
};

ShotRecord simulate_shot(const DeviceParams& p, const PulseEnvelope& pulse, const ShotConfig& cfg,
                         Qubit prep, std::uint64_t seed);

struct PreselectionResult {
  std::vector<ShotRecord> kept;
  double rejection_fraction = 0.0;
  double threshold = 0.0;
  double fit_mean = 0.0;
  double fit_sigma = 0.0;
};

/// Fits a single Gaussian to the histogram of premeasurement values and
/// rejects every record above its 99% quantile. Needs >= 100 records.
PreselectionResult run_preselection(std::span<const ShotRecord> batch, double quantile = 0.99);

}  // namespace qreadout
