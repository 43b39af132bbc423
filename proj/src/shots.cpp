#include "qreadout/shots.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>

#include "qreadout/error.h"
#include "qreadout/fitting.h"
#include "qreadout/numerics.h"

namespace qreadout {
namespace {

std::size_t exact_ratio(double num, double den, const char* what) {
  const double r = num / den;
  const auto k = static_cast<std::size_t>(std::llround(r));
  if (k == 0 || std::abs(static_cast<double>(k) - r) > 1e-6 * r) {
    throw ConfigError(std::string(what) + " must be a whole multiple of the integrator step");
  }
  return k;
}

struct Rates {
  double up = 0.0;
  double down = 0.0;
};

// Two-state continuous-time Markov chain on [t0, t1); appends jumps.
Qubit run_chain(Qubit state, double t0, double t1, Rates rates, std::mt19937_64& rng,
                std::vector<Jump>& jumps) {
  std::exponential_distribution<double> unit_exp(1.0);
  double t = t0;
  while (true) {
    const double rate = state == Qubit::excited ? rates.down : rates.up;
    if (!(rate > 0.0)) break;
    t += unit_exp(rng) / rate;
    if (!(t < t1)) break;
    state = flipped(state);
    jumps.push_back({t, state});
  }
  return state;
}

}  // namespace

std::size_t ShotConfig::n_bins() const {
  return static_cast<std::size_t>(std::floor(record_duration / dt_bin + 1e-9));
}

void ShotConfig::validate() const {
  if (n_shots == 0) throw ConfigError("n_shots must be > 0");
  if (!(dt_bin > 0.0)) throw ConfigError("dt_bin must be > 0");
  if (!(record_duration >= dt_bin)) throw ConfigError("record_duration must cover one bin");
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(p_thermal, "p_thermal");
  prob(prep_error, "prep_error");
  if (!(gamma_mix_up >= 0.0) || !(gamma_mix_down >= 0.0)) {
    throw ConfigError("mixing rates must be >= 0");
  }
  if (preselect) {
    if (!(premeas_duration > 0.0) || !(premeas_window > 0.0) ||
        premeas_window > premeas_duration) {
      throw ConfigError("premeasurement window must lie inside the premeasurement pulse");
    }
    if (premeas_start + premeas_duration > 0.0) {
      throw ConfigError("premeasurement must end before the main pulse at t = 0");
    }
  }
}

void MixingModel::apply(const DeviceParams& p, ShotConfig& cfg) const {
  switch (kind) {
    case Kind::none:
      cfg.gamma_mix_up = 0.0;
      cfg.gamma_mix_down = 0.0;
      break;
    case Kind::fixed:
      cfg.gamma_mix_up = up;
      cfg.gamma_mix_down = down;
      break;
    case Kind::lambda_scaled: {
      const DerivedParams d = derive(p);
      const double rate = constant * d.lambda_mix * p.n_drive;
      cfg.gamma_mix_up = rate;
      cfg.gamma_mix_down = rate;
      break;
    }
  }
}

// ---------------------------------------------------------------------------

ShotSimulator::ShotSimulator(const DeviceParams& p, const PulseEnvelope& pulse,
                             const ShotConfig& cfg, DynamicsOptions opt)
    : params_(p), pulse_(pulse), cfg_(cfg), circuit_(p, opt) {
  cfg_.validate();
  pulse_.validate();
  const double h = circuit_.step_size();
  per_bin_ = exact_ratio(cfg_.dt_bin, h, "dt_bin");
  const std::size_t n_bins = cfg_.n_bins();
  n_fine_ = n_bins * per_bin_;
  const double window_end = static_cast<double>(n_bins) * cfg_.dt_bin;
  if (pulse_.start_time > 0.0 || pulse_.end_time() < window_end * (1.0 - 1e-12)) {
    throw ConfigError("pulse/window mismatch: the readout pulse must cover [0, record_duration]");
  }

  TimeGrid grid{0.0, h, n_fine_ + 1};
  fields_ = simulate_fields(circuit_, pulse_, grid);
  mean_ = mean_quadrature_traces(fields_);
  bin_g_ = num::bin_average(mean_.q_g, per_bin_, n_bins);
  bin_e_ = num::bin_average(mean_.q_e, per_bin_, n_bins);
  bin_sigma_ = std::sqrt(1.0 / (4.0 * p.eta * circuit_.kappa_p_rate() * cfg_.dt_bin));

  if (cfg_.preselect) {
    premeas_pulse_ = PulseEnvelope::gated(cfg_.premeas_duration, pulse_.amplitude);
    premeas_pulse_.start_time = cfg_.premeas_start;
    const std::size_t steps = exact_ratio(cfg_.premeas_duration, h, "premeas_duration");
    premeas_window_steps_ = exact_ratio(cfg_.premeas_window, h, "premeas_window");
    premeas_fields_ = simulate_fields(circuit_, premeas_pulse_,
                                      TimeGrid{cfg_.premeas_start, h, steps + 1});
    premeas_sigma_ = std::sqrt(1.0 / (4.0 * p.eta * circuit_.kappa_p_rate() * cfg_.premeas_window));
  }
}

namespace {

// Projected quadrature along a hidden trajectory. `base` is the jump-free
// response on the integrator grid; after each jump (snapped to the grid) the
// cavity is re-integrated from the state reached at that instant.
std::vector<double> piecewise_quadrature(const ReadoutCircuit& circuit, const PulseEnvelope& pulse,
                                         const std::vector<CavityState>& base,
                                         const std::vector<Jump>& jumps, Qubit start,
                                         double phi_lo) {
  const double h = circuit.step_size();
  const cplx rot = std::polar(1.0, -phi_lo);
  const std::size_t n = base.size();
  const double t0 = base.front().t;
  std::vector<double> q(n);
  Qubit state = start;
  CavityState current = base.front();
  bool on_base = true;
  std::size_t k = 0;
  for (std::size_t j = 0; j <= jumps.size() && k < n; ++j) {
    std::size_t end = n;
    if (j < jumps.size()) {
      const auto idx = std::llround((jumps[j].t - t0) / h);
      end = std::clamp<std::size_t>(static_cast<std::size_t>(std::max<long long>(idx, 0)), k, n);
    }
    if (end > k) {
      if (on_base) {
        for (std::size_t i = k; i < end; ++i) q[i] = std::real(rot * base[i].beta);
        if (end < n) current = base[end];
      } else {
        // evolve returns the states at indices k..end inclusive.
        const auto seg = circuit.evolve(state, pulse, current, end - k);
        for (std::size_t i = 0; i < end - k; ++i) q[k + i] = std::real(rot * seg[i].beta);
        current = seg.back();
      }
      k = end;
    }
    if (j < jumps.size()) {
      state = jumps[j].to;
      on_base = false;
    }
  }
  return q;
}

}  // namespace

std::vector<double> ShotSimulator::trajectory_quadrature(const std::vector<Jump>& jumps,
                                                         Qubit start) const {
  const auto& base = start == Qubit::ground ? fields_.ground : fields_.excited;
  return piecewise_quadrature(circuit_, pulse_, base, jumps, start, mean_.phi_lo);
}

double ShotSimulator::premeas_mean(const std::vector<Jump>& jumps, Qubit start) const {
  const auto& base = start == Qubit::ground ? premeas_fields_.ground : premeas_fields_.excited;
  const auto q = piecewise_quadrature(circuit_, premeas_pulse_, base, jumps, start, mean_.phi_lo);
  const std::size_t first = q.size() - 1 - premeas_window_steps_;
  return num::trapezoid(std::span<const double>(q).subspan(first), circuit_.step_size()) /
         cfg_.premeas_window;
}

ShotRecord ShotSimulator::simulate(Qubit prep, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double decay = std::isfinite(params_.T1) ? 1.0 / params_.T1 : 0.0;
  const Rates driven{cfg_.gamma_mix_up, decay + cfg_.gamma_mix_down};
  const Rates idle{0.0, decay};

  ShotRecord rec;
  rec.prep = prep;
  Qubit state = uniform(rng) < cfg_.p_thermal ? Qubit::excited : Qubit::ground;

  if (cfg_.preselect) {
    const double t_end = cfg_.premeas_start + cfg_.premeas_duration;
    std::vector<Jump> pre;
    const Qubit at_start = state;
    state = run_chain(state, cfg_.premeas_start, t_end, driven, rng, pre);
    rec.preselect_value = premeas_mean(pre, at_start) + premeas_sigma_ * normal(rng);
    rec.jump_times = pre;
    state = run_chain(state, t_end, 0.0, idle, rng, rec.jump_times);
  } else {
    rec.preselect_value = std::numeric_limits<double>::quiet_NaN();
  }

  const bool pulse_failed = uniform(rng) < cfg_.prep_error;
  if (prep == Qubit::excited && !pulse_failed) state = flipped(state);
  rec.start_state = state;

  const double window = static_cast<double>(cfg_.n_bins()) * cfg_.dt_bin;
  std::vector<Jump> main;
  run_chain(state, 0.0, window, driven, rng, main);
  rec.jump_times.insert(rec.jump_times.end(), main.begin(), main.end());

  const std::size_t n_bins = cfg_.n_bins();
  rec.samples.resize(n_bins);
  if (main.empty()) {
    const auto& mean = state == Qubit::ground ? bin_g_ : bin_e_;
    for (std::size_t k = 0; k < n_bins; ++k) rec.samples[k] = mean[k];
  } else {
    const auto fine = trajectory_quadrature(main, state);
    rec.samples = num::bin_average(fine, per_bin_, n_bins);
  }
  for (std::size_t k = 0; k < n_bins; ++k) rec.samples[k] += bin_sigma_ * normal(rng);
  return rec;
}

ShotRecord ShotSimulator::simulate_index(std::size_t index) const {
  const Qubit prep = index % 2 == 0 ? Qubit::ground : Qubit::excited;
  return simulate(prep, num::derive_seed(cfg_.master_seed, index));
}

std::vector<ShotRecord> ShotSimulator::simulate_batch_serial() const {
  std::vector<ShotRecord> out(cfg_.n_shots);
  for (std::size_t i = 0; i < cfg_.n_shots; ++i) out[i] = simulate_index(i);
  return out;
}

std::vector<ShotRecord> ShotSimulator::simulate_batch() const {
  std::vector<ShotRecord> out(cfg_.n_shots);
  std::exception_ptr failure;
  const auto n = static_cast<std::int64_t>(cfg_.n_shots);
#pragma omp parallel for schedule(dynamic, 512)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = simulate_index(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(qreadout_shot_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

ShotRecord simulate_shot(const DeviceParams& p, const PulseEnvelope& pulse, const ShotConfig& cfg,
                         Qubit prep, std::uint64_t seed) {
  return ShotSimulator(p, pulse, cfg).simulate(prep, seed);
}

// ---------------------------------------------------------------------------

PreselectionResult run_preselection(std::span<const ShotRecord> batch, double quantile) {
  if (batch.size() < 100) {
    throw NumericalError("preselection fit needs at least 100 records");
  }
  std::vector<double> values;
  values.reserve(batch.size());
  for (const auto& r : batch) {
    if (!std::isfinite(r.preselect_value)) {
      throw ConfigError("preselection requires records with a premeasurement value");
    }
    values.push_back(r.preselect_value);
  }
  const Histogram h = make_histogram(values, freedman_diaconis_edges(values));
  const GaussianFit fit = fit_gaussian(h);
  if (!fit.converged || !(fit.sigma > 0.0)) {
    throw NumericalError("preselection Gaussian fit did not converge");
  }
  PreselectionResult out;
  out.fit_mean = fit.mean;
  out.fit_sigma = fit.sigma;
  out.threshold = fit.mean + fit.sigma * num::normal_quantile(quantile);
  std::size_t rejected = 0;
  for (const auto& r : batch) {
    if (r.preselect_value > out.threshold) {
      ++rejected;
    } else {
      out.kept.push_back(r);
    }
  }
  out.rejection_fraction = static_cast<double>(rejected) / static_cast<double>(batch.size());
  return out;
}

}  // namespace qreadout
