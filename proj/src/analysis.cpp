#include "qreadout/analysis.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>

#include "qreadout/error.h"
#include "qreadout/numerics.h"
#include "qreadout/units.h"

namespace qreadout {
namespace {

std::size_t whole_cells(double tau, double dt, const char* what) {
  const double r = tau / dt;
  const auto n = static_cast<std::size_t>(std::llround(r));
  if (n == 0 || std::abs(static_cast<double>(n) - r) > 1e-6) {
    throw ConfigError(std::string(what) + ": tau must be a whole number of cells");
  }
  return n;
}

// Upper-tail probability of N(mu, sigma) beyond x.
double upper_tail(double x, double mu, double sigma) {
  return 0.5 * std::erfc((x - mu) / (sigma * std::numbers::sqrt2));
}
double lower_tail(double x, double mu, double sigma) {
  return 0.5 * std::erfc((mu - x) / (sigma * std::numbers::sqrt2));
}

double gauss_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double bin_mass(double lo, double hi, double mu, double sigma) {
  return num::normal_cdf((hi - mu) / sigma) - num::normal_cdf((lo - mu) / sigma);
}

// Linear interpolation of a uniformly sampled trace.
double sample(const SignalTrace& tr, double t) {
  const double dt = tr.dt();
  const double pos = (t - tr.times.front()) / dt;
  const std::size_t n = tr.values.size();
  if (pos <= 0.0) return tr.values.front();
  auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= n) return tr.values.back();
  const double frac = pos - static_cast<double>(i);
  return tr.values[i] + frac * (tr.values[i + 1] - tr.values[i]);
}

void check_coverage(const SignalTrace& tr, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (tr.values.size() < 2 || tr.times.size() != tr.values.size()) {
    throw ConfigError("signal trace needs at least two samples");
  }
  const double dt = tr.dt();
  if (tr.times.front() > 1e-6 * dt || tr.times.back() < tau - 1e-6 * dt) {
    throw ConfigError("signal trace does not cover [0, tau]");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Weights and integration

WeightFunction build_weights(std::span<const double> mean_g, std::span<const double> mean_e,
                             double dt, double tau) {
  if (!(dt > 0.0)) throw ConfigError("build_weights: dt must be > 0");
  const std::size_t n = whole_cells(tau, dt, "build_weights");
  if (mean_g.size() < n || mean_e.size() < n) {
    throw ConfigError("build_weights: traces do not cover [0, tau]");
  }
  WeightFunction w;
  w.dt = dt;
  w.times.resize(n);
  w.w.resize(n);
  double norm2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    w.times[k] = static_cast<double>(k) * dt;
    w.w[k] = std::abs(mean_e[k] - mean_g[k]);
    norm2 += w.w[k] * w.w[k] * dt;
  }
  if (!(norm2 > 0.0)) throw NumericalError("build_weights: no signal (mean traces coincide)");
  const double scale = 1.0 / std::sqrt(norm2);
  for (double& x : w.w) x *= scale;
  return w;
}

double integrate_shot(const ShotRecord& record, const WeightFunction& w, double kappa_p,
                      double dt_bin) {
  if (std::abs(w.dt - dt_bin) > 1e-9 * dt_bin) {
    throw ConfigError("integrate_shot: weight grid does not match the record bins");
  }
  if (record.samples.size() < w.size()) {
    throw ConfigError("integrate_shot: record shorter than the weight support");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) acc += record.samples[k] * w.w[k];
  return std::sqrt(angular(kappa_p)) * acc * w.dt;
}

namespace {

IntegratedBatch split(std::span<const ShotRecord> batch, const std::vector<double>& q) {
  IntegratedBatch out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    (batch[i].prep == Qubit::ground ? out.q_g : out.q_e).push_back(q[i]);
  }
  return out;
}

}  // namespace

IntegratedBatch integrate_batch_serial(std::span<const ShotRecord> batch,
                                       const WeightFunction& w, double kappa_p, double dt_bin) {
  std::vector<double> q(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) q[i] = integrate_shot(batch[i], w, kappa_p, dt_bin);
  return split(batch, q);
}

IntegratedBatch integrate_batch(std::span<const ShotRecord> batch, const WeightFunction& w,
                                double kappa_p, double dt_bin) {
  std::vector<double> q(batch.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const auto k = static_cast<std::size_t>(i);
      q[k] = integrate_shot(batch[k], w, kappa_p, dt_bin);
    } catch (...) {
#pragma omp critical(qreadout_integrate_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return split(batch, q);
}

// ---------------------------------------------------------------------------
// Mixture fit

double MixtureFit::density_g(double q) const {
  return (A_gg * gauss_pdf(q, mu_g, sigma_g) + A_eg * gauss_pdf(q, mu_e, sigma_e)) / n_g;
}

double MixtureFit::density_e(double q) const {
  return (A_ge * gauss_pdf(q, mu_g, sigma_g) + A_ee * gauss_pdf(q, mu_e, sigma_e)) / n_e;
}

double mixture_threshold(const MixtureFit& fit) {
  auto diff = [&](double q) { return fit.density_g(q) - fit.density_e(q); };
  double a = std::min(fit.mu_g, fit.mu_e);
  double b = std::max(fit.mu_g, fit.mu_e);
  if (!(b > a)) throw NumericalError("mixture_threshold: coincident means");
  // Locate the sign change closest to the midpoint on a coarse scan.
  constexpr int kScan = 400;
  const double mid = 0.5 * (a + b);
  double best_lo = 0.0, best_hi = 0.0, best_dist = std::numeric_limits<double>::infinity();
  double prev_x = a, prev = diff(a);
  for (int i = 1; i <= kScan; ++i) {
    const double x = a + (b - a) * i / kScan;
    const double v = diff(x);
    if ((prev > 0.0) != (v > 0.0) || v == 0.0) {
      const double dist = std::abs(0.5 * (prev_x + x) - mid);
      if (dist < best_dist) {
        best_dist = dist;
        best_lo = prev_x;
        best_hi = x;
      }
    }
    prev_x = x;
    prev = v;
  }
  if (!std::isfinite(best_dist)) {
    throw NumericalError("mixture_threshold: fitted distributions do not cross between the means");
  }
  double lo = best_lo, hi = best_hi;
  const bool lo_positive = diff(lo) > 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(mid)); ++it) {
    const double m = 0.5 * (lo + hi);
    if ((diff(m) > 0.0) == lo_positive) {
      lo = m;
    } else {
      hi = m;
    }
  }
  return 0.5 * (lo + hi);
}

MixtureFit fit_mixture(std::span<const double> q_g, std::span<const double> q_e) {
  if (q_g.size() < 1000 || q_e.size() < 1000) {
    throw NumericalError("fit_mixture: need at least 1000 samples per prepared state");
  }
  std::vector<double> pooled(q_g.begin(), q_g.end());
  pooled.insert(pooled.end(), q_e.begin(), q_e.end());
  const auto edges = freedman_diaconis_edges(pooled);
  const Histogram hg = make_histogram(q_g, edges);
  const Histogram he = make_histogram(q_e, edges);
  const std::size_t nb = hg.size();

  const double mg = median(std::vector<double>(q_g.begin(), q_g.end()));
  const double me = median(std::vector<double>(q_e.begin(), q_e.end()));
  const double width = edges[1] - edges[0];
  const double sg = std::max(mad_sigma(q_g), width);
  const double se = std::max(mad_sigma(q_e), width);
  const double ng = hg.total;
  const double ne = he.total;

  // x = mu_g, mu_e, sigma_g, sigma_e. For fixed shapes the amplitudes enter
  // linearly and are solved exactly (non-negative weighted least squares per
  // prepared state), so the search only sees the four shape parameters.
  std::vector<double> pg(nb), pe(nb);
  auto amplitudes = [&](const Histogram& h) {
    double spp = 0.0, spq = 0.0, sqq = 0.0, spc = 0.0, sqc = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const double w = 1.0 / std::max(h.counts[k], 1.0);
      spp += w * pg[k] * pg[k];
      spq += w * pg[k] * pe[k];
      sqq += w * pe[k] * pe[k];
      spc += w * pg[k] * h.counts[k];
      sqc += w * pe[k] * h.counts[k];
    }
    const double det = spp * sqq - spq * spq;
    double a = 0.0, b = 0.0;
    if (det > 1e-14 * spp * sqq) {
      a = (sqq * spc - spq * sqc) / det;
      b = (spp * sqc - spq * spc) / det;
    }
    if (!(det > 1e-14 * spp * sqq) || a < 0.0 || b < 0.0) {
      // Best single-component solutions; keep the lower cost.
      const double a1 = spp > 0.0 ? std::max(spc / spp, 0.0) : 0.0;
      const double b1 = sqq > 0.0 ? std::max(sqc / sqq, 0.0) : 0.0;
      const double gain_a = a1 * spc - 0.5 * a1 * a1 * spp;
      const double gain_b = b1 * sqc - 0.5 * b1 * b1 * sqq;
      a = gain_a >= gain_b ? a1 : 0.0;
      b = gain_a >= gain_b ? 0.0 : b1;
    }
    return std::pair{a, b};
  };
  std::pair<double, double> amp_g, amp_e;
  ResidualFn residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    for (std::size_t k = 0; k < nb; ++k) {
      pg[k] = bin_mass(edges[k], edges[k + 1], x[0], x[2]);
      pe[k] = bin_mass(edges[k], edges[k + 1], x[1], x[3]);
    }
    amp_g = amplitudes(hg);
    amp_e = amplitudes(he);
    for (std::size_t k = 0; k < nb; ++k) {
      const double cg = amp_g.first * pg[k] + amp_g.second * pe[k];
      const double ce = amp_e.first * pg[k] + amp_e.second * pe[k];
      r[static_cast<Eigen::Index>(k)] = (cg - hg.counts[k]) / std::sqrt(std::max(hg.counts[k], 1.0));
      r[static_cast<Eigen::Index>(nb + k)] =
          (ce - he.counts[k]) / std::sqrt(std::max(he.counts[k], 1.0));
    }
  };

  Eigen::VectorXd x0(4), scale(4), lower(4), upper(4);
  x0 << mg, me, sg, se;
  scale << sg, se, sg, se;
  const double inf = std::numeric_limits<double>::infinity();
  const double smin = 1e-6 * width;
  lower << -inf, -inf, smin, smin;
  upper << inf, inf, inf, inf;

  LmOptions opt;
  opt.max_iterations = 400;
  opt.ftol = 1e-12;
  opt.xtol = 1e-10;
  const LmResult res = levenberg_marquardt(residual, x0, 2 * nb, scale, lower, upper, opt);
  if (!res.converged) throw NumericalError("fit_mixture: least squares did not converge");
  Eigen::VectorXd r_final(static_cast<Eigen::Index>(2 * nb));
  residual(res.x, r_final);

  MixtureFit fit;
  fit.mu_g = res.x[0];
  fit.mu_e = res.x[1];
  fit.sigma_g = res.x[2];
  fit.sigma_e = res.x[3];
  fit.A_gg = amp_g.first;
  fit.A_eg = amp_g.second;
  fit.A_ge = amp_e.first;
  fit.A_ee = amp_e.second;
  fit.n_g = ng;
  fit.n_e = ne;
  fit.iterations = res.iterations;
  fit.edges = edges;
  const double ratio = std::max(fit.sigma_g, fit.sigma_e) / std::min(fit.sigma_g, fit.sigma_e);
  if (!(ratio <= 1e3)) throw NumericalError("fit_mixture: degenerate fit (sigma ratio > 1e3)");
  if (fit.mu_g == fit.mu_e) throw NumericalError("fit_mixture: degenerate fit (equal means)");
  fit.threshold = mixture_threshold(fit);
  return fit;
}

// ---------------------------------------------------------------------------
// Error budget

ErrorBudget error_budget(std::span<const double> q_g, std::span<const double> q_e,
                         const MixtureFit& fit) {
  if (q_g.empty() || q_e.empty()) throw ConfigError("error_budget: empty prepared-state class");
  const bool e_high = fit.excited_high();
  const double th = fit.threshold;
  auto says_excited = [&](double q) { return e_high ? q >= th : q < th; };

  ErrorBudget b;
  b.n_g = q_g.size();
  b.n_e = q_e.size();
  std::size_t wrong_g = 0, wrong_e = 0;
  for (double q : q_g) wrong_g += says_excited(q) ? 1 : 0;
  for (double q : q_e) wrong_e += says_excited(q) ? 0 : 1;
  b.eps_g = static_cast<double>(wrong_g) / static_cast<double>(b.n_g);
  b.eps_e = static_cast<double>(wrong_e) / static_cast<double>(b.n_e);
  b.fidelity = 1.0 - b.eps_g - b.eps_e;
  b.average_assignment_fidelity = 1.0 - 0.5 * (b.eps_g + b.eps_e);
  b.eps_o_g = e_high ? upper_tail(th, fit.mu_g, fit.sigma_g) : lower_tail(th, fit.mu_g, fit.sigma_g);
  b.eps_o_e = e_high ? lower_tail(th, fit.mu_e, fit.sigma_e) : upper_tail(th, fit.mu_e, fit.sigma_e);
  b.eps_o = b.eps_o_g + b.eps_o_e;
  b.eps_t_g = b.eps_g - b.eps_o_g;
  b.eps_t_e = b.eps_e - b.eps_o_e;
  return b;
}

HistogramTable histogram_table(std::span<const double> q_g, std::span<const double> q_e,
                               const MixtureFit& fit) {
  const Histogram hg = make_histogram(q_g, fit.edges);
  const Histogram he = make_histogram(q_e, fit.edges);
  HistogramTable t;
  for (std::size_t k = 0; k < hg.size(); ++k) {
    const double pg = bin_mass(fit.edges[k], fit.edges[k + 1], fit.mu_g, fit.sigma_g);
    const double pe = bin_mass(fit.edges[k], fit.edges[k + 1], fit.mu_e, fit.sigma_e);
    t.centers.push_back(hg.center(k));
    t.count_g.push_back(hg.counts[k]);
    t.count_e.push_back(he.counts[k]);
    t.fit_g.push_back(fit.A_gg * pg + fit.A_eg * pe);
    t.fit_e.push_back(fit.A_ge * pg + fit.A_ee * pe);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Overlap model

OverlapResult overlap_analysis(double eta, const SignalTrace& trace, const FilterChain& chain,
                               double tau) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("overlap: eta must lie in (0, 1]");
  if (!(chain.boxcar > 0.0) || !(chain.max_step > 0.0) || !(chain.amp_bandwidth >= 0.0)) {
    throw ConfigError("overlap: invalid filter chain");
  }
  check_coverage(trace, tau);

  // Internal grid: the digitizer bin is a whole number of steps.
  const auto per_bin = static_cast<std::size_t>(std::ceil(chain.boxcar / chain.max_step - 1e-9));
  const double h = chain.boxcar / static_cast<double>(per_bin);
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(tau / h)));
  std::vector<double> x(n + 1);
  for (std::size_t i = 0; i <= n; ++i) x[i] = sample(trace, static_cast<double>(i) * h);

  // Amplifier response, exact for a piecewise-linear input.
  const bool pole = chain.amp_bandwidth > 0.0;
  const double wc = angular(chain.amp_bandwidth);
  const double decay = pole ? std::exp(-wc * h) : 0.0;
  std::vector<double> y = x;
  if (pole) {
    y[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i + 1] = decay * y[i] + x[i + 1] - decay * x[i] - (x[i + 1] - x[i]) * (1.0 - decay) / (wc * h);
    }
  }

  // Digitizer bins (the last may be partial) and the matched weight.
  const std::size_t n_bins = (n + per_bin - 1) / per_bin;
  std::vector<double> bin_int(n_bins, 0.0), bin_len(n_bins, 0.0), W(n_bins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i / per_bin;
    bin_int[k] += 0.5 * (y[i] + y[i + 1]) * h;
    bin_len[k] += h;
  }
  double norm2 = 0.0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    W[k] = std::abs(bin_int[k] / bin_len[k]);
    norm2 += W[k] * W[k] * bin_len[k];
  }

  OverlapResult out;
  out.times.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) out.times[i] = static_cast<double>(i) * h;
  out.kernel.assign(n + 1, 0.0);
  if (!(norm2 > 0.0)) {
    out.eps_o = 1.0;
    return out;
  }
  for (double& v : W) v /= std::sqrt(norm2);

  double separation = 0.0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    separation += W[k] * bin_int[k];
  }
  // Adjoint of the chain: f(t) = wc int_t^tau exp(-wc (s - t)) g(s) ds with
  // g the piecewise-constant weight; integral f^2 is exact per cell.
  double f2 = 0.0;
  if (pole) {
    double f_next = 0.0;
    for (std::size_t i = n; i-- > 0;) {
      const double g = W[i / per_bin];
      const double c = f_next - g;
      f2 += g * g * h + 2.0 * g * c * (1.0 - decay) / wc +
            c * c * (1.0 - decay * decay) / (2.0 * wc);
      const double f_here = decay * f_next + (1.0 - decay) * g;
      out.kernel[i] = f_here;
      f_next = f_here;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double g = W[i / per_bin];
      out.kernel[i] = g;
      f2 += g * g * h;
    }
    out.kernel[n] = W[n_bins - 1];
  }
  const double sigma2 = 1.0 / (4.0 * eta);
  out.separation = separation;
  out.noise = std::sqrt(sigma2 * f2);
  out.eps_o = std::erfc(std::sqrt(0.125) * separation / out.noise);
  return out;
}

double overlap_model(const DeviceParams& p, const SignalTrace& trace, const FilterChain& chain,
                     double tau) {
  return overlap_analysis(p.eta, trace, chain, tau).eps_o;
}

double overlap_error(double eta, const SignalTrace& trace, std::span<const double> kernel,
                     double tau) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("overlap: eta must lie in (0, 1]");
  check_coverage(trace, tau);
  const double dt = trace.dt();
  const std::size_t n = whole_cells(tau, dt, "overlap_error");
  if (kernel.size() != n + 1) throw ConfigError("overlap_error: kernel must sample [0, tau]");
  std::vector<double> sf(n + 1), ff(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    sf[i] = trace.values[i] * kernel[i];
    ff[i] = kernel[i] * kernel[i];
  }
  const double f2 = num::trapezoid(ff, dt);
  if (!(f2 > 0.0)) throw NumericalError("overlap_error: zero accumulated variance");
  const double sigma2 = 1.0 / (4.0 * eta);
  return std::erfc(std::sqrt(0.125) * num::trapezoid(sf, dt) / std::sqrt(sigma2 * f2));
}

SignalTrace readout_signal(const DeviceParams& p, const PulseEnvelope& pulse, double tau,
                           DynamicsOptions opt) {
  return full_model_signal(p, pulse, TimeGrid::span(tau, opt.rk_step), opt);
}

std::vector<double> overlap_vs_power(const DeviceParams& p, const PulseEnvelope& pulse,
                                     std::span<const double> n_drive, double tau,
                                     const FilterChain& chain, DynamicsOptions opt) {
  for (double n : n_drive) {
    if (!(n > 0.0)) throw ConfigError("overlap_vs_power: drive grid must be positive");
  }
  std::vector<double> out(n_drive.size());
  std::exception_ptr failure;
  const auto m = static_cast<std::int64_t>(n_drive.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < m; ++i) {
    try {
      DeviceParams q = p;
      q.n_drive = n_drive[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i)] =
          overlap_model(q, readout_signal(q, pulse, tau, opt), chain, tau);
    } catch (...) {
#pragma omp critical(qreadout_power_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------

ReadoutRun run_readout(const DeviceParams& p, const PulseEnvelope& pulse, ShotConfig cfg,
                       double tau) {
  const std::size_t bins = whole_cells(tau, cfg.dt_bin, "run_readout");
  cfg.record_duration = static_cast<double>(bins) * cfg.dt_bin;
  const ShotSimulator sim(p, pulse, cfg);
  std::vector<ShotRecord> batch = sim.simulate_batch();

  ReadoutRun run;
  if (cfg.preselect) {
    PreselectionResult pre = run_preselection(batch, 0.99);
    run.rejection_fraction = pre.rejection_fraction;
    run.preselect_threshold = pre.threshold;
    batch = std::move(pre.kept);
  }
  run.weights = build_weights(sim.binned_mean(Qubit::ground), sim.binned_mean(Qubit::excited),
                              cfg.dt_bin, tau);
  run.values = integrate_batch(batch, run.weights, p.kappa_p(), cfg.dt_bin);
  run.fit = fit_mixture(run.values.q_g, run.values.q_e);
  run.budget = error_budget(run.values.q_g, run.values.q_e, run.fit);
  return run;
}

}  // namespace qreadout
