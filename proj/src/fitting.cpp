#include "qreadout/fitting.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qreadout/error.h"
#include "qreadout/numerics.h"

namespace qreadout {

LmResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, std::size_t m,
                             const Eigen::VectorXd& scale, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LmOptions& opt) {
  const auto n = x0.size();
  auto project = [&](Eigen::VectorXd& x) { x = x.cwiseMax(lower).cwiseMin(upper); };
  project(x0);

  Eigen::VectorXd r(m), r_trial(m), r_plus(m), r_minus(m);
  f(x0, r);
  double cost = 0.5 * r.squaredNorm();
  if (!std::isfinite(cost)) throw NumericalError("levenberg_marquardt: non-finite initial cost");

  Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), n);
  double lambda = opt.initial_lambda;
  LmResult res;
  res.x = x0;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(std::abs(res.x[j]), scale[j]);
      Eigen::VectorXd xp = res.x, xm = res.x;
      xp[j] += h;
      xm[j] -= h;
      f(xp, r_plus);
      f(xm, r_minus);
      jac.col(j) = (r_plus - r_minus) / (2.0 * h);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-300);

    bool improved = false;
    for (int inner = 0; inner < 60; ++inner) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::VectorXd delta = a.ldlt().solve(-grad);
      Eigen::VectorXd x_trial = res.x + delta;
      project(x_trial);
      f(x_trial, r_trial);
      const double trial_cost = 0.5 * r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double rel_drop = (cost - trial_cost) / std::max(cost, 1e-300);
        const double step = ((x_trial - res.x).array() / scale.array()).abs().maxCoeff();
        res.x = x_trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        if (rel_drop < opt.ftol || step < opt.xtol) {
          res.converged = true;
        }
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) break;
    }
    if (!improved) {
      // No downhill step exists at any damping: a (local) minimum.
      res.converged = true;
    }
    if (res.converged) break;
  }
  res.cost = cost;
  return res;
}

std::vector<double> freedman_diaconis_edges(std::span<const double> pooled,
                                            std::size_t min_bins) {
  if (pooled.size() < 2) throw NumericalError("histogram: need at least two samples");
  std::vector<double> v(pooled.begin(), pooled.end());
  std::sort(v.begin(), v.end());
  const double lo = v.front();
  const double hi = v.back();
  if (!(hi > lo)) throw NumericalError("histogram: data has zero spread");
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  std::size_t bins = min_bins;
  if (iqr > 0.0) {
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
    const double fd_bins = std::ceil((hi - lo) / width);
    bins = std::max(min_bins, static_cast<std::size_t>(std::min(fd_bins, 1e5)));
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
  }
  edges.back() = hi;  // rounding must not drop the largest sample
  return edges;
}

Histogram make_histogram(std::span<const double> data, const std::vector<double>& edges) {
  if (edges.size() < 2) throw NumericalError("histogram: need at least one bin");
  Histogram h;
  h.edges = edges;
  h.counts.assign(edges.size() - 1, 0.0);
  const double lo = edges.front();
  const double width = edges[1] - edges[0];
  const std::size_t nb = h.counts.size();
  for (double x : data) {
    if (!(x >= lo) || x > edges.back()) continue;
    auto k = static_cast<std::size_t>((x - lo) / width);
    if (k >= nb) k = nb - 1;
    h.counts[k] += 1.0;
    h.total += 1.0;
  }
  return h;
}

double median(std::vector<double> v) {
  if (v.empty()) throw NumericalError("median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

double mad_sigma(std::span<const double> v) {
  const double med = median(std::vector<double>(v.begin(), v.end()));
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  return 1.482602218505602 * median(std::move(dev));
}

GaussianFit fit_gaussian(const Histogram& h) {
  if (h.total <= 0.0) throw NumericalError("fit_gaussian: empty histogram");
  std::vector<double> centers(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) centers[k] = h.center(k);

  // Start from the histogram's weighted median and spread.
  double acc = 0.0;
  double med = centers.front();
  for (std::size_t k = 0; k < h.size(); ++k) {
    acc += h.counts[k];
    if (acc >= 0.5 * h.total) {
      med = centers[k];
      break;
    }
  }
  double q25 = centers.front(), q75 = centers.back();
  acc = 0.0;
  bool have25 = false;
  for (std::size_t k = 0; k < h.size(); ++k) {
    acc += h.counts[k];
    if (!have25 && acc >= 0.25 * h.total) {
      q25 = centers[k];
      have25 = true;
    }
    if (acc >= 0.75 * h.total) {
      q75 = centers[k];
      break;
    }
  }
  const double sigma0 = std::max((q75 - q25) / 1.3489795, h.width());

  const auto m = h.size();
  ResidualFn residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    for (std::size_t k = 0; k < m; ++k) {
      const double lo = num::normal_cdf((h.edges[k] - x[1]) / x[2]);
      const double hi = num::normal_cdf((h.edges[k + 1] - x[1]) / x[2]);
      const double model = x[0] * (hi - lo);
      r[static_cast<Eigen::Index>(k)] = (model - h.counts[k]) / std::sqrt(std::max(h.counts[k], 1.0));
    }
  };
  Eigen::VectorXd x0(3);
  x0 << h.total, med, sigma0;
  Eigen::VectorXd scale(3);
  scale << h.total, sigma0, sigma0;
  Eigen::VectorXd lower(3), upper(3);
  const double inf = std::numeric_limits<double>::infinity();
  lower << 0.0, -inf, 1e-6 * sigma0;
  upper << inf, inf, inf;
  const LmResult res = levenberg_marquardt(residual, x0, m, scale, lower, upper);
  return GaussianFit{res.x[0], res.x[1], res.x[2], res.converged};
}

}  // namespace qreadout
