#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qreadout {

struct LmOptions {
  int max_iterations = 500;
  double ftol = 1e-14;
  double xtol = 1e-13;
  double initial_lambda = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  double cost = 0.0;  // 0.5 * |r|^2
  int iterations = 0;
  bool converged = false;
};

/// Residual callback: fills r (size m) for parameters x.
using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

/// Damped Gauss-Newton (Levenberg-Marquardt) with Marquardt diagonal
/// scaling, central-difference Jacobian and box constraints enforced by
/// projection. `scale` sets the finite-difference step per parameter.
LmResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, std::size_t m,
                             const Eigen::VectorXd& scale, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LmOptions& opt = {});

/// Counts on uniform bins [edges[k], edges[k+1]).
struct Histogram {
  std::vector<double> edges;
  std::vector<double> counts;
  double total = 0.0;

  std::size_t size() const { return counts.size(); }
  double center(std::size_t k) const { return 0.5 * (edges[k] + edges[k + 1]); }
  double width() const { return edges.size() > 1 ? edges[1] - edges[0] : 0.0; }
};

/// Freedman-Diaconis bin width of the pooled data, at least min_bins bins
/// spanning [min, max] of the pooled data.
std::vector<double> freedman_diaconis_edges(std::span<const double> pooled,
                                            std::size_t min_bins = 60);
Histogram make_histogram(std::span<const double> data, const std::vector<double>& edges);

double median(std::vector<double> v);
/// Median absolute deviation scaled to a Gaussian sigma.
double mad_sigma(std::span<const double> v);

struct GaussianFit {
  double amplitude = 0.0;  // expected total count
  double mean = 0.0;
  double sigma = 0.0;
  bool converged = false;
};

/// Least-squares fit of A * N(mu, sigma) integrated over each bin.
GaussianFit fit_gaussian(const Histogram& h);

}  // namespace qreadout
