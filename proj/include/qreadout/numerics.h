#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace qreadout::num {

/// Composite trapezoid rule on a uniform grid.
double trapezoid(std::span<const double> y, double dx);

/// Averages a uniformly sampled function over consecutive bins of
/// `per_bin` steps. Sample k * per_bin is the left edge of bin k; each
/// bin average uses the trapezoid rule over its per_bin + 1 samples.
/// Requires y.size() >= n_bins * per_bin + 1.
std::vector<double> bin_average(std::span<const double> y, std::size_t per_bin,
                                std::size_t n_bins);

struct Extremum {
  double x = 0.0;
  double value = 0.0;
};

/// Golden-section maximization of a unimodal function on [a, b].
Extremum golden_section_max(const std::function<double(double)>& f, double a, double b,
                            double x_tol);

/// Coarse scan with `n_scan` uniformly spaced points followed by golden
/// refinement on the bracket around the best scan point. `unimodal` is set
/// to false when the scan shows more than one interior local maximum.
Extremum scan_then_refine_max(const std::function<double(double)>& f, double a, double b,
                              std::size_t n_scan, double x_tol, bool* unimodal = nullptr);

double normal_cdf(double x);
/// Inverse standard normal CDF, p in (0, 1).
double normal_quantile(double p);

/// SplitMix64 finalizer; used to derive independent per-shot seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace qreadout::num
