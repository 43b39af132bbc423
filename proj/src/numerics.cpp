#include "qreadout/numerics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qreadout::num {

double trapezoid(std::span<const double> y, double dx) {
  if (y.size() < 2) return 0.0;
  double acc = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) acc += y[i];
  return acc * dx;
}

std::vector<double> bin_average(std::span<const double> y, std::size_t per_bin,
                                std::size_t n_bins) {
  if (per_bin == 0 || y.size() < n_bins * per_bin + 1) {
    throw std::invalid_argument("bin_average: samples do not cover the requested bins");
  }
  std::vector<double> out(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    out[k] = trapezoid(y.subspan(k * per_bin, per_bin + 1), 1.0) / static_cast<double>(per_bin);
  }
  return out;
}

Extremum golden_section_max(const std::function<double(double)>& f, double a, double b,
                            double x_tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (std::abs(b - a) > x_tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc > fd ? Extremum{c, fc} : Extremum{d, fd};
}

Extremum scan_then_refine_max(const std::function<double(double)>& f, double a, double b,
                              std::size_t n_scan, double x_tol, bool* unimodal) {
  n_scan = std::max<std::size_t>(n_scan, 3);
  std::vector<double> xs(n_scan), fs(n_scan);
  for (std::size_t i = 0; i < n_scan; ++i) {
    xs[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n_scan - 1);
    fs[i] = f(xs[i]);
  }
  const auto best = static_cast<std::size_t>(std::max_element(fs.begin(), fs.end()) - fs.begin());
  if (unimodal) {
    std::size_t peaks = 0;
    for (std::size_t i = 1; i + 1 < n_scan; ++i) {
      if (fs[i] > fs[i - 1] && fs[i] > fs[i + 1]) ++peaks;
    }
    *unimodal = peaks <= 1;
  }
  const double lo = xs[best == 0 ? 0 : best - 1];
  const double hi = xs[best + 1 == n_scan ? best : best + 1];
  Extremum refined = golden_section_max(f, lo, hi, x_tol);
  if (fs[best] > refined.value) return {xs[best], fs[best]};
  return refined;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0, 1)");
  // Bisection bracket then Newton polish on the CDF.
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 3; ++i) {
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    if (pdf <= 0.0) break;
    x -= (normal_cdf(x) - p) / pdf;
  }
  return x;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace qreadout::num
