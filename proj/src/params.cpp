#include "qreadout/params.h"

#include <cmath>
#include <sstream>

#include "qreadout/error.h"

namespace qreadout {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void DeviceParams::validate() const {
  require(std::isfinite(g) && g >= 0.0, "g must be finite and >= 0");
  require(std::isfinite(omega_q) && std::isfinite(omega_r) && std::isfinite(omega_p) &&
              std::isfinite(omega_d) && std::isfinite(alpha),
          "frequencies must be finite");
  require(omega_r > 0.0 && omega_p > 0.0, "omega_r and omega_p must be > 0");
  require(std::isfinite(J) && J >= 0.0, "J must be finite and >= 0");
  require(std::isfinite(Q_p) && Q_p > 0.0, "Q_p must be > 0");
  require(std::isfinite(gamma_int) && gamma_int >= 0.0, "gamma_int must be >= 0");
  require(T1 > 0.0, "T1 must be > 0");
  require(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
  require(std::isfinite(n_drive) && n_drive >= 0.0, "n_drive must be >= 0");
  require(dispersive_guard >= 0.0, "dispersive_guard must be >= 0");
  if (g > 0.0 && std::abs(delta()) <= dispersive_guard * g) {
    std::ostringstream msg;
    msg << "dispersive regime violated: |Delta|/g = " << std::abs(delta()) / g
        << " <= dispersive_guard = " << dispersive_guard;
    throw ConfigError(msg.str());
  }
}

double dispersive_shift(double g, double delta, double alpha) {
  if (delta == 0.0 || delta + alpha == 0.0) {
    throw StraddleError("dispersive shift undefined: Delta or Delta + alpha is zero");
  }
  return g * g / delta * alpha / (delta + alpha);
}

double critical_photon_number(double g, double delta) {
  if (!(g > 0.0)) throw ConfigError("critical_photon_number requires g > 0");
  return delta * delta / (4.0 * g * g);
}

double effective_linewidth(double J, double Q_p, double omega_p, double delta_p) {
  if (!(omega_p > 0.0) || !(Q_p > 0.0)) {
    throw ConfigError("effective_linewidth requires omega_p > 0 and Q_p > 0");
  }
  return 4.0 * Q_p * J * J / (omega_p + 4.0 * delta_p * delta_p * Q_p * Q_p / omega_p);
}

double lambda_param(double n_drive, double n_crit) {
  if (!(n_crit > 0.0) || !(n_drive >= 0.0)) {
    throw ConfigError("lambda_param requires n_crit > 0 and n_drive >= 0");
  }
  if (std::isinf(n_crit)) return 0.0;
  const double s = std::sin(0.5 * std::atan(std::sqrt((n_drive + 1.0) / n_crit)));
  return s * s;
}

DerivedParams derive(const DeviceParams& p) {
  p.validate();
  DerivedParams d;
  d.delta = p.delta();
  d.chi = dispersive_shift(p.g, d.delta, p.alpha);
  d.n_crit = p.g > 0.0 ? critical_photon_number(p.g, d.delta)
                       : std::numeric_limits<double>::infinity();
  d.kappa_p = p.kappa_p();
  d.kappa_eff = effective_linewidth(p.J, p.Q_p, p.omega_p, p.delta_p());
  d.lambda_mix = lambda_param(p.n_drive, d.n_crit);
  return d;
}

}  // namespace qreadout
