#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qreadout/analysis.h"
#include "qreadout/dynamics.h"
#include "qreadout/params.h"
#include "qreadout/shots.h"

namespace qreadout {

/// Everything a CLI run needs, resolved from a key = value file plus
/// command-line overrides.
struct RunConfig {
  DeviceParams device;
  ShotConfig shots;
  PulseEnvelope pulse = PulseEnvelope::gated(500e-9);
  FilterChain filter;
  /// `fixed` (the default) uses gamma_mix_up/down as given; lambda_scaled
  /// overwrites them from the drive strength; none forces them to zero.
  MixingModel mixing{MixingModel::Kind::fixed};
  /// Integration time for analysis and single-point reports.
  double tau = 56e-9;
  std::string output_dir = ".";

  /// Set through the delta / delta_p keys; applied by finalize() so they
  /// win over omega_q / omega_p regardless of key order.
  std::optional<double> delta_override;
  std::optional<double> delta_p_override;
  /// omega_d follows omega_r unless given explicitly.
  bool omega_d_explicit = false;

  /// Applies derived defaults (delta, delta_p, omega_d) and validates every
  /// section. Throws ConfigError.
  void finalize();
};

/// Sets one key. Frequencies take Hz|kHz|MHz|GHz suffixes, times s|ms|us|ns;
/// a bare number is in Hz or s. Unknown keys and malformed values throw
/// ConfigError.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// Reads `key = value` lines; `#` starts a comment. Throws IoError when the
/// file cannot be read and ConfigError on bad content.
void load_config_file(RunConfig& cfg, const std::string& path);

/// Every key with its resolved value in base units, one per line, in a
/// fixed order.
std::vector<std::pair<std::string, std::string>> describe_config(const RunConfig& cfg);

/// Names of all recognised keys.
std::vector<std::string> config_keys();

/// Number formatting shared by all outputs: 9 significant digits.
std::string format_number(double x);

/// Parses "4.2 MHz", "56ns", "1e-3": the numeric part times the unit.
/// `kind` selects the accepted suffixes: 'f' frequency, 't' time, 'n' none.
double parse_quantity(std::string_view text, char kind);

}  // namespace qreadout
