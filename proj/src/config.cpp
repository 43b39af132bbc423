#include "qreadout/config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>

#include "qreadout/error.h"
#include "qreadout/units.h"

namespace qreadout {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool parse_bool(std::string_view v, std::string_view key) {
  const std::string s = lower(trim(v));
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError("key '" + std::string(key) + "': expected a boolean, got '" + std::string(v) + "'");
}

std::uint64_t parse_count(std::string_view v, std::string_view key) {
  v = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    // Accept integral values written in floating-point form, e.g. 1e5.
    double x = 0.0;
    try {
      x = parse_quantity(v, 'n');
    } catch (const ConfigError&) {
      throw ConfigError("key '" + std::string(key) + "': expected a non-negative integer");
    }
    if (!(x >= 0.0) || x != std::floor(x) || x > 1.8e19) {
      throw ConfigError("key '" + std::string(key) + "': expected a non-negative integer");
    }
    return static_cast<std::uint64_t>(x);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double x) { return format_number(x); }

std::string pulse_kind(const RunConfig& c) { return to_string(c.pulse.kind); }

std::string mixing_kind(const MixingModel& m) {
  switch (m.kind) {
    case MixingModel::Kind::none:
      return "none";
    case MixingModel::Kind::fixed:
      return "fixed";
    case MixingModel::Kind::lambda_scaled:
      return "lambda_scaled";
  }
  return "none";
}

#define QR_FREQ(NAME, FIELD)                                                                  \
  Key{NAME, [](RunConfig& c, std::string_view v) { c.FIELD = parse_quantity(v, 'f'); }, \
      [](const RunConfig& c) { return fmt(c.FIELD); }}
#define QR_TIME(NAME, FIELD)                                                                  \
  Key{NAME, [](RunConfig& c, std::string_view v) { c.FIELD = parse_quantity(v, 't'); }, \
      [](const RunConfig& c) { return fmt(c.FIELD); }}
#define QR_PLAIN(NAME, FIELD)                                                                 \
  Key{NAME, [](RunConfig& c, std::string_view v) { c.FIELD = parse_quantity(v, 'n'); }, \
      [](const RunConfig& c) { return fmt(c.FIELD); }}

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      // device
      QR_FREQ("g", device.g),
      QR_FREQ("omega_q", device.omega_q),
      QR_FREQ("omega_r", device.omega_r),
      QR_FREQ("omega_p", device.omega_p),
      Key{"delta",
          [](RunConfig& c, std::string_view v) { c.delta_override = parse_quantity(v, 'f'); },
          [](const RunConfig& c) { return fmt(c.device.delta()); }},
      Key{"delta_p",
          [](RunConfig& c, std::string_view v) { c.delta_p_override = parse_quantity(v, 'f'); },
          [](const RunConfig& c) { return fmt(c.device.delta_p()); }},
      QR_FREQ("alpha", device.alpha),
      QR_FREQ("J", device.J),
      QR_PLAIN("Q_p", device.Q_p),
      QR_FREQ("gamma_int", device.gamma_int),
      Key{"T1",
          [](RunConfig& c, std::string_view v) {
            const std::string s = lower(trim(v));
            c.device.T1 = (s == "inf" || s == "infinity") ? std::numeric_limits<double>::infinity()
                                                          : parse_quantity(v, 't');
          },
          [](const RunConfig& c) { return fmt(c.device.T1); }},
      QR_PLAIN("eta", device.eta),
      QR_PLAIN("n_drive", device.n_drive),
      Key{"omega_d",
          [](RunConfig& c, std::string_view v) {
            c.device.omega_d = parse_quantity(v, 'f');
            c.omega_d_explicit = true;
          },
          [](const RunConfig& c) { return fmt(c.device.omega_d); }},
      QR_PLAIN("dispersive_guard", device.dispersive_guard),
      // shots
      Key{"n_shots",
          [](RunConfig& c, std::string_view v) {
            c.shots.n_shots = static_cast<std::size_t>(parse_count(v, "n_shots"));
          },
          [](const RunConfig& c) { return std::to_string(c.shots.n_shots); }},
      Key{"seed",
          [](RunConfig& c, std::string_view v) { c.shots.master_seed = parse_count(v, "seed"); },
          [](const RunConfig& c) { return std::to_string(c.shots.master_seed); }},
      QR_TIME("dt_bin", shots.dt_bin),
      QR_TIME("record_duration", shots.record_duration),
      QR_PLAIN("p_thermal", shots.p_thermal),
      QR_FREQ("gamma_mix_up", shots.gamma_mix_up),
      QR_FREQ("gamma_mix_down", shots.gamma_mix_down),
      Key{"preselect",
          [](RunConfig& c, std::string_view v) { c.shots.preselect = parse_bool(v, "preselect"); },
          [](const RunConfig& c) { return std::string(c.shots.preselect ? "true" : "false"); }},
      QR_PLAIN("prep_error", shots.prep_error),
      QR_TIME("premeas_start", shots.premeas_start),
      QR_TIME("premeas_duration", shots.premeas_duration),
      QR_TIME("premeas_window", shots.premeas_window),
      Key{"mixing",
          [](RunConfig& c, std::string_view v) {
            const std::string s = lower(trim(v));
            if (s == "none") {
              c.mixing.kind = MixingModel::Kind::none;
            } else if (s == "fixed") {
              c.mixing.kind = MixingModel::Kind::fixed;
            } else if (s == "lambda_scaled") {
              c.mixing.kind = MixingModel::Kind::lambda_scaled;
            } else {
              throw ConfigError("key 'mixing': expected none|fixed|lambda_scaled");
            }
          },
          [](const RunConfig& c) { return mixing_kind(c.mixing); }},
      QR_FREQ("mixing_constant", mixing.constant),
      // pulse
      Key{"pulse",
          [](RunConfig& c, std::string_view v) {
            const std::string s = lower(trim(v));
            if (s == "gated") {
              c.pulse.kind = PulseKind::gated;
            } else if (s == "two_step") {
              c.pulse.kind = PulseKind::two_step;
              if (c.pulse.boost_factor == 1.0) c.pulse.boost_factor = 2.5;
            } else {
              throw ConfigError("key 'pulse': expected gated|two_step");
            }
          },
          pulse_kind},
      QR_PLAIN("amplitude", pulse.amplitude),
      QR_PLAIN("boost_factor", pulse.boost_factor),
      QR_TIME("boost_duration", pulse.boost_duration),
      QR_TIME("pulse_duration", pulse.total_duration),
      // analysis
      QR_TIME("tau", tau),
      QR_FREQ("amp_bandwidth", filter.amp_bandwidth),
      QR_TIME("boxcar", filter.boxcar),
      Key{"output_dir",
          [](RunConfig& c, std::string_view v) { c.output_dir = std::string(trim(v)); },
          [](const RunConfig& c) { return c.output_dir; }},
  };
  return keys;
}

#undef QR_FREQ
#undef QR_TIME
#undef QR_PLAIN

}  // namespace

double parse_quantity(std::string_view text, char kind) {
  std::string_view s = trim(text);
  if (s.empty()) throw ConfigError("empty value");
  // Split the numeric prefix from the unit suffix.
  std::size_t split = s.size();
  while (split > 0 && std::isalpha(static_cast<unsigned char>(s[split - 1]))) --split;
  std::string_view number = trim(s.substr(0, split));
  const std::string unit = lower(s.substr(split));
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
  if (number.empty() || ec != std::errc() || ptr != number.data() + number.size()) {
    throw ConfigError("malformed number '" + std::string(text) + "'");
  }
  double factor = 1.0;
  if (!unit.empty()) {
    bool ok = false;
    if (kind == 'f') {
      ok = true;
      if (unit == "hz") {
        factor = kHz;
      } else if (unit == "khz") {
        factor = kKHz;
      } else if (unit == "mhz") {
        factor = kMHz;
      } else if (unit == "ghz") {
        factor = kGHz;
      } else {
        ok = false;
      }
    } else if (kind == 't') {
      ok = true;
      if (unit == "s") {
        factor = kSecond;
      } else if (unit == "ms") {
        factor = kMs;
      } else if (unit == "us") {
        factor = kUs;
      } else if (unit == "ns") {
        factor = kNs;
      } else {
        ok = false;
      }
    }
    if (!ok) throw ConfigError("unit '" + unit + "' not accepted in '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) throw ConfigError("non-finite value '" + std::string(text) + "'");
  return value * factor;
}

std::string format_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x == 0.0 ? 0.0 : x);
  return buf;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  for (const Key& k : key_table()) {
    if (key == k.name) {
      try {
        k.set(cfg, value);
      } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind("key '", 0) == 0) throw;
        throw ConfigError("key '" + std::string(key) + "': " + msg);
      }
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read configuration file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set_config_value(cfg, v.substr(0, eq), v.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("error reading '" + path + "'");
}

void RunConfig::finalize() {
  if (delta_override) device.omega_q = device.omega_r + *delta_override;
  if (delta_p_override) device.omega_p = device.omega_r - *delta_p_override;
  if (!omega_d_explicit) device.omega_d = device.omega_r;

  device.validate();
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(filter.amp_bandwidth >= 0.0) || !(filter.boxcar > 0.0)) {
    throw ConfigError("invalid filter chain");
  }
  if (mixing.kind == MixingModel::Kind::lambda_scaled && !(mixing.constant >= 0.0)) {
    throw ConfigError("mixing_constant must be >= 0");
  }
  if (mixing.kind != MixingModel::Kind::fixed) mixing.apply(device, shots);
  shots.validate();
  pulse.validate();
}

std::vector<std::pair<std::string, std::string>> describe_config(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Key& k : key_table()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key& k : key_table()) out.emplace_back(k.name);
  return out;
}

}  // namespace qreadout
