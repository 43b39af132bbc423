// Command-line front end: derive, signal, rate, simulate, analyze, optimize, calibrate.

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qreadout/analysis.h"
#include "qreadout/calib.h"
#include "qreadout/config.h"
#include "qreadout/error.h"
#include "qreadout/optimize.h"
#include "qreadout/units.h"

namespace fs = std::filesystem;
using namespace qreadout;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

std::string num(double x) { return format_number(x); }

class Output {
 public:
  Output(const RunConfig& cfg, const std::string& command) : cfg_(cfg), command_(command) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.output_dir + "'");
  }

  /// Opens a file in the output directory and writes the provenance header.
  std::ofstream open(const std::string& name) const {
    const fs::path path = fs::path(cfg_.output_dir) / name;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "# qreadout " << command_ << "\n";
    out << "# seed = " << cfg_.shots.master_seed << "\n";
    for (const auto& [k, v] : describe_config(cfg_)) out << "# " << k << " = " << v << "\n";
    return out;
  }

  static void close(std::ofstream& out, const std::string& name) {
    out.flush();
    if (!out) throw IoError("error writing '" + name + "'");
  }

 private:
  const RunConfig& cfg_;
  std::string command_;
};

using Report = std::vector<std::pair<std::string, std::string>>;

void write_report(const Output& o, const std::string& name, const Report& r, bool echo) {
  auto out = o.open(name);
  for (const auto& [k, v] : r) {
    out << k << ": " << v << "\n";
    if (echo) std::cout << k << ": " << v << "\n";
  }
  Output::close(out, name);
}

const char* flag(bool b) { return b ? "pass" : "fail"; }

// ---------------------------------------------------------------------------

int cmd_derive(const RunConfig& cfg) {
  const Output o(cfg, "derive");
  const DerivedParams d = derive(cfg.device);
  const ConstraintReport c = constraint_report(cfg.device);
  Report r = {
      {"chi_hz", num(d.chi)},
      {"n_crit", num(d.n_crit)},
      {"kappa_eff_hz", num(d.kappa_eff)},
      {"kappa_p_hz", num(d.kappa_p)},
      {"lambda", num(d.lambda_mix)},
      {"delta_hz", num(d.delta)},
      {"chi_over_kappa_eff", num(c.ratio)},
      {"n_drive_over_n_crit", num(c.drive_fraction)},
      {"dispersive_flag", flag(c.dispersive_ok)},
      {"drive_flag", flag(c.drive_ok)},
      {"recommended_ratio_at_tau", num(c.recommended_ratio)},
  };
  for (const auto& a : c.advisories) r.emplace_back("advisory", a);
  write_report(o, "derive.txt", r, true);
  return 0;
}

int cmd_signal(const RunConfig& cfg, double t_end_ns, double dt_ns) {
  const Output o(cfg, "signal");
  const DerivedParams d = derive(cfg.device);
  const TimeGrid grid = TimeGrid::span(t_end_ns * kNs, dt_ns * kNs);
  const ReadoutCircuit circuit(cfg.device);
  // Integrate on a grid fine enough for the full model and keep every
  // `stride`-th point.
  const auto stride = static_cast<std::size_t>(
      std::max(1.0, std::ceil(grid.dt / circuit.options().max_grid_step - 1e-9)));
  const TimeGrid fine{grid.t0, grid.dt / static_cast<double>(stride), (grid.n - 1) * stride + 1};
  const FieldTraces fields = simulate_fields(circuit, cfg.pulse, fine);
  const SignalTrace full = signal_from_fields(fields, circuit.kappa_p_rate());
  const QuadratureTraces quad = mean_quadrature_traces(fields);
  const SignalTrace qss = qss_signal_trace(d.chi, d.kappa_eff, cfg.device.n_drive, grid);

  // Closed-form fields projected on their steady-state difference, scaled so
  // that sqrt(kappa_p) |Qe - Qg| carries the closed-form signal.
  const auto [ss_g, ss_e] = qss_fields(d.chi, d.kappa_eff, cfg.device.n_drive, 1e-3);
  const cplx axis = std::polar(1.0, -std::arg(ss_e - ss_g));
  const double scale = std::sqrt(d.kappa_eff / d.kappa_p);

  constexpr double kSqrtMHz = 1e3;
  auto out = o.open("signal.csv");
  out << "t_ns,S_sqrtMHz,Qg,Qe,model\n";
  for (std::size_t i = 0; i < grid.n; ++i) {
    const std::size_t j = i * stride;
    out << num(grid.at(i) / kNs) << ',' << num(full.values[j] / kSqrtMHz) << ','
        << num(quad.q_g[j]) << ',' << num(quad.q_e[j]) << ",full\n";
  }
  for (std::size_t i = 0; i < grid.n; ++i) {
    const auto [a_g, a_e] = qss_fields(d.chi, d.kappa_eff, cfg.device.n_drive, grid.at(i));
    out << num(grid.at(i) / kNs) << ',' << num(qss.values[i] / kSqrtMHz) << ','
        << num(scale * (axis * a_g).real()) << ',' << num(scale * (axis * a_e).real()) << ",qss\n";
  }
  Output::close(out, "signal.csv");
  std::cout << "S_ss_qss_sqrtMHz: "
            << num(qss_steady_state(d.chi, d.kappa_eff, cfg.device.n_drive) / kSqrtMHz) << "\n";
  std::cout << "lo_phase_rad: " << num(quad.phi_lo) << "\n";
  return 0;
}

int cmd_rate(const RunConfig& cfg, double t_max_ns, double step_ns) {
  const Output o(cfg, "rate");
  const DerivedParams d = derive(cfg.device);
  const SignalTrace full = readout_signal(cfg.device, cfg.pulse, t_max_ns * kNs);
  const TimeGrid grid = TimeGrid::span(t_max_ns * kNs, 0.01 * kNs);
  const SignalTrace qss = qss_signal_trace(d.chi, d.kappa_eff, cfg.device.n_drive, grid);
  DeviceParams ideal = cfg.device;
  ideal.eta = 1.0;

  std::vector<double> taus;
  for (double t = step_ns; t <= t_max_ns * (1.0 + 1e-12); t += step_ns) taus.push_back(t);

  auto out = o.open("rate.csv");
  out << "tau_ns,s_tau,model\n";
  for (double t : taus) out << num(t) << ',' << num(integrated_rate(full, t * kNs)) << ",full\n";
  for (double t : taus) out << num(t) << ',' << num(integrated_rate(qss, t * kNs)) << ",qss\n";
  Output::close(out, "rate.csv");

  auto ov = o.open("overlap.csv");
  ov << "tau_ns,eps_o,eps_o_eta1\n";
  for (double t : taus) {
    ov << num(t) << ',' << num(overlap_model(cfg.device, full, cfg.filter, t * kNs)) << ','
       << num(overlap_model(ideal, full, cfg.filter, t * kNs)) << '\n';
  }
  Output::close(ov, "overlap.csv");
  return 0;
}

int cmd_simulate(const RunConfig& cfg, bool wide) {
  const Output o(cfg, "simulate");
  const ShotSimulator sim(cfg.device, cfg.pulse, cfg.shots);
  std::vector<ShotRecord> batch = sim.simulate_batch();
  std::vector<std::size_t> ids(batch.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;

  if (cfg.shots.preselect) {
    const PreselectionResult pre = run_preselection(batch);
    auto out = o.open("preselection.csv");
    out << "n_shots,n_rejected,rejection_fraction,threshold,fit_mean,fit_sigma\n";
    out << batch.size() << ',' << batch.size() - pre.kept.size() << ','
        << num(pre.rejection_fraction) << ',' << num(pre.threshold) << ',' << num(pre.fit_mean)
        << ',' << num(pre.fit_sigma) << '\n';
    Output::close(out, "preselection.csv");
    std::vector<std::size_t> kept_ids;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch[i].preselect_value <= pre.threshold) kept_ids.push_back(i);
    }
    ids = std::move(kept_ids);
    std::cout << "rejection_fraction: " << num(pre.rejection_fraction) << "\n";
  }

  const double dt = cfg.shots.dt_bin;
  const std::size_t bins = cfg.shots.n_bins();
  auto out = o.open("shots.csv");
  if (wide) {
    out << "shot_id,prep";
    for (std::size_t k = 0; k < bins; ++k) out << ",Q_" << num(static_cast<double>(k) * dt / kNs);
    out << '\n';
    for (std::size_t i : ids) {
      out << i << ',' << to_string(batch[i].prep);
      for (double q : batch[i].samples) out << ',' << num(q);
      out << '\n';
    }
  } else {
    out << "shot_id,prep,t_ns,Q\n";
    for (std::size_t i : ids) {
      const char* prep = to_string(batch[i].prep);
      for (std::size_t k = 0; k < bins; ++k) {
        out << i << ',' << prep << ',' << num(static_cast<double>(k) * dt / kNs) << ','
            << num(batch[i].samples[k]) << '\n';
      }
    }
  }
  Output::close(out, "shots.csv");
  std::cout << "shots_written: " << ids.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double cell_number(const std::string& s, const std::string& where) {
  try {
    return parse_quantity(s, 'n');
  } catch (const ConfigError&) {
    throw ConfigError(where + ": malformed number '" + s + "'");
  }
}

struct ShotTable {
  std::vector<ShotRecord> records;
  double dt = 0.0;
};

ShotTable read_shots(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  if (header.size() < 3 || header[0] != "shot_id" || header[1] != "prep") {
    throw ConfigError(path + ": expected a shot table header starting with shot_id,prep");
  }
  auto parse_prep = [&](const std::string& s) {
    if (s == "g") return Qubit::ground;
    if (s == "e") return Qubit::excited;
    throw ConfigError(path + ": prep must be g or e, got '" + s + "'");
  };

  ShotTable t;
  const bool wide = header[2].rfind("Q_", 0) == 0;
  if (wide) {
    if (header.size() < 4) throw ConfigError(path + ": need at least two bins");
    t.dt = (cell_number(header[3].substr(2), path) - cell_number(header[2].substr(2), path)) * kNs;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto cells = split_csv(line);
      if (cells.size() != header.size()) throw ConfigError(path + ": ragged row");
      ShotRecord r;
      r.prep = parse_prep(cells[1]);
      for (std::size_t k = 2; k < cells.size(); ++k) r.samples.push_back(cell_number(cells[k], path));
      t.records.push_back(std::move(r));
    }
  } else {
    if (header.size() != 4 || header[2] != "t_ns" || header[3] != "Q") {
      throw ConfigError(path + ": expected columns shot_id,prep,t_ns,Q");
    }
    std::map<std::string, std::size_t> index;
    std::vector<double> first_times;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto cells = split_csv(line);
      if (cells.size() != 4) throw ConfigError(path + ": ragged row");
      auto [it, fresh] = index.try_emplace(cells[0], t.records.size());
      if (fresh) {
        t.records.emplace_back();
        t.records.back().prep = parse_prep(cells[1]);
      }
      ShotRecord& r = t.records[it->second];
      if (it->second == 0) first_times.push_back(cell_number(cells[2], path));
      r.samples.push_back(cell_number(cells[3], path));
    }
    if (first_times.size() < 2) throw ConfigError(path + ": need at least two bins");
    t.dt = (first_times[1] - first_times[0]) * kNs;
  }
  if (in.bad()) throw IoError("error reading '" + path + "'");
  if (t.records.empty()) throw ConfigError(path + ": no shots");
  for (const auto& r : t.records) {
    if (r.samples.size() != t.records.front().samples.size()) {
      throw ConfigError(path + ": shots have different lengths");
    }
  }
  return t;
}

int cmd_analyze(const RunConfig& cfg, const std::string& input) {
  const Output o(cfg, "analyze");
  const ShotTable t = read_shots(input);
  const std::size_t bins = t.records.front().samples.size();
  std::vector<double> mean_g(bins, 0.0), mean_e(bins, 0.0);
  std::size_t ng = 0, ne = 0;
  for (const auto& r : t.records) {
    auto& m = r.prep == Qubit::ground ? mean_g : mean_e;
    (r.prep == Qubit::ground ? ng : ne) += 1;
    for (std::size_t k = 0; k < bins; ++k) m[k] += r.samples[k];
  }
  if (ng == 0 || ne == 0) throw ConfigError(input + ": need shots of both preparations");
  for (std::size_t k = 0; k < bins; ++k) {
    mean_g[k] /= static_cast<double>(ng);
    mean_e[k] /= static_cast<double>(ne);
  }
  const WeightFunction w = build_weights(mean_g, mean_e, t.dt, cfg.tau);
  const IntegratedBatch q = integrate_batch(t.records, w, cfg.device.kappa_p(), t.dt);
  const MixtureFit fit = fit_mixture(q.q_g, q.q_e);
  const ErrorBudget b = error_budget(q.q_g, q.q_e, fit);

  const Report r = {
      {"tau_ns", num(cfg.tau / kNs)},
      {"n_g", std::to_string(b.n_g)},
      {"n_e", std::to_string(b.n_e)},
      {"fidelity", num(b.fidelity)},
      {"average_assignment_fidelity", num(b.average_assignment_fidelity)},
      {"eps_g", num(b.eps_g)},
      {"eps_e", num(b.eps_e)},
      {"eps_o", num(b.eps_o)},
      {"eps_o_g", num(b.eps_o_g)},
      {"eps_o_e", num(b.eps_o_e)},
      {"eps_t_g", num(b.eps_t_g)},
      {"eps_t_e", num(b.eps_t_e)},
      {"mu_g", num(fit.mu_g)},
      {"mu_e", num(fit.mu_e)},
      {"sigma_g", num(fit.sigma_g)},
      {"sigma_e", num(fit.sigma_e)},
      {"A_gg", num(fit.A_gg)},
      {"A_ge", num(fit.A_ge)},
      {"A_eg", num(fit.A_eg)},
      {"A_ee", num(fit.A_ee)},
      {"threshold", num(fit.threshold)},
  };
  write_report(o, "report.txt", r, true);

  const HistogramTable h = histogram_table(q.q_g, q.q_e, fit);
  auto out = o.open("histogram.csv");
  out << "bin_center,count_g,count_e,fit_g,fit_e\n";
  for (std::size_t k = 0; k < h.centers.size(); ++k) {
    out << num(h.centers[k]) << ',' << num(h.count_g[k]) << ',' << num(h.count_e[k]) << ','
        << num(h.fit_g[k]) << ',' << num(h.fit_e[k]) << '\n';
  }
  Output::close(out, "histogram.csv");
  return 0;
}

int cmd_optimize(const RunConfig& cfg, std::vector<double> taus_ns, std::vector<double> powers,
                 bool tradeoff) {
  const Output o(cfg, "optimize");
  if (taus_ns.empty()) {
    for (double t = 20.0; t <= 400.0; t += 20.0) taus_ns.push_back(t);
  }
  std::vector<double> taus;
  for (double t : taus_ns) taus.push_back(t * kNs);
  const auto qss = optimal_ratio_vs_tau(cfg.device, taus, SignalModel::qss);
  const auto full = optimal_ratio_vs_tau(cfg.device, taus, SignalModel::full);
  auto out = o.open("ratio.csv");
  out << "tau_ns,chi_tau,ratio_qss,ratio_full\n";
  for (std::size_t i = 0; i < taus.size(); ++i) {
    out << num(taus_ns[i]) << ',' << num(qss[i].chi_tau) << ',' << num(qss[i].ratio) << ','
        << num(full[i].ratio) << '\n';
  }
  Output::close(out, "ratio.csv");

  const ConstraintReport c = constraint_report(cfg.device);
  Report r = {
      {"steady_state_ratio_qss", num(steady_state_optimal_ratio(cfg.device, SignalModel::qss))},
      {"steady_state_ratio_full", num(steady_state_optimal_ratio(cfg.device, SignalModel::full))},
      {"n_crit", num(c.n_crit)},
      {"n_drive_over_n_crit", num(c.drive_fraction)},
      {"lambda", num(c.lambda)},
      {"chi_hz", num(c.chi)},
      {"kappa_eff_hz", num(c.kappa_eff)},
      {"chi_over_kappa_eff", num(c.ratio)},
      {"dispersive_flag", flag(c.dispersive_ok)},
      {"drive_flag", flag(c.drive_ok)},
      {"recommended_ratio_at_tau", num(c.recommended_ratio)},
  };
  for (const auto& a : c.advisories) r.emplace_back("advisory", a);

  if (tradeoff) {
    if (powers.empty()) powers = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
    const TradeoffResult t =
        power_tradeoff(cfg.device, cfg.pulse, powers, cfg.tau, cfg.mixing, cfg.shots, cfg.filter);
    auto tout = o.open("tradeoff.csv");
    tout << "n_drive,eps_o,infidelity_mc\n";
    for (const auto& row : t.rows) {
      tout << num(row.n_drive) << ',' << num(row.eps_o) << ',' << num(row.infidelity_mc) << '\n';
    }
    Output::close(tout, "tradeoff.csv");
    r.emplace_back("tradeoff_interior_optimum",
                   t.interior_argmin ? num(t.rows[*t.interior_argmin].n_drive) : "none");
  }
  write_report(o, "optimize.txt", r, true);
  return 0;
}

std::pair<std::vector<double>, std::vector<double>> read_two_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::vector<double> a, b;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != 2) throw ConfigError(path + ": expected two columns");
    try {
      a.push_back(parse_quantity(cells[0], 'n'));
      b.push_back(parse_quantity(cells[1], 'n'));
    } catch (const ConfigError&) {
      if (header_seen || !a.empty()) throw ConfigError(path + ": malformed row '" + line + "'");
      header_seen = true;  // a single non-numeric first row is a header
    }
  }
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return {a, b};
}

struct CalibrateArgs {
  std::string spectrum_g, spectrum_e, stark;
  double gain_db = -1.0;
  double n_hemt = -1.0;
  double eta_loss = -1.0;
};

int cmd_calibrate(const RunConfig& cfg, const CalibrateArgs& a) {
  const Output o(cfg, "calibrate");
  bool any = false;
  if (!a.spectrum_g.empty() || !a.spectrum_e.empty()) {
    if (a.spectrum_g.empty() || a.spectrum_e.empty()) {
      throw ConfigError("--spectrum-g and --spectrum-e must be given together");
    }
    const auto [fg, mg] = read_two_columns(a.spectrum_g);
    const auto [fe, me] = read_two_columns(a.spectrum_e);
    if (fg != fe) throw ConfigError("the two spectra must share their frequency grid");
    const SpectrumFit f = fit_transmission(fg, mg, me);
    write_report(o, "spectrum_fit.txt",
                 {{"omega_p_hz", num(f.params.omega_p)},
                  {"omega_r_hz", num(f.params.omega_r)},
                  {"J_hz", num(f.params.J)},
                  {"chi_hz", num(f.params.chi)},
                  {"Q_p", num(f.params.Q_p)},
                  {"kappa_p_hz", num(f.params.kappa_p())},
                  {"gamma_hz", num(f.params.gamma)},
                  {"scale", num(f.params.scale)},
                  {"cost", num(f.cost)},
                  {"iterations", std::to_string(f.iterations)}},
                 true);
    any = true;
  }
  if (!a.stark.empty()) {
    const auto [pw, fq] = read_two_columns(a.stark);
    const double chi = derive(cfg.device).chi;
    const StarkCalibration s = stark_calibration(pw, fq, chi);
    write_report(o, "stark.txt",
                 {{"photons_per_power", num(s.photons_per_power)},
                  {"nu_q0_hz", num(s.nu_q0)},
                  {"slope_hz_per_power", num(s.slope)},
                  {"chi_hz", num(chi)},
                  {"degenerate", s.degenerate ? "true" : "false"}},
                 true);
    any = true;
  }
  if (a.gain_db >= 0.0 || a.n_hemt >= 0.0) {
    if (a.gain_db < 0.0 || a.n_hemt < 0.0) {
      throw ConfigError("--gain-db and --n-hemt must be given together");
    }
    const double G0 = gain_from_db(a.gain_db);
    const double eta_phi = phase_sensitive_efficiency(G0, a.n_hemt);
    Report r = {{"G0", num(G0)}, {"n_hemt", num(a.n_hemt)}, {"eta_phi_amp", num(eta_phi)}};
    if (a.eta_loss > 0.0) {
      r.emplace_back("eta_loss", num(a.eta_loss));
      r.emplace_back("eta_total", num(total_efficiency(eta_phi, a.eta_loss)));
    }
    const DerivedParams d = derive(cfg.device);
    r.emplace_back("expected_output_power_hz",
                   num(output_power(d.chi, cfg.device.J, d.kappa_p, cfg.device.n_drive)));
    write_report(o, "efficiency.txt", r, true);
    any = true;
  }
  if (!any) throw ConfigError("calibrate: give --spectrum-g/--spectrum-e, --stark or --gain-db/--n-hemt");
  return 0;
}

void apply_thread_env() {
  if (const char* env = std::getenv("QREADOUT_THREADS")) {
    const int n = std::atoi(env);
    if (n <= 0) throw ConfigError("QREADOUT_THREADS must be a positive integer");
    omp_set_num_threads(n);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dispersive qubit readout: circuit model, Monte Carlo shots and analysis"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  app.add_option("-c,--config", config_path, "key = value configuration file");
  app.add_option("-s,--set", overrides, "override, key=value (repeatable)")->take_all();
  app.add_option("-o,--output-dir", output_dir, "directory for output files");

  auto* derive_cmd = app.add_subcommand("derive", "derived parameters and design checks");

  auto* signal_cmd = app.add_subcommand("signal", "S(t) and mean quadratures, closed form and full model");
  double t_end_ns = 200.0, dt_ns = 0.5;
  signal_cmd->add_option("--t-end", t_end_ns, "end time (ns)");
  signal_cmd->add_option("--dt", dt_ns, "output step (ns)");

  auto* rate_cmd = app.add_subcommand("rate", "s(tau) and the analytic overlap error versus tau");
  double t_max_ns = 200.0, step_ns = 4.0;
  rate_cmd->add_option("--t-max", t_max_ns, "largest tau (ns)");
  rate_cmd->add_option("--step", step_ns, "tau step (ns)");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo single-shot records");
  std::string n_shots, seed;
  bool wide = false;
  sim_cmd->add_option("--n-shots", n_shots, "number of shots");
  sim_cmd->add_option("--seed", seed, "master seed");
  sim_cmd->add_flag("--wide", wide, "one row per shot");

  auto* an_cmd = app.add_subcommand("analyze", "weights, histogram fit and error budget");
  std::string input;
  an_cmd->add_option("-i,--input", input, "shot table (default <output-dir>/shots.csv)");

  auto* opt_cmd = app.add_subcommand("optimize", "optimal chi/kappa_eff and drive tradeoff");
  std::vector<double> taus_ns, powers;
  bool tradeoff = false;
  opt_cmd->add_option("--taus", taus_ns, "integration times (ns)");
  opt_cmd->add_option("--powers", powers, "n_drive grid for the tradeoff");
  opt_cmd->add_flag("--tradeoff", tradeoff, "run the Monte Carlo power tradeoff");

  auto* cal_cmd = app.add_subcommand("calibrate", "spectrum fit, Stark calibration, efficiency");
  CalibrateArgs cal;
  cal_cmd->add_option("--spectrum-g", cal.spectrum_g, "CSV frequency_hz,magnitude (qubit in g)");
  cal_cmd->add_option("--spectrum-e", cal.spectrum_e, "CSV frequency_hz,magnitude (qubit in e)");
  cal_cmd->add_option("--stark", cal.stark, "CSV power,qubit_frequency_hz");
  cal_cmd->add_option("--gain-db", cal.gain_db, "single-quadrature gain G0 in dB");
  cal_cmd->add_option("--n-hemt", cal.n_hemt, "HEMT-referred added noise quanta");
  cal_cmd->add_option("--eta-loss", cal.eta_loss, "loss efficiency for the total");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    apply_thread_env();
    RunConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!n_shots.empty()) set_config_value(cfg, "n_shots", n_shots);
    if (!seed.empty()) set_config_value(cfg, "seed", seed);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    cfg.finalize();

    if (*derive_cmd) return cmd_derive(cfg);
    if (*signal_cmd) return cmd_signal(cfg, t_end_ns, dt_ns);
    if (*rate_cmd) return cmd_rate(cfg, t_max_ns, step_ns);
    if (*sim_cmd) return cmd_simulate(cfg, wide);
    if (*an_cmd) {
      return cmd_analyze(cfg, input.empty() ? (fs::path(cfg.output_dir) / "shots.csv").string() : input);
    }
    if (*opt_cmd) return cmd_optimize(cfg, taus_ns, powers, tradeoff);
    if (*cal_cmd) return cmd_calibrate(cfg, cal);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
