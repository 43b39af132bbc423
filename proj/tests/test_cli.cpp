#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "qreadout/calib.h"
#include "qreadout/config.h"

namespace fs = std::filesystem;

namespace {

const std::string kCli = QREADOUT_CLI_PATH;
const std::string kConf = QREADOUT_SOURCE_DIR "/tools/paper.conf";

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("qreadout_cli_" + name);
  fs::remove_all(d);
  return d;
}

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Value of "key: value" in a report.
double report_value(const std::string& text, const std::string& key) {
  const auto pos = text.find("\n" + key + ": ");
  if (pos == std::string::npos) return std::nan("");
  return std::stod(text.substr(pos + key.size() + 3));
}

}  // namespace

TEST(Cli, DeriveReportsReferenceValues) {
  const fs::path d = fresh_dir("derive");
  ASSERT_EQ(run("-c " + kConf + " -o " + d.string() + " derive"), 0);
  const std::string text = slurp(d / "derive.txt");
  EXPECT_NEAR(report_value(text, "chi_hz"), -7.707e6, 1e3);
  EXPECT_NEAR(report_value(text, "n_crit"), 14.10, 0.005);
  EXPECT_NEAR(report_value(text, "kappa_eff_hz"), 38.75e6, 0.05e6);
  EXPECT_EQ(text.rfind("# qreadout derive\n", 0), 0u);
}

TEST(Cli, ExitCodes) {
  const fs::path d = fresh_dir("exit");
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("-c " + kConf + " -o " + d.string() + " simulate --n-shots 0"), 2);
  EXPECT_EQ(run("-c " + kConf + " -o " + d.string() + " -s colour=blue derive"), 2);
  EXPECT_EQ(run("-c " + kConf + " -o " + d.string() + " -s eta=2 derive"), 2);
  EXPECT_EQ(run("--no-such-flag derive"), 2);
  EXPECT_EQ(run("-c /nonexistent/none.conf derive"), 4);
  EXPECT_EQ(run("-o " + d.string() + " analyze -i /nonexistent/shots.csv"), 4);
}

TEST(Cli, SameSeedGivesIdenticalBytes) {
  const fs::path d = fresh_dir("det");
  const std::string base = "-c " + kConf + " -s preselect=false -o " + d.string();
  ASSERT_EQ(run(base + " simulate --n-shots 2000 --seed 7"), 0);
  const std::string first = slurp(d / "shots.csv");
  ASSERT_EQ(run(base + " simulate --n-shots 2000 --seed 7"), 0);
  EXPECT_TRUE(slurp(d / "shots.csv") == first);
  ASSERT_EQ(run(base + " simulate --n-shots 2000 --seed 8"), 0);
  EXPECT_FALSE(slurp(d / "shots.csv") == first);
}

TEST(Cli, OverridesAppearInHeaders) {
  const fs::path d = fresh_dir("hdr");
  ASSERT_EQ(run("-c " + kConf + " -s n_drive=3 -o " + d.string() + " rate --t-max 40 --step 8"), 0);
  for (const char* f : {"rate.csv", "overlap.csv"}) {
    const std::string text = slurp(d / f);
    EXPECT_EQ(text.rfind("# qreadout rate\n", 0), 0u) << f;
    EXPECT_NE(text.find("\n# n_drive = 3\n"), std::string::npos) << f;
    EXPECT_NE(text.find("\n# seed = "), std::string::npos) << f;
  }
}

TEST(Cli, SimulateThenAnalyzeLeavesInputUntouched) {
  const fs::path d = fresh_dir("pipe");
  const std::string base = "-c " + kConf + " -o " + d.string();
  ASSERT_EQ(run(base + " simulate --n-shots 6000 --seed 3"), 0);
  const std::string before = slurp(d / "shots.csv");
  const auto mtime = fs::last_write_time(d / "shots.csv");
  ASSERT_EQ(run(base + " analyze"), 0);
  EXPECT_TRUE(slurp(d / "shots.csv") == before);
  EXPECT_EQ(fs::last_write_time(d / "shots.csv"), mtime);
  EXPECT_TRUE(fs::exists(d / "preselection.csv"));
  EXPECT_TRUE(fs::exists(d / "histogram.csv"));
  const std::string report = slurp(d / "report.txt");
  EXPECT_EQ(report.rfind("# qreadout analyze\n", 0), 0u);
  EXPECT_NE(report.find("fidelity"), std::string::npos);
}

TEST(Cli, WideShotTableAnalyzes) {
  const fs::path d = fresh_dir("wide");
  const std::string base = "-c " + kConf + " -s preselect=false -o " + d.string();
  ASSERT_EQ(run(base + " simulate --n-shots 4000 --wide"), 0);
  EXPECT_EQ(run(base + " analyze"), 0);
  EXPECT_TRUE(fs::exists(d / "report.txt"));
}

TEST(Cli, SignalAndOptimize) {
  const fs::path d = fresh_dir("sig");
  const std::string base = "-c " + kConf + " -o " + d.string();
  ASSERT_EQ(run(base + " signal --t-end 100 --dt 2"), 0);
  EXPECT_NE(slurp(d / "signal.csv").find("t_ns,S_sqrtMHz,Qg,Qe,model"), std::string::npos);
  ASSERT_EQ(run(base + " optimize --taus 40 56 100"), 0);
  const std::string ratio = slurp(d / "ratio.csv");
  EXPECT_NE(ratio.find("tau_ns,chi_tau,ratio_qss,ratio_full"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "optimize.txt"));
}

TEST(Cli, CalibrateFromCsv) {
  const fs::path d = fresh_dir("cal");
  fs::create_directories(d);
  qreadout::SpectrumParams p;
  p.gamma = 0.05e6;
  std::ofstream g(d / "g.csv"), e(d / "e.csv");
  g << "frequency_hz,magnitude\n";
  e << "frequency_hz,magnitude\n";
  for (double w = 4600e6; w <= 4900e6; w += 0.25e6) {
    g << qreadout::format_number(w) << ',' << transmission(w, p, qreadout::Qubit::ground) << '\n';
    e << qreadout::format_number(w) << ',' << transmission(w, p, qreadout::Qubit::excited) << '\n';
  }
  g.close();
  e.close();
  ASSERT_EQ(run("-o " + d.string() + " calibrate --spectrum-g " + (d / "g.csv").string() +
                " --spectrum-e " + (d / "e.csv").string() + " --gain-db 19.7 --n-hemt 19.78"),
            0);
  const std::string fit = slurp(d / "spectrum_fit.txt");
  EXPECT_NEAR(report_value(fit, "chi_hz"), p.chi, 0.01 * std::abs(p.chi));
  EXPECT_NEAR(report_value(fit, "J_hz"), p.J, 0.01 * p.J);
  const std::string eff = slurp(d / "efficiency.txt");
  EXPECT_NEAR(report_value(eff, "eta_phi_amp"), 0.904, 5e-4);
}
