#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kSource = EPDYN_SOURCE_DIR;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EPDYN_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::current_path() / "cli_runs" / name;
  fs::remove_all(d);
  return d;
}

std::string config(const std::string& name) { return (kSource / "configs" / name).string(); }

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(fs::current_path() / "cli_runs");
  const fs::path p = fs::current_path() / "cli_runs" / name;
  std::ofstream(p) << text;
  return p;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Cli, SpectrumAtExceptionalPoint) {
  const auto dir = fresh_dir("spectrum_ep");
  ASSERT_EQ(run_cli("spectrum --config " + config("fig2a_ep.ini") + " --out " + dir.string()), 0);
  const auto j = json::parse(slurp(dir / "spectrum.json"));
  EXPECT_EQ(j["regime"], "EP");
  EXPECT_EQ(j["g_ep"].get<double>(), 0.1);
  EXPECT_EQ(j["me_half_rate_block"], 3);
  EXPECT_TRUE(j["he_defective"].get<bool>());
  const auto csv = lines(slurp(dir / "spectrum.csv"));
  EXPECT_EQ(csv[0], "source,index,re_lambda,im_lambda");
  EXPECT_EQ(csv.size(), 1u + 2u + 16u);
  const auto m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["command"], "spectrum");
  EXPECT_EQ(m["config"]["system.g"], "0.1");
}

TEST(Cli, SpectrumBoundaryDrivenThreeDots) {
  const auto dir = fresh_dir("spectrum_chain3");
  ASSERT_EQ(run_cli("spectrum --config " + config("chain3_boundary.ini") + " --out " + dir.string()), 0);
  const auto j = json::parse(slurp(dir / "spectrum.json"));
  ASSERT_EQ(j["ep_couplings"].size(), 1u);
  EXPECT_NEAR(j["ep_couplings"][0].get<double>(), 0.5 / (4.0 * std::sqrt(2.0)), 1e-16);
  EXPECT_TRUE(j["he_defective"].get<bool>());
}

TEST(Cli, ConfigErrorLeavesNoFiles) {
  const auto dir = fresh_dir("bad_config");
  const auto cfg = write_config("bad.ini", "[system]\nn_dots = 2\neps = 1\ng = 0.1\ngamma = -0.5, 0.1\n"
                                           "[reservoirs]\nT = 1\n");
  EXPECT_EQ(run_cli("dynamics --config " + cfg.string() + " --out " + dir.string()), 2);
  EXPECT_FALSE(fs::exists(dir));
  EXPECT_EQ(run_cli("spectrum --config /nonexistent.ini --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("bogus --config " + config("fig2a_ep.ini")), 2);
  EXPECT_EQ(run_cli("spectrum --config " + config("fig2a_ep.ini") + " --format pdf --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("spectrum --config " + config("fig2a_ep.ini") + " --threads 0 --out " + dir.string()), 2);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Cli, OracleHorizonIsConfigError) {
  // horizon 2 pi M / 2W = 2 pi * 10 / 200 is far below t_end
  const auto dir = fresh_dir("short_horizon");
  const auto cfg = write_config("short_horizon.ini", slurp(config("fig2a_ep.ini")) + "\n[oracle]\nmodes = 10\n");
  EXPECT_EQ(run_cli("dynamics --with-oracle --config " + cfg.string() + " --out " + dir.string()), 2);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Cli, NumericalFailureStillWritesManifest) {
  // 2 x 9000 bath modes exceed the dense single-particle dimension cap
  std::string text = slurp(config("fig2a_ep.ini"));
  text.replace(text.find("steps = 401"), 11, "steps = 3");
  const auto cfg = write_config("too_many_modes.ini", text + "\n[oracle]\nmodes = 9000\n");
  const auto dir = fresh_dir("numerical_failure");
  EXPECT_EQ(run_cli("dynamics --with-oracle --config " + cfg.string() + " --out " + dir.string()), 3);
  ASSERT_TRUE(fs::exists(dir / "manifest.json"));
  const auto m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "error");
  EXPECT_NE(m["error"]["message"].get<std::string>().find("exceeds cap"), std::string::npos);
  EXPECT_TRUE(m["outputs"].empty());
  EXPECT_FALSE(fs::exists(dir / "dynamics.csv"));
}

TEST(Cli, DynamicsWithMasterEquationWeakCoupling) {
  const auto dir = fresh_dir("dynamics_weak");
  ASSERT_EQ(run_cli("dynamics --with-me --config " + config("fig2b_ep.ini") + " --out " + dir.string()), 0);
  const auto csv = lines(slurp(dir / "dynamics.csv"));
  EXPECT_EQ(csv[0], "t,N1_HE,N2_HE,N1_ME,N2_ME,N1_ss,N2_ss");
  EXPECT_EQ(csv.size(), 362u);
  // deviation per dot relative to the HE curve's peak magnitude
  double dev[2] = {0, 0}, scale[2] = {0, 0};
  for (std::size_t i = 1; i < csv.size(); ++i) {
    std::vector<double> v;
    std::istringstream row(csv[i]);
    for (std::string cell; std::getline(row, cell, ',');) v.push_back(std::stod(cell));
    if (v[0] > 20.0 / 0.011) break;
    for (int j = 0; j < 2; ++j) {
      dev[j] = std::max(dev[j], std::abs(v[1 + j] - v[3 + j]));
      scale[j] = std::max(scale[j], std::abs(v[1 + j]));
    }
  }
  EXPECT_LE(dev[0] / scale[0], 0.05);
  EXPECT_LE(dev[1] / scale[1], 0.05);
  EXPECT_TRUE(fs::exists(dir / "dynamics.svg"));
  EXPECT_TRUE(fs::exists(dir / "dynamics.json"));
}

TEST(Cli, DynamicsSinglePointGrid) {
  std::string text = slurp(config("fig2a_ep.ini"));
  text.replace(text.find("steps = 401"), 11, "steps = 1");
  const auto cfg = write_config("single_point.ini", text);
  const auto dir = fresh_dir("single_point");
  ASSERT_EQ(run_cli("dynamics --format csv --config " + cfg.string() + " --out " + dir.string()), 0);
  const auto csv = lines(slurp(dir / "dynamics.csv"));
  ASSERT_EQ(csv.size(), 2u);
  EXPECT_EQ(csv[1].substr(0, 6), "0,1,0,");
  EXPECT_FALSE(fs::exists(dir / "dynamics.json"));
}

TEST(Cli, DynamicsWithOracle) {
  std::string text = slurp(config("fig2a_ep.ini"));
  text.replace(text.find("t_end = 50"), 10, "t_end = 10");
  text.replace(text.find("steps = 401"), 11, "steps = 11");
  text += "\n[oracle]\nmodes = 1500\nhalf_width = 50\n";
  const auto cfg = write_config("oracle.ini", text);
  const auto dir = fresh_dir("oracle");
  ASSERT_EQ(run_cli("dynamics --with-oracle --format csv,json --config " + cfg.string() + " --out " + dir.string()), 0);
  const auto csv = lines(slurp(dir / "dynamics.csv"));
  EXPECT_EQ(csv[0], "t,N1_HE,N2_HE,N1_oracle,N2_oracle,N1_ss,N2_ss");
  for (std::size_t i = 1; i < csv.size(); ++i) {
    std::vector<double> v;
    std::istringstream row(csv[i]);
    for (std::string cell; std::getline(row, cell, ',');) v.push_back(std::stod(cell));
    EXPECT_NEAR(v[1], v[3], 1e-2);
    EXPECT_NEAR(v[2], v[4], 1e-2);
  }
}

TEST(Cli, SweepMarksZeroDetuningColumn) {
  const auto dir = fresh_dir("sweep");
  ASSERT_EQ(run_cli("sweep --config " + config("fig1b_sweep.ini") + " --out " + dir.string()), 0);
  const auto csv = lines(slurp(dir / "sweep.csv"));
  EXPECT_EQ(csv[0], "detuning,g,re_l1,im_l1,re_l2,im_l2,defective");
  EXPECT_EQ(csv.size(), 1u + 101u * 101u);
  std::size_t defective = 0;
  for (std::size_t i = 1; i < csv.size(); ++i) {
    if (csv[i].back() == '1') {
      ++defective;
      EXPECT_EQ(csv[i].substr(0, 2), "0,");
    }
  }
  EXPECT_EQ(defective, 1u);
  EXPECT_TRUE(fs::exists(dir / "sweep.svg"));
}

TEST(Cli, SweepEqualRatesNoDefects) {
  std::string text = slurp(config("fig1b_sweep.ini"));
  text.replace(text.find("gamma = 0.5, 0.1"), 16, "gamma = 0.3, 0.3");
  text.replace(text.find("g_max = 0.2"), 11, "g_max = 0.3");
  const auto cfg = write_config("equal_rates.ini", text);
  const auto dir = fresh_dir("sweep_equal");
  ASSERT_EQ(run_cli("sweep --format csv --config " + cfg.string() + " --out " + dir.string()), 0);
  for (const auto& l : lines(slurp(dir / "sweep.csv"))) EXPECT_NE(l.back(), '1');
}

TEST(Cli, MpembaStrongCoupling) {
  const auto dir = fresh_dir("mpemba_strong");
  ASSERT_EQ(run_cli("mpemba --config " + config("fig3_strong.ini") + " --out " + dir.string()), 0);
  const auto j = json::parse(slurp(dir / "mpemba.json"));
  const auto& c = j["channels"][0];
  EXPECT_GT(c["initial_ratio"].get<double>(), 1.0);
  EXPECT_FALSE(c["crossing_time"].is_null());
  const auto csv = lines(slurp(dir / "mpemba.csv"));
  EXPECT_EQ(csv[0], "t,R1,R2,chi_EP_1,chi_over_1,chi_EP_2,chi_over_2");
}

TEST(Cli, MpembaIdenticalParametersFlat) {
  std::string text = slurp(config("fig3_strong.ini"));
  text.replace(text.find("g_over = 0.05"), 13, "g_over = 0.1");
  text.replace(text.find("n_over = 0.5, 0.5"), 17, "n_over = 1, 1");
  const auto cfg = write_config("identical.ini", text);
  const auto dir = fresh_dir("mpemba_identical");
  ASSERT_EQ(run_cli("mpemba --format csv --config " + cfg.string() + " --out " + dir.string()), 0);
  const auto csv = lines(slurp(dir / "mpemba.csv"));
  for (std::size_t i = 1; i < csv.size(); ++i) {
    std::istringstream row(csv[i]);
    std::string t, r1, r2;
    std::getline(row, t, ',');
    std::getline(row, r1, ',');
    std::getline(row, r2, ',');
    if (r1 != "nan") EXPECT_EQ(std::stod(r1), 1.0);
    if (r2 != "nan") EXPECT_EQ(std::stod(r2), 1.0);
  }
}

TEST(Cli, ChainReport) {
  const auto dir = fresh_dir("chain8");
  ASSERT_EQ(run_cli("chain --config " + config("chain8.ini") + " --out " + dir.string()), 0);
  const auto j = json::parse(slurp(dir / "chain.json"));
  EXPECT_LE(j["max_deviation"].get<double>(), 1e-10);
  EXPECT_EQ(j["ep_couplings"].size(), 4u);
  const auto dir3 = fresh_dir("chain3");
  ASSERT_EQ(run_cli("chain --config " + config("chain3_boundary.ini") + " --out " + dir3.string()), 0);
  const auto k = json::parse(slurp(dir3 / "chain.json"));
  EXPECT_TRUE(k["three_dot"]["contained"].get<bool>());
  EXPECT_TRUE(k["three_dot"]["he_defective"].get<bool>());
  EXPECT_TRUE(k["three_dot"]["me_defective"].get<bool>());
  const auto csv = lines(slurp(dir3 / "chain.csv"));
  EXPECT_EQ(csv[0], "index,re_closed,im_closed,re_numerical,im_numerical");
}

TEST(Cli, RerunsAreByteIdentical) {
  for (const char* cmd : {"dynamics", "spectrum"}) {
    const auto a = fresh_dir(std::string("rerun_a_") + cmd), b = fresh_dir(std::string("rerun_b_") + cmd);
    ASSERT_EQ(run_cli(std::string(cmd) + " --config " + config("fig2a_overdamped.ini") + " --out " + a.string()), 0);
    ASSERT_EQ(run_cli(std::string(cmd) + " --threads 3 --config " + config("fig2a_overdamped.ini") + " --out " +
                      b.string()),
              0);
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().filename() == "manifest.json") continue;
      EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    }
  }
}
