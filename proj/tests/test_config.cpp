#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "hillinv/config.hpp"
#include "hillinv/experiment.hpp"

using namespace hillinv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hillinv_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Every data row has the header's column count and parses as decimal numbers.
void expect_numeric_csv(const fs::path& p, const std::string& header) {
  const auto rows = lines_of(p);
  ASSERT_FALSE(rows.empty()) << p;
  EXPECT_EQ(rows[0], header);
  const auto cols = std::count(header.begin(), header.end(), ',') + 1;
  const std::regex number(R"(-?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::string cell;
    long n = 0;
    while (std::getline(ss, cell, ',')) {
      ++n;
      EXPECT_TRUE(std::regex_match(cell, number)) << p << " row " << i << ": '" << cell << "'";
    }
    EXPECT_EQ(n, cols) << p << " row " << i;
  }
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HILLINV_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Prng, MatchesReferenceStream) {
  // xorshift64* after one splitmix64 step, computed independently
  Xorshift64Star rng(42);
  EXPECT_EQ(rng.next(), 0x31b0ece7c4f697a2ULL);
  EXPECT_EQ(rng.next(), 0x9008a3b1cb686f03ULL);
  EXPECT_EQ(rng.next(), 0x7c7173abd97be16fULL);
  EXPECT_EQ(rng.next(), 0x45672c8c8d6b8c4fULL);
}

TEST(Prng, UniformStaysInUnitInterval) {
  Xorshift64Star rng(0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Target, GoldenSeed42DegreeFour) {
  std::ifstream in(std::string(HILLINV_TEST_DATA) + "/target_seed42_p4.txt");
  ASSERT_TRUE(in);
  EXPECT_EQ(generate_target(4, 42), read_potential(in));
}

TEST(Target, DeterministicAndSized) {
  EXPECT_EQ(generate_target(3, 7), generate_target(3, 7));
  EXPECT_NE(generate_target(3, 7), generate_target(3, 8));
  const auto V = generate_target(1, 99);
  EXPECT_EQ(V.c.size() + V.d.size(), 3u);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto W = generate_target(6, seed);
    for (double c : W.c) EXPECT_LE(std::abs(c), 1.0);
    for (double d : W.d) EXPECT_LE(std::abs(d), 1.0);
  }
  EXPECT_THROW(generate_target(0, 1), ConfigError);
}

TEST(Target, AppendixPotentialCoefficients) {
  const auto E = trig_to_exp(appendix_potential());
  EXPECT_EQ(E[0], cplx(2.0, 0.0));
  EXPECT_EQ(E[1], cplx(1.0, 0.5));
  EXPECT_EQ(E[2], cplx(1.0, 0.5));
  EXPECT_EQ(E[-2], cplx(1.0, -0.5));
}

TEST(Config, ParsesKeysCommentsAndEmbeddedPotential) {
  std::istringstream in(
      "# recovery\n"
      "mode = naive   # inline comment\n"
      "method=pr\n"
      "M = 2\n"
      "theta = 0.1, 0.5\n"
      "seed = 0x10\n"
      "target = inline\n"
      "begin potential\n"
      "p=1\n"
      "0 0.5\n"
      "1 0.25 -0.125\n"
      "end potential\n");
  RunConfig cfg;
  apply_settings(cfg, read_config_text(in, &cfg.inline_potential));
  EXPECT_EQ(cfg.mode, RunMode::Naive);
  EXPECT_EQ(cfg.method, Method::PolakRibiere);
  EXPECT_EQ(cfg.M, 2);
  EXPECT_EQ(cfg.theta, (std::vector<double>{0.1, 0.5}));
  EXPECT_EQ(cfg.seed, 16u);
  ASSERT_TRUE(cfg.inline_potential);
  EXPECT_EQ(cfg.inline_potential->d[0], -0.125);
  EXPECT_NO_THROW(validate(cfg));
  EXPECT_EQ(target_potential(cfg), cfg.inline_potential);
}

TEST(Config, LaterValuesOverrideEarlierOnes) {
  RunConfig cfg;
  apply_settings(cfg, {{"Q", "9"}});
  apply_settings(cfg, {{"Q", "13"}, {"kappa", "0"}});
  EXPECT_EQ(cfg.Q, 13);
  EXPECT_EQ(cfg.kappa, 0.0);
  apply_settings(cfg, {{"kappa", "auto"}});
  EXPECT_FALSE(cfg.kappa);
}

TEST(Config, ErrorsNameTheOffendingKey) {
  auto msg = [](const KeyValues& kv) -> std::string {
    try {
      RunConfig cfg;
      apply_settings(cfg, kv);
      validate(cfg);
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(msg({{"colour", "red"}}).find("'colour'"), std::string::npos);
  EXPECT_NE(msg({{"M", "three"}}).find("'M'"), std::string::npos);
  EXPECT_NE(msg({{"M", "0"}}).find("'M'"), std::string::npos);
  EXPECT_NE(msg({{"nu", "-1"}}).find("'nu'"), std::string::npos);
  EXPECT_NE(msg({{"theta", "0.5,2"}}).find("'theta'"), std::string::npos);
  EXPECT_NE(msg({{"seed", "-3"}}).find("'seed'"), std::string::npos);
  EXPECT_NE(msg({{"method", "newton"}}).find("newton"), std::string::npos);
  EXPECT_NE(msg({{"target", "inline"}}).find("'target'"), std::string::npos);
  EXPECT_NE(msg({{"mode", "adaptive"}, {"s0", "1"}, {"M", "4"}}).find("'s0'"), std::string::npos);
  EXPECT_NE(msg({{"target", "comb"}, {"initial", "target"}}).find("'initial'"), std::string::npos);

  std::istringstream unterminated("begin potential\np=0\n0 1\n");
  EXPECT_THROW(read_config_text(unterminated), ConfigError);
  std::istringstream no_equals("just words\n");
  EXPECT_THROW(read_config_text(no_equals), ConfigError);
}

TEST(Experiment, NaiveRunWritesAllArtifacts) {
  const auto dir = scratch("naive");
  RunConfig cfg;
  cfg.mode = RunMode::Naive;
  cfg.s = 10;
  cfg.s_t = 10;
  cfg.Q = 9;
  cfg.out_dir = dir.string();
  const auto out = run_experiment(cfg);
  EXPECT_TRUE(out.converged);
  for (const char* f : {"potential_final.txt", "bands_target.csv", "bands_final.csv", "convergence.csv", "summary.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  expect_numeric_csv(dir / "bands_target.csv", "q,m,eps");
  expect_numeric_csv(dir / "bands_final.csv", "q,m,eps");
  EXPECT_EQ(lines_of(dir / "bands_final.csv").size(), 1u + 9 * 3);

  const auto sum = read_summary((dir / "summary.json").string());
  for (const char* k : {"final_J", "final_gnorm", "N", "s_N", "p_N", "elapsed_s"}) EXPECT_TRUE(sum.contains(k)) << k;
  EXPECT_EQ(sum["s_N"], 10);
  EXPECT_LE(sum["final_gnorm"].get<double>(), 1e-5);
  std::ifstream pin(dir / "potential_final.txt");
  EXPECT_EQ(read_potential(pin).p, 1);
}

TEST(Experiment, SelfTargetNeedsNoSteps) {
  RunConfig cfg;
  cfg.mode = RunMode::Naive;
  cfg.initial = "target";
  cfg.p_t = 2;
  cfg.p = 2;
  cfg.Q = 9;
  cfg.out_dir = scratch("self").string();
  const auto out = run_experiment(cfg);
  EXPECT_EQ(out.summary["N"], 0);
  EXPECT_EQ(out.summary["final_J"].get<double>(), 0.0);
}

TEST(Experiment, AdaptiveCosineDefaults) {
  RunConfig cfg;
  cfg.out_dir = scratch("adaptive").string();
  const auto out = run_experiment(cfg);
  EXPECT_TRUE(out.converged);
  EXPECT_LE(out.summary["s_N"].get<int>(), 6);
  EXPECT_LE(out.summary["final_J"].get<double>(), 1e-8);
  EXPECT_TRUE(out.summary.contains("events"));
  const auto rows = lines_of(fs::path(cfg.out_dir) / "convergence.csv");
  EXPECT_EQ(rows[0], "iter,J,gnorm,s,p,elapsed_s,event");
}

TEST(Experiment, SingleThreadedRunsAreReproducible) {
  RunConfig cfg;
  cfg.mode = RunMode::Naive;
  cfg.p_t = 3;
  cfg.p = 3;
  cfg.Q = 9;
  cfg.s = 12;
  cfg.method = Method::PolakRibiere;
  auto strip_time = [](const fs::path& p) {
    std::vector<std::string> out;
    for (auto line : lines_of(p)) {
      // drop the elapsed_s column (6th)
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      if (cells.size() >= 6) cells.erase(cells.begin() + 5);
      std::string joined;
      for (const auto& c : cells) joined += c + ",";
      out.push_back(joined);
    }
    return out;
  };
  cfg.out_dir = scratch("repro_a").string();
  auto a = run_experiment(cfg).summary;
  const auto conv_a = strip_time(fs::path(cfg.out_dir) / "convergence.csv");
  const auto pot_a = lines_of(fs::path(cfg.out_dir) / "potential_final.txt");
  cfg.out_dir = scratch("repro_b").string();
  auto b = run_experiment(cfg).summary;
  EXPECT_EQ(conv_a, strip_time(fs::path(cfg.out_dir) / "convergence.csv"));
  EXPECT_EQ(pot_a, lines_of(fs::path(cfg.out_dir) / "potential_final.txt"));
  for (auto* s : {&a, &b}) {
    s->erase("elapsed_s");
    (*s)["config"].erase("out_dir");
  }
  EXPECT_EQ(a, b);
}

TEST(Experiment, OracleCsv) {
  RunConfig cfg;
  cfg.mode = RunMode::Oracle;
  cfg.s = 40;
  std::ostringstream os;
  run_oracle(cfg, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "lambda,omega,eps,eps_s,flatness");
  double prev = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    const double omega = std::stod(cell);
    EXPECT_GT(omega, prev);
    EXPECT_LT(omega, 0.5);
    prev = omega;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

TEST(Experiment, EstimatorValidationCsv) {
  RunConfig cfg;
  cfg.mode = RunMode::EstimatorValidate;
  cfg.target = "appendix";
  cfg.s = 6;
  cfg.s_ref = 30;
  cfg.Q = 5;
  cfg.theta = {0.1, 1.0};
  cfg.kappa = 0.0;
  const auto dir = scratch("estimator");
  {
    std::ofstream out(dir / "est.csv");
    run_estimator_validation(cfg, out);
  }
  expect_numeric_csv(dir / "est.csv", "q,m,eps_s,eps_ref,true_err,delta,theta");
  EXPECT_EQ(lines_of(dir / "est.csv").size(), 1u + 2 * 5 * 3);
}

TEST(Experiment, CompareComputesTau) {
  json a{{"elapsed_s", 2.0}, {"N", 10}, {"final_J", 1e-10}};
  json b{{"elapsed_s", 5.0}, {"N", 4}, {"final_J", 2e-10}};
  const auto r = compare_summaries(a, b);
  EXPECT_DOUBLE_EQ(r["tau"].get<double>(), 2.5);
  EXPECT_DOUBLE_EQ(r["iteration_ratio"].get<double>(), 0.4);
  EXPECT_THROW(compare_summaries(json{{"N", 1}}, b), ConfigError);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const std::string out = " --out_dir " + dir.string();
  EXPECT_EQ(run_cli("run --mode naive --Q 9 --s 8 --s_t 8" + out), 0);
  EXPECT_EQ(run_cli("run --mode naive --M x" + out), 2);
  EXPECT_EQ(run_cli("run --no-such-flag"), 2);
  EXPECT_EQ(run_cli("run " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(run_cli("run --mode naive --Q 9 --max_iter 1" + out), 3);
  EXPECT_EQ(run_cli("oracle --lambdas 1,10 --s 20" + out), 0);
  EXPECT_TRUE(fs::exists(dir / "oracle.csv"));
  EXPECT_EQ(run_cli("validate-estimator --target appendix --s 4 --s_ref 20 --Q 5" + out), 0);
  EXPECT_EQ(run_cli("validate-estimator --target comb" + out), 2);
  EXPECT_EQ(run_cli("compare " + (dir / "summary.json").string() + " " + (dir / "summary.json").string()), 0);
  EXPECT_EQ(run_cli("compare " + (dir / "nope.json").string() + " x"), 2);
  EXPECT_EQ(run_cli(""), 2);
}

TEST(Cli, ConfigFileWithOverrides) {
  const auto dir = scratch("cli_cfg");
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "mode = naive\nmethod = sd\nQ = 9\ns = 8\ns_t = 8\nmax_iter = 1\nout_dir = " << dir.string() << "\n";
  }
  EXPECT_EQ(run_cli((dir / "run.cfg").string().insert(0, "run ")), 3);
  EXPECT_EQ(run_cli("run " + (dir / "run.cfg").string() + " --max_iter 10000 --method bfgs"), 0);
  const auto sum = read_summary((dir / "summary.json").string());
  EXPECT_EQ(sum["config"]["method"], "bfgs");
}
