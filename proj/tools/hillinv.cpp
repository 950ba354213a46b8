// Command line front end.
//
//   hillinv run [config] [--key value ...]
//   hillinv oracle [config] [--key value ...]
//   hillinv validate-estimator [config] [--key value ...]
//   hillinv compare <reference/summary.json> <candidate/summary.json>
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "hillinv/config.hpp"
#include "hillinv/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct ConfigArgs {
  std::string file;
  std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("config", args.file, "key = value configuration file");
  for (const auto& key : hillinv::config_keys())
    cmd->add_option("--" + key, args.overrides[key], "override '" + key + "'");
}

hillinv::RunConfig build_config(const ConfigArgs& args, hillinv::RunMode mode, bool keep_file_mode) {
  hillinv::RunConfig cfg;
  cfg.mode = mode;
  hillinv::KeyValues kv;
  if (!args.file.empty()) kv = hillinv::read_config_file(args.file, &cfg.inline_potential);
  if (!keep_file_mode) kv.erase("mode");
  for (const auto& [key, value] : args.overrides)
    if (!value.empty()) kv[key] = value;
  hillinv::apply_settings(cfg, kv);
  return cfg;
}

std::ofstream open_csv(const hillinv::RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = std::filesystem::path(cfg.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw hillinv::ConfigError("cannot write '" + path.string() + "'");
  std::cout << "wrote " << path.string() << "\n";
  return out;
}

int dispatch(const hillinv::RunConfig& cfg) {
  using hillinv::RunMode;
  if (cfg.mode == RunMode::Oracle) {
    auto out = open_csv(cfg, "oracle.csv");
    hillinv::run_oracle(cfg, out);
    return 0;
  }
  if (cfg.mode == RunMode::EstimatorValidate) {
    auto out = open_csv(cfg, "estimator.csv");
    hillinv::run_estimator_validation(cfg, out);
    return 0;
  }
  const auto outcome = hillinv::run_experiment(cfg);
  const auto& s = outcome.summary;
  std::cout << to_string(cfg.mode) << " " << to_string(cfg.method) << ": J=" << s["final_J"].get<double>()
            << " |g|=" << s["final_gnorm"].get<double>() << " N=" << s["N"].get<long>()
            << " s_N=" << s["s_N"].get<int>() << " p_N=" << s["p_N"].get<int>() << " ("
            << s["termination"].get<std::string>() << ")\n";
  for (const auto& w : s["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  if (!outcome.converged) {
    std::cerr << "error: descent did not converge: " << s["termination"].get<std::string>();
    if (s.contains("detail")) std::cerr << " (" << s["detail"].get<std::string>() << ")";
    std::cerr << "\n";
    return kExitNumerical;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse band-structure solver for 1D periodic Schroedinger operators"};
  app.require_subcommand(1);

  ConfigArgs run_args, oracle_args, est_args;
  auto* run = app.add_subcommand("run", "naive or adaptive recovery (mode = naive | adaptive)");
  add_config_options(run, run_args);
  auto* oracle = app.add_subcommand("oracle", "Dirac comb dispersion roots and Galerkin first band");
  add_config_options(oracle, oracle_args);
  auto* est = app.add_subcommand("validate-estimator", "compare the a posteriori bound with the true error");
  add_config_options(est, est_args);

  std::string ref_path, cand_path;
  auto* compare = app.add_subcommand("compare", "relative CPU time of two runs");
  compare->add_option("reference", ref_path, "summary.json of the reference run")->required();
  compare->add_option("candidate", cand_path, "summary.json of the compared run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return dispatch(build_config(run_args, hillinv::RunMode::Adaptive, true));
    if (*oracle) return dispatch(build_config(oracle_args, hillinv::RunMode::Oracle, false));
    if (*est) return dispatch(build_config(est_args, hillinv::RunMode::EstimatorValidate, false));
    const auto result = hillinv::compare_summaries(hillinv::read_summary(ref_path), hillinv::read_summary(cand_path));
    std::cout << std::setw(2) << result << "\n";
    return 0;
  } catch (const hillinv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hillinv::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
