#pragma once

// Batch experiments behind the command line tool. Each writes its artifacts into
// cfg.out_dir and returns a summary; numerical trouble surfaces as NumericalError.

#include <json.hpp>  // vendored nlohmann/json

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "hillinv/adaptive.hpp"
#include "hillinv/config.hpp"
#include "hillinv/estimator.hpp"
#include "hillinv/objective.hpp"
#include "hillinv/optim.hpp"
#include "hillinv/oracle.hpp"

namespace hillinv {

using json = nlohmann::ordered_json;

namespace detail {
inline std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = std::filesystem::path(cfg.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

inline void write_samples_csv(std::ostream& os, const QGrid& grid, const Eigen::MatrixXd& eps) {
  std::ostringstream buf;
  buf << std::setprecision(17) << "q,m,eps\n";
  for (int j = 0; j < grid.size(); ++j)
    for (int m = 0; m < eps.cols(); ++m) buf << grid.points[j] << "," << (m + 1) << "," << eps(j, m) << "\n";
  os << buf.str();
}
}  // namespace detail

inline json config_to_json(const RunConfig& cfg) {
  json j;
  j["mode"] = to_string(cfg.mode);
  j["method"] = to_string(cfg.method);
  j["M"] = cfg.M;
  j["Q"] = cfg.Q;
  j["s"] = cfg.s;
  j["p"] = cfg.p;
  j["s0"] = cfg.s0;
  j["p0"] = cfg.p0;
  j["s_t"] = cfg.s_t;
  j["p_t"] = cfg.p_t;
  j["nu"] = cfg.nu;
  j["eta"] = cfg.eta;
  j["s_ref"] = cfg.s_ref;
  j["theta"] = cfg.theta;
  j["kappa"] = cfg.kappa ? json(*cfg.kappa) : json("auto");
  j["kappa_rule"] = cfg.kappa_rule == KappaRule::TraceBound ? "trace" : "potential-min";
  j["seed"] = cfg.seed;
  j["target"] = cfg.target;
  j["initial"] = cfg.initial;
  j["lambda"] = cfg.lambda;
  j["shift"] = cfg.shift;
  j["max_iter"] = cfg.max_iter;
  j["max_outer"] = cfg.max_outer;
  j["threads"] = cfg.threads;
  return j;
}

inline json potential_to_json(const TrigPotential& V) { return json{{"p", V.p}, {"c", V.c}, {"d", V.d}}; }

struct RunOutcome {
  json summary;
  bool converged = false;
};

// mode = naive | adaptive. Writes potential_final.txt, bands_target.csv, bands_final.csv,
// convergence.csv and summary.json.
inline RunOutcome run_experiment(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.mode != RunMode::Naive && cfg.mode != RunMode::Adaptive)
    throw ConfigError("key 'mode': run expects naive or adaptive");
  const auto start = std::chrono::steady_clock::now();

  const QGrid grid = QGrid::regular(cfg.Q);
  const auto Vt = target_potential(cfg);
  const TargetBands T = Vt ? targets_from_potential(*Vt, grid, cfg.M, cfg.s_t, cfg.threads)
                           : targets_from_source(MeasurePotential{cfg.lambda, cfg.shift}, grid, cfg.M, cfg.s_t,
                                                 cfg.threads);
  const auto warnings = validate_targets(T);

  TrigPotential W0 = TrigPotential::zero(0);
  if (cfg.initial == "target") W0 = *Vt;
  else if (cfg.initial.rfind("file:", 0) == 0) W0 = load_potential_file(cfg.initial.substr(5));
  const int p_start = cfg.mode == RunMode::Naive ? cfg.p : cfg.p0;
  if (W0.p > p_start) throw ConfigError("key 'initial': initial potential has degree above the starting p");

  RunRecord rec;
  json extra;
  int final_p = cfg.p;
  if (cfg.mode == RunMode::Naive) {
    NaiveOptions o;
    o.method = cfg.method;
    o.nu = cfg.nu;
    o.max_iter = cfg.max_iter;
    o.threads = cfg.threads;
    rec = run_naive(W0, T, cfg.s, cfg.p, o);
  } else {
    AdaptiveConfig a;
    a.s0 = cfg.s0;
    a.p0 = cfg.p0;
    a.eta = cfg.eta;
    a.nu = cfg.nu;
    a.apost = apost_config(cfg, cfg.theta.front());
    a.method = cfg.method;
    a.max_iter = cfg.max_iter;
    a.max_outer = cfg.max_outer;
    a.threads = cfg.threads;
    auto ar = run_adaptive(W0, T, a);
    final_p = ar.final_p;
    extra["S"] = ar.final_S;
    extra["P"] = ar.final_P;
    extra["outer_passes"] = ar.outer_passes;
    json events = json::array();
    for (const auto& e : ar.events)
      events.push_back({{"iter", e.iter}, {"kind", std::string(1, e.kind)}, {"from", e.from}, {"to", e.to},
                        {"estimator", e.estimator}});
    extra["events"] = events;
    rec = std::move(ar);
  }

  {
    auto out = detail::open_output(cfg, "potential_final.txt");
    write_potential(out, rec.final_potential);
  }
  {
    auto out = detail::open_output(cfg, "bands_target.csv");
    detail::write_samples_csv(out, grid, T.samples);
  }
  {
    auto out = detail::open_output(cfg, "bands_final.csv");
    write_bands_csv(out, band_sweep(rec.final_potential, grid, cfg.M, rec.final_s, cfg.threads));
  }
  {
    auto out = detail::open_output(cfg, "convergence.csv");
    write_convergence_csv(out, rec, true);
  }

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json sum;
  sum["final_J"] = rec.final_J;
  sum["final_gnorm"] = rec.final_gnorm;
  sum["N"] = rec.iterations;
  sum["evaluations"] = rec.evaluations;
  sum["s_N"] = rec.final_s;
  sum["p_N"] = final_p;
  sum["termination"] = to_string(rec.reason);
  if (!rec.detail.empty()) sum["detail"] = rec.detail;
  sum["elapsed_s"] = elapsed;
  for (auto& [k, v] : extra.items()) sum[k] = v;
  if (Vt) sum["target_potential"] = potential_to_json(*Vt);
  sum["final_potential"] = potential_to_json(rec.final_potential);
  sum["warnings"] = warnings;
  sum["config"] = config_to_json(cfg);
  {
    auto out = detail::open_output(cfg, "summary.json");
    out << std::setw(2) << sum << "\n";
  }
  return {sum, rec.reason == Termination::Converged};
}

// Dispersion roots for cfg.lambdas with the Galerkin first band at cutoff cfg.s.
// Columns: lambda, omega (bisection root), eps = omega^2, eps_s (Galerkin at q = 0),
// flatness (max over the grid of |eps_{q,1} - eps_{0,1}|).
inline void run_oracle(const RunConfig& cfg, std::ostream& os) {
  validate(cfg);
  const QGrid grid = QGrid::regular(cfg.Q);
  std::ostringstream buf;
  buf << std::setprecision(17) << "lambda,omega,eps,eps_s,flatness\n";
  for (double lam : cfg.lambdas) {
    const auto root = dirac_dispersion_q0(lam);
    const auto band = comb_first_band(lam, 0.0, grid, cfg.s, cfg.threads);
    buf << lam << "," << root.omega << "," << root.eps << "," << band.eps0 << "," << band.flatness << "\n";
  }
  os << buf.str();
}

// Per (q, m) comparison of Delta against the true error eps^s - eps^{s_ref}, one block per theta.
inline void run_estimator_validation(const RunConfig& cfg, std::ostream& os) {
  validate(cfg);
  const auto V = target_potential(cfg);
  if (!V) throw ConfigError("key 'target': estimator validation needs a trigonometric potential");
  const QGrid grid = QGrid::regular(cfg.Q);
  const auto bands = band_sweep(*V, grid, cfg.M, cfg.s, cfg.threads);
  ReferenceCache cache;
  std::ostringstream buf;
  buf << std::setprecision(17) << "q,m,eps_s,eps_ref,true_err,delta,theta\n";
  for (double theta : cfg.theta) {
    const auto rep = delta_report(*V, bands, apost_config(cfg, theta), &cache, cfg.threads);
    for (const auto& e : rep.entries) {
      const double ref = cache.get(trig_to_exp(*V), e.q, cfg.s_ref)->spectrum[e.m - 1];
      buf << e.q << "," << e.m << "," << e.eps << "," << ref << "," << (e.eps - ref) << "," << e.term.delta << ","
          << theta << "\n";
    }
  }
  os << buf.str();
}

inline json read_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open summary '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("summary '" + path + "': " + e.what());
  }
}

// tau = elapsed(candidate) / elapsed(reference), plus the iteration ratio.
inline json compare_summaries(const json& reference, const json& candidate) {
  auto field = [](const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) throw ConfigError(std::string("summary lacks numeric '") + key + "'");
    return j[key].get<double>();
  };
  const double t_ref = field(reference, "elapsed_s"), t_cand = field(candidate, "elapsed_s");
  const double n_ref = field(reference, "N"), n_cand = field(candidate, "N");
  if (!(t_ref > 0.0)) throw ConfigError("reference summary has non-positive elapsed_s");
  json out;
  out["tau"] = t_cand / t_ref;
  out["N_reference"] = n_ref;
  out["N_candidate"] = n_cand;
  out["iteration_ratio"] = n_ref > 0 ? json(n_cand / n_ref) : json(nullptr);
  out["J_reference"] = field(reference, "final_J");
  out["J_candidate"] = field(candidate, "final_J");
  return out;
}

}  // namespace hillinv
