#pragma once

// Run configuration: flat key = value text with '#' comments. A potential can be embedded
// between "begin potential" and "end potential" lines (same format as potential files).

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hillinv/errors.hpp"
#include "hillinv/estimator.hpp"
#include "hillinv/fourier.hpp"
#include "hillinv/optim.hpp"

namespace hillinv {

// xorshift64* (Vigna 2014, shifts 12/25/27) seeded through one splitmix64 step so that
// small or zero seeds still give a full state. Output stream is fixed; do not change.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    state_ = z ^ (z >> 31);
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
  }

  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  // uniform on [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Coefficients i.i.d. uniform on [-1, 1], drawn in the order c_0, c_1, d_1, c_2, d_2, ...
inline TrigPotential generate_target(int p_t, std::uint64_t seed) {
  if (p_t < 1) throw ConfigError("generate_target: p_t must be >= 1");
  Xorshift64Star rng(seed);
  auto V = TrigPotential::zero(p_t);
  V.c[0] = 2.0 * rng.uniform() - 1.0;
  for (int k = 1; k <= p_t; ++k) {
    V.c[k] = 2.0 * rng.uniform() - 1.0;
    V.d[k - 1] = 2.0 * rng.uniform() - 1.0;
  }
  return V;
}

// v_0 = 2, v_{+-1} = v_{+-2} = 1 + 0.5i (conjugated for negative n).
inline TrigPotential appendix_potential() {
  auto V = TrigPotential::zero(2);
  V.c = {2.0, 2.0, 2.0};
  V.d = {-1.0, -1.0};
  return V;
}

enum class RunMode { Naive, Adaptive, Oracle, EstimatorValidate };

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::Naive:
      return "naive";
    case RunMode::Adaptive:
      return "adaptive";
    case RunMode::Oracle:
      return "oracle";
    case RunMode::EstimatorValidate:
      return "estimator-validate";
  }
  return "?";
}

struct RunConfig {
  RunMode mode = RunMode::Adaptive;
  Method method = Method::Bfgs;
  int M = 3;
  int Q = 25;
  int s = 20;
  int p = 1;
  int s0 = 1;
  int p0 = 1;
  int s_t = 20;
  int p_t = 1;
  double nu = 1e-5;
  double eta = 1e-6;
  int s_ref = 250;
  std::vector<double> theta{0.01};
  std::optional<double> kappa;
  KappaRule kappa_rule = KappaRule::PotentialMinimum;
  std::uint64_t seed = 1;
  // random | file:<path> | inline | comb | appendix
  std::string target = "random";
  // zero | target | file:<path>
  std::string initial = "zero";
  std::optional<TrigPotential> inline_potential;
  double lambda = 10.0;
  double shift = 0.0;
  std::vector<double> lambdas{1.0, 10.0, 100.0, 1000.0};
  long max_iter = 100000;
  int max_outer = 10000;
  int threads = 1;
  std::string out_dir = ".";
};

using KeyValues = std::map<std::string, std::string>;

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "mode", "method", "M",     "Q",        "s",     "p",     "s0",     "p0",      "s_t",      "p_t",
      "nu",   "eta",    "s_ref", "theta",    "kappa", "kappa_rule", "seed", "target", "initial", "lambda",
      "shift", "lambdas", "max_iter", "max_outer", "threads", "out_dir"};
  return keys;
}

namespace detail {
inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const unsigned long long x = std::stoull(v, &used, 0);
      if (used == v.size()) return x;
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("key '" + key + "': expected a non-negative 64-bit integer, got '" + v + "'");
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size() && std::isfinite(x)) return x;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("key '" + key + "': expected a real number, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

inline int parse_count(const std::string& key, const std::string& v, long long lo) {
  const long long x = parse_int(key, v);
  if (x < lo || x > 1000000) throw ConfigError("key '" + key + "': must be >= " + std::to_string(lo));
  return static_cast<int>(x);
}
}  // namespace detail

// Reads key = value pairs and an optional embedded potential block.
inline KeyValues read_config_text(std::istream& is, std::optional<TrigPotential>* embedded = nullptr) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string bare = detail::trim(line.substr(0, line.find('#')));
    if (bare.empty()) continue;
    if (bare == "begin potential") {
      std::ostringstream block;
      bool closed = false;
      while (std::getline(is, line)) {
        ++lineno;
        if (detail::trim(line.substr(0, line.find('#'))) == "end potential") {
          closed = true;
          break;
        }
        block << line << "\n";
      }
      if (!closed) throw ConfigError("config: 'begin potential' without 'end potential'");
      std::istringstream bs(block.str());
      auto V = read_potential(bs);
      if (embedded) *embedded = V;
      continue;
    }
    const auto eq = bare.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(bare.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = detail::trim(bare.substr(eq + 1));
  }
  return kv;
}

inline KeyValues read_config_file(const std::string& path, std::optional<TrigPotential>* embedded = nullptr) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return read_config_text(in, embedded);
}

// Applies key = value overrides on top of cfg, then checks cross-field constraints.
inline void apply_settings(RunConfig& cfg, const KeyValues& kv) {
  using namespace detail;
  for (const auto& [key, v] : kv) {
    if (key == "mode") {
      if (v == "naive") cfg.mode = RunMode::Naive;
      else if (v == "adaptive") cfg.mode = RunMode::Adaptive;
      else if (v == "oracle") cfg.mode = RunMode::Oracle;
      else if (v == "estimator-validate") cfg.mode = RunMode::EstimatorValidate;
      else throw ConfigError("key 'mode': expected naive|adaptive|oracle|estimator-validate, got '" + v + "'");
    } else if (key == "method") {
      cfg.method = parse_method(v);
    } else if (key == "M") {
      cfg.M = parse_count(key, v, 1);
    } else if (key == "Q") {
      cfg.Q = parse_count(key, v, 1);
    } else if (key == "s") {
      cfg.s = parse_count(key, v, 1);
    } else if (key == "p") {
      cfg.p = parse_count(key, v, 1);
    } else if (key == "s0") {
      cfg.s0 = parse_count(key, v, 1);
    } else if (key == "p0") {
      cfg.p0 = parse_count(key, v, 1);
    } else if (key == "s_t") {
      cfg.s_t = parse_count(key, v, 1);
    } else if (key == "p_t") {
      cfg.p_t = parse_count(key, v, 1);
    } else if (key == "nu") {
      cfg.nu = parse_real(key, v);
    } else if (key == "eta") {
      cfg.eta = parse_real(key, v);
    } else if (key == "s_ref") {
      cfg.s_ref = parse_count(key, v, 1);
    } else if (key == "theta") {
      cfg.theta = parse_list(key, v);
    } else if (key == "kappa") {
      if (v == "auto") cfg.kappa.reset();
      else cfg.kappa = parse_real(key, v);
    } else if (key == "kappa_rule") {
      if (v == "potential-min") cfg.kappa_rule = KappaRule::PotentialMinimum;
      else if (v == "trace") cfg.kappa_rule = KappaRule::TraceBound;
      else throw ConfigError("key 'kappa_rule': expected potential-min|trace, got '" + v + "'");
    } else if (key == "seed") {
      cfg.seed = parse_u64(key, v);
    } else if (key == "target") {
      if (!(v == "random" || v == "inline" || v == "comb" || v == "appendix" || v.rfind("file:", 0) == 0))
        throw ConfigError("key 'target': expected random|inline|comb|appendix|file:<path>, got '" + v + "'");
      cfg.target = v;
    } else if (key == "initial") {
      if (!(v == "zero" || v == "target" || v.rfind("file:", 0) == 0))
        throw ConfigError("key 'initial': expected zero|target|file:<path>, got '" + v + "'");
      cfg.initial = v;
    } else if (key == "lambda") {
      cfg.lambda = parse_real(key, v);
    } else if (key == "shift") {
      cfg.shift = parse_real(key, v);
    } else if (key == "lambdas") {
      cfg.lambdas = parse_list(key, v);
    } else if (key == "max_iter") {
      cfg.max_iter = parse_int(key, v);
      if (cfg.max_iter < 0) throw ConfigError("key 'max_iter': must be >= 0");
    } else if (key == "max_outer") {
      cfg.max_outer = parse_count(key, v, 1);
    } else if (key == "threads") {
      cfg.threads = parse_count(key, v, 1);
    } else if (key == "out_dir") {
      if (v.empty()) throw ConfigError("key 'out_dir': empty path");
      cfg.out_dir = v;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

inline void validate(const RunConfig& cfg) {
  auto need = [](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) throw ConfigError("key '" + key + "': " + msg);
  };
  need(cfg.nu > 0.0, "nu", "must be > 0");
  need(cfg.eta > 0.0, "eta", "must be > 0");
  for (double t : cfg.theta) need(t > 0.0 && t <= 1.0, "theta", "values must lie in (0, 1]");
  need(cfg.M <= 2 * cfg.s_t + 1, "M", "exceeds basis size 2*s_t+1");
  need(cfg.lambda >= 0.0, "lambda", "must be >= 0");
  if (cfg.mode == RunMode::Naive) need(cfg.M <= 2 * cfg.s + 1, "M", "exceeds basis size 2*s+1");
  if (cfg.mode == RunMode::Adaptive) {
    need(cfg.M <= 2 * cfg.s0 + 1, "s0", "basis 2*s0+1 cannot hold M bands");
    need(cfg.s0 <= cfg.s_ref, "s0", "must not exceed s_ref");
  }
  if (cfg.mode == RunMode::EstimatorValidate) {
    need(cfg.s < cfg.s_ref, "s_ref", "must exceed s");
    need(cfg.M <= 2 * cfg.s + 1, "M", "exceeds basis size 2*s+1");
  }
  if (cfg.mode == RunMode::Oracle)
    for (double l : cfg.lambdas) need(l > 0.0, "lambdas", "values must be > 0");
  if (cfg.target == "inline") need(cfg.inline_potential.has_value(), "target", "inline requires a potential block");
  if (cfg.target == "comb") need(cfg.initial != "target", "initial", "a comb target has no trigonometric form");
}

inline TrigPotential load_potential_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open potential file '" + path + "'");
  return read_potential(in);
}

// The target as a trigonometric potential; comb targets have none.
inline std::optional<TrigPotential> target_potential(const RunConfig& cfg) {
  if (cfg.target == "random") return generate_target(cfg.p_t, cfg.seed);
  if (cfg.target == "inline") return *cfg.inline_potential;
  if (cfg.target == "appendix") return appendix_potential();
  if (cfg.target.rfind("file:", 0) == 0) return load_potential_file(cfg.target.substr(5));
  return std::nullopt;
}

inline ApostConfig apost_config(const RunConfig& cfg, double theta) {
  ApostConfig a;
  a.s_ref = cfg.s_ref;
  a.theta = theta;
  a.kappa = cfg.kappa;
  a.kappa_rule = cfg.kappa_rule;
  return a;
}

}  // namespace hillinv
