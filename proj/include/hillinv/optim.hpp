#pragma once

// Descent machinery: strong-Wolfe line search, steepest descent / Polak-Ribiere /
// BFGS directions, and the fixed-discretisation driver. The minimiser is generic over any
// objective exposing `double evaluate(const VectorXd& x, VectorXd& grad)`.

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <concepts>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hillinv/fourier.hpp"
#include "hillinv/objective.hpp"

namespace hillinv {

enum class Method { SteepestDescent, PolakRibiere, Bfgs };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::SteepestDescent:
      return "sd";
    case Method::PolakRibiere:
      return "pr";
    case Method::Bfgs:
      return "bfgs";
  }
  return "?";
}

inline Method parse_method(const std::string& name) {
  if (name == "sd") return Method::SteepestDescent;
  if (name == "pr") return Method::PolakRibiere;
  if (name == "bfgs") return Method::Bfgs;
  throw ConfigError("unknown method '" + name + "' (expected sd|pr|bfgs)");
}

template <class P>
concept Objective = requires(P& f, const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  { f.evaluate(x, g) } -> std::convertible_to<double>;
};

struct LineSearchOptions {
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_iter = 40;
};

struct LineSearchResult {
  bool ok = false;
  double t = 0.0;
  double J = 0.0;
  Eigen::VectorXd g;
  int evaluations = 0;
};

namespace detail {

struct TrialPoint {
  double t = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Eigen::VectorXd g;
};

// Minimiser of the cubic matching values and slopes at a and b, kept 10% away from the
// interval ends; falls back to bisection.
inline double cubic_step(const TrialPoint& a, const TrialPoint& b) {
  const double lo = std::min(a.t, b.t), hi = std::max(a.t, b.t), w = hi - lo;
  const double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.t - b.t);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.t - a.t);
    const double cand = b.t - (b.t - a.t) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    if (std::isfinite(cand)) t = cand;
  }
  return std::clamp(t, lo + 0.1 * w, hi - 0.1 * w);
}

}  // namespace detail

// Strong Wolfe search (bracketing + zoom). Fails after opt.max_iter trial steps.
template <Objective P>
LineSearchResult line_search(P& f, const Eigen::VectorXd& x, const Eigen::VectorXd& dir, double J0,
                             const Eigen::VectorXd& g0, double t_init, const LineSearchOptions& opt = {}) {
  using detail::TrialPoint;
  const double dphi0 = g0.dot(dir);
  if (!(dphi0 < 0.0)) throw std::invalid_argument("line_search: direction is not a descent direction");
  if (!(t_init > 0.0)) throw std::invalid_argument("line_search: initial step must be positive");

  LineSearchResult res;
  int trials = 0;
  auto eval = [&](double t) {
    TrialPoint pt;
    pt.t = t;
    pt.phi = f.evaluate(x + t * dir, pt.g);
    pt.dphi = pt.g.dot(dir);
    ++res.evaluations;
    ++trials;
    return pt;
  };
  auto sufficient = [&](const TrialPoint& pt) {
    return std::isfinite(pt.phi) && pt.phi <= J0 + opt.c1 * pt.t * dphi0;
  };
  auto curvature = [&](const TrialPoint& pt) { return std::abs(pt.dphi) <= -opt.c2 * dphi0; };
  auto accept = [&](TrialPoint&& pt) {
    res.ok = true;
    res.t = pt.t;
    res.J = pt.phi;
    res.g = std::move(pt.g);
    return res;
  };

  auto zoom = [&](TrialPoint lo, TrialPoint hi) -> std::optional<TrialPoint> {
    while (trials < opt.max_iter) {
      if (std::abs(hi.t - lo.t) <= 1e-15 * std::max(lo.t, hi.t)) break;
      TrialPoint pt = eval(detail::cubic_step(lo, hi));
      if (!sufficient(pt) || pt.phi >= lo.phi) {
        hi = std::move(pt);
      } else {
        if (curvature(pt)) return pt;
        if (pt.dphi * (hi.t - lo.t) >= 0.0) hi = lo;
        lo = std::move(pt);
      }
    }
    return std::nullopt;
  };

  TrialPoint prev{0.0, J0, dphi0, g0};
  double t = t_init;
  while (trials < opt.max_iter) {
    TrialPoint cur = eval(t);
    if (!sufficient(cur) || (trials > 1 && cur.phi >= prev.phi)) {
      if (auto z = zoom(std::move(prev), std::move(cur))) return accept(std::move(*z));
      return res;
    }
    if (curvature(cur)) return accept(std::move(cur));
    if (cur.dphi >= 0.0) {
      if (auto z = zoom(std::move(cur), std::move(prev))) return accept(std::move(*z));
      return res;
    }
    prev = std::move(cur);
    t *= 2.0;
  }
  return res;
}

struct OptimState {
  Method method = Method::Bfgs;
  Eigen::VectorXd x;  // current iterate (coefficient vector)
  Eigen::VectorXd g;  // gradient at x
  Eigen::VectorXd dir;
  // method memory
  bool has_memory = false;
  Eigen::VectorXd x_prev;
  Eigen::VectorXd g_prev;
  Eigen::MatrixXd H;  // inverse Hessian approximation
  bool H_scaled = false;
  long iter = 0;
  int resets = 0;

  void clear_memory() {
    has_memory = false;
    H = Eigen::MatrixXd::Identity(x.size(), x.size());
    H_scaled = false;
  }
};

// lower bound on s.y / (|s| |y|) below which the BFGS update is skipped and H reset
inline constexpr double kBfgsCurvatureFloor = 1e-12;

// Updates method memory from the last step and returns the next search direction.
inline Eigen::VectorXd descent_direction(OptimState& st) {
  const Eigen::Index n = st.g.size();
  if (st.H.rows() != n) st.H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd dir = -st.g;
  if (st.has_memory) {
    switch (st.method) {
      case Method::SteepestDescent:
        break;
      case Method::PolakRibiere: {
        const double beta = std::max(0.0, st.g.dot(st.g - st.g_prev) / st.g_prev.squaredNorm());
        dir = -st.g + beta * st.dir;
        break;
      }
      case Method::Bfgs: {
        const Eigen::VectorXd step = st.x - st.x_prev;
        const Eigen::VectorXd y = st.g - st.g_prev;
        const double sy = step.dot(y);
        if (sy <= kBfgsCurvatureFloor * step.norm() * y.norm()) {
          st.H = Eigen::MatrixXd::Identity(n, n);
          st.H_scaled = false;
          ++st.resets;
        } else {
          if (!st.H_scaled) {
            st.H = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
            st.H_scaled = true;
          }
          const double rho = 1.0 / sy;
          const Eigen::VectorXd Hy = st.H * y;
          // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded
          st.H += (rho * rho * y.dot(Hy) + rho) * step * step.transpose() - rho * (Hy * step.transpose() + step * Hy.transpose());
          st.H = 0.5 * (st.H + st.H.transpose());
        }
        dir = -st.H * st.g;
        break;
      }
    }
  }
  if (!(st.g.dot(dir) < 0.0)) {
    st.H = Eigen::MatrixXd::Identity(n, n);
    st.H_scaled = false;
    ++st.resets;
    dir = -st.g;
  }
  st.dir = dir;
  return dir;
}

enum class Termination { Converged, IterationBudget, LineSearchFailure };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged:
      return "converged";
    case Termination::IterationBudget:
      return "iteration_budget";
    case Termination::LineSearchFailure:
      return "line_search_failure";
  }
  return "?";
}

struct MinimizeOptions {
  Method method = Method::Bfgs;
  double gtol = 1e-5;
  long max_iter = 100000;
  long min_iter = 0;  // steps taken even when the start point already meets gtol
  LineSearchOptions line_search{};
};

inline MinimizeOptions default_options(Method m, double gtol) {
  MinimizeOptions o;
  o.method = m;
  o.gtol = gtol;
  o.line_search.c2 = (m == Method::PolakRibiere) ? 0.4 : 0.9;
  return o;
}

struct MinimizeResult {
  Eigen::VectorXd x;
  double J = 0.0;
  Eigen::VectorXd g;
  long iterations = 0;
  long evaluations = 0;
  int resets = 0;
  Termination reason = Termination::Converged;
};

// Runs descent until ||g|| <= gtol. on_iter(iter, J, gnorm) is called for the initial
// point and after every accepted step.
template <Objective P, class Callback>
MinimizeResult minimize(P& f, const Eigen::VectorXd& x0, const MinimizeOptions& opt, Callback&& on_iter) {
  MinimizeResult out;
  OptimState st;
  st.method = opt.method;
  st.x = x0;
  double J = f.evaluate(st.x, st.g);
  ++out.evaluations;
  st.clear_memory();
  on_iter(0L, J, st.g.norm());

  double last_t = 0.0, last_slope = 0.0;
  while (st.g.norm() > opt.gtol || (st.iter < opt.min_iter && st.g.norm() > 0.0)) {
    if (st.iter >= opt.max_iter) {
      out.reason = Termination::IterationBudget;
      break;
    }
    Eigen::VectorXd dir = descent_direction(st);
    const double slope = st.g.dot(dir);
    double t0 = std::min(1.0, 1.0 / st.g.norm());
    if (st.has_memory) {
      if (st.method == Method::Bfgs)
        t0 = 1.0;
      else if (last_slope < 0.0)
        t0 = std::max(1e-12, last_t * last_slope / slope);
    }
    auto ls = line_search(f, st.x, dir, J, st.g, t0, opt.line_search);
    out.evaluations += ls.evaluations;
    if (!ls.ok && st.has_memory && st.method != Method::SteepestDescent) {
      // one retry along -g with fresh memory
      st.clear_memory();
      ++st.resets;
      dir = -st.g;
      st.dir = dir;
      ls = line_search(f, st.x, dir, J, st.g, std::min(1.0, 1.0 / st.g.norm()), opt.line_search);
      out.evaluations += ls.evaluations;
    }
    if (!ls.ok) {
      out.reason = Termination::LineSearchFailure;
      break;
    }
    last_t = ls.t;
    last_slope = st.g.dot(dir);
    st.x_prev = st.x;
    st.g_prev = st.g;
    st.x += ls.t * dir;
    st.g = std::move(ls.g);
    J = ls.J;
    st.has_memory = true;
    ++st.iter;
    on_iter(st.iter, J, st.g.norm());
  }
  out.x = std::move(st.x);
  out.g = std::move(st.g);
  out.J = J;
  out.iterations = st.iter;
  out.resets = st.resets;
  return out;
}

struct RunRow {
  long iter = 0;
  double J = 0.0;
  double gnorm = 0.0;
  int s = 0;
  int p = 0;
  double elapsed_s = 0.0;
  std::string event;  // refinement events (adaptive runs)
};

struct RunRecord {
  std::vector<RunRow> rows;
  TrigPotential final_potential;
  int final_s = 0;
  double final_J = 0.0;
  double final_gnorm = 0.0;
  long iterations = 0;
  long evaluations = 0;
  Termination reason = Termination::Converged;
  std::string detail;
};

inline void write_convergence_csv(std::ostream& os, const RunRecord& rec, bool with_event = false) {
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "iter,J,gnorm,s,p,elapsed_s" << (with_event ? ",event" : "") << "\n";
  for (const auto& r : rec.rows) {
    buf << r.iter << "," << r.J << "," << r.gnorm << "," << r.s << "," << r.p << "," << r.elapsed_s;
    if (with_event) buf << "," << r.event;
    buf << "\n";
  }
  os << buf.str();
}

struct NaiveOptions {
  Method method = Method::Bfgs;
  double nu = 1e-5;
  long max_iter = 100000;
  int threads = 1;
};

// Fixed (s, p) descent until ||grad J^s|_{Y_p}|| <= nu.
inline RunRecord run_naive(const TrigPotential& W0, const TargetBands& T, int s, int p, const NaiveOptions& opt) {
  if (W0.p > p) throw std::invalid_argument("run_naive: initial guess has degree above p");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  BandMisfit problem(T, s, p, opt.threads);
  auto mopt = default_options(opt.method, opt.nu);
  mopt.max_iter = opt.max_iter;

  RunRecord rec;
  auto res = minimize(problem, to_coeff_vector(extend(W0, p)), mopt, [&](long it, double J, double gn) {
    rec.rows.push_back({it, J, gn, s, p, elapsed(), ""});
  });
  rec.final_potential = from_coeff_vector(res.x);
  rec.final_s = s;
  rec.final_J = res.J;
  rec.final_gnorm = res.g.norm();
  rec.iterations = res.iterations;
  rec.evaluations = problem.evaluations();
  rec.reason = res.reason;
  return rec;
}

}  // namespace hillinv
