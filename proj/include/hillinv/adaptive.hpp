#pragma once

// Adaptive refinement driver. Inner descent at fixed (s, p) until the in-space gradient is
// below nu; then, at the inner minimum,
//   - if S > eta, s grows by one (discretisation error dominates), else
//   - if P > eta, p jumps to the strongest gradient mode in (p, 2p].
// Stops once ||grad|| <= nu, S <= eta and P <= eta hold together.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hillinv/errors.hpp"
#include "hillinv/estimator.hpp"
#include "hillinv/fourier.hpp"
#include "hillinv/objective.hpp"
#include "hillinv/optim.hpp"

namespace hillinv {

struct AdaptiveConfig {
  int s0 = 1;
  int p0 = 1;
  double eta = 1e-6;
  double nu = 1e-5;
  ApostConfig apost{};
  Method method = Method::Bfgs;
  long max_iter = 100000;  // total inner iterations over all passes
  int max_outer = 10000;
  int threads = 1;
};

struct RefinementEvent {
  long iter = 0;    // global iteration at which the change was made
  char kind = 's';  // 's' or 'p'
  int from = 0;
  int to = 0;
  double estimator = 0.0;  // S or P value that triggered it
};

struct AdaptiveRecord : RunRecord {
  std::vector<RefinementEvent> events;
  int final_p = 0;
  double final_S = 0.0;
  double final_P = 0.0;
  int outer_passes = 0;
};

// Norm of the gradient block of modes p+1 .. 2p.
inline double outer_block_norm(const GradientVector& g2p, int p) {
  double sq = 0.0;
  for (int k = p + 1; k <= std::min(2 * p, g2p.p); ++k) sq += g2p.wrt_sin(k) * g2p.wrt_sin(k) + g2p.wrt_cos(k) * g2p.wrt_cos(k);
  return std::sqrt(sq);
}

// argmax over pbar in (p, 2p] of max(|d/d d_pbar|, |d/d c_pbar|); ties go to the smallest pbar.
inline int grow_p(const GradientVector& g2p, int p) {
  if (g2p.p < 2 * p) throw std::invalid_argument("grow_p: gradient must cover Y_{2p}");
  int best = -1;
  double best_val = 0.0;
  for (int k = p + 1; k <= 2 * p; ++k) {
    const double val = std::max(std::abs(g2p.wrt_sin(k)), std::abs(g2p.wrt_cos(k)));
    if (val > best_val) {
      best_val = val;
      best = k;
    }
  }
  if (best < 0) throw NumericalError("grow_p: all candidate derivatives in (p, 2p] vanish");
  return best;
}

inline int grow_p(const TrigPotential& W, const TargetBands& T, int s, int p, int threads = 1) {
  return grow_p(gradient(extend(W, p), T, s, 2 * p, threads), p);
}

inline AdaptiveRecord run_adaptive(const TrigPotential& W0, const TargetBands& T, const AdaptiveConfig& cfg) {
  if (!(cfg.eta > 0.0) || !(cfg.nu > 0.0) || cfg.s0 < 1 || cfg.p0 < 1)
    throw std::invalid_argument("run_adaptive: need eta, nu > 0 and s0, p0 >= 1");
  if (W0.p > cfg.p0) throw std::invalid_argument("run_adaptive: initial guess outside Y_{p0}");
  if (cfg.s0 > cfg.apost.s_ref) throw std::invalid_argument("run_adaptive: s0 exceeds s_ref");
  if (2 * cfg.s0 + 1 < T.M) throw std::invalid_argument("run_adaptive: basis at s0 cannot hold M bands");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  AdaptiveRecord rec;
  TrigPotential W = extend(W0, cfg.p0);
  int s = cfg.s0;
  int p = cfg.p0;
  long iter_base = 0;
  std::string pending_event;
  bool tighten = false;
  ReferenceCache cache;

  for (int outer = 0;; ++outer) {
    if (outer >= cfg.max_outer) {
      rec.reason = Termination::IterationBudget;
      rec.detail = "outer pass budget exhausted";
      break;
    }
    rec.outer_passes = outer + 1;

    BandMisfit problem(T, s, p, cfg.threads);
    auto mopt = default_options(cfg.method, tighten ? std::min(cfg.nu, 0.5 * cfg.eta) : cfg.nu);
    tighten = false;
    mopt.max_iter = cfg.max_iter - iter_base;
    mopt.min_iter = outer > 0 ? 1 : 0;
    auto res = minimize(problem, to_coeff_vector(W), mopt, [&](long it, double J, double gn) {
      RunRow row{iter_base + it, J, gn, s, p, elapsed(), ""};
      if (it == 0) row.event = std::move(pending_event), pending_event.clear();
      rec.rows.push_back(std::move(row));
    });
    iter_base += res.iterations;
    rec.evaluations += problem.evaluations();
    W = from_coeff_vector(res.x);
    rec.final_J = res.J;
    rec.final_gnorm = res.g.norm();
    if (res.reason != Termination::Converged) {
      rec.reason = res.reason;
      rec.detail = "inner descent stopped at s=" + std::to_string(s) + ", p=" + std::to_string(p);
      break;
    }

    const double S = s_estimator(W, T, s, cfg.apost, &cache, cfg.threads);
    const auto g2p = gradient(W, T, s, 2 * p, cfg.threads);
    const double P = g2p.norm();
    rec.final_S = S;
    rec.final_P = P;
    if (S <= cfg.eta && P <= cfg.eta) {
      rec.reason = Termination::Converged;
      break;
    }

    std::ostringstream ev;
    ev.precision(6);
    if (S > cfg.eta) {
      if (s + 1 > cfg.apost.s_ref) {
        rec.reason = Termination::IterationBudget;
        rec.detail = "s reached s_ref while S > eta";
        break;
      }
      rec.events.push_back({iter_base, 's', s, s + 1, S});
      ev << "s:" << s << "->" << s + 1 << " S=" << S;
      s += 1;
    } else if (outer_block_norm(g2p, p) <= cfg.eta) {
      // P exceeds eta only through the in-space gradient (below nu but above eta): keep
      // (s, p) and descend further with the tolerance tightened to eta / 2.
      ev << "hold P=" << P;
      tighten = true;
    } else {
      const int p_new = grow_p(g2p, p);
      rec.events.push_back({iter_base, 'p', p, p_new, P});
      ev << "p:" << p << "->" << p_new << " P=" << P;
      W = extend(W, p_new);
      p = p_new;
    }
    pending_event = ev.str();
  }

  rec.final_potential = W;
  rec.final_s = s;
  rec.final_p = p;
  rec.iterations = iter_base;
  return rec;
}

}  // namespace hillinv
