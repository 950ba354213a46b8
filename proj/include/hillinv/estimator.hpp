#pragma once

// A posteriori bounds on Galerkin eigenvalue errors and the two refinement indicators of
// the adaptive driver.
//
// For an approximate eigenpair (eps_N, u_N) computed in X_s and a reference operator A on
// X_{s_ref}, the bound is
//
//   Delta = <r, (A - c)^{-1} (A - d) (A - c)^{-1} r>,   r = (A - eps_N) u_N,
//   c = eps_N + delta,  d = lambda_m + delta,  delta = theta (eps_N - kappa),
//
// where lambda_m is a trace-based lower bound on the m-th eigenvalue of A. With
// y = (A - c)^{-1} r this is Re<y, r> + (c - d) |y|^2, so one banded solve per pair
// replaces the full eigendecomposition.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hillinv/bloch.hpp"
#include "hillinv/detail/lapack.hpp"
#include "hillinv/detail/parallel.hpp"
#include "hillinv/errors.hpp"
#include "hillinv/fourier.hpp"
#include "hillinv/objective.hpp"

namespace hillinv {

enum class KappaRule {
  PotentialMinimum,  // v_0 - 2 sum_{n>=1} |v_n|  <=  min V  <=  eps_1
  TraceBound,        // trace lower bound for eps_1 of the q = 0 reference fiber
};

struct ApostConfig {
  int s_ref = 250;
  double theta = 0.01;
  std::optional<double> kappa;  // explicit value overrides the rule
  KappaRule kappa_rule = KappaRule::PotentialMinimum;
};

inline constexpr double kShiftCollisionTol = 1e-12;

// mu - sqrt((N - m) / m) * sigma with mu = Tr A / N, sigma^2 = Tr A^2 / N - mu^2.
inline double trace_lower_bound(double trace, double trace_sq, int N, int m) {
  if (m < 1 || N < 2 || m > N) throw std::invalid_argument("trace_lower_bound: need 1 <= m <= N, N >= 2");
  const double mu = trace / N;
  double var = trace_sq / N - mu * mu;
  if (var < 0.0) {
    if (var < -1e-12 * std::max(1.0, trace_sq / N))
      throw NumericalError("trace_lower_bound: negative variance " + std::to_string(var));
    var = 0.0;
  }
  return mu - std::sqrt(static_cast<double>(N - m) / m * var);
}

inline double lambda_lower_bound(const FiberMatrix& A, int m) {
  const double trace = A.entries.diagonal().real().sum();
  const double trace_sq = A.entries.squaredNorm();  // Tr A^2 for Hermitian A
  return trace_lower_bound(trace, trace_sq, A.size(), m);
}

struct ReferenceFiber {
  FiberMatrix A;
  std::vector<double> spectrum;  // ascending
  double trace = 0.0;
  double trace_sq = 0.0;
};

inline ReferenceFiber make_reference(const ExpCoeffs& E, double q, int s_ref) {
  ReferenceFiber ref;
  ref.A = assemble_fiber(E, q, s_ref);
  int info = 0;
  ref.spectrum = detail::hermitian_eigenvalues(ref.A.entries, ref.A.bandwidth, &info);
  if (info != 0) throw EigenSolverError("reference eigenvalue solve failed, info=" + std::to_string(info), q, s_ref);
  ref.trace = ref.A.entries.diagonal().real().sum();
  ref.trace_sq = ref.A.entries.squaredNorm();
  return ref;
}

inline double default_kappa(const ExpCoeffs& E, int s_ref, KappaRule rule) {
  if (rule == KappaRule::TraceBound) return lambda_lower_bound(assemble_fiber(E, 0.0, s_ref), 1);
  double k = E[0].real();
  for (int n = 1; n <= E.p(); ++n) k -= 2.0 * std::abs(E[n]);
  return k;
}

struct DeltaTerm {
  double delta = 0.0;
  double lambda_m = 0.0;
  double residual_norm = 0.0;
  double c = 0.0;
  double d = 0.0;
};

// Zero-pads u_N (modes |k| <= s) into the reference basis (|k| <= s_ref).
inline Eigen::VectorXcd lift_to_reference(std::span<const cplx> u_N, int s_ref) {
  const int n = static_cast<int>(u_N.size());
  const int s = (n - 1) / 2;
  if (n % 2 != 1 || s > s_ref) throw std::invalid_argument("lift_to_reference: basis larger than reference");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(2 * s_ref + 1);
  for (int i = 0; i < n; ++i) out[s_ref - s + i] = u_N[i];
  return out;
}

inline DeltaTerm delta(const ReferenceFiber& ref, double eps_N, std::span<const cplx> u_N, int m, double theta,
                       double kappa) {
  const int s_ref = ref.A.s;
  const Eigen::VectorXcd u = lift_to_reference(u_N, s_ref);
  const Eigen::VectorXcd r = ref.A.entries * u - eps_N * u;

  DeltaTerm out;
  out.residual_norm = r.norm();
  out.lambda_m = trace_lower_bound(ref.trace, ref.trace_sq, ref.A.size(), m);
  const double shift = std::max(0.0, theta * (eps_N - kappa));
  out.c = eps_N + shift;
  out.d = out.lambda_m + shift;

  double gap = std::numeric_limits<double>::infinity();
  for (double lam : ref.spectrum) gap = std::min(gap, std::abs(lam - out.c));
  if (gap < kShiftCollisionTol)
    throw ShiftCollisionError("shift c=" + std::to_string(out.c) + " hits the reference spectrum (q=" +
                              std::to_string(ref.A.q) + ", m=" + std::to_string(m) + ")");
  if (out.residual_norm == 0.0) return out;

  Eigen::VectorXcd y;
  const int info = detail::shifted_band_solve(ref.A.entries, ref.A.bandwidth, out.c, r, y);
  if (info != 0) throw NumericalError("shifted solve failed, info=" + std::to_string(info));
  const double value = y.dot(r).real() + (out.c - out.d) * y.squaredNorm();
  out.delta = std::max(0.0, value);
  return out;
}

// Reference spectra at s_ref for one potential. Requests for a different potential or
// cutoff drop everything cached so far.
class ReferenceCache {
 public:
  std::shared_ptr<const ReferenceFiber> get(const ExpCoeffs& E, double q, int s_ref) {
    {
      std::shared_lock lock(mutex_);
      if (valid_for(E, s_ref))
        if (auto it = fibers_.find(q); it != fibers_.end()) return it->second;
    }
    auto fresh = std::make_shared<const ReferenceFiber>(make_reference(E, q, s_ref));
    std::unique_lock lock(mutex_);
    if (!valid_for(E, s_ref)) {
      fibers_.clear();
      key_ = E;
      s_ref_ = s_ref;
    }
    auto [it, inserted] = fibers_.emplace(q, fresh);
    return it->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return fibers_.size();
  }

 private:
  bool valid_for(const ExpCoeffs& E, int s_ref) const { return s_ref_ == s_ref && key_ == E; }

  mutable std::shared_mutex mutex_;
  ExpCoeffs key_;
  int s_ref_ = -1;
  std::map<double, std::shared_ptr<const ReferenceFiber>> fibers_;
};

struct DeltaEntry {
  double q = 0.0;
  int m = 0;  // 1-based
  double eps = 0.0;
  DeltaTerm term;
};

struct DeltaReport {
  double kappa = 0.0;
  Eigen::MatrixXd delta;  // Q x M
  std::vector<DeltaEntry> entries;
};

inline double resolve_kappa(const ExpCoeffs& E, const ApostConfig& cfg) {
  return cfg.kappa ? *cfg.kappa : default_kappa(E, cfg.s_ref, cfg.kappa_rule);
}

inline DeltaReport delta_report(const TrigPotential& V, const BandSheet& bands, const ApostConfig& cfg,
                                ReferenceCache* cache = nullptr, int threads = 1) {
  if (bands.s > cfg.s_ref) throw std::invalid_argument("delta_report: s exceeds s_ref");
  if (!(cfg.theta > 0.0)) throw std::invalid_argument("delta_report: theta must be > 0");
  const ExpCoeffs E = trig_to_exp(V);
  const int Q = bands.grid.size(), M = bands.M;
  DeltaReport rep;
  rep.kappa = resolve_kappa(E, cfg);
  rep.delta.resize(Q, M);
  rep.entries.resize(static_cast<std::size_t>(Q) * M);
  detail::for_each_index(Q, threads, [&](int j) {
    const double q = bands.grid.points[j];
    std::shared_ptr<const ReferenceFiber> ref =
        cache ? cache->get(E, q, cfg.s_ref) : std::make_shared<const ReferenceFiber>(make_reference(E, q, cfg.s_ref));
    const auto& vecs = bands.vecs[j];
    for (int m = 0; m < M; ++m) {
      std::span<const cplx> u(vecs.col(m).data(), static_cast<std::size_t>(vecs.rows()));
      auto term = delta(*ref, bands.eps(j, m), u, m + 1, cfg.theta, rep.kappa);
      rep.delta(j, m) = term.delta;
      rep.entries[static_cast<std::size_t>(j) * M + m] = DeltaEntry{q, m + 1, bands.eps(j, m), term};
    }
  });
  return rep;
}

// (1/Q) sum_q sum_m (2 |b_m(q) - eps_{q,m}| + Delta_{q,m}) Delta_{q,m}
inline double s_estimator(const TargetBands& T, const Eigen::MatrixXd& eps, const Eigen::MatrixXd& delta) {
  double total = 0.0;
  for (int j = 0; j < T.grid.size(); ++j)
    for (int m = 0; m < T.M; ++m) total += (2.0 * std::abs(T.samples(j, m) - eps(j, m)) + delta(j, m)) * delta(j, m);
  return total / T.grid.size();
}

inline double s_estimator(const TrigPotential& V, const TargetBands& T, int s, const ApostConfig& cfg,
                          ReferenceCache* cache = nullptr, int threads = 1) {
  const auto bands = band_sweep(V, T.grid, T.M, s, threads);
  const auto rep = delta_report(V, bands, cfg, cache, threads);
  return s_estimator(T, bands.eps, rep.delta);
}

// Norm of the gradient on the doubled coefficient space Y_{2p}, p = V.p.
inline double p_estimator(const TrigPotential& V, const TargetBands& T, int s, int threads = 1) {
  return gradient(V, T, s, std::max(1, 2 * V.p), threads).norm();
}

}  // namespace hillinv
