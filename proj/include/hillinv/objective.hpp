#pragma once

// Least-squares band misfit
//
//   J^s(V) = (1/Q) sum_{q in grid} sum_{m=1}^{M} |b_m(q) - eps_{q,m}^{V,s}|^2
//
// and its exact gradient in the trigonometric coefficients of V. Each eigenvalue
// derivative is an expectation value (Hellmann-Feynman): d eps / d c_k = <u, cos(k.) u>,
// d eps / d d_k = <u, sin(k.) u>.

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hillinv/bloch.hpp"
#include "hillinv/detail/parallel.hpp"
#include "hillinv/errors.hpp"
#include "hillinv/fourier.hpp"

namespace hillinv {

struct TargetBands {
  QGrid grid;
  int M = 0;
  Eigen::MatrixXd samples;  // Q x M, samples(j, m-1) = b_m(q_j)
};

// Frozen targets b_m(q) := eps_{q,m}^{Vt, s_t}.
inline TargetBands targets_from_potential(const TrigPotential& target, const QGrid& grid, int M, int s_t,
                                          int threads = 1) {
  auto sheet = band_sweep(target, grid, M, s_t, threads);
  return TargetBands{grid, M, std::move(sheet.eps)};
}

template <FiberSource P>
TargetBands targets_from_source(const P& target, const QGrid& grid, int M, int s_t, int threads = 1) {
  auto sheet = band_sweep(target, grid, M, s_t, threads);
  return TargetBands{grid, M, std::move(sheet.eps)};
}

inline TargetBands targets_from_functions(const QGrid& grid, const std::vector<std::function<double(double)>>& bands) {
  if (bands.empty()) throw std::invalid_argument("targets_from_functions: no bands");
  TargetBands T{grid, static_cast<int>(bands.size()), Eigen::MatrixXd(grid.size(), bands.size())};
  for (int j = 0; j < grid.size(); ++j)
    for (int m = 0; m < T.M; ++m) T.samples(j, m) = bands[m](grid.points[j]);
  return T;
}

// Throws ConfigError when a band is not even on the sampled +-q pairs. Returns soft
// warnings for bands that break the alternating monotonicity on [0, 1/2].
inline std::vector<std::string> validate_targets(const TargetBands& T, double even_tol = 1e-8) {
  std::vector<std::string> warnings;
  const auto& pts = T.grid.points;
  for (int m = 0; m < T.M; ++m) {
    for (int j = 0; j < T.grid.size(); ++j) {
      const int k = T.grid.mirror_index(j);
      if (k < 0) continue;
      const double a = T.samples(j, m), b = T.samples(k, m);
      if (std::abs(a - b) > even_tol * std::max(1.0, std::abs(a)))
        throw ConfigError("target band " + std::to_string(m + 1) + " is not even at q=" + std::to_string(pts[j]));
    }
    const bool increasing = (m % 2 == 0);
    double prev_q = -1.0, prev_b = 0.0;
    for (int j = 0; j < T.grid.size(); ++j) {
      if (pts[j] < 0.0) continue;
      const double b = T.samples(j, m);
      if (prev_q >= 0.0 && (increasing ? b < prev_b : b > prev_b)) {
        warnings.push_back("target band " + std::to_string(m + 1) + " is not " +
                           (increasing ? "increasing" : "decreasing") + " on [0, 1/2]");
        break;
      }
      prev_q = pts[j];
      prev_b = b;
    }
  }
  return warnings;
}

enum class HfKind { Cos, Sin };

// sum_j conj(u_j) u_{j-k} over rows where both modes lie in the basis.
inline cplx lag_correlation(std::span<const cplx> u, int k) {
  cplx acc{};
  const int n = static_cast<int>(u.size());
  for (int j = std::max(0, k); j < std::min(n, n + k); ++j) acc += std::conj(u[j]) * u[j - k];
  return acc;
}

inline double hf_derivative(std::span<const cplx> u, int k, HfKind kind) {
  if (k < 0 || (kind == HfKind::Sin && k < 1)) throw std::invalid_argument("hf_derivative: invalid mode");
  const cplx corr = lag_correlation(u, k);
  return kind == HfKind::Cos ? corr.real() : corr.imag();
}

struct GradientVector {
  int p = 0;
  Eigen::VectorXd entries;  // (d_p .. d_1, c_0 .. c_p)

  static GradientVector zero(int degree) { return {degree, Eigen::VectorXd::Zero(2 * degree + 1)}; }

  double wrt_cos(int k) const { return entries[cos_index(k, p)]; }
  double wrt_sin(int k) const { return entries[sin_index(k, p)]; }
  double norm() const { return entries.norm(); }

  GradientVector restricted(int p_new) const {
    if (p_new > p) throw std::invalid_argument("GradientVector::restricted: degree too large");
    return {p_new, entries.segment(p - p_new, 2 * p_new + 1)};
  }
};

struct MisfitEvaluation {
  double J = 0.0;
  GradientVector grad;
  BandSheet bands;
};

// One band sweep yields both J^s(V) and its gradient restricted to Y_{p_out}.
// p_out < 0 skips the gradient. Per-q partial sums are reduced in grid order.
inline MisfitEvaluation evaluate_misfit(const TrigPotential& V, const TargetBands& T, int s, int p_out,
                                        int threads = 1) {
  if (T.M > 2 * s + 1) throw std::invalid_argument("misfit: number of bands exceeds basis size");
  const int Q = T.grid.size();
  MisfitEvaluation out;
  out.bands = band_sweep(V, T.grid, T.M, s, threads);
  const bool want_grad = p_out >= 0;
  std::vector<double> partial_J(Q, 0.0);
  std::vector<Eigen::VectorXd> partial_g(want_grad ? Q : 0);
  detail::for_each_index(Q, threads, [&](int j) {
    if (want_grad) partial_g[j] = Eigen::VectorXd::Zero(2 * p_out + 1);
    for (int m = 0; m < T.M; ++m) {
      const double resid = out.bands.eps(j, m) - T.samples(j, m);
      partial_J[j] += resid * resid;
      if (!want_grad) continue;
      const auto& vecs = out.bands.vecs[j];
      std::span<const cplx> u(vecs.col(m).data(), static_cast<std::size_t>(vecs.rows()));
      auto& g = partial_g[j];
      g[cos_index(0, p_out)] += 2.0 * resid * lag_correlation(u, 0).real();
      for (int k = 1; k <= p_out; ++k) {
        const cplx corr = lag_correlation(u, k);
        g[cos_index(k, p_out)] += 2.0 * resid * corr.real();
        g[sin_index(k, p_out)] += 2.0 * resid * corr.imag();
      }
    }
  });
  for (int j = 0; j < Q; ++j) out.J += partial_J[j];
  out.J /= Q;
  if (want_grad) {
    out.grad = GradientVector::zero(p_out);
    for (int j = 0; j < Q; ++j) out.grad.entries += partial_g[j];
    out.grad.entries /= Q;
  }
  return out;
}

inline double cost(const TrigPotential& V, const TargetBands& T, int s, int threads = 1) {
  return evaluate_misfit(V, T, s, -1, threads).J;
}

inline GradientVector gradient(const TrigPotential& V, const TargetBands& T, int s, int p_out, int threads = 1) {
  if (p_out < 1) throw std::invalid_argument("gradient: p_out must be >= 1");
  return evaluate_misfit(V, T, s, p_out, threads).grad;
}

// J^s as a function of the coefficient vector of Y_p, in the form the minimisers expect.
class BandMisfit {
 public:
  BandMisfit(const TargetBands& targets, int s, int p, int threads = 1)
      : targets_(&targets), s_(s), p_(p), threads_(threads) {}

  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    ++evaluations_;
    auto ev = evaluate_misfit(from_coeff_vector(x), *targets_, s_, p_, threads_);
    g = std::move(ev.grad.entries);
    return ev.J;
  }

  int s() const { return s_; }
  int p() const { return p_; }
  long evaluations() const { return evaluations_; }

 private:
  const TargetBands* targets_;
  int s_;
  int p_;
  int threads_;
  long evaluations_ = 0;
};

}  // namespace hillinv
