#pragma once

// Plane-wave Galerkin discretisation of the Bloch fibers
//
//   A_q = |-i d/dx + q|^2 + V   on 2*pi-periodic functions,
//
// restricted to the 2s+1 Fourier modes |k| <= s. In the orthonormal mode basis the
// kinetic part is diagonal ((k+q)^2) and V contributes the Toeplitz block v_{j-k}.

#include <Eigen/Core>

#include <cmath>
#include <concepts>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hillinv/detail/lapack.hpp"
#include "hillinv/detail/parallel.hpp"
#include "hillinv/errors.hpp"
#include "hillinv/fourier.hpp"

namespace hillinv {

struct QGrid {
  int Q = 0;
  std::vector<double> points;

  // {-1/2 + j/Q : j = 0..Q-1}; includes the zone edge -1/2.
  static QGrid regular(int Q) {
    if (Q < 1) throw std::invalid_argument("QGrid: Q must be >= 1");
    QGrid g;
    g.Q = Q;
    g.points.reserve(Q);
    for (int j = 0; j < Q; ++j) g.points.push_back(-0.5 + static_cast<double>(j) / Q);
    return g;
  }

  int size() const { return static_cast<int>(points.size()); }

  // Index of the point -q_j when it is on the grid (only for regular grids), else -1.
  int mirror_index(int j) const {
    if (j <= 0 || j >= Q) return -1;
    return Q - j;
  }
};

struct FiberMatrix {
  double q = 0.0;
  int s = 0;
  int bandwidth = 0;  // number of nonzero super-diagonals
  Eigen::MatrixXcd entries;

  int size() const { return static_cast<int>(entries.rows()); }
  int mode(int row) const { return row - s; }
  int row(int mode) const { return mode + s; }
};

namespace detail {
inline void check_fiber_args(double q, int s) {
  if (s < 1) throw std::invalid_argument("fiber cutoff s must be >= 1");
  if (!(q >= -0.5 && q <= 0.5)) throw std::invalid_argument("quasi-momentum outside [-1/2, 1/2]");
}

template <class CoeffFn>
FiberMatrix assemble(double q, int s, int bandwidth, CoeffFn coeff) {
  check_fiber_args(q, s);
  const int n = 2 * s + 1;
  FiberMatrix A;
  A.q = q;
  A.s = s;
  A.bandwidth = std::min(bandwidth, n - 1);
  A.entries = Eigen::MatrixXcd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = std::max(0, j - A.bandwidth); k <= std::min(n - 1, j + A.bandwidth); ++k)
      A.entries(j, k) = coeff(j - k);
    const double kq = (j - s) + q;
    A.entries(j, j) = cplx{kq * kq + coeff(0).real(), 0.0};
  }
  return A;
}
}  // namespace detail

inline FiberMatrix assemble_fiber(const ExpCoeffs& E, double q, int s) {
  return detail::assemble(q, s, E.p(), [&](int n) { return E[n]; });
}

inline FiberMatrix assemble_fiber(const MeasurePotential& mu, double q, int s) {
  return detail::assemble(q, s, 2 * s, [&](int n) { return mu.coeff(n); });
}

inline FiberMatrix assemble_fiber(const TrigPotential& V, double q, int s) {
  return assemble_fiber(trig_to_exp(V), q, s);
}

template <class P>
concept FiberSource = requires(const P& v, double q, int s) {
  { assemble_fiber(v, q, s) } -> std::same_as<FiberMatrix>;
};

struct FiberEigen {
  std::vector<double> eps;  // ascending
  Eigen::MatrixXcd vecs;    // N x M, unit columns in mode coordinates
};

inline constexpr double kDegeneracyTol = 1e-12;

namespace detail {
// Within each run of equal eigenvalues the eigenvector basis is arbitrary. Plane-wave
// solutions (e.g. any constant potential) come back as pure modes, whose Hellmann-Feynman
// derivatives vanish identically; replace such runs by a fixed orthogonal mix instead.
inline void mix_degenerate_runs(const std::vector<double>& eps, Eigen::MatrixXcd& vecs) {
  const int n = static_cast<int>(eps.size());
  for (int a = 0; a < n;) {
    int b = a + 1;
    while (b < n && std::abs(eps[b] - eps[a]) <= kDegeneracyTol * std::max(1.0, std::abs(eps[a]))) ++b;
    const int len = b - a;
    if (len >= 2) {
      // orthonormal DCT-II; for len == 2 this is (u_a + u_b, u_a - u_b) / sqrt(2)
      Eigen::MatrixXd R(len, len);
      for (int i = 0; i < len; ++i)
        for (int k = 0; k < len; ++k)
          R(i, k) = std::sqrt((k == 0 ? 1.0 : 2.0) / len) * std::cos(M_PI * (i + 0.5) * k / len);
      vecs.middleCols(a, len) = (vecs.middleCols(a, len) * R.cast<cplx>()).eval();
    }
    a = b;
  }
}
}  // namespace detail

// Lowest M eigenpairs, ascending. One extra pair is computed so that a degenerate run
// straddling index M is detected and mixed consistently.
inline FiberEigen eigen_lowest(const FiberMatrix& A, int M) {
  if (M < 1 || M > A.size())
    throw std::invalid_argument("eigen_lowest: need 1 <= M <= " + std::to_string(A.size()));
  const int count = std::min(M + 1, A.size());
  auto res = detail::hermitian_lowest(A.entries, count);
  if (res.info != 0) throw EigenSolverError("zheevr failed with info=" + std::to_string(res.info), A.q, A.s);
  detail::mix_degenerate_runs(res.values, res.vectors);
  res.values.resize(M);
  return FiberEigen{std::move(res.values), res.vectors.leftCols(M)};
}

struct BandSheet {
  QGrid grid;
  int M = 0;
  int s = 0;
  Eigen::MatrixXd eps;                // Q x M
  std::vector<Eigen::MatrixXcd> vecs;  // per q: N_s x M
};

template <FiberSource P>
BandSheet band_sweep(const P& V, const QGrid& grid, int M, int s, int threads = 1) {
  if (M > 2 * s + 1) throw std::invalid_argument("band_sweep: M exceeds basis size 2s+1");
  BandSheet sheet;
  sheet.grid = grid;
  sheet.M = M;
  sheet.s = s;
  sheet.eps.resize(grid.size(), M);
  sheet.vecs.resize(grid.size());
  detail::for_each_index(grid.size(), threads, [&](int j) {
    auto fe = eigen_lowest(assemble_fiber(V, grid.points[j], s), M);
    for (int m = 0; m < M; ++m) sheet.eps(j, m) = fe.eps[m];
    sheet.vecs[j] = std::move(fe.vecs);
  });
  return sheet;
}

inline void write_bands_csv(std::ostream& os, const BandSheet& sheet) {
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "q,m,eps\n";
  for (int j = 0; j < sheet.grid.size(); ++j)
    for (int m = 0; m < sheet.M; ++m) buf << sheet.grid.points[j] << "," << (m + 1) << "," << sheet.eps(j, m) << "\n";
  os << buf.str();
}

}  // namespace hillinv
