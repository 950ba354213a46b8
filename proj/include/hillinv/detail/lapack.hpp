#pragma once

// Thin LAPACKE wrappers for the Hermitian kernels used by the band solver and the
// error estimator. Dense input is column-major Eigen storage.

#include <Eigen/Core>
#include <lapacke.h>

#include <algorithm>
#include <complex>
#include <vector>

namespace hillinv::detail {

inline lapack_complex_double* as_lapack(std::complex<double>* p) {
  return reinterpret_cast<lapack_complex_double*>(p);
}

struct LowestEigen {
  int info = 0;
  std::vector<double> values;
  Eigen::MatrixXcd vectors;  // N x count
};

// Lowest `count` eigenpairs via MRRR (zheevr, range by index).
inline LowestEigen hermitian_lowest(const Eigen::MatrixXcd& A, int count) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXcd work = A;
  LowestEigen out;
  out.values.assign(n, 0.0);
  out.vectors.resize(n, count);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(std::max(1, count)));
  lapack_int found = 0;
  out.info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, as_lapack(work.data()), n, 0.0, 0.0, 1, count,
                            0.0, &found, out.values.data(), as_lapack(out.vectors.data()), n, support.data());
  if (out.info == 0 && found != count) out.info = -1000;
  out.values.resize(count);
  return out;
}

// Full spectrum, eigenvalues only. `bandwidth` is the number of nonzero super-diagonals;
// narrow matrices go through the banded reduction (zhbev), which is much cheaper.
inline std::vector<double> hermitian_eigenvalues(const Eigen::MatrixXcd& A, int bandwidth, int* info) {
  const int n = static_cast<int>(A.rows());
  std::vector<double> w(n);
  if (2 * bandwidth < n) {
    const int kd = bandwidth, ldab = kd + 1;
    std::vector<std::complex<double>> ab(static_cast<std::size_t>(ldab) * n);
    for (int j = 0; j < n; ++j)
      for (int i = std::max(0, j - kd); i <= j; ++i) ab[(kd + i - j) + static_cast<std::size_t>(j) * ldab] = A(i, j);
    *info = LAPACKE_zhbev(LAPACK_COL_MAJOR, 'N', 'U', n, kd, as_lapack(ab.data()), ldab, w.data(), nullptr, 1);
  } else {
    Eigen::MatrixXcd work = A;
    *info = LAPACKE_zheev(LAPACK_COL_MAJOR, 'N', 'U', n, as_lapack(work.data()), n, w.data());
  }
  return w;
}

// Solves (A - shift I) y = rhs with a banded LU (zgbsv). Returns LAPACK info.
inline int shifted_band_solve(const Eigen::MatrixXcd& A, int bandwidth, double shift, const Eigen::VectorXcd& rhs,
                              Eigen::VectorXcd& y) {
  const int n = static_cast<int>(A.rows());
  const int kl = std::min(bandwidth, n - 1), ku = kl, ldab = 2 * kl + ku + 1;
  std::vector<std::complex<double>> ab(static_cast<std::size_t>(ldab) * n);
  for (int j = 0; j < n; ++j)
    for (int i = std::max(0, j - ku); i <= std::min(n - 1, j + kl); ++i) {
      auto a = A(i, j);
      if (i == j) a -= shift;
      ab[(kl + ku + i - j) + static_cast<std::size_t>(j) * ldab] = a;
    }
  y = rhs;
  std::vector<lapack_int> piv(n);
  return LAPACKE_zgbsv(LAPACK_COL_MAJOR, n, kl, ku, 1, as_lapack(ab.data()), ldab, piv.data(), as_lapack(y.data()),
                       n);
}

}  // namespace hillinv::detail
