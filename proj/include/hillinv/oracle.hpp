#pragma once

// Reference solutions that do not go through the Galerkin solver: free-operator bands and
// the q = 0 dispersion relation of the Dirac comb (Kronig-Penney) potential.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "hillinv/bloch.hpp"
#include "hillinv/errors.hpp"
#include "hillinv/fourier.hpp"

namespace hillinv {

struct DispersionRoot {
  double lambda = 0.0;
  double q = 0.0;
  double omega = 0.0;
  double eps = 0.0;       // omega^2
  double residual = 0.0;  // |f(omega)|
};

// f(w) = cos(2 pi w) + (lambda/2) sin(2 pi w)/w - 1, evaluated in the factored form
// sin(pi w) * (lambda cos(pi w)/w - 2 sin(pi w)) to avoid cancellation near w = 1/2.
inline double dirac_dispersion_residual(double lambda, double omega) {
  const double s = std::sin(M_PI * omega);
  // cos(pi w) = sin(pi (1/2 - w)); 0.5 - w is exact near 1/2
  const double c = std::sin(M_PI * (0.5 - omega));
  return s * (lambda * c / omega - 2.0 * s);
}

// First-band root at q = 0 by bisection on [lo, hi].
inline DispersionRoot dirac_dispersion_q0(double lambda, std::pair<double, double> bracket = {1e-8, 0.5}) {
  if (!(lambda > 0.0)) throw std::invalid_argument("dirac_dispersion_q0: lambda must be > 0");
  auto [lo, hi] = bracket;
  double flo = dirac_dispersion_residual(lambda, lo);
  double fhi = dirac_dispersion_residual(lambda, hi);
  if (flo == 0.0) hi = lo, fhi = flo;
  if (fhi == 0.0) lo = hi, flo = fhi;
  if (flo * fhi > 0.0)
    throw BracketError("dispersion bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                       "] has no sign change");
  // Halve until the midpoint no longer separates the endpoints.
  while (lo != hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double fm = dirac_dispersion_residual(lambda, mid);
    if (fm == 0.0) {
      lo = hi = mid;
      flo = fhi = 0.0;
      break;
    }
    if ((fm > 0.0) == (flo > 0.0))
      lo = mid, flo = fm;
    else
      hi = mid, fhi = fm;
  }
  DispersionRoot r;
  r.lambda = lambda;
  r.omega = std::abs(flo) <= std::abs(fhi) ? lo : hi;
  r.eps = r.omega * r.omega;
  r.residual = std::abs(dirac_dispersion_residual(lambda, r.omega));
  return r;
}

// m-th smallest value of (k + q)^2 over the integers.
inline double free_band(double q, int m) {
  if (m < 1) throw std::invalid_argument("free_band: m must be >= 1");
  std::vector<double> levels;
  for (int k = -(m + 1); k <= m + 1; ++k) levels.push_back((k + q) * (k + q));
  std::sort(levels.begin(), levels.end());
  return levels[m - 1];
}

struct CombFlatness {
  double flatness = 0.0;  // max_q |eps_{q,1} - eps_{0,1}|
  double eps0 = 0.0;      // eps_{0,1}
};

inline CombFlatness comb_first_band(double lambda, double shift, const QGrid& grid, int s, int threads = 1) {
  if (lambda < 0.0) throw std::invalid_argument("comb flatness: lambda must be >= 0");
  const MeasurePotential comb{lambda, shift};
  const double eps0 = eigen_lowest(assemble_fiber(comb, 0.0, s), 1).eps[0];
  const auto sheet = band_sweep(comb, grid, 1, s, threads);
  double flat = 0.0;
  for (int j = 0; j < grid.size(); ++j) flat = std::max(flat, std::abs(sheet.eps(j, 0) - eps0));
  return {flat, eps0};
}

inline double comb_first_band_flatness(double lambda, const QGrid& grid, int s, int threads = 1) {
  return comb_first_band(lambda, 0.0, grid, s, threads).flatness;
}

}  // namespace hillinv
