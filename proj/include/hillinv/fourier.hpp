#pragma once

// Coefficient-level algebra for real 2*pi-periodic potentials.
//
// A potential of degree p is stored in trigonometric form
//
//   V(x) = c_0 + sum_{k=1}^{p} c_k cos(kx) + d_k sin(kx)
//
// and converted on demand to plain exponential coefficients v_n (V = sum v_n e^{inx}),
// which are exactly the entries of the multiplication operator in the plane-wave basis.

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hillinv/errors.hpp"

namespace hillinv {

using cplx = std::complex<double>;

struct TrigPotential {
  int p = 0;
  std::vector<double> c{0.0};  // c_0 .. c_p
  std::vector<double> d;       // d_1 .. d_p, d[k - 1] holds d_k

  static TrigPotential zero(int degree) {
    if (degree < 0) throw std::invalid_argument("TrigPotential: negative degree");
    TrigPotential v;
    v.p = degree;
    v.c.assign(degree + 1, 0.0);
    v.d.assign(degree, 0.0);
    return v;
  }

  double cos_coeff(int k) const { return k <= p ? c[k] : 0.0; }
  double sin_coeff(int k) const { return (k >= 1 && k <= p) ? d[k - 1] : 0.0; }

  bool is_valid() const {
    if (p < 0 || static_cast<int>(c.size()) != p + 1 || static_cast<int>(d.size()) != p) return false;
    for (double x : c)
      if (!std::isfinite(x)) return false;
    for (double x : d)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool operator==(const TrigPotential&) const = default;
};

// Exponential coefficients v_{-p} .. v_p of a real potential.
class ExpCoeffs {
 public:
  ExpCoeffs() : p_(0), v_(1, cplx{}) {}
  explicit ExpCoeffs(int p) : p_(p), v_(2 * p + 1, cplx{}) {
    if (p < 0) throw std::invalid_argument("ExpCoeffs: negative degree");
  }

  int p() const { return p_; }

  // Coefficient of e^{inx}; zero outside -p..p.
  cplx operator[](int n) const { return (n < -p_ || n > p_) ? cplx{} : v_[n + p_]; }
  cplx& at(int n) {
    if (n < -p_ || n > p_) throw std::out_of_range("ExpCoeffs: mode out of range");
    return v_[n + p_];
  }

  // Largest deviation from v_{-n} = conj(v_n), including Im v_0.
  double hermitian_defect() const {
    double worst = std::abs(v_[p_].imag());
    for (int n = 1; n <= p_; ++n) worst = std::max(worst, std::abs((*this)[-n] - std::conj((*this)[n])));
    return worst;
  }

  bool operator==(const ExpCoeffs&) const = default;

 private:
  int p_;
  std::vector<cplx> v_;
};

// Dirac comb lambda * sum_k delta_{2 pi k} plus a constant shift (the -B of a B-bounded potential).
struct MeasurePotential {
  double lambda = 0.0;
  double shift = 0.0;

  // Every nonzero mode carries lambda / (2 pi); the mean also carries the shift.
  cplx coeff(int n) const {
    const double amp = lambda / (2.0 * M_PI);
    return n == 0 ? cplx{amp + shift, 0.0} : cplx{amp, 0.0};
  }
};

inline ExpCoeffs trig_to_exp(const TrigPotential& V) {
  ExpCoeffs E(V.p);
  E.at(0) = cplx{V.c[0], 0.0};
  for (int n = 1; n <= V.p; ++n) {
    E.at(n) = cplx{V.c[n], -V.d[n - 1]} * 0.5;
    E.at(-n) = cplx{V.c[n], V.d[n - 1]} * 0.5;
  }
  return E;
}

// Rejects coefficient sets that do not describe a real potential.
inline TrigPotential exp_to_trig(const ExpCoeffs& E, double tol = 1e-12) {
  double scale = 1.0;
  for (int n = -E.p(); n <= E.p(); ++n) scale = std::max(scale, std::abs(E[n]));
  if (!(E.hermitian_defect() <= tol * scale))
    throw ConfigError("exponential coefficients are not Hermitian-symmetric (defect " +
                      std::to_string(E.hermitian_defect()) + ")");
  auto V = TrigPotential::zero(E.p());
  V.c[0] = E[0].real();
  for (int n = 1; n <= E.p(); ++n) {
    // average both halves so round-trips stay exact to rounding
    const cplx vn = 0.5 * (E[n] + std::conj(E[-n]));
    V.c[n] = 2.0 * vn.real();
    V.d[n - 1] = -2.0 * vn.imag();
  }
  return V;
}

inline double evaluate(const TrigPotential& V, double x) {
  double sum = V.c[0];
  for (int k = 1; k <= V.p; ++k) sum += V.c[k] * std::cos(k * x) + V.d[k - 1] * std::sin(k * x);
  return sum;
}

inline std::vector<double> evaluate(const TrigPotential& V, std::span<const double> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(evaluate(V, x));
  return out;
}

inline TrigPotential extend(const TrigPotential& V, int p_new) {
  if (p_new < V.p)
    throw std::invalid_argument("extend: target degree " + std::to_string(p_new) + " below current " +
                                std::to_string(V.p));
  TrigPotential W = V;
  W.p = p_new;
  W.c.resize(p_new + 1, 0.0);
  W.d.resize(p_new, 0.0);
  return W;
}

inline TrigPotential truncate(const TrigPotential& V, int p_new) {
  if (p_new < 0 || p_new > V.p) throw std::invalid_argument("truncate: degree out of range");
  TrigPotential W = V;
  W.p = p_new;
  W.c.resize(p_new + 1);
  W.d.resize(p_new);
  return W;
}

// Coefficient vector layout (d_p, ..., d_1, c_0, c_1, ..., c_p), length 2p+1.
inline int cos_index(int k, int p) { return p + k; }
inline int sin_index(int k, int p) { return p - k; }

inline Eigen::VectorXd to_coeff_vector(const TrigPotential& V) {
  Eigen::VectorXd x(2 * V.p + 1);
  for (int k = 0; k <= V.p; ++k) x[cos_index(k, V.p)] = V.c[k];
  for (int k = 1; k <= V.p; ++k) x[sin_index(k, V.p)] = V.d[k - 1];
  return x;
}

inline TrigPotential from_coeff_vector(const Eigen::VectorXd& x) {
  if (x.size() % 2 != 1) throw std::invalid_argument("coefficient vector must have odd length");
  const int p = static_cast<int>(x.size() / 2);
  auto V = TrigPotential::zero(p);
  for (int k = 0; k <= p; ++k) V.c[k] = x[cos_index(k, p)];
  for (int k = 1; k <= p; ++k) V.d[k - 1] = x[sin_index(k, p)];
  return V;
}

// Text format:
//   p=<degree>
//   0 c_0
//   k c_k d_k      (k = 1..p)
// Blank lines and '#' comments are ignored.
inline void write_potential(std::ostream& os, const TrigPotential& V) {
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "p=" << V.p << "\n";
  buf << 0 << " " << V.c[0] << "\n";
  for (int k = 1; k <= V.p; ++k) buf << k << " " << V.c[k] << " " << V.d[k - 1] << "\n";
  os << buf.str();
}

inline TrigPotential read_potential(std::istream& is) {
  std::string line;
  int p = -1;
  TrigPotential V;
  std::vector<bool> seen;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigError("potential line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    if (p < 0) {
      std::string head;
      ls >> head;
      if (head.rfind("p=", 0) != 0) fail("expected header 'p=<int>'");
      try {
        std::size_t used = 0;
        p = std::stoi(head.substr(2), &used);
        if (used != head.size() - 2) fail("malformed degree");
      } catch (const std::logic_error&) {
        fail("malformed degree");
      }
      if (p < 0) fail("negative degree");
      V = TrigPotential::zero(p);
      seen.assign(p + 1, false);
      continue;
    }
    int k = -1;
    double ck = 0.0, dk = 0.0;
    if (!(ls >> k)) fail("expected mode index");
    if (k < 0 || k > p) fail("mode index out of range");
    if (!(ls >> ck)) fail("expected cosine coefficient");
    if (k > 0 && !(ls >> dk)) fail("expected sine coefficient");
    std::string extra;
    if (ls >> extra) fail("trailing data");
    if (seen[k]) fail("duplicate mode " + std::to_string(k));
    seen[k] = true;
    V.c[k] = ck;
    if (k > 0) V.d[k - 1] = dk;
  }
  if (p < 0) throw ConfigError("potential: missing 'p=' header");
  if (!V.is_valid()) throw ConfigError("potential: non-finite coefficient");
  return V;
}

}  // namespace hillinv
