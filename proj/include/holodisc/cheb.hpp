#pragma once

// Chebyshev series on an interval [lo, hi]: the coefficient-level polynomial
// arithmetic everything else is built on. Plain convention p = sum c_k T_k.
// Monomial coefficients are never formed; basis changes at degree ~500 are
// numerically radioactive while T_k algebra stays exact.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace holodisc {

using cplx = std::complex<double>;

template <class Coef>
struct ChebT {
  double lo = -1.0;
  double hi = 1.0;
  std::vector<Coef> c;  // c[k] multiplies T_k((2x - lo - hi)/(hi - lo))

  ChebT() = default;
  ChebT(double lo_, double hi_, std::vector<Coef> coeffs) : lo(lo_), hi(hi_), c(std::move(coeffs)) {
    if (!(hi > lo)) throw std::invalid_argument("ChebT: empty interval");
    if (c.empty()) c.push_back(Coef(0));
  }

  int degree() const { return int(c.size()) - 1; }

  template <class Arg>
  auto map_to_unit(Arg x) const {
    return (Arg(2) * x - Arg(lo + hi)) / Arg(hi - lo);
  }

  // Clenshaw; Arg may be double or cplx.
  template <class Arg>
  auto eval(Arg x) const {
    using R = decltype(Coef(0) * Arg(0));
    const auto t = map_to_unit(x);
    R b1(0), b2(0);
    for (int k = degree(); k >= 1; --k) {
      R bk = R(2.0) * R(t) * b1 - b2 + R(c[size_t(k)]);
      b2 = b1;
      b1 = bk;
    }
    return R(t) * b1 - b2 + R(c[0]);
  }

  ChebT derivative() const {
    const int n = degree();
    std::vector<Coef> d(size_t(std::max(n, 1)), Coef(0));
    if (n >= 1) {
      std::vector<Coef> dd(size_t(n) + 2, Coef(0));
      for (int k = n; k >= 2; --k) dd[size_t(k) - 1] = dd[size_t(k) + 1] + 2.0 * k * c[size_t(k)];
      dd[0] = c[1] + dd[2] * 0.5;
      d.assign(dd.begin(), dd.begin() + n);
      const double s = 2.0 / (hi - lo);
      for (auto& v : d) v *= s;
    }
    if (d.empty()) d.push_back(Coef(0));
    return ChebT(lo, hi, std::move(d));
  }

  // Antiderivative P with P(x0) = v0.
  ChebT antiderivative(double x0, Coef v0) const {
    const int n = degree();
    std::vector<Coef> a(size_t(n) + 2, Coef(0));
    auto cc = [&](int k) { return k <= n ? c[size_t(k)] : Coef(0); };
    a[1] = cc(0) - cc(2) * 0.5;
    for (int k = 2; k <= n + 1; ++k) a[size_t(k)] = (cc(k - 1) - cc(k + 1)) / (2.0 * k);
    const double s = (hi - lo) / 2.0;
    for (auto& v : a) v *= s;
    ChebT P(lo, hi, std::move(a));
    P.c[0] = v0 - P.eval(x0) + P.c[0];
    return P;
  }

  ChebT& operator+=(const ChebT& o) {
    require_same_interval(o);
    if (o.c.size() > c.size()) c.resize(o.c.size(), Coef(0));
    for (size_t k = 0; k < o.c.size(); ++k) c[k] += o.c[k];
    return *this;
  }
  ChebT& operator-=(const ChebT& o) {
    require_same_interval(o);
    if (o.c.size() > c.size()) c.resize(o.c.size(), Coef(0));
    for (size_t k = 0; k < o.c.size(); ++k) c[k] -= o.c[k];
    return *this;
  }
  ChebT& operator*=(double s) {
    for (auto& v : c) v *= s;
    return *this;
  }

  friend ChebT operator+(ChebT a, const ChebT& b) { return a += b; }
  friend ChebT operator-(ChebT a, const ChebT& b) { return a -= b; }
  friend ChebT operator*(ChebT a, double s) { return a *= s; }

  // Exact product via T_i T_j = (T_{i+j} + T_{|i-j|}) / 2.
  friend ChebT operator*(const ChebT& a, const ChebT& b) {
    a.require_same_interval(b);
    std::vector<Coef> p(size_t(a.degree() + b.degree()) + 1, Coef(0));
    for (int i = 0; i <= a.degree(); ++i)
      for (int j = 0; j <= b.degree(); ++j) {
        const Coef w = a.c[size_t(i)] * b.c[size_t(j)] * 0.5;
        p[size_t(i + j)] += w;
        p[size_t(std::abs(i - j))] += w;
      }
    return ChebT(a.lo, a.hi, std::move(p));
  }

  ChebT trimmed(double tol) const {
    size_t n = c.size();
    while (n > 1 && std::abs(c[n - 1]) <= tol) --n;
    return ChebT(lo, hi, std::vector<Coef>(c.begin(), c.begin() + long(n)));
  }

  double coef_norm() const {
    double m = 0.0;
    for (const auto& v : c) m = std::max(m, std::abs(v));
    return m;
  }

  void require_same_interval(const ChebT& o) const {
    if (lo != o.lo || hi != o.hi) throw std::invalid_argument("ChebT: interval mismatch");
  }
};

using Cheb = ChebT<double>;
using ZCheb = ChebT<cplx>;

inline ZCheb to_complex(const Cheb& p) {
  std::vector<cplx> c(p.c.size());
  for (size_t k = 0; k < p.c.size(); ++k) c[k] = cplx(p.c[k], 0.0);
  return ZCheb(p.lo, p.hi, std::move(c));
}

inline Cheb real_part(const ZCheb& p) {
  std::vector<double> c(p.c.size());
  for (size_t k = 0; k < p.c.size(); ++k) c[k] = p.c[k].real();
  return Cheb(p.lo, p.hi, std::move(c));
}

// Basis rows T_k, T_k', T_k'' at one point (chain-rule scaled); used to
// assemble least-squares systems.
void cheb_basis_rows(double lo, double hi, double x, int deg, double* t0, double* t1, double* t2);

// Interpolant through samples at the deg+1 Chebyshev points of [lo, hi].
Cheb cheb_interpolant(double lo, double hi, int deg, const std::vector<double>& values_at_points);
std::vector<double> cheb_points(double lo, double hi, int count);

}  // namespace holodisc
