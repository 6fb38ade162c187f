#include "holodisc/cheb.hpp"

#include <numbers>

namespace holodisc {

void cheb_basis_rows(double lo, double hi, double x, int deg, double* t0, double* t1, double* t2) {
  const double s = 2.0 / (hi - lo);
  const double u = (2.0 * x - lo - hi) / (hi - lo);
  double Tm1 = 1.0, T = u;
  double Dm1 = 0.0, D = 1.0;
  double Sm1 = 0.0, S = 0.0;
  for (int k = 0; k <= deg; ++k) {
    double Tk, Dk, Sk;
    if (k == 0) {
      Tk = 1.0; Dk = 0.0; Sk = 0.0;
    } else if (k == 1) {
      Tk = u; Dk = 1.0; Sk = 0.0;
    } else {
      Tk = 2.0 * u * T - Tm1;
      Dk = 2.0 * T + 2.0 * u * D - Dm1;
      Sk = 4.0 * D + 2.0 * u * S - Sm1;
      Tm1 = T; T = Tk;
      Dm1 = D; D = Dk;
      Sm1 = S; S = Sk;
    }
    if (t0) t0[k] = Tk;
    if (t1) t1[k] = Dk * s;
    if (t2) t2[k] = Sk * s * s;
  }
}

std::vector<double> cheb_points(double lo, double hi, int count) {
  std::vector<double> x(static_cast<size_t>(count), 0.0);
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (int i = 0; i < count; ++i)
    x[size_t(i)] = mid + half * std::cos(std::numbers::pi * double(i) / double(count - 1));
  return x;
}

Cheb cheb_interpolant(double lo, double hi, int deg, const std::vector<double>& v) {
  const int n = deg;
  if (int(v.size()) != n + 1) throw std::invalid_argument("cheb_interpolant: need deg+1 values");
  // Discrete cosine transform on the closed point set (Clenshaw-Curtis nodes).
  std::vector<double> c(size_t(n) + 1, 0.0);
  for (int k = 0; k <= n; ++k) {
    double acc = 0.0;
    for (int j = 0; j <= n; ++j) {
      const double w = (j == 0 || j == n) ? 0.5 : 1.0;
      acc += w * v[size_t(j)] * std::cos(std::numbers::pi * double(k) * double(j) / double(n));
    }
    c[size_t(k)] = 2.0 * acc / double(n);
  }
  c[0] *= 0.5;
  c[size_t(n)] *= 0.5;
  return Cheb(lo, hi, std::move(c));
}

}  // namespace holodisc
