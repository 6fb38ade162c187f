// Riemann maps against a damped-Picard oracle; exposing-map certificates.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "holodisc/conformal.hpp"

using namespace holodisc;
using namespace holodisc::conformal;

namespace {

constexpr double kPi = std::numbers::pi;

double ellipse_rho(double th) { return 1.0 + 0.1 * std::cos(2.0 * th); }

// Independent boundary-correspondence oracle: damped Picard iteration for
// v = K[log rho(t + v)] with the conjugation operator K applied by direct
// cosine analysis / sine synthesis sums (no FFT, no shared code).
std::vector<double> picard_oracle(double (*rho)(double), int n,
                                  double damp = 0.5, int iters = 400) {
  std::vector<double> tab(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) tab[size_t(j)] = std::cos(2.0 * kPi * j / n);
  auto cos_jk = [&](long j, long k) { return tab[size_t((j * k) % n)]; };
  auto sin_jk = [&](long j, long k) {
    return tab[size_t(((j * k) % n + 3 * n / 4) % n)];  // sin x = cos(x - pi/2)
  };
  std::vector<double> v(static_cast<size_t>(n), 0.0);
  std::vector<double> u(static_cast<size_t>(n));
  std::vector<double> a(static_cast<size_t>(n) / 2, 0.0);
  for (int it = 0; it < iters; ++it) {
    for (int i = 0; i < n; ++i)
      u[size_t(i)] = std::log(rho(2.0 * kPi * i / n + v[size_t(i)]));
    for (int k = 1; k < n / 2; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += u[size_t(i)] * cos_jk(i, k);
      a[size_t(k)] = 2.0 * s / n;
    }
    double step = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 1; k < n / 2; ++k) s += a[size_t(k)] * sin_jk(i, k);
      double nv = (1.0 - damp) * v[size_t(i)] + damp * s;
      step = std::max(step, std::abs(nv - v[size_t(i)]));
      v[size_t(i)] = nv;
    }
    if (step < 1e-14) break;
  }
  return v;
}

SpecialDomain ellipse_domain() {
  SpecialDomain D;
  D.sym = 2;
  D.coef = {1.0, 0.0, 0.1};
  return D;
}

}  // namespace

TEST_CASE("picard oracle is self-consistent across resolutions") {
  auto v1 = picard_oracle(ellipse_rho, 256);
  auto v2 = picard_oracle(ellipse_rho, 512);
  double worst = 0.0;
  for (int i = 0; i < 256; ++i)
    worst = std::max(worst, std::abs(v1[size_t(i)] - v2[size_t(2 * i)]));
  CHECK(worst < 1e-8);
  CHECK(std::abs(v1[0]) < 1e-13);        // base point pinned
  CHECK(std::abs(v1[128]) < 1e-13);      // opposite base point pinned
}

TEST_CASE("unit disc maps to the identity") {
  auto F = riemann_map_special(SpecialDomain::disc(1.0));
  REQUIRE(F.report.converged);
  CHECK(F.base_image == doctest::Approx(1.0).epsilon(1e-14));
  double worst = 0.0;
  for (int i = 0; i < 64; ++i) {
    cplx z = std::polar(0.97, 2.0 * kPi * i / 64.0);
    worst = std::max(worst, std::abs(F.eval(z) - z));
  }
  CHECK(worst < 1e-10);
  CHECK(std::abs(F.eval(cplx(0.0, 0.0))) == 0.0);
  CHECK(std::abs(F.deriv(cplx(0.0, 0.0)) - 1.0) < 1e-12);
}

TEST_CASE("scaled disc maps to the dilation") {
  auto F = riemann_map_special(SpecialDomain::disc(2.0));
  REQUIRE(F.report.converged);
  for (cplx z : {cplx(0.5, 0.2), cplx(-0.7, 0.6), cplx(0.0, -0.95)})
    CHECK(std::abs(F.eval(z) - 2.0 * z) < 1e-10);
  CHECK(std::abs(F.deriv(cplx(0.3, 0.1)) - 2.0) < 1e-10);
}

TEST_CASE("ellipse-like domain agrees with the independent oracle") {
  SolveOptions opt;
  opt.target_grid = 1 << 12;
  auto F = riemann_map_special(ellipse_domain(), opt);
  REQUIRE(F.report.converged);
  CHECK(F.report.residual < 1e-10);
  CHECK(F.report.grid == (1 << 12));

  auto v = picard_oracle(ellipse_rho, 512);
  int stride = F.grid / 512;
  double worst = 0.0;
  for (int i = 0; i < 512; ++i) {
    double t = 2.0 * kPi * i / 512.0;
    worst = std::max(
        worst, std::abs(F.S[size_t(i * stride)] - (t + v[size_t(i)])));
  }
  CHECK(worst < 1e-5);

  // monotone circle homeomorphism onto the boundary, normalized
  CHECK(F.report.corr_min_slope > 0.0);
  CHECK(F.S[0] == 0.0);
  CHECK(F.base_image == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(F.pi_image == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(F.report.boundary_fit < 1e-8);
  CHECK(F.report.cr_residual < 1e-8);
  CHECK(F.report.neg_freq < 1e-12);
}

TEST_CASE("riemann map is equivariant and normalized") {
  auto F = riemann_map_special(ellipse_domain());
  REQUIRE(F.report.converged);
  double worst = 0.0;
  for (int i = 0; i < 48; ++i) {
    cplx z = std::polar(0.9, 2.0 * kPi * i / 48.0 + 0.013);
    worst = std::max(worst, std::abs(F.eval(-z) + F.eval(z)));
    worst = std::max(worst, std::abs(F.eval(std::conj(z)) - std::conj(F.eval(z))));
  }
  CHECK(worst < 1e-10);
  cplx d0 = F.deriv(cplx(0.0, 0.0));
  CHECK(d0.real() > 0.0);
  CHECK(std::abs(d0.imag()) == 0.0);
}

TEST_CASE("normalization is unique across solver paths") {
  SolveOptions a, b;
  a.target_grid = b.target_grid = 1 << 12;
  b.force_homotopy = true;
  auto Fa = riemann_map_special(ellipse_domain(), a);
  auto Fb = riemann_map_special(ellipse_domain(), b);
  REQUIRE(Fa.report.converged);
  REQUIRE(Fb.report.converged);
  double worst = 0.0;
  for (int i = 0; i < 96; ++i) {
    cplx z = std::polar(0.95, 2.0 * kPi * i / 96.0);
    worst = std::max(worst, std::abs(Fa.eval(z) - Fb.eval(z)));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("invalid domains are rejected") {
  SpecialDomain bad;
  bad.coef = {1.0, 0.0, 1.2};  // rho changes sign
  CHECK_THROWS_AS(riemann_map_special(bad), std::invalid_argument);
  SpecialDomain odd;
  odd.sym = 2;
  odd.coef = {1.0, 0.3};       // cos(theta) breaks the z -> -conj z symmetry
  CHECK_THROWS_AS(riemann_map_special(odd), std::invalid_argument);
}

TEST_CASE("exposer hits its interpolation targets exactly") {
  Exposer th = build_exposer_poly(1.0, 1.2, 8, 1e-3);
  CHECK(th.xn == doctest::Approx(1.125).epsilon(1e-15));
  CHECK(th.m % 2 == 1);
  CHECK(th.d2 % 2 == 0);
  CHECK(std::abs(th.eval(cplx(1.0, 0.0)) - 1.0) < 1e-15);
  CHECK(std::abs(th.eval(cplx(-1.0, 0.0)) + 1.0) < 1e-15);
  CHECK(std::abs(th.eval(cplx(1.125, 0.0)) - 1.2) < 1e-12);
  CHECK(std::abs(th.eval(cplx(-1.125, 0.0)) + 1.2) < 1e-12);
  CHECK(th.tol_c1 <= 1e-3);
  CHECK(th.min_deriv > 0.0);

  // measured deviation on the certification circle matches the report
  double worst = 0.0;
  for (int i = 0; i < 128; ++i) {
    cplx z = std::polar(1.0625, 2.0 * kPi * i / 128.0);
    worst = std::max(worst, std::abs(th.eval(z) - z));
    worst = std::max(worst, std::abs(th.deriv(z) - 1.0));
  }
  CHECK(worst <= th.tol_c1 * (1.0 + 1e-9) + 1e-14);
}

TEST_CASE("exposer equivariance is structural") {
  Exposer th = build_exposer_poly(1.0, 1.2, 8, 1e-3);
  double worst = 0.0;
  for (int i = 0; i < 64; ++i) {
    cplx z = std::polar(1.05, 2.0 * kPi * i / 64.0 + 0.007);
    worst = std::max(worst, std::abs(th.eval(-z) + th.eval(z)));
    worst = std::max(worst,
                     std::abs(th.eval(std::conj(z)) - std::conj(th.eval(z))));
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("exposer rejects degenerate geometry") {
  CHECK_THROWS_AS(build_exposer_poly(1.0, 1.0, 8, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(build_exposer_poly(1.0, 1.2, 5, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(build_exposer_poly(1.0, 1.2, 8, 0.0), std::invalid_argument);
}

TEST_CASE("expose certifies the full chain at working parameters") {
  auto R = expose(SpecialDomain::disc(1.0), 1.05, 0.1, 5e-3, 1);
  REQUIRE(R.map.report.ok);
  const auto& rep = R.map.report;
  CHECK(rep.interp_err < 1e-12);
  CHECK(rep.hausdorff < 1e-6);
  CHECK(rep.ck_dev < 5e-3);
  CHECK(rep.equivariance < 1e-10);
  CHECK(rep.star_margin > 0.0);
  CHECK(rep.inclusion_lo > -1e-12);
  CHECK(rep.inclusion_hi > 0.0);
  CHECK(rep.rado[0] > rep.rado[1]);
  CHECK(rep.rado[1] > rep.rado[2]);
  CHECK(rep.rado[2] > 0.0);
  CHECK(R.domain.base() == doctest::Approx(1.05).epsilon(1e-14));
  CHECK(R.domain.validate().ok);

  // phi fixes 0 with positive real derivative
  CHECK(std::abs(R.map.eval(cplx(0.0, 0.0))) == 0.0);
  cplx d0 = R.map.deriv(cplx(0.0, 0.0));
  CHECK(d0.real() > 0.0);
  CHECK(std::abs(d0.imag()) < 1e-14);

  SUBCASE("composes with a second stage on the produced domain") {
    auto R2 = expose(R.domain, 1.1, 0.1, 5e-3, 1);
    REQUIRE(R2.map.report.ok);
    CHECK_FALSE(R2.map.mu_identity);
    CHECK(R2.map.report.interp_err < 1e-12);
    CHECK(R2.map.report.ck_dev < 5e-3);
    CHECK(R2.domain.base() == doctest::Approx(1.1).epsilon(1e-14));
  }
}

TEST_CASE("expose with an all-covering tube is exact where required") {
  auto R = expose(SpecialDomain::disc(1.0), 1.05, 50.0, 1e-3, 1);
  REQUIRE(R.map.report.ok);
  CHECK(R.map.report.interp_err < 1e-12);
  CHECK(R.map.report.ck_dev == 0.0);   // nothing lies outside V
  CHECK(R.map.report.hausdorff == 0.0);
}

TEST_CASE("single-point exposure certifies and keeps the real trace monotone") {
  auto R = expose_single(1.2, 0.1, 2e-3, 1);
  REQUIRE(R.map.report.ok);
  const auto& rep = R.map.report;
  CHECK(rep.interp_err < 1e-12);
  CHECK(rep.ck_dev < 2e-3);
  CHECK(rep.inclusion_lo > -1e-12);
  CHECK(rep.inclusion_hi > 0.0);
  CHECK(R.domain.base() == doctest::Approx(1.2).epsilon(1e-14));

  double worst = 0.0;
  double prev = -2.0;
  bool monotone = true;
  for (int i = 0; i <= 40; ++i) {
    double x = -0.975 + 1.95 * i / 40.0;
    cplx w = R.map.eval(cplx(x, 0.0));
    worst = std::max(worst, std::abs(w.imag()));
    if (w.real() <= prev) monotone = false;
    prev = w.real();
  }
  CHECK(worst < 1e-12);
  CHECK(monotone);

  double sym = 0.0;
  for (int i = 0; i < 32; ++i) {
    cplx z = std::polar(0.9, 2.0 * kPi * i / 32.0 + 0.01);
    sym = std::max(sym,
                   std::abs(R.map.eval(std::conj(z)) - std::conj(R.map.eval(z))));
  }
  CHECK(sym < 1e-10);
}

TEST_CASE("expose rejects bad parameters") {
  auto D = SpecialDomain::disc(1.0);
  CHECK_THROWS_AS(expose(D, 0.9, 0.1, 1e-3, 1), std::invalid_argument);
  CHECK_THROWS_AS(expose(D, 1.2, 0.0, 1e-3, 1), std::invalid_argument);
  CHECK_THROWS_AS(expose(D, 1.2, 0.1, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(expose(D, 1.2, 0.1, 1e-3, 4), std::invalid_argument);
  CHECK_THROWS_AS(expose_single(1.2, 0.1, 1e-3, 5), std::invalid_argument);
}
