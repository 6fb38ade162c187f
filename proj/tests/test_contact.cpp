// Contact primitives against closed-form oracles.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "holodisc/contact.hpp"

using namespace holodisc;
using namespace holodisc::contact;

namespace {

std::vector<RealJetSample> circle_jets(bool legendrian_lift, int count = 400) {
  std::vector<RealJetSample> s;
  for (int i = 0; i < count; ++i) {
    double t = -1.0 + 2.0 * i / (count - 1);
    RealJetSample j;
    j.t = t;
    j.x = {std::cos(t)};
    j.y = {std::sin(t)};
    j.dx = {-std::sin(t)};
    j.dy = {std::cos(t)};
    if (legendrian_lift) {
      j.z = -t / 2.0 - std::sin(2.0 * t) / 4.0;  // integral of -cos^2
      j.dz = -std::cos(t) * std::cos(t);
    } else {
      j.z = 0.0;
      j.dz = 0.0;
    }
    s.push_back(j);
  }
  return s;
}

}  // namespace

TEST_CASE("contact residual of the flat circle is cos^2 t") {
  auto jets = circle_jets(false);
  auto rep = alpha0_residual(jets);
  for (size_t i = 0; i < jets.size(); ++i) {
    double c = std::cos(jets[i].t);
    CHECK(rep.per_sample[i] == doctest::Approx(c * c).epsilon(1e-14));
  }
  CHECK(rep.max_abs == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("contact residual vanishes after the compensating lift") {
  auto rep = alpha0_residual(circle_jets(true));
  CHECK(rep.max_abs < 1e-14);
}

TEST_CASE("contact residual is linear in the jet") {
  // residual(a*j1 + j2 twisted) decomposes since the form is linear in (x, dy, dz)
  // only jointly; check additivity in dz which is strictly linear.
  auto jets = circle_jets(false);
  auto base = alpha0_residual(jets);
  for (auto& j : jets) j.dz += 0.25;
  auto shifted = alpha0_residual(jets);
  for (size_t i = 0; i < jets.size(); ++i)
    CHECK(shifted.per_sample[i] - base.per_sample[i] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("hermitian tangency of t -> (e^{it}, 0) is the constant i") {
  std::vector<ComplexCurveSample> s;
  for (int i = 0; i < 100; ++i) {
    double t = 6.2 * i / 99.0;
    ComplexCurveSample c;
    c.zeta = t;
    c.w = {std::polar(1.0, t), cplx(0.0, 0.0)};
    c.dw = {cplx(0.0, 1.0) * std::polar(1.0, t), cplx(0.0, 0.0)};
    s.push_back(c);
  }
  auto rep = hermitian_tangency_residual(s);
  for (auto h : rep.per_sample) CHECK(std::abs(h - cplx(0.0, 1.0)) < 1e-14);
}

TEST_CASE("real circle in C^2 is tangent to the complex planes") {
  std::vector<ComplexCurveSample> s;
  for (int i = 0; i < 100; ++i) {
    double t = 2.0 * std::numbers::pi * i / 99.0;
    ComplexCurveSample c;
    c.zeta = t;
    c.w = {cplx(std::cos(t), 0.0), cplx(std::sin(t), 0.0)};
    c.dw = {cplx(-std::sin(t), 0.0), cplx(std::cos(t), 0.0)};
    s.push_back(c);
  }
  CHECK(hermitian_tangency_residual(s).max_abs < 1e-14);
}

TEST_CASE("group average kills z^2 and fixes z^3") {
  auto avg_sq = gamma_average([](cplx z) { return z * z; });
  auto avg_cube = gamma_average([](cplx z) { return z * z * z; });
  for (cplx z : {cplx(0.3, 0.4), cplx(-0.7, 0.1), cplx(0.0, 0.9)}) {
    CHECK(std::abs(avg_sq(z)) < 1e-15);
    CHECK(std::abs(avg_cube(z) - z * z * z) < 1e-15);
  }
}

TEST_CASE("group average is idempotent and always equivariant") {
  auto phi = [](cplx z) { return z * z - cplx(0.0, 0.3) * z + cplx(0.1, 0.2); };
  auto a1 = gamma_average(phi);
  auto a2 = gamma_average(a1);
  for (cplx z : {cplx(0.5, -0.2), cplx(-0.1, 0.8)}) {
    CHECK(std::abs(a1(z) - a2(z)) < 1e-14);
    for (GroupElement g : kGroup) {
      CHECK(std::abs(a1(apply_group(g, z)) - apply_group(g, a1(z))) < 1e-14);
    }
  }
}

TEST_CASE("moebius shift fixes +-1, inverts with -a, rejects |a| >= 1") {
  for (double a : {-0.9, -0.2, 0.0, 0.45, 0.8}) {
    CHECK(std::abs(mobius(a, cplx(1.0, 0.0)) - cplx(1.0, 0.0)) < 1e-14);
    CHECK(std::abs(mobius(a, cplx(-1.0, 0.0)) - cplx(-1.0, 0.0)) < 1e-14);
    cplx z(0.3, -0.5);
    CHECK(std::abs(mobius(-a, mobius(a, z)) - z) < 1e-14);
    // Unit circle maps to unit circle.
    cplx u = std::polar(1.0, 2.1);
    CHECK(std::abs(std::abs(mobius(a, u)) - 1.0) < 1e-14);
  }
  CHECK_THROWS_AS(mobius(1.0, cplx(0, 0)), std::domain_error);
  CHECK_THROWS_AS(mobius(-1.3, cplx(0, 0)), std::domain_error);
}

TEST_CASE("projective immersion margin of the unit circle is 1") {
  std::vector<ComplexCurveSample> s;
  for (int i = 0; i < 64; ++i) {
    double t = 2.0 * std::numbers::pi * i / 64.0;
    ComplexCurveSample c;
    c.zeta = t;
    c.w = {cplx(std::cos(t), 0.0), cplx(std::sin(t), 0.0)};
    c.dw = {cplx(-std::sin(t), 0.0), cplx(std::cos(t), 0.0)};
    s.push_back(c);
  }
  CHECK(cp1_immersion_margin(s) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("projective immersion margin of (1, zeta) on a real grid") {
  // |w1 dw2 - w2 dw1| = 1, |w|^2 = 1 + t^2; the grid minimum sits at the ends.
  std::vector<ComplexCurveSample> s;
  double expect = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 50; ++i) {
    double t = -1.0 + 2.0 * i / 50.0;
    ComplexCurveSample c;
    c.zeta = t;
    c.w = {cplx(1.0, 0.0), cplx(t, 0.0)};
    c.dw = {cplx(0.0, 0.0), cplx(1.0, 0.0)};
    s.push_back(c);
    expect = std::min(expect, 1.0 / (1.0 + t * t));
  }
  CHECK(cp1_immersion_margin(s) == doctest::Approx(expect).epsilon(1e-14));
  // At the center alone the margin is exactly 1.
  std::vector<ComplexCurveSample> center(1);
  center[0].w = {cplx(1.0, 0.0), cplx(0.0, 0.0)};
  center[0].dw = {cplx(0.0, 0.0), cplx(1.0, 0.0)};
  CHECK(cp1_immersion_margin(center) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("projective immersion margin is invariant under scalar multiplier curves") {
  std::vector<ComplexCurveSample> plain, scaled;
  for (int i = 0; i <= 40; ++i) {
    double t = -1.0 + 2.0 * i / 40.0;
    cplx w1(std::cos(t), 0.1 * t), w2(std::sin(t), -0.2);
    cplx d1(-std::sin(t), 0.1), d2(std::cos(t), 0.0);
    ComplexCurveSample a;
    a.w = {w1, w2};
    a.dw = {d1, d2};
    plain.push_back(a);
    // multiply by c(t) = exp(-(0.3 + 0.2 i) t): dg = c' w + c dw
    cplx lam = -cplx(0.3, 0.2);
    cplx ct = std::exp(lam * t);
    ComplexCurveSample b;
    b.w = {ct * w1, ct * w2};
    b.dw = {ct * (lam * w1 + d1), ct * (lam * w2 + d2)};
    scaled.push_back(b);
  }
  CHECK(cp1_immersion_margin(scaled) ==
        doctest::Approx(cp1_immersion_margin(plain)).epsilon(1e-12));
}
