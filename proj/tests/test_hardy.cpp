// Multiplier machinery against the Schwarz-integral oracle and closed forms.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "holodisc/hardy.hpp"

using namespace holodisc;
using namespace holodisc::hardy;

namespace {

constexpr double kPi = std::numbers::pi;

// Limit transform of the unit Dirac pair at +-i.
cplx dirac_pair_limit(cplx z) {
  double z4 = std::pow(std::abs(z), 4.0);
  cplx z2 = z * z;
  return 2.0 * cplx(1.0 - z4 - 0.0, -2.0 * z2.imag()) / std::norm(1.0 + z2);
}

BoundaryDensity random_even_density(std::mt19937_64& gen, int modes = 24) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  BoundaryDensity u;
  u.a.resize(size_t(modes));
  for (int k = 0; k < modes; ++k) u.a[size_t(k)] = d(gen) / (1.0 + k * k);
  return u;
}

// Test map with |f| = 0.995 on the real segment and |f| > 1 on the circle
// away from +-1; its projectivization is an immersion everywhere.
std::array<cplx, 2> wave_map(cplx z) {
  return {0.995 * std::sin(2.0 * z), 0.995 * std::cos(2.0 * z)};
}

}  // namespace

TEST_CASE("constant density transforms to the constant function") {
  BoundaryDensity u;
  u.a = {1.0};
  for (cplx z : {cplx(0, 0), cplx(0.5, 0.3), cplx(0, -0.99), cplx(1, 0)})
    CHECK(std::abs(poisson_hilbert_eval(u, z) - 1.0) < 1e-15);
}

TEST_CASE("cosine modes transform to monomials, checked against quadrature") {
  for (int k = 1; k <= 8; ++k) {
    BoundaryDensity u;
    u.a.assign(size_t(k) + 1, 0.0);
    u.a[size_t(k)] = 1.0;
    auto grid = u.grid();
    for (double r : {0.0, 0.45, 0.9}) {
      for (int i = 0; i < 12; ++i) {
        cplx z = std::polar(r, 2.0 * kPi * i / 12.0 + 0.05);
        cplx zk = std::pow(z, k);
        CHECK(std::abs(poisson_hilbert_eval(u, z) - zk) < 1e-12);
        CHECK(std::abs(poisson_quadrature(grid, z) - zk) < 1e-10);
      }
    }
  }
}

TEST_CASE("evaluation outside the closed disc is rejected") {
  BoundaryDensity u;
  u.a = {1.0, 0.5};
  CHECK_THROWS_AS(poisson_hilbert_eval(u, cplx(1.2, 0)), std::domain_error);
  CHECK_THROWS_AS(MultiplierH{u}.deriv(cplx(0, 1.1)), std::domain_error);
}

TEST_CASE("narrowing bump pairs converge to the Dirac-pair transform at O(w^2)") {
  std::vector<cplx> probes = {cplx(0, 0), cplx(0.3, 0.2), cplx(-0.4, 0.5),
                              cplx(0.0, 0.8), cplx(0.6, -0.1)};
  std::vector<double> errs;
  for (double w : {0.4, 0.2, 0.1, 0.05}) {
    BoundaryDensity u = build_bump(kPi / 2.0, w, 1.0);
    u = (2.0 / u.mean()) * u;  // unit mass at each of +-i
    double e = 0.0;
    for (cplx z : probes)
      e = std::max(e, std::abs(poisson_hilbert_eval(u, z) - dirac_pair_limit(z)));
    errs.push_back(e);
  }
  CHECK(std::abs(dirac_pair_limit(cplx(0, 0)) - 2.0) < 1e-15);
  for (size_t i = 0; i + 1 < errs.size(); ++i) CHECK(errs[i] / errs[i + 1] > 2.5);
  // the 0.8i probe sits near the kernel singularity at i; its O(w^2)
  // constant dominates the sup error
  CHECK(errs.back() < 0.05);
  BoundaryDensity fine = build_bump(kPi / 2.0, 0.05, 1.0);
  fine = (2.0 / fine.mean()) * fine;
  CHECK(std::abs(poisson_hilbert_eval(fine, cplx(0, 0)) - 2.0) < 1e-12);
}

TEST_CASE("transform is linear and conjugate-symmetric") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto u1 = random_even_density(gen);
    auto u2 = random_even_density(gen);
    auto sum = u1 + u2;
    for (cplx z : {cplx(0.2, 0.6), cplx(-0.8, 0.1), cplx(0.99, 0.0)}) {
      cplx lhs = poisson_hilbert_eval(sum, z);
      cplx rhs = poisson_hilbert_eval(u1, z) + poisson_hilbert_eval(u2, z);
      CHECK(std::abs(lhs - rhs) < 1e-12);
      CHECK(std::abs(poisson_hilbert_eval(u1, std::conj(z)) -
                     std::conj(poisson_hilbert_eval(u1, z))) < 1e-12);
    }
  }
}

TEST_CASE("bump density: support, positivity, zero height, additivity") {
  auto u = build_bump(kPi / 2.0, 0.2, 1.0);
  auto g = u.grid(512);
  for (int i = 0; i < 512; ++i) {
    double th = 2.0 * kPi * i / 512.0;
    CHECK(g[size_t(i)] > -1e-7);
    double d1 = std::abs(std::remainder(th - kPi / 2.0, 2.0 * kPi));
    double d2 = std::abs(std::remainder(th + kPi / 2.0, 2.0 * kPi));
    if (std::min(d1, d2) > 0.12) CHECK(std::abs(g[size_t(i)]) < 1e-7);
  }
  CHECK(build_bump(kPi / 2.0, 0.2, 0.0).max_abs_coeff() < 1e-15);
  CHECK_THROWS_AS(build_bump(0.08, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_bump(kPi - 0.05, 0.2, 1.0), std::invalid_argument);

  auto v = build_bump(2.0, 0.3, 0.7);
  auto s = u + v;
  for (double th : {0.5, 1.3, kPi / 2.0, 2.0, 2.9})
    CHECK(s.eval(th) == doctest::Approx(u.eval(th) + v.eval(th)).epsilon(1e-12));
}

TEST_CASE("class report: bump passes the plus cone, zero and unmasked fail") {
  auto h = multiplier_from_density(build_bump(kPi / 2.0, 0.5, 1.0));
  auto rep = h_class_verify(h, Cone::plus);
  CHECK(rep.space_pass());
  CHECK(rep.cone_pass(Cone::plus));
  CHECK(rep.min_interior_u > 0.0);
  CHECK(rep.hopf_left[0] > 0.0);
  CHECK(rep.hopf_left[1] > 0.0);
  CHECK(rep.hopf_right[0] < 0.0);
  CHECK(rep.hopf_right[1] < 0.0);

  MultiplierH zero{BoundaryDensity{{0.0}, 0.1}};
  auto zrep = h_class_verify(zero, Cone::plus);
  CHECK(zrep.space_pass());
  CHECK_FALSE(zrep.nontrivial);
  CHECK_FALSE(zrep.cone_pass(Cone::plus));

  MultiplierH cosine{BoundaryDensity{{0.0, 1.0}, 0.0}};
  auto crep = h_class_verify(cosine, Cone::none);
  CHECK(crep.endpoint_err > 0.5);
  CHECK_FALSE(crep.space_pass());

  MultiplierH masked_cosine{BoundaryDensity{{0.0, 1.0}, 0.3}};
  CHECK(h_class_verify(masked_cosine, Cone::none).mask_violation > 0.5);
}

TEST_CASE("cone closure under sums and positive scalings") {
  auto u = build_bump(kPi / 2.0, 0.5, 1.0);
  auto v = build_bump(1.9, 0.4, 0.3);
  for (const auto& d : {u + v, 2.5 * u}) {
    auto rep = h_class_verify(multiplier_from_density(d), Cone::plus);
    CHECK(rep.cone_pass(Cone::plus));
  }
}

TEST_CASE("spanning family: independence at a point on the imaginary axis") {
  auto rep = spanning_family({cplx(0.0, 0.5)}, 1e-3);
  REQUIRE(rep.ok);
  REQUIRE(rep.members.size() >= 2);
  // The uncomposed bump pair is real on the imaginary axis; independence
  // must come from a precomposed member with nonzero imaginary part there.
  CHECK(std::abs(rep.members[0].eval(cplx(0, 0.5)).imag()) < 1e-10);
  bool some_nonreal = false;
  for (const auto& m : rep.members)
    if (std::abs(m.eval(cplx(0, 0.5)).imag()) > 1e-4) some_nonreal = true;
  CHECK(some_nonreal);
  CHECK(rep.worst_area >= 1e-3);
}

TEST_CASE("spanning family: conjugate points are covered together") {
  cplx z(0.4, 0.55);
  auto rep = spanning_family({z, std::conj(z)}, 1e-3);
  CHECK(rep.ok);
  CHECK(rep.worst_area >= 1e-3);
}

TEST_CASE("spanning family: 64-point ring within the member cap") {
  std::vector<cplx> ring;
  for (int i = 0; i < 64; ++i) {
    cplx z = std::polar(0.7, 2.0 * kPi * i / 64.0);
    if (std::abs(z.imag()) < 1e-12) continue;  // ring points on (-1,1) excluded
    ring.push_back(z);
  }
  auto rep = spanning_family(ring, 1e-3, 16);
  CHECK(rep.ok);
  CHECK(int(rep.members.size()) <= 16);
  for (const auto& m : rep.members)
    CHECK(h_class_verify(m, Cone::plus).cone_pass(Cone::plus));
}

TEST_CASE("spanning family rejects points on the real segment") {
  CHECK_THROWS_AS(spanning_family({cplx(0.3, 0.0)}, 1e-3), std::invalid_argument);
}

TEST_CASE("level report: positive density pushes rho below zero on the segment") {
  DiscMap f = [](cplx z) {
    return std::array<cplx, 2>{std::cos(0.7 * z), std::sin(0.7 * z)};
  };
  std::vector<MultiplierH> fam = {
      multiplier_from_density(build_bump(kPi / 2.0, 0.5, 1.0))};
  auto rep = rho_levels(f, fam, {0.05}, 128);
  CHECK(rep.rho_h_max_real_axis < 0.0);
  auto plain = rho_levels(f, {}, {}, 128);
  CHECK(plain.rho_h_max_real_axis == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("level report: map bounded away from the sphere has empty zero set") {
  DiscMap f = [](cplx) { return std::array<cplx, 2>{cplx(1.2, 0), cplx(0, 0)}; };
  auto rep = rho_levels(f, {}, {}, 64);
  CHECK(rep.near_zero.empty());
  CHECK(std::isinf(rep.transversality_margin));
}

TEST_CASE("level report rejects a vanishing map") {
  DiscMap f = [](cplx z) { return std::array<cplx, 2>{z, z * z}; };
  CHECK_THROWS_AS(rho_levels(f, {}, {}, 65), std::domain_error);
}

TEST_CASE("multiplied family keeps the projective class exactly") {
  std::vector<MultiplierH> fam = {
      multiplier_from_density(build_bump(kPi / 2.0, 0.5, 1.0)),
      multiplier_from_density(build_bump(1.8, 0.4, 0.8))};
  std::vector<double> t = {0.03, 0.01};
  for (cplx z : {cplx(0.2, 0.5), cplx(-0.7, 0.2), cplx(0.1, -0.9)}) {
    auto f = wave_map(z);
    cplx s = std::exp(-family_exponent(fam, t, z));
    cplx cross = (s * f[0]) * f[1] - (s * f[1]) * f[0];
    CHECK(std::abs(cross) < 1e-13 * std::abs(s * f[0] * f[1]) + 1e-300);
  }
}

TEST_CASE("larger positive weights shrink the modulus monotonically") {
  auto h = multiplier_from_density(build_bump(kPi / 2.0, 0.5, 1.0));
  std::vector<MultiplierH> fam = {h};
  for (int i = 0; i < 40; ++i) {
    cplx z = std::polar(0.08 + 0.9 * i / 39.0, 2.0 * kPi * i / 7.0);
    auto f = wave_map(z);
    double n0 = std::sqrt(std::norm(f[0]) + std::norm(f[1]));
    double ns = std::exp(-family_exponent(fam, {0.07}, z).real()) * n0;
    double nt = std::exp(-family_exponent(fam, {0.02}, z).real()) * n0;
    CHECK(ns <= nt + 1e-15);
    CHECK(nt <= n0 + 1e-15);
  }
}

TEST_CASE("perturbation with a far obstacle accepts the first draw") {
  std::vector<std::array<cplx, 2>> far;
  for (int i = 0; i < 32; ++i) {
    double s = 2.0 * kPi * i / 32.0;
    // circle on the sphere around (0, -1), far from the image of wave_map
    far.push_back({0.1 * std::polar(1.0, s), cplx(-std::sqrt(0.99), 0.0)});
  }
  std::vector<MultiplierH> fam = {
      multiplier_from_density(build_bump(kPi / 2.0, 0.5, 1.0)),
      multiplier_from_density(build_bump(1.9, 0.4, 1.0))};
  PerturbOptions opt;
  opt.band = 0.003;
  opt.interior_grid = 128;
  auto cert = general_position_perturb(wave_map, far, 0.5, fam, 42, opt);
  CHECK(cert.accepted);
  CHECK(cert.draws_used == 1);
  CHECK(cert.interior_norm_margin > 0.0);
  CHECK(cert.boundary_norm_margin > 0.0);
  CHECK(cert.transversality_margin >= 1e-3);
  CHECK(cert.obstacle_clearance > 0.25);
  for (double tj : cert.t) CHECK(tj > 0.0);
}

TEST_CASE("tiny weights keep the transversality margin of the base map") {
  auto base = rho_levels(wave_map, {}, {}, 128, 0.003);
  std::vector<MultiplierH> fam = {
      multiplier_from_density(build_bump(kPi / 2.0, 0.5, 1.0))};
  PerturbOptions opt;
  opt.band = 0.003;
  opt.interior_grid = 128;
  opt.t_min = 1e-6;
  opt.t_max = 1e-5;
  opt.transversality_threshold = base.transversality_margin / 2.0;
  auto cert = general_position_perturb(wave_map, {}, 0.5, fam, 3, opt);
  CHECK(cert.accepted);
  CHECK(cert.transversality_margin >= base.transversality_margin / 2.0);
}

TEST_CASE("obstacle through the image sheet gets cleared by the perturbation") {
  // point of the disc where |wave_map| = 1, found by bisection in Im z
  double lo = 0.0, hi = 0.2;
  for (int i = 0; i < 80; ++i) {
    double mid = 0.5 * (lo + hi);
    auto f = wave_map(cplx(0.3, mid));
    (std::sqrt(std::norm(f[0]) + std::norm(f[1])) < 1.0 ? lo : hi) = mid;
  }
  auto p = wave_map(cplx(0.3, 0.5 * (lo + hi)));
  double pn = std::sqrt(std::norm(p[0]) + std::norm(p[1]));
  p = {p[0] / pn, p[1] / pn};
  std::vector<std::array<cplx, 2>> arc;
  for (int i = -16; i <= 16; ++i) {
    // short sphere arc through p
    cplx e0 = p[0] + 0.003 * double(i) * cplx(0.0, 1.0);
    cplx e1 = p[1];
    double n = std::sqrt(std::norm(e0) + std::norm(e1));
    arc.push_back({e0 / n, e1 / n});
  }
  std::vector<MultiplierH> fam = {
      multiplier_from_density(build_bump(kPi / 2.0, 0.5, 1.0)),
      multiplier_from_density(build_bump(1.9, 0.4, 1.0)),
      multiplier_from_density(build_bump(1.2, 0.3, 1.0))};
  PerturbOptions opt;
  opt.band = 0.003;
  opt.interior_grid = 128;
  opt.t_min = 5e-3;
  opt.t_max = 0.3;
  auto cert = general_position_perturb(wave_map, arc, 0.9, fam, 11, opt);
  REQUIRE(cert.accepted);
  CHECK(cert.obstacle_clearance >= opt.obstacle_threshold);
  // the perturbation stays small in C^0
  double move = 0.0;
  for (int i = 0; i < 200; ++i) {
    cplx z = std::polar(std::sqrt(i / 199.0), 2.0 * kPi * i / 17.0);
    auto f = wave_map(z);
    cplx s = std::exp(-family_exponent(fam, cert.t, z));
    move = std::max(move, std::abs(s - 1.0) *
                              std::sqrt(std::norm(f[0]) + std::norm(f[1])));
  }
  CHECK(move < 0.8);
}
