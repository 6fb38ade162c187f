#pragma once

// Contact-geometry primitives: jet samples of parametrized curves, the
// standard contact residual, Hermitian tangency on the sphere, the
// reflection group of the disc, and Moebius shifts.

#include <complex>
#include <functional>
#include <vector>

namespace holodisc {
namespace contact {

using cplx = std::complex<double>;

// One sample of a curve in R^{2n+1} with coordinates (x_1..x_n, y_1..y_n, z):
// value and first derivative with respect to the parameter.
struct RealJetSample {
  double t = 0.0;
  std::vector<double> x, y;  // size n each
  double z = 0.0;
  std::vector<double> dx, dy;
  double dz = 0.0;
};

// One sample of a holomorphic curve in C^m with derivative.
struct ComplexCurveSample {
  cplx zeta;
  std::vector<cplx> w;
  std::vector<cplx> dw;
};

// Reflections of the plane generated by negating the real or imaginary part.
enum class GroupElement { id, tau_x, tau_y, tau_xy };
constexpr GroupElement kGroup[4] = {GroupElement::id, GroupElement::tau_x, GroupElement::tau_y,
                                    GroupElement::tau_xy};

// Action on points: tau_x(x+iy) = -x+iy, tau_y(x+iy) = x-iy.
cplx apply_group(GroupElement g, cplx z);

// Pointwise residual of the form dz + sum_i x_i dy_i along the samples, and
// the max absolute residual. A curve annihilating the form has residual 0.
struct ResidualReport {
  std::vector<double> per_sample;
  double max_abs = 0.0;
};
ResidualReport alpha0_residual(const std::vector<RealJetSample>& samples);

// Pointwise Hermitian product <dw, w> = sum_i dw_i * conj(w_i); a curve on the
// unit sphere is tangent to the complex planes iff this vanishes.
struct TangencyReport {
  std::vector<cplx> per_sample;
  double max_abs = 0.0;
};
TangencyReport hermitian_tangency_residual(const std::vector<ComplexCurveSample>& samples);

// Average of a plane map over the reflection group:
// (avg phi)(z) = 1/4 sum_g g(phi(g(z))). Fixes equivariant maps.
std::function<cplx(cplx)> gamma_average(std::function<cplx(cplx)> phi);

// Disc automorphism (z - a)/(1 - a z) for real a in (-1, 1); fixes +-1.
// Throws std::domain_error for |a| >= 1.
cplx mobius(double a, cplx z);

// min over samples of |w1 dw2 - w2 dw1| / |w|^2: how far the curve direction
// stays from radial in the projective sense. Zero at a branch of the
// projectivized curve.
double cp1_immersion_margin(const std::vector<ComplexCurveSample>& samples);

}  // namespace contact
}  // namespace holodisc
