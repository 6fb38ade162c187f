#include "holodisc/contact.hpp"

#include <cmath>
#include <stdexcept>

namespace holodisc {
namespace contact {

cplx apply_group(GroupElement g, cplx z) {
  switch (g) {
    case GroupElement::id: return z;
    case GroupElement::tau_x: return -std::conj(z);
    case GroupElement::tau_y: return std::conj(z);
    case GroupElement::tau_xy: return -z;
  }
  return z;
}

ResidualReport alpha0_residual(const std::vector<RealJetSample>& samples) {
  ResidualReport rep;
  rep.per_sample.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.x.size() != s.y.size() || s.x.size() != s.dy.size())
      throw std::invalid_argument("alpha0_residual: inconsistent sample dimensions");
    double r = s.dz;
    for (size_t i = 0; i < s.x.size(); ++i) r += s.x[i] * s.dy[i];
    rep.per_sample.push_back(r);
    rep.max_abs = std::max(rep.max_abs, std::abs(r));
  }
  return rep;
}

TangencyReport hermitian_tangency_residual(const std::vector<ComplexCurveSample>& samples) {
  TangencyReport rep;
  rep.per_sample.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.w.size() != s.dw.size())
      throw std::invalid_argument("hermitian_tangency_residual: inconsistent sample dimensions");
    cplx h(0.0, 0.0);
    for (size_t i = 0; i < s.w.size(); ++i) h += s.dw[i] * std::conj(s.w[i]);
    rep.per_sample.push_back(h);
    rep.max_abs = std::max(rep.max_abs, std::abs(h));
  }
  return rep;
}

std::function<cplx(cplx)> gamma_average(std::function<cplx(cplx)> phi) {
  return [phi](cplx z) {
    cplx acc(0.0, 0.0);
    for (GroupElement g : kGroup) acc += apply_group(g, phi(apply_group(g, z)));
    return acc * 0.25;
  };
}

cplx mobius(double a, cplx z) {
  if (std::abs(a) >= 1.0) throw std::domain_error("mobius: parameter must satisfy |a| < 1");
  return (z - a) / (1.0 - a * z);
}

double cp1_immersion_margin(const std::vector<ComplexCurveSample>& samples) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    if (s.w.size() != 2 || s.dw.size() != 2)
      throw std::invalid_argument("cp1_immersion_margin: samples must have two components");
    const double num = std::abs(s.w[0] * s.dw[1] - s.w[1] * s.dw[0]);
    const double den = std::norm(s.w[0]) + std::norm(s.w[1]);
    if (den == 0.0) throw std::domain_error("cp1_immersion_margin: zero vector sample");
    m = std::min(m, num / den);
  }
  return m;
}

}  // namespace contact
}  // namespace holodisc
