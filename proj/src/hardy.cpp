#include "holodisc/hardy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "holodisc/fft.hpp"

namespace holodisc::hardy {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_pi(double t) {
  t = std::fmod(t, 2.0 * kPi);
  if (t > kPi) t -= 2.0 * kPi;
  if (t < -kPi) t += 2.0 * kPi;
  return t;
}

double smooth_bump(double s) {
  double q = 1.0 - s * s;
  if (q <= 0.0) return 0.0;
  return std::exp(1.0 - 1.0 / q);
}

double uniform01(std::mt19937_64& gen) {
  return std::ldexp(double(gen() >> 11), -53);
}

}  // namespace

double BoundaryDensity::eval(double theta) const {
  // cos(k theta) = T_k(cos theta); Clenshaw on x = cos theta.
  if (a.empty()) return 0.0;
  double x = std::cos(theta);
  double b1 = 0.0, b2 = 0.0;
  for (size_t k = a.size(); k-- > 1;) {
    double b0 = a[k] + 2.0 * x * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return a[0] + x * b1 - b2;
}

std::vector<double> BoundaryDensity::grid(int n) const {
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) out[size_t(i)] = eval(2.0 * kPi * i / n);
  return out;
}

double BoundaryDensity::max_abs_coeff() const {
  double m = 0.0;
  for (double c : a) m = std::max(m, std::abs(c));
  return m;
}

BoundaryDensity BoundaryDensity::from_samples(const std::vector<double>& u,
                                              double mask_halfwidth,
                                              int max_modes) {
  size_t n = u.size();
  std::vector<double> sym(n);
  for (size_t i = 0; i < n; ++i) sym[i] = 0.5 * (u[i] + u[(n - i) % n]);
  int m = std::min<int>(max_modes, int(n) / 2);
  BoundaryDensity d;
  d.a = cosine_coeffs(sym, m);
  d.mask_halfwidth = mask_halfwidth;
  // Trim the spectral tail so later Horner sums stay cheap.
  double top = d.max_abs_coeff();
  size_t keep = d.a.size();
  while (keep > 1 && std::abs(d.a[keep - 1]) < 1e-14 * (top + 1e-300)) --keep;
  d.a.resize(keep);
  return d;
}

BoundaryDensity operator+(const BoundaryDensity& p, const BoundaryDensity& q) {
  BoundaryDensity r;
  r.a.assign(std::max(p.a.size(), q.a.size()), 0.0);
  for (size_t k = 0; k < p.a.size(); ++k) r.a[k] += p.a[k];
  for (size_t k = 0; k < q.a.size(); ++k) r.a[k] += q.a[k];
  r.mask_halfwidth = std::min(p.mask_halfwidth, q.mask_halfwidth);
  return r;
}

BoundaryDensity operator*(double s, const BoundaryDensity& p) {
  BoundaryDensity r = p;
  for (double& c : r.a) c *= s;
  return r;
}

BoundaryDensity build_bump(double theta0, double width, double height,
                           double mask_halfwidth) {
  if (!(width > 0.0) || height < 0.0)
    throw std::invalid_argument("bump: width must be positive, height >= 0");
  double t0 = std::abs(wrap_pi(theta0));
  double half = 0.5 * width;
  if (t0 - half <= mask_halfwidth || t0 + half >= kPi - mask_halfwidth)
    throw std::invalid_argument("bump: support arcs meet the +-1 exclusion zones");
  std::vector<double> u(kAngularGrid);
  for (int i = 0; i < kAngularGrid; ++i) {
    double th = 2.0 * kPi * i / kAngularGrid;
    double s1 = wrap_pi(th - t0) / half;
    double s2 = wrap_pi(th + t0) / half;
    u[size_t(i)] = height * (smooth_bump(s1) + smooth_bump(s2));
  }
  return BoundaryDensity::from_samples(u, mask_halfwidth);
}

cplx MultiplierH::eval(cplx z) const {
  if (std::abs(z) > 1.0 + 1e-9)
    throw std::domain_error("multiplier: evaluation outside the closed disc");
  const auto& a = density.a;
  if (a.empty()) return 0.0;
  cplx s = a.back();
  for (size_t k = a.size() - 1; k-- > 0;) s = s * z + a[k];
  return s;
}

cplx MultiplierH::deriv(cplx z) const {
  if (std::abs(z) > 1.0 + 1e-9)
    throw std::domain_error("multiplier: evaluation outside the closed disc");
  const auto& a = density.a;
  if (a.size() < 2) return 0.0;
  size_t n = a.size() - 1;
  cplx s = double(n) * a[n];
  for (size_t k = n; k-- > 1;) s = s * z + double(k) * a[k];
  return s;
}

double MultiplierH::c0_norm() const {
  double m = 0.0;
  for (int i = 0; i < kAngularGrid; ++i) {
    cplx z = std::polar(1.0, 2.0 * kPi * i / kAngularGrid);
    m = std::max(m, std::abs(eval(z)));
  }
  return m;
}

double MultiplierH::c1_norm() const {
  double m = 0.0;
  for (int i = 0; i < kAngularGrid; ++i) {
    cplx z = std::polar(1.0, 2.0 * kPi * i / kAngularGrid);
    m = std::max(m, std::abs(deriv(z)));
  }
  return c0_norm() + m;
}

MultiplierH multiplier_from_density(const BoundaryDensity& d) { return {d}; }

cplx poisson_quadrature(const std::vector<double>& u_grid, cplx z) {
  if (std::abs(z) >= 1.0 - 1e-9)
    throw std::domain_error("quadrature path: interior points only");
  size_t n = u_grid.size();
  cplx acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cplx w = std::polar(1.0, 2.0 * kPi * double(i) / double(n));
    acc += (w + z) / (w - z) * u_grid[i];
  }
  return acc / double(n);
}

cplx poisson_hilbert_eval(const BoundaryDensity& u, cplx z) {
  return MultiplierH{u}.eval(z);
}

bool HClassReport::space_pass() const {
  return sym_err <= 1e-12 && endpoint_err <= 1e-7 && imag_on_axis <= 1e-12 &&
         mask_violation <= 1e-7;
}

bool HClassReport::cone_pass(Cone cone) const {
  if (!space_pass()) return false;
  if (cone == Cone::none) return true;
  double sgn = (cone == Cone::plus) ? 1.0 : -1.0;
  return nontrivial && sgn * min_interior_u > 0.0 &&
         sgn * hopf_left[0] > 0.0 && sgn * hopf_left[1] > 0.0 &&
         sgn * hopf_right[0] < 0.0 && sgn * hopf_right[1] < 0.0;
}

HClassReport h_class_verify(const MultiplierH& h, Cone cone) {
  (void)cone;  // the report carries everything; pass/fail is evaluated per cone
  HClassReport r;
  for (double rad : {0.3, 0.7, 0.97, 1.0}) {
    for (int i = 0; i < 16; ++i) {
      cplx z = std::polar(rad, 2.0 * kPi * i / 16.0 + 0.1);
      r.sym_err = std::max(r.sym_err,
                           std::abs(h.eval(std::conj(z)) - std::conj(h.eval(z))));
    }
  }
  r.endpoint_err = std::max(std::abs(h.eval(1.0)), std::abs(h.eval(-1.0)));
  for (int i = 0; i <= 40; ++i) {
    double x = -1.0 + 2.0 * i / 40.0;
    r.imag_on_axis = std::max(r.imag_on_axis, std::abs(h.eval(x).imag()));
  }
  double mask = h.density.mask_halfwidth;
  if (mask > 0.0) {
    for (int i = 0; i <= 200; ++i) {
      double s = mask * (i / 200.0);
      for (double th : {s, -s, kPi - s, kPi + s})
        r.mask_violation = std::max(r.mask_violation, std::abs(h.density.eval(th)));
    }
  }
  r.min_interior_u = std::numeric_limits<double>::infinity();
  for (int ir = 0; ir < 12; ++ir) {
    double rad = 0.99 * ir / 11.0;
    for (int i = 0; i < 128; ++i) {
      cplx z = std::polar(rad, 2.0 * kPi * i / 128.0);
      r.min_interior_u = std::min(r.min_interior_u, h.eval(z).real());
    }
  }
  const double offs[2] = {1e-2, 1e-3};
  for (int i = 0; i < 2; ++i) {
    double d = offs[i];
    r.hopf_left[i] = (h.eval(-1.0 + d).real() - h.eval(-1.0).real()) / d;
    r.hopf_right[i] = (h.eval(1.0).real() - h.eval(1.0 - d).real()) / d;
  }
  r.nontrivial = h.density.max_abs_coeff() > 1e-13;
  return r;
}

namespace {

double pair_area(cplx p, cplx q) {
  return std::abs(p.real() * q.imag() - p.imag() * q.real());
}

double best_pair_area(const std::vector<cplx>& vals) {
  double best = 0.0;
  for (size_t i = 0; i < vals.size(); ++i)
    for (size_t j = i + 1; j < vals.size(); ++j)
      best = std::max(best, pair_area(vals[i], vals[j]));
  return best;
}

// Pullback of a density along the boundary action of phi_a; this realizes
// h o phi_a, which stays in the class because phi_a fixes +-1 and the real axis.
BoundaryDensity pullback_density(const BoundaryDensity& d, double a) {
  std::vector<double> u(kAngularGrid);
  for (int i = 0; i < kAngularGrid; ++i) {
    cplx w = std::polar(1.0, 2.0 * kPi * i / kAngularGrid);
    cplx im = (w - a) / (1.0 - a * w);
    u[size_t(i)] = d.eval(std::arg(im));
  }
  double shrink = (1.0 - std::abs(a)) / (1.0 + std::abs(a));
  return BoundaryDensity::from_samples(u, d.mask_halfwidth * shrink);
}

}  // namespace

SpanningReport spanning_family(const std::vector<cplx>& points, double margin,
                               int cap, double mask_halfwidth) {
  for (cplx z : points) {
    if (std::abs(z) > 1.0 + 1e-9)
      throw std::invalid_argument("spanning family: point outside the closed disc");
    if (std::abs(z.imag()) < 1e-12 && std::abs(z.real()) < 1.0)
      throw std::invalid_argument("spanning family: point on (-1, 1)");
  }
  std::vector<MultiplierH> pool;
  for (double w : {0.5, 0.25}) {
    BoundaryDensity base = build_bump(kPi / 2.0, w, 1.0, mask_halfwidth);
    pool.push_back({base});
    for (double a : {0.35, -0.35, 0.6, -0.6, 0.8, -0.8, 0.9, -0.9, 0.95, -0.95})
      pool.push_back({pullback_density(base, a)});
  }

  SpanningReport rep;
  rep.members.push_back(pool[0]);
  std::vector<char> used(pool.size(), 0);
  used[0] = 1;

  // values[m][k] = member m at point k
  auto value_row = [&](const MultiplierH& m) {
    std::vector<cplx> row(points.size());
    for (size_t k = 0; k < points.size(); ++k) row[k] = m.eval(points[k]);
    return row;
  };
  std::vector<std::vector<cplx>> vals{value_row(pool[0])};

  auto point_area = [&](size_t k) {
    std::vector<cplx> col(vals.size());
    for (size_t m = 0; m < vals.size(); ++m) col[m] = vals[m][k];
    return best_pair_area(col);
  };

  while (int(rep.members.size()) < cap) {
    std::vector<size_t> failing;
    for (size_t k = 0; k < points.size(); ++k)
      if (point_area(k) < margin) failing.push_back(k);
    if (failing.empty()) break;

    size_t pick = pool.size();
    int best_fixed = -1;
    double best_worst = -1.0;
    for (size_t c = 0; c < pool.size(); ++c) {
      if (used[c]) continue;
      auto row = value_row(pool[c]);
      int fixed = 0;
      double worst = std::numeric_limits<double>::infinity();
      for (size_t k : failing) {
        double area = point_area(k);
        for (const auto& r : vals) area = std::max(area, pair_area(r[k], row[k]));
        if (area >= margin) ++fixed;
        worst = std::min(worst, area);
      }
      if (fixed > best_fixed || (fixed == best_fixed && worst > best_worst)) {
        best_fixed = fixed;
        best_worst = worst;
        pick = c;
      }
    }
    if (pick == pool.size() || best_fixed <= 0) break;  // pool exhausted or useless
    used[pick] = 1;
    rep.members.push_back(pool[pick]);
    vals.push_back(value_row(pool[pick]));
  }

  rep.worst_area = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < points.size(); ++k) {
    double area = point_area(k);
    if (area < margin) rep.failing.push_back(points[k]);
    rep.worst_area = std::min(rep.worst_area, area);
  }
  rep.ok = rep.failing.empty();
  return rep;
}

cplx family_exponent(const std::vector<MultiplierH>& family,
                     const std::vector<double>& t, cplx z) {
  if (family.size() != t.size())
    throw std::invalid_argument("family exponent: weight count mismatch");
  cplx s = 0.0;
  for (size_t j = 0; j < family.size(); ++j) s += t[j] * family[j].eval(z);
  return s;
}

LevelReport rho_levels(const DiscMap& f, const std::vector<MultiplierH>& family,
                       const std::vector<double>& t, int grid, double band) {
  if (family.size() != t.size())
    throw std::invalid_argument("rho levels: weight count mismatch");
  auto rho_h = [&](cplx z) {
    auto v = f(z);
    double n2 = std::norm(v[0]) + std::norm(v[1]);
    if (n2 < 1e-24) throw std::domain_error("rho levels: map vanishes on the grid");
    double rho = 0.5 * std::log(n2);
    for (size_t j = 0; j < family.size(); ++j)
      rho -= t[j] * family[j].eval(z).real();
    return rho;
  };

  LevelReport rep;
  rep.band = band;
  rep.rho_min = std::numeric_limits<double>::infinity();
  rep.rho_max = -rep.rho_min;
  rep.rho_h_max_real_axis = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1024; ++i) {
    double x = -1.0 + 2.0 * (i + 0.5) / 1024.0;
    rep.rho_h_max_real_axis = std::max(rep.rho_h_max_real_axis, rho_h(x));
  }
  for (int iy = 0; iy < grid; ++iy) {
    for (int ix = 0; ix < grid; ++ix) {
      cplx z(-1.0 + 2.0 * ix / (grid - 1), -1.0 + 2.0 * iy / (grid - 1));
      if (std::abs(z) > 1.0) continue;
      double v = rho_h(z);
      rep.rho_min = std::min(rep.rho_min, v);
      rep.rho_max = std::max(rep.rho_max, v);
      if (std::abs(v) < band) rep.near_zero.push_back(z);
    }
  }
  rep.transversality_margin = std::numeric_limits<double>::infinity();
  const double d = 1e-5;
  for (cplx z : rep.near_zero) {
    // central differences, pulled one-sided at the rim
    auto slope = [&](cplx step) {
      cplx zp = z + step, zm = z - step;
      if (std::abs(zp) > 1.0) zp = z;
      if (std::abs(zm) > 1.0) zm = z;
      double len = std::abs(zp - zm);
      if (len == 0.0) return 0.0;
      return (rho_h(zp) - rho_h(zm)) / len;
    };
    double gx = slope(cplx(d, 0.0));
    double gy = slope(cplx(0.0, d));
    rep.transversality_margin =
        std::min(rep.transversality_margin, std::hypot(gx, gy));
  }
  return rep;
}

PerturbCertificate general_position_perturb(
    const DiscMap& f, const std::vector<std::array<cplx, 2>>& obstacle,
    double eta, const std::vector<MultiplierH>& family, std::uint64_t seed,
    const PerturbOptions& opt) {
  if (family.empty()) throw std::invalid_argument("perturb: empty family");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("perturb: eta not in (0,1)");
  const size_t nfam = family.size();

  // Evaluation grids: real segment, boundary circle off the end arcs, interior raster.
  std::vector<cplx> pts;
  std::vector<int> kind;  // 0 real axis, 1 boundary, 2 interior
  for (int i = 0; i < 1024; ++i) {
    pts.push_back(cplx(-1.0 + 2.0 * (i + 0.5) / 1024.0, 0.0));
    kind.push_back(0);
  }
  for (int i = 0; i < opt.boundary_grid; ++i) {
    double th = 2.0 * kPi * i / opt.boundary_grid;
    double d0 = std::abs(wrap_pi(th)), d1 = std::abs(wrap_pi(th - kPi));
    if (d0 < opt.end_arc || d1 < opt.end_arc) continue;
    pts.push_back(std::polar(1.0, th));
    kind.push_back(1);
  }
  int g = opt.interior_grid;
  for (int iy = 0; iy < g; ++iy)
    for (int ix = 0; ix < g; ++ix) {
      cplx z(-1.0 + 2.0 * ix / (g - 1), -1.0 + 2.0 * iy / (g - 1));
      if (std::abs(z) > 1.0) continue;
      pts.push_back(z);
      kind.push_back(2);
    }

  const size_t npts = pts.size();
  std::vector<std::array<cplx, 2>> fv(npts);
  std::vector<double> fnorm(npts);
  for (size_t i = 0; i < npts; ++i) {
    fv[i] = f(pts[i]);
    fnorm[i] = std::sqrt(std::norm(fv[i][0]) + std::norm(fv[i][1]));
  }
  std::vector<std::vector<double>> uval(nfam, std::vector<double>(npts));
  for (size_t j = 0; j < nfam; ++j)
    for (size_t i = 0; i < npts; ++i) uval[j][i] = family[j].eval(pts[i]).real();

  std::mt19937_64 gen(seed);
  PerturbCertificate best;
  best.seed = seed;
  best.eta = eta;
  double best_score = -std::numeric_limits<double>::infinity();

  std::vector<double> t(nfam), scale(npts);
  for (int draw = 1; draw <= opt.max_draws; ++draw) {
    for (size_t j = 0; j < nfam; ++j)
      t[j] = std::exp(std::log(opt.t_min) +
                      uniform01(gen) * std::log(opt.t_max / opt.t_min));

    double m_int = std::numeric_limits<double>::infinity();
    double m_bnd = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < npts; ++i) {
      double e = 0.0;
      for (size_t j = 0; j < nfam; ++j) e += t[j] * uval[j][i];
      scale[i] = std::exp(-e);
      double ft = scale[i] * fnorm[i];
      if (kind[i] == 0) m_int = std::min(m_int, 1.0 - ft);
      if (kind[i] == 1)
        m_bnd = std::min(m_bnd, ft - ((1.0 - eta) * fnorm[i] + eta));
    }

    double m_obs = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < npts; ++i) {
      double ft = scale[i] * fnorm[i];
      if (std::abs(ft - 1.0) > 0.25) {
        m_obs = std::min(m_obs, std::abs(ft - 1.0));
        continue;
      }
      for (const auto& e : obstacle) {
        double d2 = std::norm(scale[i] * fv[i][0] - e[0]) +
                    std::norm(scale[i] * fv[i][1] - e[1]);
        m_obs = std::min(m_obs, std::sqrt(d2));
      }
    }

    auto lev = rho_levels(f, family, t, opt.interior_grid, opt.band);

    PerturbCertificate cand;
    cand.seed = seed;
    cand.eta = eta;
    cand.draws_used = draw;
    cand.t = t;
    cand.interior_norm_margin = m_int;
    cand.boundary_norm_margin = m_bnd;
    cand.transversality_margin = lev.transversality_margin;
    cand.obstacle_clearance = m_obs;
    for (size_t j = 0; j < nfam; ++j)
      cand.perturbation_c1 += t[j] * family[j].c1_norm();
    cand.accepted = m_int > 0.0 && m_bnd > 0.0 &&
                    lev.transversality_margin >= opt.transversality_threshold &&
                    m_obs >= opt.obstacle_threshold;
    double score = std::min(std::min(m_int, m_bnd),
                            std::min(lev.transversality_margin - opt.transversality_threshold,
                                     m_obs - opt.obstacle_threshold));
    if (score > best_score) {
      best_score = score;
      best = cand;
    }
    if (cand.accepted) return cand;
  }
  return best;
}

}  // namespace holodisc::hardy
