#include "holodisc/legendrian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <stdexcept>

namespace holodisc {
namespace legendrian {

namespace {

std::vector<double> uniform_grid(double lo, double hi, int count) {
  std::vector<double> g(static_cast<size_t>(count), 0.0);
  for (int i = 0; i < count; ++i) g[size_t(i)] = lo + (hi - lo) * double(i) / double(count - 1);
  return g;
}

int round_up32(double x) {
  int v = int(std::ceil(x));
  return ((v + 31) / 32) * 32;
}

// -sum X_i Y_i' as one exact coefficient-level polynomial.
Cheb neg_sum_xy_prime(const std::vector<Cheb>& X, const std::vector<Cheb>& Y) {
  Cheb acc(X[0].lo, X[0].hi, {0.0});
  for (size_t i = 0; i < X.size(); ++i) acc += X[i] * Y[i].derivative();
  return acc * -1.0;
}

}  // namespace

std::vector<double> LegendrianPolynomial::value(double t) const {
  std::vector<double> v;
  v.reserve(X.size() * 2 + 1);
  for (const auto& p : X) v.push_back(p.eval(t));
  for (const auto& p : Y) v.push_back(p.eval(t));
  v.push_back(Z.eval(t));
  return v;
}

std::vector<double> LegendrianPolynomial::velocity(double t) const {
  std::vector<double> v;
  v.reserve(X.size() * 2 + 1);
  for (const auto& p : X) v.push_back(p.derivative().eval(t));
  for (const auto& p : Y) v.push_back(p.derivative().eval(t));
  v.push_back(dZ.eval(t));
  return v;
}

RealJetSample LegendrianPolynomial::jet(double t) const {
  RealJetSample s;
  s.t = t;
  for (const auto& p : X) {
    s.x.push_back(p.eval(t));
    s.dx.push_back(p.derivative().eval(t));
  }
  for (const auto& p : Y) {
    s.y.push_back(p.eval(t));
    s.dy.push_back(p.derivative().eval(t));
  }
  s.z = Z.eval(t);
  s.dz = dZ.eval(t);
  return s;
}

std::vector<cplx> LegendrianPolynomial::value_at(cplx zeta) const {
  std::vector<cplx> v;
  v.reserve(X.size() * 2 + 1);
  for (const auto& p : X) v.push_back(p.eval(zeta));
  for (const auto& p : Y) v.push_back(p.eval(zeta));
  v.push_back(Z.eval(zeta));
  return v;
}

LegendrianPolynomial make_legendrian(std::vector<Cheb> X, std::vector<Cheb> Y, double z0) {
  if (X.empty() || X.size() != Y.size()) throw std::invalid_argument("make_legendrian: X/Y size");
  for (const auto& p : X) p.require_same_interval(X[0]);
  for (const auto& p : Y) p.require_same_interval(X[0]);
  LegendrianPolynomial c;
  c.dZ = neg_sum_xy_prime(X, Y);
  c.Z = c.dZ.antiderivative(0.0, z0);
  c.X = std::move(X);
  c.Y = std::move(Y);
  c.z0 = z0;
  return c;
}

std::vector<Cheb> symmetrize_poly(const std::vector<ZCheb>& p) {
  std::vector<Cheb> out;
  out.reserve(p.size());
  for (const auto& q : p) out.push_back(real_part(q));
  return out;
}

ProjectionFit fit_projection(const ProjectionData& data, int degree,
                             const std::vector<ProjectionConstraint>& constraints) {
  const size_t comps = data.values.size();
  if (comps == 0) throw std::invalid_argument("fit_projection: no components");
  const size_t m = data.t.size();
  for (const auto& v : data.values)
    if (v.size() != m) throw std::invalid_argument("fit_projection: ragged samples");
  const bool with_d = !data.dvalues.empty();
  if (with_d)
    for (const auto& v : data.dvalues)
      if (v.size() != m) throw std::invalid_argument("fit_projection: ragged derivatives");

  ProjectionFit out;
  out.degree = degree;
  double worst = -1.0;
  for (size_t c = 0; c < comps; ++c) {
    std::vector<FitRow> rows;
    rows.reserve(m * (with_d ? 2 : 1));
    for (size_t k = 0; k < m; ++k) rows.push_back({data.t[k], 0, data.values[c][k], 1.0});
    if (with_d)
      for (size_t k = 0; k < m; ++k)
        rows.push_back({data.t[k], 1, data.dvalues[c][k], data.dweight});
    std::vector<FitConstraint> cs;
    for (const auto& pc : constraints)
      if (pc.comp == int(c)) cs.push_back({pc.t, pc.deriv, pc.value});
    LsqReport rep;
    Cheb fit = cheb_fit(data.lo, data.hi, degree, rows, cs, &rep);
    if (!rep.feasible) out.feasible = false;
    const double badness = rep.feasible ? rep.constraint_residual : 1e300;
    if (badness > worst) {
      worst = badness;
      out.report = rep;
    }
    for (size_t k = 0; k < m; ++k)
      out.c0_residual = std::max(out.c0_residual, std::abs(fit.eval(data.t[k]) - data.values[c][k]));
    if (with_d) {
      const Cheb d1 = fit.derivative();
      for (size_t k = 0; k < m; ++k)
        out.c1_residual = std::max(out.c1_residual, std::abs(d1.eval(data.t[k]) - data.dvalues[c][k]));
    }
    out.comps.push_back(std::move(fit));
  }
  return out;
}

Cheb z_integrate(const std::vector<Cheb>& X, const std::vector<Cheb>& Y, double z0) {
  if (X.empty() || X.size() != Y.size()) throw std::invalid_argument("z_integrate: X/Y size");
  return neg_sum_xy_prime(X, Y).antiderivative(0.0, z0);
}

double loop_area(const std::vector<Cheb>& X, const std::vector<Cheb>& Y, double t1, double t2) {
  if (t1 > t2) throw std::invalid_argument("loop_area: t1 > t2");
  const Cheb P = neg_sum_xy_prime(X, Y).antiderivative(t1, 0.0);
  return P.eval(t2);
}

namespace {

// Per-component polynomials and first two derivatives; z' comes from dZ.
struct CurveTable {
  std::vector<Cheb> p0, p1, p2;
  int m = 0;
};

CurveTable build_table(const LegendrianPolynomial& c) {
  CurveTable T;
  for (const auto& p : c.X) T.p0.push_back(p);
  for (const auto& p : c.Y) T.p0.push_back(p);
  T.p0.push_back(c.Z);
  const size_t planar = c.X.size() * 2;
  for (size_t i = 0; i < planar; ++i) T.p1.push_back(T.p0[i].derivative());
  T.p1.push_back(c.dZ);
  for (size_t i = 0; i < T.p1.size(); ++i) T.p2.push_back(T.p1[i].derivative());
  T.m = int(T.p0.size());
  return T;
}

void eval_table(const CurveTable& T, double t, double* v, double* d1, double* d2) {
  for (int i = 0; i < T.m; ++i) {
    v[i] = T.p0[size_t(i)].eval(t);
    if (d1) d1[i] = T.p1[size_t(i)].eval(t);
    if (d2) d2[i] = T.p2[size_t(i)].eval(t);
  }
}

double dot_m(const double* a, const double* b, int m) {
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += a[i] * b[i];
  return s;
}

// Minimize |f(t1)-f(t2)|^2 by damped Newton; false when the pair collapses
// onto the diagonal.
bool newton_pair(const CurveTable& T, double lo, double hi, double h, double& t1, double& t2,
                 double& dist) {
  constexpr int kMax = 30;
  std::vector<double> v1(size_t(T.m)), v2(size_t(T.m)), a1(size_t(T.m)), a2(size_t(T.m)),
      b1(size_t(T.m)), b2(size_t(T.m)), d(size_t(T.m));
  for (int it = 0; it < kMax; ++it) {
    eval_table(T, t1, v1.data(), a1.data(), b1.data());
    eval_table(T, t2, v2.data(), a2.data(), b2.data());
    for (int i = 0; i < T.m; ++i) d[size_t(i)] = v1[size_t(i)] - v2[size_t(i)];
    const double g1 = dot_m(d.data(), a1.data(), T.m);
    const double g2 = -dot_m(d.data(), a2.data(), T.m);
    const double h11 = dot_m(a1.data(), a1.data(), T.m) + dot_m(d.data(), b1.data(), T.m);
    const double h12 = -dot_m(a1.data(), a2.data(), T.m);
    const double h22 = dot_m(a2.data(), a2.data(), T.m) - dot_m(d.data(), b2.data(), T.m);
    double s1, s2;
    const double det = h11 * h22 - h12 * h12;
    const double scale = std::abs(h11) + std::abs(h22) + 1e-300;
    if (det > 1e-12 * scale * scale && h11 > 0.0) {
      s1 = -(h22 * g1 - h12 * g2) / det;
      s2 = -(-h12 * g1 + h11 * g2) / det;
    } else {
      const double gn2 = g1 * g1 + g2 * g2;
      const double f = 0.5 * dot_m(d.data(), d.data(), T.m);
      const double step = gn2 > 0.0 ? f / gn2 : 0.0;
      s1 = -g1 * step;
      s2 = -g2 * step;
    }
    const double cap = 3.0 * h;
    const double mag = std::max(std::abs(s1), std::abs(s2));
    if (mag > cap) {
      s1 *= cap / mag;
      s2 *= cap / mag;
    }
    t1 = std::clamp(t1 + s1, lo, hi);
    t2 = std::clamp(t2 + s2, lo, hi);
    if (t2 - t1 < 2.5 * h) return false;
    if (mag < 1e-13 * (hi - lo)) break;
  }
  eval_table(T, t1, v1.data(), nullptr, nullptr);
  eval_table(T, t2, v2.data(), nullptr, nullptr);
  double s = 0.0;
  for (int i = 0; i < T.m; ++i) {
    const double di = v1[size_t(i)] - v2[size_t(i)];
    s += di * di;
  }
  dist = std::sqrt(s);
  return true;
}

}  // namespace

ScanReport double_point_scan(const LegendrianPolynomial& c, double lo, double hi, int grid) {
  if (!(hi > lo)) throw std::invalid_argument("double_point_scan: empty interval");
  const int G = std::max(grid, 64);
  const int N = G + 1;
  const double h = (hi - lo) / G;
  const CurveTable T = build_table(c);
  const int m = T.m;
  const int planar = m - 1;

  std::vector<double> V(size_t(N) * size_t(m));
  std::vector<double> sp(static_cast<size_t>(N)), arc(static_cast<size_t>(N));
  ScanReport rep;
  rep.grid_h = h;
  rep.immersion = std::numeric_limits<double>::infinity();
  double maxval = 0.0;
  double max_full = 0.0;
  for (int i = 0; i < N; ++i) {
    const double t = lo + h * i;
    std::vector<double> d1(static_cast<size_t>(m));
    eval_table(T, t, &V[size_t(i) * size_t(m)], d1.data(), nullptr);
    double full2 = 0.0, proj2 = 0.0;
    for (int k = 0; k < m; ++k) {
      full2 += d1[size_t(k)] * d1[size_t(k)];
      if (k < planar) proj2 += d1[size_t(k)] * d1[size_t(k)];
      maxval = std::max(maxval, std::abs(V[size_t(i) * size_t(m) + size_t(k)]));
    }
    sp[size_t(i)] = std::sqrt(full2);
    rep.immersion = std::min(rep.immersion, sp[size_t(i)]);
    rep.max_speed = std::max(rep.max_speed, std::sqrt(proj2));
    max_full = std::max(max_full, sp[size_t(i)]);
    arc[size_t(i)] = (i == 0) ? 0.0 : arc[size_t(i) - 1] + 0.5 * (sp[size_t(i)] + sp[size_t(i) - 1]) * h;
  }

  auto dist2 = [&](int i, int j) {
    double s = 0.0;
    const double* a = &V[size_t(i) * size_t(m)];
    const double* b = &V[size_t(j) * size_t(m)];
    for (int k = 0; k < m; ++k) {
      const double d = a[k] - b[k];
      s += d * d;
    }
    return s;
  };

  // Rolling rows of the pair-distance lattice; keep genuine local minima
  // (chord short against arc, so not two neighbours along the curve).
  std::vector<double> row_prev(static_cast<size_t>(N)), row_cur(static_cast<size_t>(N)),
      row_next(static_cast<size_t>(N));
  auto fill_row = [&](int i, std::vector<double>& row) {
    for (int j = 0; j < N; ++j) row[size_t(j)] = dist2(i, j);
  };
  struct Cand {
    double d2;
    int i, j;
  };
  std::vector<Cand> cands;
  const double inf = std::numeric_limits<double>::infinity();
  fill_row(0, row_cur);
  fill_row(std::min(1, N - 1), row_next);
  double unrefined_floor = inf;
  for (int i = 0; i < N; ++i) {
    if (i > 0) {
      row_prev.swap(row_cur);
      row_cur.swap(row_next);
      if (i + 1 < N) fill_row(i + 1, row_next);
    }
    for (int j = i + 2; j < N; ++j) {
      const double d2v = row_cur[size_t(j)];
      auto nb = [&](const std::vector<double>& row, int valid, int jj) {
        if (valid < 0 || valid >= N || jj < 0 || jj >= N) return inf;
        return row[size_t(jj)];
      };
      const bool is_min = d2v <= nb(row_cur, i, j - 1) && d2v <= nb(row_cur, i, j + 1) &&
                          d2v <= nb(row_prev, i - 1, j - 1) && d2v <= nb(row_prev, i - 1, j) &&
                          d2v <= nb(row_prev, i - 1, j + 1) && d2v <= nb(row_next, i + 1, j - 1) &&
                          d2v <= nb(row_next, i + 1, j) && d2v <= nb(row_next, i + 1, j + 1);
      if (!is_min) continue;
      const double chord = std::sqrt(d2v);
      const double seg = arc[size_t(j)] - arc[size_t(i)];
      if (!(chord < 0.5 * seg)) continue;
      cands.push_back({d2v, i, j});
    }
  }

  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d2 < b.d2; });
  const double thresh = 10.0 * h * rep.max_speed;
  size_t refine = 0;
  while (refine < cands.size() && refine < 2000 &&
         (refine < 400 || std::sqrt(cands[refine].d2) < thresh))
    ++refine;

  const double coincide_tol = 1e-8 * (1.0 + maxval);
  std::set<std::pair<long, long>> seen;
  for (size_t k = 0; k < cands.size(); ++k) {
    if (k >= refine) {
      unrefined_floor =
          std::min(unrefined_floor, std::max(std::sqrt(cands[k].d2) - h * max_full, 0.0));
      continue;
    }
    double t1 = lo + h * cands[k].i;
    double t2 = lo + h * cands[k].j;
    double dist = 0.0;
    if (!newton_pair(T, lo, hi, h, t1, t2, dist)) continue;
    const long k1 = std::lround(t1 / (0.25 * h));
    const long k2 = std::lround(t2 / (0.25 * h));
    if (!seen.insert({k1, k2}).second) continue;
    NearPair np;
    np.t1 = t1;
    np.t2 = t2;
    np.dist = dist;
    double p2 = 0.0;
    const auto va = c.value(t1);
    const auto vb = c.value(t2);
    for (int q = 0; q < planar; ++q) {
      const double d = va[size_t(q)] - vb[size_t(q)];
      p2 += d * d;
    }
    np.proj_dist = std::sqrt(p2);
    np.z_gap = std::abs(va.back() - vb.back());
    rep.near_pairs.push_back(np);
    rep.separation = std::min(rep.separation, dist);
    if (dist < coincide_tol) rep.double_points.push_back(np);
  }
  rep.separation = std::min(rep.separation, unrefined_floor);
  std::sort(rep.near_pairs.begin(), rep.near_pairs.end(),
            [](const NearPair& a, const NearPair& b) { return a.dist < b.dist; });
  if (rep.near_pairs.size() > 64) rep.near_pairs.resize(64);
  return rep;
}

namespace {

Cheb linear_poly(double lo, double hi, double a, double b) {
  // a*t + b on [lo, hi] in the T basis
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  return Cheb(lo, hi, {a * mid + b, a * half});
}

double sup_on_grid(const Cheb& p, double lo, double hi, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s = std::max(s, std::abs(p.eval(lo + (hi - lo) * i / double(n - 1))));
  return s;
}

}  // namespace

ResolveResult resolve_double_points(const LegendrianPolynomial& c, double lo, double hi,
                                    double c0_budget, double margin, std::uint64_t seed) {
  ResolveResult res;
  res.curve = c;
  ScanReport scan = double_point_scan(c, lo, hi);
  const double speed_floor = 1e-9 * (1.0 + scan.max_speed);
  if (scan.immersion <= speed_floor) {
    res.ok = false;
    res.message = "projection immersion precondition failed";
    return res;
  }
  std::mt19937_64 rng(seed);
  const bool prefer_y = (rng() & 1u) != 0;

  auto fix_list = [&](const ScanReport& s) {
    std::vector<NearPair> fix = s.double_points;
    const double proj_tol = 4.0 * s.grid_h * s.max_speed;
    for (const auto& np : s.near_pairs)
      if (np.dist >= 1e-8 && np.proj_dist < proj_tol && np.z_gap < margin) fix.push_back(np);
    return fix;
  };

  for (res.rounds = 0; res.rounds < 8; ++res.rounds) {
    const auto fixes = fix_list(scan);
    if (fixes.empty()) break;
    const NearPair worst = fixes.front();
    const double t1 = worst.t1, t2 = worst.t2;

    Cheb q = linear_poly(lo, hi, 1.0, -t1) * linear_poly(lo, hi, 1.0, -t2);
    std::vector<Cheb> tails = {linear_poly(lo, hi, 0.0, 1.0), linear_poly(lo, hi, 1.0, 0.0)};
    double best_a = 0.0;
    Cheb best_q = q;
    bool best_on_y = false;
    for (int ty = 0; ty < 2; ++ty) {
      const bool on_y = prefer_y ? (ty == 0) : (ty == 1);
      for (const auto& tail : tails) {
        Cheb qq = q * tail;
        const double sup = sup_on_grid(qq, lo, hi, 1024);
        if (sup <= 0.0) continue;
        qq *= 1.0 / sup;
        const double A = on_y ? -loop_area({qq}, {res.curve.X[0]}, t1, t2)
                              : loop_area({qq}, {res.curve.Y[0]}, t1, t2);
        if (std::abs(A) > std::abs(best_a)) {
          best_a = A;
          best_q = qq;
          best_on_y = on_y;
        }
      }
    }
    const auto va = res.curve.value(t1);
    const auto vb = res.curve.value(t2);
    const double g0 = vb.back() - va.back();
    const double target = (g0 >= 0.0 ? 1.0 : -1.0) * 1.25 * margin;
    if (std::abs(best_a) < 1e-14) {
      res.ok = false;
      res.message = "no area-bending direction at the pair";
      res.t1 = t1;
      res.t2 = t2;
      return res;
    }
    const double delta = (target - g0) / best_a;
    std::vector<Cheb> nx = res.curve.X, ny = res.curve.Y;
    if (best_on_y)
      ny[0] += best_q * delta;
    else
      nx[0] += best_q * delta;
    LegendrianPolynomial next = make_legendrian(std::move(nx), std::move(ny), res.curve.z0);

    double used = 0.0;
    for (int i = 0; i < 2049; ++i) {
      const double t = lo + (hi - lo) * i / 2048.0;
      const auto a = next.value(t);
      const auto b = c.value(t);
      double s = 0.0;
      for (size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      used = std::max(used, std::sqrt(s));
    }
    if (used > c0_budget) {
      res.ok = false;
      res.message = "C0 budget too small to separate the loop";
      res.t1 = t1;
      res.t2 = t2;
      return res;
    }
    res.curve = std::move(next);
    res.c0_used = used;
    scan = double_point_scan(res.curve, lo, hi);
  }
  if (!fix_list(scan).empty()) {
    res.ok = false;
    res.message = "double points persist after maximum rounds";
    res.t1 = fix_list(scan).front().t1;
    res.t2 = fix_list(scan).front().t2;
  }
  return res;
}

namespace {

// Stage-independent oscillator controller, built once on [-J, J]. Stages
// restrict it, so consecutive stages share the loop geometry on the core
// segment exactly and their C1 gap reduces to two fit residuals.
struct Controller {
  bool ok = false;
  std::string err;
  int n = 1;
  double J = 1.0;
  double share = 0.8;
  double phase0 = 0.4;
  std::vector<Cheb> bx, by;
  Cheb bz;
  int base_deg = 0;
  double base_res = 0.0;
  Cheb R, Racc;
  bool loops = false;
  double sigma = 0.0;
  Cheb rate, theta;
  const TargetCurve* tgt = nullptr;

  double svalue(double t) const { return share * tgt->eps(t); }

  // planar components of the designed stage curve
  void designed(double t, double* out) const {
    for (int i = 0; i < n; ++i) {
      out[i] = bx[size_t(i)].eval(t);
      out[n + i] = by[size_t(i)].eval(t);
    }
    if (loops) {
      const double s = svalue(t);
      const double xb = out[0];
      const double rr = R.eval(t);
      const double root = std::sqrt(rr * rr + sigma * sigma);
      const double a = s;
      const double B = (s / std::sqrt(1.0 + xb * xb)) * (rr / root);
      const double th = theta.eval(t);
      out[0] += a * std::sin(th);
      out[n] += B * std::cos(th);
    }
  }

  double phi0() const {
    if (!loops) return 0.0;
    const double xb = bx[0].eval(0.0);
    const double s = svalue(0.0);
    const double rr = R.eval(0.0);
    const double root = std::sqrt(rr * rr + sigma * sigma);
    const double B = (s / std::sqrt(1.0 + xb * xb)) * (rr / root);
    return -xb * B * std::cos(phase0);
  }
};

Controller build_controller(const TargetCurve& target, int J, double share, double phase0,
                            const CarlemanOptions& opt) {
  Controller ctl;
  ctl.n = target.n;
  ctl.J = double(J);
  ctl.share = share;
  ctl.phase0 = phase0;
  ctl.tgt = &target;
  const int nc = 2 * target.n + 1;
  const auto grid = uniform_grid(-ctl.J, ctl.J, 4097);
  std::vector<std::vector<double>> fvals(static_cast<size_t>(nc));
  std::vector<double> evals(grid.size());
  double scale = 0.0, min_eps = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < grid.size(); ++i) {
    const auto v = target.f0(grid[i]);
    if (int(v.size()) != nc) throw std::invalid_argument("carleman_run: f0 dimension mismatch");
    for (int k = 0; k < nc; ++k) {
      fvals[size_t(k)].push_back(v[size_t(k)]);
      scale = std::max(scale, std::abs(v[size_t(k)]));
    }
    evals[i] = target.eps(grid[i]);
    if (!(evals[i] > 0.0)) throw std::invalid_argument("carleman_run: eps must be positive");
    min_eps = std::min(min_eps, evals[i]);
  }

  const double base_tol = std::max(1e-13 * (1.0 + scale), 5e-4 * min_eps);
  ProjectionFit base;
  for (int deg = 16; deg <= 256; deg *= 2) {
    ProjectionData data;
    data.lo = -ctl.J;
    data.hi = ctl.J;
    data.t = cheb_points(-ctl.J, ctl.J, std::max(64, 3 * deg));
    data.values.assign(size_t(nc), {});
    for (double t : data.t) {
      const auto v = target.f0(t);
      for (int k = 0; k < nc; ++k) data.values[size_t(k)].push_back(v[size_t(k)]);
    }
    base = fit_projection(data, deg);
    double res = 0.0;
    for (size_t i = 0; i < grid.size(); ++i)
      for (int k = 0; k < nc; ++k)
        res = std::max(res,
                       std::abs(base.comps[size_t(k)].eval(grid[i]) - fvals[size_t(k)][i]));
    ctl.base_res = res;
    ctl.base_deg = deg;
    if (res <= base_tol) break;
  }
  if (ctl.base_res > 0.3 * min_eps) {
    ctl.err = "target base fit exceeds tolerance budget";
    return ctl;
  }
  for (int i = 0; i < target.n; ++i) {
    ctl.bx.push_back(base.comps[size_t(i)]);
    ctl.by.push_back(base.comps[size_t(target.n + i)]);
  }
  ctl.bz = base.comps[size_t(2 * target.n)];

  ctl.R = ctl.bz.derivative();
  for (int i = 0; i < target.n; ++i) ctl.R += ctl.bx[size_t(i)] * ctl.by[size_t(i)].derivative();
  ctl.Racc = ctl.R.antiderivative(0.0, 0.0);
  double need = 0.0, maxR = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    need = std::max(need, std::abs(ctl.Racc.eval(grid[i])) / (0.45 * evals[i]));
    maxR = std::max(maxR, std::abs(ctl.R.eval(grid[i])));
  }
  ctl.loops = need > 1.0;
  if (ctl.loops) {
    ctl.sigma = opt.sigma_frac * maxR;
    auto rate_fn = [&](double t) {
      const double rr = ctl.R.eval(t);
      const double xb = ctl.bx[0].eval(t);
      const double s = ctl.svalue(t);
      return 2.0 * std::sqrt(rr * rr + ctl.sigma * ctl.sigma) * std::sqrt(1.0 + xb * xb) /
             (s * s);
    };
    double sup_rate = 0.0;
    for (size_t i = 0; i < grid.size(); ++i) sup_rate = std::max(sup_rate, rate_fn(grid[i]));
    bool fitted = false;
    for (int deg = 64; deg <= 2048; deg *= 2) {
      const auto pts = cheb_points(-ctl.J, ctl.J, deg + 1);
      std::vector<double> vals(pts.size());
      for (size_t i = 0; i < pts.size(); ++i) vals[i] = rate_fn(pts[i]);
      ctl.rate = cheb_interpolant(-ctl.J, ctl.J, deg, vals);
      double res = 0.0;
      for (size_t i = 0; i < grid.size(); i += 2)
        res = std::max(res, std::abs(ctl.rate.eval(grid[i]) - rate_fn(grid[i])));
      if (res <= 1e-9 * (1.0 + sup_rate)) {
        fitted = true;
        break;
      }
    }
    if (!fitted) {
      ctl.err = "oscillator rate fit did not converge";
      return ctl;
    }
    ctl.theta = ctl.rate.antiderivative(0.0, phase0);
  }
  ctl.ok = true;
  return ctl;
}

}  // namespace

CarlemanResult carleman_run(const TargetCurve& target, int J, double eta0,
                            const CarlemanOptions& opt) {
  if (J < 1) throw std::invalid_argument("carleman_run: J must be >= 1");
  if (!(eta0 > 0.0)) throw std::invalid_argument("carleman_run: eta0 must be positive");
  if (target.n < 1) throw std::invalid_argument("carleman_run: n must be >= 1");
  if (!target.f0 || !target.eps) throw std::invalid_argument("carleman_run: missing evaluators");

  CarlemanResult last;
  for (int attempt = 0; attempt < 6; ++attempt) {
    const double share = opt.budget_share * std::pow(0.85, attempt);
    const double phase0 = 0.4 + 0.37 * attempt;
    Controller ctl = build_controller(target, J, share, phase0, opt);
    CarlemanResult result;
    if (!ctl.ok) {
      result.failure = ctl.err;
      return result;
    }

    const int nc = 2 * target.n + 1;
    bool retryable = false;
    result.ok = true;
    double eta_prev = eta0;
    for (int j = 1; j <= J && result.ok; ++j) {
      const double lo = -double(j), hi = double(j);

      double band = 0.0;
      if (ctl.loops)
        for (int i = 0; i < 2049; ++i) {
          const double t = lo + (hi - lo) * i / 2048.0;
          band = std::max(band, ctl.rate.eval(t) * std::sqrt(double(j) * j - t * t));
        }
      int deg = std::min(opt.degree_cap, round_up32(1.12 * band + 48.0 + ctl.base_deg));

      const auto vgrid = uniform_grid(lo, hi, 8193);
      std::vector<std::vector<double>> dvals(size_t(2 * target.n),
                                             std::vector<double>(vgrid.size()));
      double dscale = 0.0, min_eps_stage = std::numeric_limits<double>::infinity();
      {
        std::vector<double> buf(size_t(2 * target.n));
        for (size_t i = 0; i < vgrid.size(); ++i) {
          ctl.designed(vgrid[i], buf.data());
          for (size_t k = 0; k < buf.size(); ++k) {
            dvals[k][i] = buf[k];
            dscale = std::max(dscale, std::abs(buf[k]));
          }
          min_eps_stage = std::min(min_eps_stage, target.eps(vgrid[i]));
        }
      }
      const double fit_tol =
          std::max(1e-11 * (1.0 + dscale),
                   std::min(1e-8 * (1.0 + dscale), 0.02 * ctl.share * min_eps_stage));

      ProjectionFit fit;
      double fit_res = std::numeric_limits<double>::infinity();
      while (true) {
        ProjectionData data;
        data.lo = lo;
        data.hi = hi;
        data.t = cheb_points(lo, hi, std::max(512, int(2.6 * (deg + 1))));
        data.values.assign(size_t(2 * target.n), {});
        std::vector<double> buf(size_t(2 * target.n));
        for (double t : data.t) {
          ctl.designed(t, buf.data());
          for (size_t k = 0; k < buf.size(); ++k) data.values[k].push_back(buf[k]);
        }
        fit = fit_projection(data, deg);
        fit_res = 0.0;
        for (size_t i = 0; i < vgrid.size(); ++i)
          for (size_t k = 0; k < dvals.size(); ++k)
            fit_res = std::max(fit_res, std::abs(fit.comps[k].eval(vgrid[i]) - dvals[k][i]));
        if (fit_res <= fit_tol) break;
        if (deg >= opt.degree_cap) break;
        deg = std::min(opt.degree_cap, round_up32(1.4 * deg));
      }
      if (fit_res > fit_tol) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "stage %d: fit residual %.3e above tolerance %.3e at degree cap %d", j,
                      fit_res, fit_tol, opt.degree_cap);
        result.ok = false;
        result.failure = msg;
        break;
      }

      std::vector<Cheb> X(fit.comps.begin(), fit.comps.begin() + target.n);
      std::vector<Cheb> Y(fit.comps.begin() + target.n, fit.comps.end());
      const double z0 = target.f0(0.0)[size_t(2 * target.n)] + ctl.phi0();
      LegendrianPolynomial stage = make_legendrian(std::move(X), std::move(Y), z0);

      auto eps_margin_of = [&](const LegendrianPolynomial& cur, double* sup_dev) {
        double margin = std::numeric_limits<double>::infinity();
        double sup = 0.0;
        for (int i = 0; i < opt.check_grid + 1; ++i) {
          const double t = lo + (hi - lo) * i / double(opt.check_grid);
          const auto v = cur.value(t);
          const auto f = target.f0(t);
          double d2 = 0.0;
          for (int k = 0; k < nc; ++k) {
            const double d = v[size_t(k)] - f[size_t(k)];
            d2 += d * d;
          }
          const double dev = std::sqrt(d2);
          sup = std::max(sup, dev);
          margin = std::min(margin, target.eps(t) - dev);
        }
        if (sup_dev) *sup_dev = sup;
        return margin;
      };

      double sup_dev = 0.0;
      double margin = eps_margin_of(stage, &sup_dev);
      if (margin <= 0.0) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "stage %d: eps budget violated by %.3e", j, -margin);
        result.ok = false;
        result.failure = msg;
        retryable = true;
        break;
      }

      ScanReport scan = double_point_scan(stage, lo, hi, opt.scan_grid);
      if (!scan.double_points.empty()) {
        ResolveResult rr = resolve_double_points(stage, lo, hi, 0.35 * margin,
                                                 std::min(1e-3, 0.2 * margin), opt.seed + j);
        if (!rr.ok) {
          result.ok = false;
          result.failure = "stage double points could not be separated: " + rr.message;
          retryable = true;
          break;
        }
        stage = rr.curve;
        margin = eps_margin_of(stage, &sup_dev);
        scan = double_point_scan(stage, lo, hi, opt.scan_grid);
        if (margin <= 0.0 || !scan.double_points.empty()) {
          result.ok = false;
          result.failure = "stage invalid after double point separation";
          retryable = true;
          break;
        }
      }

      InductionRecord rec;
      rec.j = j;
      rec.degree = deg;
      rec.eta_prev = eta_prev;
      rec.sup_dev = sup_dev;
      rec.eps_margin = margin;
      rec.separation = scan.separation;
      rec.immersion = scan.immersion;
      rec.pass_close = margin > 0.0;
      rec.pass_embed = scan.double_points.empty() && scan.immersion > 0.0;

      double eta = std::min(scan.separation, scan.immersion) / 4.0;
      eta = std::min(eta, 0.499 * eta_prev);
      rec.eta = eta;
      rec.pass_eta = eta > 0.0 && eta < 0.5 * eta_prev;

      double realness = 0.0;
      for (int k = 0; k < 8; ++k) {
        const cplx zeta = 0.3 * double(j) *
                          std::exp(cplx(0.0, 0.3 + 0.7 * k));
        const auto v1 = stage.value_at(std::conj(zeta));
        const auto v2 = stage.value_at(zeta);
        for (int q = 0; q < nc; ++q)
          realness = std::max(realness, std::abs(v1[size_t(q)] - std::conj(v2[size_t(q)])));
      }
      rec.realness = realness;
      rec.pass_real = realness <= 1e-12;

      if (j >= 2) {
        const auto& prev = result.stages.back();
        const double clo = -(double(j) - 1.0), chi = double(j) - 1.0;
        double dev = 0.0;
        for (int i = 0; i < 4001; ++i) {
          const double t = clo + (chi - clo) * i / 4000.0;
          const auto a = stage.value(t);
          const auto b = prev.value(t);
          const auto da = stage.velocity(t);
          const auto db = prev.velocity(t);
          double d0 = 0.0, d1 = 0.0;
          for (int k = 0; k < nc; ++k) {
            d0 += (a[size_t(k)] - b[size_t(k)]) * (a[size_t(k)] - b[size_t(k)]);
            d1 += (da[size_t(k)] - db[size_t(k)]) * (da[size_t(k)] - db[size_t(k)]);
          }
          dev = std::max(dev, std::max(std::sqrt(d0), std::sqrt(d1)));
        }
        rec.c1_dev_core = dev;
        rec.pass_prev = dev < eta_prev;

        int covered = 0, total = 0;
        double disc_dev = 0.0;
        for (int ir = 1; ir <= 8; ++ir)
          for (int ia = 0; ia < 64; ++ia) {
            const double r = chi * ir / 8.0;
            const cplx zeta = r * std::exp(cplx(0.0, 2.0 * M_PI * ia / 64.0));
            const auto a = stage.value_at(zeta);
            const auto b = prev.value_at(zeta);
            ++total;
            double mag = 0.0, d2 = 0.0;
            for (int k = 0; k < nc; ++k) {
              mag = std::max(mag, std::max(std::abs(a[size_t(k)]), std::abs(b[size_t(k)])));
              d2 += std::norm(a[size_t(k)] - b[size_t(k)]);
            }
            if (mag < 1e6) {
              ++covered;
              disc_dev = std::max(disc_dev, std::sqrt(d2));
            }
          }
        rec.disc_dev = disc_dev;
        rec.disc_coverage = double(covered) / double(total);
      } else {
        rec.pass_prev = true;
      }

      if (!rec.passed()) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "stage %d: certification failed", j);
        result.ok = false;
        result.failure = msg;
        retryable = true;
      }
      result.records.push_back(rec);
      result.stages.push_back(std::move(stage));
      eta_prev = rec.eta;
    }

    if (result.ok) return result;
    last = std::move(result);
    if (!retryable) return last;
  }
  return last;
}

}  // namespace legendrian
}  // namespace holodisc
