#pragma once

// Polynomial Legendrian approximation in R^{2n+1} with the form
// dz + sum x_i dy_i: projection fitting, exact z-integration, double-point
// separation, and the staged induction that keeps every stage a certified
// embedding while tracking the target in fine C0.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "holodisc/cheb.hpp"
#include "holodisc/contact.hpp"
#include "holodisc/lsq.hpp"

namespace holodisc {
namespace legendrian {

using contact::RealJetSample;

struct TargetCurve {
  int n = 1;
  std::function<std::vector<double>(double)> f0;  // packed (x_1..x_n, y_1..y_n, z)
  std::function<double(double)> eps;              // positive tolerance
};

// Curve whose z-component is the antiderivative of -sum X_i Y_i'; dZ stores
// that product at coefficient level so the contact residual never sees the
// derivative round trip.
struct LegendrianPolynomial {
  std::vector<Cheb> X, Y;
  Cheb Z;
  Cheb dZ;
  double z0 = 0.0;

  int dim() const { return int(X.size()); }
  double lo() const { return Z.lo; }
  double hi() const { return Z.hi; }
  std::vector<double> value(double t) const;     // (x, y, z)
  std::vector<double> velocity(double t) const;  // (x', y', z')
  RealJetSample jet(double t) const;
  std::vector<cplx> value_at(cplx zeta) const;
};

LegendrianPolynomial make_legendrian(std::vector<Cheb> X, std::vector<Cheb> Y, double z0);

// Real parts of the coefficients; as a function (p(z) + conj p(conj z))/2.
std::vector<Cheb> symmetrize_poly(const std::vector<ZCheb>& p);

// Samples of a planar projection curve, optionally with first derivatives.
struct ProjectionData {
  double lo = -1.0, hi = 1.0;
  std::vector<double> t;
  std::vector<std::vector<double>> values;   // [component][sample]
  std::vector<std::vector<double>> dvalues;  // optional, same shape
  double dweight = 1.0;                      // weight on derivative rows
};

struct ProjectionConstraint {
  int comp = 0;
  double t = 0.0;
  int deriv = 0;
  double value = 0.0;
};

struct ProjectionFit {
  std::vector<Cheb> comps;
  bool feasible = true;
  int degree = 0;
  double c0_residual = 0.0;
  double c1_residual = 0.0;
  LsqReport report;  // rank diagnostics of the worst component
};

ProjectionFit fit_projection(const ProjectionData& data, int degree,
                             const std::vector<ProjectionConstraint>& constraints = {});

// Z with Z' = -sum X_i Y_i' at coefficient level and Z(0) = z0.
Cheb z_integrate(const std::vector<Cheb>& X, const std::vector<Cheb>& Y, double z0);

// -int_{t1}^{t2} sum X_i Y_i' dt via the antiderivative polynomial.
double loop_area(const std::vector<Cheb>& X, const std::vector<Cheb>& Y, double t1, double t2);

// Close-approach scan of the full curve on [lo, hi]: uniform grid, local
// minima of the pairwise distance kept when the chord is short against the
// arc (a genuine approach, not two neighbours along the curve), refined by
// Newton on |f(t1)-f(t2)|^2.
struct NearPair {
  double t1 = 0.0, t2 = 0.0;
  double dist = 0.0;       // full-curve distance
  double proj_dist = 0.0;  // projection distance
  double z_gap = 0.0;
};

struct ScanReport {
  std::vector<NearPair> near_pairs;
  std::vector<NearPair> double_points;  // dist below coincidence tolerance
  double separation = std::numeric_limits<double>::infinity();
  double immersion = 0.0;  // min |f'| on the grid
  double max_speed = 0.0;  // max projection speed
  double grid_h = 0.0;
};

ScanReport double_point_scan(const LegendrianPolynomial& c, double lo, double hi, int grid = 4096);

// Separates every full-curve double point by bending the enclosed signed
// area with a cubic that vanishes at the pair, staying inside c0_budget.
struct ResolveResult {
  LegendrianPolynomial curve;
  bool ok = true;
  std::string message;
  double t1 = 0.0, t2 = 0.0;  // offending pair when !ok
  int rounds = 0;
  double c0_used = 0.0;
};

ResolveResult resolve_double_points(const LegendrianPolynomial& c, double lo, double hi,
                                    double c0_budget, double margin, std::uint64_t seed = 1);

struct InductionRecord {
  int j = 0;
  int degree = 0;
  double eta = 0.0;
  double eta_prev = 0.0;
  double sup_dev = 0.0;     // max |f_j - f0| on the check grid
  double eps_margin = 0.0;  // min of eps(t) - |f_j(t) - f0(t)|
  double c1_dev_core = 0.0; // C1 distance to the previous stage on its segment
  double realness = 0.0;
  double separation = 0.0;
  double immersion = 0.0;
  double disc_dev = 0.0;      // diagnostic deviation on the complex disc
  double disc_coverage = 0.0; // fraction of disc grid below the value ceiling
  bool pass_real = false, pass_embed = false, pass_close = false;
  bool pass_prev = false, pass_eta = false;
  bool passed() const { return pass_real && pass_embed && pass_close && pass_prev && pass_eta; }
};

struct CarlemanOptions {
  int degree_cap = 1024;
  double budget_share = 0.8;  // fraction of eps given to the oscillator
  double sigma_frac = 0.25;   // drift smoothing relative to max |R|
  int scan_grid = 4096;
  int check_grid = 10000;
  std::uint64_t seed = 1;
};

struct CarlemanResult {
  std::vector<LegendrianPolynomial> stages;
  std::vector<InductionRecord> records;
  bool ok = false;
  std::string failure;
};

// Stage j approximates the target on [-j, j] within eps while staying a
// certified embedding (margin eta_j, strictly halving) and C1-close to the
// previous stage on the shared segment.
CarlemanResult carleman_run(const TargetCurve& target, int J, double eta0,
                            const CarlemanOptions& opt = {});

}  // namespace legendrian
}  // namespace holodisc
