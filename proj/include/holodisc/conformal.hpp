#pragma once
// Equivariant Riemann maps on special domains and boundary-point exposing.
//
// A special domain is a Jordan neighborhood of 0 given as a polar graph
// rho(theta), invariant under the reflection group generated by conjugation
// and z -> -conj z (sym = 2) or under conjugation alone (sym = 1).  The
// normalized Riemann map of the disc onto it is represented as
// F(z) = z exp(g(z)) with real power-series coefficients g_k, so F(0) = 0,
// F'(0) > 0 and the symmetry are structural.  The boundary correspondence
// S(t) = arg F(e^{it}) solves the Theodorsen equation on a uniform grid;
// we drive it to residual 1e-10 by a Newton iteration whose linear steps
// apply the conjugation operator by FFT.
//
// expose() grows a thin symmetric finger from the base points +-a of D out
// to x_n = a(1+1/n) inside the tube V and composes with a two-monomial
// polynomial that moves x_n to b while staying eps-close to the identity in
// C^k away from V.  All certificates are measured, not assumed; the report
// carries them and ok = false with a geometry message when a budget fails.

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace holodisc::conformal {

using cplx = std::complex<double>;

struct DomainReport {
  bool ok = false;
  double min_radius = 0.0;   // min rho over the scan grid
  double sym_dev = 0.0;      // worst reflection defect of rho
  double tail = 0.0;         // max |coef| over the last 5% of the series
  double fn_gap = 0.0;       // max |series - profile closure| when both exist
  std::string message;
};

struct SpecialDomain {
  int sym = 2;                 // 2: conjugation and z -> -conj z; 1: conjugation
  std::vector<double> coef;    // cosine series of rho, coef[0] the mean
  double feature = 0.0;        // smallest angular feature scale, 0 when smooth
  // Optional exact profile; when set it is the evaluation path and the series
  // is kept for serialization and the decay check.
  std::function<double(double)> rho_fn;

  double rho(double theta) const;
  double drho(double theta) const;   // series term-wise, or a central difference
  double base() const { return rho(0.0); }
  DomainReport validate(int grid = 1 << 13) const;

  static SpecialDomain disc(double radius);
  static SpecialDomain from_profile(std::function<double(double)> f, int sym,
                                    int modes, int grid);
};

struct SolveOptions {
  int max_outer = 200;       // total Newton iterations across the ladder
  double tol = 1e-10;        // sup-norm residual target on the final grid
  int min_grid = 1 << 12;
  int max_grid = 1 << 21;
  int target_grid = 0;       // 0: pick from the profile feature scale
  bool force_homotopy = false;   // start from rho ~ 1 instead of identity warm
};

struct MapReport {
  bool converged = false;
  int iterations = 0;
  int grid = 0;
  double residual = 0.0;       // sup |v - K[log rho(t+v)]| on the grid
  double boundary_fit = 0.0;   // sup |F(e^{it}) - rho(S) e^{iS}| on a subsample
  double corr_min_slope = 0.0; // min S'(t) over the grid
  double neg_freq = 0.0;       // relative negative-frequency content of u + iv
  double cr_residual = 0.0;    // finite-difference holomorphy defect, interior
  std::vector<double> residual_history;
  std::string message;
};

class ConformalMap {
 public:
  int sym = 2;
  int grid = 0;
  std::vector<double> g;       // power-series coefficients of g, all real
  std::vector<double> S, Sp;   // boundary correspondence and S' at grid nodes
  double base_image = 1.0;     // F(1) = rho(0), exact by the node path
  double pi_image = 1.0;       // |F(-1)| = rho(pi)
  MapReport report;

  cplx eval(cplx z) const;     // closed disc, |z| <= 1 + 1e-12
  cplx deriv(cplx z) const;
  cplx deriv2(cplx z) const;
  cplx deriv3(cplx z) const;
  // Newton inversion; boundary targets are seeded from the S table.
  cplx invert(cplx w) const;
  double corr(double t) const;   // S at arbitrary t by linear interpolation
};

// Normalized Riemann map of the unit disc onto D.  Non-convergence at the
// iteration cap returns report.converged = false with the residual history;
// invalid domains throw std::invalid_argument.
ConformalMap riemann_map_special(const SpecialDomain& D,
                                 const SolveOptions& opt = {});

// theta(z) = lambda z exp(kappa sum_i w_i log(d_i^2 - z^2)): a small
// fractional power kappa of a short, binomially weighted ladder of real
// poles d_i just past the tip x_n (one-sided factors d_i - z without the
// full symmetry).  The weights difference away the leading far-field
// moments, so the push localizes inside the tube, while kappa << 1 keeps
// the displacement phase from winding; Im theta >= 0 on the upper tip
// circle (so the boundary image never crosses the real axis) and
// Re(z theta'/theta) > 0 there (starlike, hence injective on the closed
// tip disc) are certified on dense grids and stored below.  The map is
// delivered as a real-coefficient polynomial: coef holds G with
// theta = z G(z^2) under full symmetry, theta = z G(z) otherwise, and the
// interpolation pins theta(+-a) = +-a, theta(+-x_n) = +-b are restored
// exactly after truncation.
struct Exposer {
  double a = 1.0, b = 1.0, xn = 1.0;
  int n = 0;
  bool gamma_full = true;
  std::vector<double> coef;           // G coefficients, see above
  int npoles = 0;
  double pole_gap = 0.0;              // innermost d/x_n - 1
  double tol_c0 = 0.0, tol_c1 = 0.0;  // measured on the a(1+1/(2n)) circle
  double tail_ck = 0.0;               // off-tube C^k deviation, base circle
  double im_min = 0.0;                // min Im theta, upper tip semicircle
  double star_min = 0.0;              // min Re(z theta'/theta), tip circle
  double min_deriv = 0.0;             // min |theta'| over the finger hull grid
  cplx min_deriv_at{0.0, 0.0};

  int degree() const {
    int k = int(coef.size()) - 1;
    return gamma_full ? 2 * k + 1 : k + 1;
  }
  std::vector<double> poly_coeffs() const;  // c[j] multiplies z^j
  void derivs(cplx z, int order, cplx out[4]) const;
  cplx eval(cplx z) const;
  cplx deriv(cplx z) const;
  cplx deriv2(cplx z) const;
  cplx deriv3(cplx z) const;
};

// Widest pole ladder meeting the C^1 tolerance on the certification circle,
// the off-tube C^kmax tail, and the axis and starlikeness certificates, with
// the derivative bounded below on the finger hull.  tube <= 0 falls back to
// b - a.  Throws on b <= a or n <= 1/(b-a); failure across the ladder throws
// std::runtime_error carrying the limiting measurement.
Exposer build_exposer_poly(double a, double b, int n, double tolerance,
                           bool gamma_full = true, int max_degree = 60000,
                           double tube = 0.0, int kmax = 1);

struct ExposureReport {
  bool ok = false;
  double interp_err = 0.0;     // max |phi(+-a) -+ b| through the chain
  double hausdorff = 0.0;      // boundary gap of D vs D' outside V
  double inclusion_lo = 0.0;   // min rho_D' - rho_D (want >= -1e-12)
  double inclusion_hi = 0.0;   // min tube clearance of points added by D'
  double ck_dev = 0.0;         // sup over j <= k of |phi^(j) - id^(j)| off V
  double equivariance = 0.0;
  double star_margin = 0.0;    // min image-curve angular step (Jordan check)
  double rado[3] = {0, 0, 0};  // sup |psi_n - id| at n, 2n, 4n (coarse)
  int n_used = 0, grid_used = 0, k = 0;
  std::string message;
};

struct ExposureMap {
  Exposer theta;
  ConformalMap psi;           // disc -> Omega_n
  ConformalMap mu;            // disc -> D; identity when D is a disc
  bool mu_identity = true;
  double a = 1.0, b = 1.0, tube = 0.0;
  int k = 1;
  SpecialDomain omega;        // the slit-domain preimage, for diagnostics
  ExposureReport report;

  // phi = theta . psi . mu^{-1} on the closure of D.
  cplx eval(cplx z) const;
  cplx deriv(cplx z) const;
};

struct ExposeResult {
  ExposureMap map;
  SpecialDomain domain;       // D' = phi(D), base (-b, b)
};

// Exposing map for a special domain D with base (-a, a): phi fixes 0, has
// positive derivative there, sends +-a to +-b exactly, is Gamma-equivariant,
// moves nothing outside the tube V (radius `tube` around [a,b] u [-b,-a])
// by more than eps in C^k, and D' is again special with base (-b, b).
// Throws std::invalid_argument on bad parameters; geometric or convergence
// failures come back with report.ok = false and a message.
ExposeResult expose(const SpecialDomain& D, double b, double tube, double eps,
                    int k, const SolveOptions& opt = {});

// One-sided variant on the unit disc: conjugation symmetry only, exposes the
// single boundary point 1 to b inside a tube around [1, b].
ExposeResult expose_single(double b, double tube, double eps, int k,
                           const SolveOptions& opt = {});

}  // namespace holodisc::conformal
