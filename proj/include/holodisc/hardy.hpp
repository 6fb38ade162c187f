#pragma once
// Holomorphic multipliers on the unit disc driven by even boundary densities.
//
// A density u on the circle with u(-theta) = u(theta), vanishing on declared
// arcs around the boundary points +-1, determines a unique holomorphic
// h = u + i v on the closed disc with h(conj z) = conj h(z) and Im h(0) = 0.
// We store u as a cosine series; then h(z) = a_0 + sum_k a_k z^k, which is the
// fast evaluation path.  The Schwarz integral is kept as a slow cross-check.

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace holodisc::hardy {

using cplx = std::complex<double>;

inline constexpr int kAngularGrid = 4096;
inline constexpr int kModeCap = 2048;

struct BoundaryDensity {
  std::vector<double> a;          // cosine coefficients, a[0] = circle mean
  double mask_halfwidth = 0.0;    // u must vanish for dist(theta, {0, pi}) < this

  double eval(double theta) const;
  // Samples on the uniform angular grid theta_i = 2 pi i / n.
  std::vector<double> grid(int n = kAngularGrid) const;
  double mean() const { return a.empty() ? 0.0 : a[0]; }
  double max_abs_coeff() const;

  // Builds the cosine series from samples on the uniform angular grid
  // (size kAngularGrid), symmetrizing u(theta) <- (u(theta) + u(-theta)) / 2.
  static BoundaryDensity from_samples(const std::vector<double>& u,
                                      double mask_halfwidth,
                                      int max_modes = kModeCap);
};

BoundaryDensity operator+(const BoundaryDensity& p, const BoundaryDensity& q);
BoundaryDensity operator*(double s, const BoundaryDensity& p);

// Smooth even bump pair at angles +-theta0, each arc of the given width,
// peak value `height`.  Throws std::invalid_argument when the arcs meet the
// exclusion zones around +-1 of halfwidth mask_halfwidth.
BoundaryDensity build_bump(double theta0, double width, double height,
                           double mask_halfwidth = 0.1);

struct MultiplierH {
  BoundaryDensity density;

  cplx eval(cplx z) const;    // requires |z| <= 1 (small slack); throws otherwise
  cplx deriv(cplx z) const;
  double u(cplx z) const { return eval(z).real(); }
  double c0_norm() const;     // sup |h| over the closed disc (boundary scan)
  double c1_norm() const;     // c0 plus sup |h'|
};

MultiplierH multiplier_from_density(const BoundaryDensity& d);

// Slow reference path: trapezoid discretization of the Schwarz integral
// (1/2pi) int (e^{it}+z)/(e^{it}-z) u(e^{it}) dt over u sampled on a uniform
// grid.  Interior points only.
cplx poisson_quadrature(const std::vector<double>& u_grid, cplx z);

cplx poisson_hilbert_eval(const BoundaryDensity& u, cplx z);

enum class Cone { none, plus, minus };

struct HClassReport {
  double sym_err = 0.0;          // max |h(conj z) - conj h(z)| on a grid
  double endpoint_err = 0.0;     // max(|h(1)|, |h(-1)|)
  double imag_on_axis = 0.0;     // max |Im h(x)|, x in [-1, 1]
  double mask_violation = 0.0;   // max |u| over the masked arcs
  double min_interior_u = 0.0;   // min Re h over an interior grid
  double hopf_left[2] = {0, 0};  // one-sided du/dx quotients at -1, offsets 1e-2, 1e-3
  double hopf_right[2] = {0, 0}; // same at +1 (expected negative for the plus cone)
  bool nontrivial = false;

  bool space_pass() const;
  bool cone_pass(Cone cone) const;
};

HClassReport h_class_verify(const MultiplierH& h, Cone cone);

// Family of multipliers whose value pairs are R-linearly independent with
// parallelogram area >= margin at every requested point.
struct SpanningReport {
  std::vector<MultiplierH> members;
  bool ok = false;
  double worst_area = 0.0;
  std::vector<cplx> failing;     // points still under margin when capped
};

SpanningReport spanning_family(const std::vector<cplx>& points, double margin,
                               int cap = 16, double mask_halfwidth = 0.1);

// Pointwise exponent sum_j t_j h_j(z) of a weighted family.
cplx family_exponent(const std::vector<MultiplierH>& family,
                     const std::vector<double>& t, cplx z);

using DiscMap = std::function<std::array<cplx, 2>(cplx)>;

struct LevelReport {
  double rho_h_max_real_axis = 0.0;
  double rho_min = 0.0, rho_max = 0.0;
  std::vector<cplx> near_zero;          // grid points with |rho_h| < band
  double transversality_margin = 0.0;   // min |grad rho_h| there; +inf if empty
  double band = 0.0;
};

// rho = log |f|, rho_h = rho - sum_j t_j u_j on a raster over the closed disc.
LevelReport rho_levels(const DiscMap& f,
                       const std::vector<MultiplierH>& family,
                       const std::vector<double>& t,
                       int grid = 256, double band = 0.02);

struct PerturbOptions {
  int max_draws = 64;
  double t_min = 1e-4;
  double t_max = 5e-2;
  double transversality_threshold = 1e-3;
  double obstacle_threshold = 1e-3;
  int boundary_grid = 2048;
  int interior_grid = 256;
  double end_arc = 0.05;     // boundary arcs around +-1 excluded from norm checks
  double band = 0.02;
};

struct PerturbCertificate {
  bool accepted = false;
  int draws_used = 0;
  std::uint64_t seed = 0;
  std::vector<double> t;
  double interior_norm_margin = 0.0;   // 1 - max |f_t| over (-1, 1)
  double boundary_norm_margin = 0.0;   // min (|f_t| - ((1-eta)|f| + eta)) off the end arcs
  double transversality_margin = 0.0;
  double obstacle_clearance = 0.0;     // min dist of f_t(grid) to obstacle samples
  double perturbation_c1 = 0.0;        // C^1 size of the exponent
  double eta = 0.0;
};

// Seeks t with positive entries making f_t = exp(-sum t_j h_j) f satisfy the
// norm, transversality, and obstacle-avoidance margins.  Never throws on a
// failed search; the certificate carries the best margins found.
PerturbCertificate general_position_perturb(
    const DiscMap& f, const std::vector<std::array<cplx, 2>>& obstacle,
    double eta, const std::vector<MultiplierH>& family, std::uint64_t seed,
    const PerturbOptions& opt = {});

}  // namespace holodisc::hardy
