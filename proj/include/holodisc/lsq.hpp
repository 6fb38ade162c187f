#pragma once

// Equality-constrained least squares and Chebyshev-basis fitting.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "holodisc/cheb.hpp"

namespace holodisc {

struct LsqReport {
  bool feasible = true;        // constraint system consistent
  int constraint_rank = 0;
  int constraint_count = 0;
  double constraint_residual = 0.0;  // inconsistency of C x = d after projection
  double residual2 = 0.0;            // ||A x - b||_2 of the solved system
};

// min ||A x - b||_2 subject to C x = d (C may be empty). Nullspace method.
Eigen::VectorXd constrained_lsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                                LsqReport* report = nullptr);

// One fitting condition: match d-th derivative at x to value, with weight.
struct FitRow {
  double x = 0.0;
  int deriv = 0;  // 0, 1, or 2
  double value = 0.0;
  double weight = 1.0;
};

// Exact interpolation condition on the d-th derivative at x.
struct FitConstraint {
  double x = 0.0;
  int deriv = 0;
  double value = 0.0;
};

Cheb cheb_fit(double lo, double hi, int deg, const std::vector<FitRow>& rows,
              const std::vector<FitConstraint>& constraints = {}, LsqReport* report = nullptr);

}  // namespace holodisc
