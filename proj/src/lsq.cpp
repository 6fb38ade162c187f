#include "holodisc/lsq.hpp"

#include <stdexcept>

namespace holodisc {

Eigen::VectorXd constrained_lsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                                LsqReport* report) {
  const long n = A.cols();
  LsqReport rep;
  rep.constraint_count = int(C.rows());

  Eigen::VectorXd x;
  if (C.rows() == 0) {
    x = A.householderQr().solve(b);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C.transpose());
    const long r = qr.rank();
    rep.constraint_rank = int(r);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd R = qr.matrixR().topRows(std::min<long>(n, C.rows())).triangularView<Eigen::Upper>();
    Eigen::VectorXd dt = qr.colsPermutation().transpose() * d;

    Eigen::VectorXd u1 = R.topLeftCorner(r, r).transpose().triangularView<Eigen::Lower>().solve(dt.head(r));
    if (C.rows() > r) {
      Eigen::VectorXd extra = R.topRightCorner(r, C.rows() - r).transpose() * u1 - dt.tail(C.rows() - r);
      rep.constraint_residual = extra.cwiseAbs().maxCoeff();
      if (rep.constraint_residual > 1e-9 * (1.0 + d.cwiseAbs().maxCoeff())) rep.feasible = false;
    }
    Eigen::VectorXd x0 = Q.leftCols(r) * u1;
    if (n > r) {
      Eigen::MatrixXd N = Q.rightCols(n - r);
      Eigen::VectorXd y = (A * N).householderQr().solve(b - A * x0);
      x = x0 + N * y;
    } else {
      x = x0;
    }
  }
  rep.residual2 = (A * x - b).norm();
  if (report) *report = rep;
  return x;
}

Cheb cheb_fit(double lo, double hi, int deg, const std::vector<FitRow>& rows,
              const std::vector<FitConstraint>& constraints, LsqReport* report) {
  const int n = deg + 1;
  Eigen::MatrixXd A(long(rows.size()), n);
  Eigen::VectorXd b(long(rows.size()));
  std::vector<double> t0(static_cast<size_t>(n), 0.0), t1(t0), t2(t0);
  for (size_t i = 0; i < rows.size(); ++i) {
    const FitRow& r = rows[i];
    cheb_basis_rows(lo, hi, r.x, deg, t0.data(), t1.data(), t2.data());
    const double* row = r.deriv == 0 ? t0.data() : (r.deriv == 1 ? t1.data() : t2.data());
    for (int k = 0; k < n; ++k) A(long(i), k) = r.weight * row[size_t(k)];
    b(long(i)) = r.weight * r.value;
  }
  Eigen::MatrixXd C(long(constraints.size()), n);
  Eigen::VectorXd d(long(constraints.size()));
  for (size_t i = 0; i < constraints.size(); ++i) {
    const FitConstraint& fc = constraints[i];
    cheb_basis_rows(lo, hi, fc.x, deg, t0.data(), t1.data(), t2.data());
    const double* row = fc.deriv == 0 ? t0.data() : (fc.deriv == 1 ? t1.data() : t2.data());
    for (int k = 0; k < n; ++k) C(long(i), k) = row[size_t(k)];
    d(long(i)) = fc.value;
  }
  Eigen::VectorXd x = constrained_lsq(A, b, C, d, report);
  return Cheb(lo, hi, std::vector<double>(x.data(), x.data() + n));
}

}  // namespace holodisc
