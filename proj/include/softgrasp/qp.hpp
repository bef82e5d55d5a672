#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <vector>

#include "softgrasp/error.hpp"

namespace softgrasp {

struct NnlsResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residual;  // E x - f
  bool ok = true;
};

// Lawson-Hanson active set method for min ||E x - f|| subject to x >= 0.
inline NnlsResult nnls(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, int max_iterations = 0) {
  const Eigen::Index n = E.cols();
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);
  NnlsResult out;
  out.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * std::max<double>(1.0, E.cwiseAbs().sum()) *
                     static_cast<double>(std::max<Eigen::Index>(E.rows(), n));

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[j]) idx.push_back(j);
    }
    Eigen::MatrixXd Ep(E.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Ep.col(static_cast<Eigen::Index>(k)) = E.col(idx[k]);
    const Eigen::VectorXd zp = Ep.colPivHouseholderQr().solve(f);
    z = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Eigen::Index>(k)];
  };

  int iterations = 0;
  while (true) {
    const Eigen::VectorXd w = E.transpose() * (f - E * out.x);
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w[j] > best) {
        best = w[j];
        t = j;
      }
    }
    if (t < 0) break;
    passive[t] = true;
    Eigen::VectorXd z;
    while (true) {
      if (++iterations > max_iterations) {
        out.ok = false;
        out.residual = E * out.x - f;
        return out;
      }
      solve_passive(z);
      bool all_positive = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0.0) all_positive = false;
      }
      if (all_positive) {
        out.x = z;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0.0) alpha = std::min(alpha, out.x[j] / (out.x[j] - z[j]));
      }
      out.x += alpha * (z - out.x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && out.x[j] <= tol) {
          passive[j] = false;
          out.x[j] = 0.0;
        }
      }
    }
  }
  out.residual = E * out.x - f;
  return out;
}

enum class QpStatus { Solved, Infeasible, Failed };

struct QpResult {
  QpStatus status = QpStatus::Failed;
  Eigen::VectorXd step;
  Eigen::VectorXd eq_multipliers;  // stationarity: H d + g = A^T mu + (bound terms)
};

// min 0.5 d'Hd + g'd  s.t.  A d = r,  lower <= d <= upper.
//
// H = L L' turns the objective into ||L'd + L^-1 g||^2. The equality rows are
// eliminated through a QR factorization of A' (null-space basis Z), the
// remaining bound-constrained least-squares problem is reduced to a least
// distance program and solved with NNLS.
inline QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                         const Eigen::VectorXd& r, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         double regularization = 0.0) {
  const Eigen::Index n = g.size();
  const Eigen::Index k = A.rows();
  QpResult out;

  Eigen::MatrixXd Hr = H;
  Hr.diagonal().array() += regularization;
  const Eigen::LLT<Eigen::MatrixXd> llt(Hr);
  if (llt.info() != Eigen::Success) return out;
  const Eigen::MatrixXd L = llt.matrixL();
  if (!(L.diagonal().array() > 0.0).all() || !L.allFinite()) return out;
  const Eigen::MatrixXd E = L.transpose();
  const Eigen::VectorXd f = -L.triangularView<Eigen::Lower>().solve(g);

  Eigen::VectorXd d0 = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  if (k > 0) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A.transpose());
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const double scale = std::max(1.0, R.diagonal().cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < k; ++i) {
      if (std::abs(R(i, i)) <= 1e-10 * scale) throw Error(ErrorKind::RankDeficientConstraints, "row " + std::to_string(i));
    }
    const Eigen::VectorXd y1 = R.transpose().triangularView<Eigen::Lower>().solve(r);
    d0 = Q.leftCols(k) * y1;
    Z = Q.rightCols(n - k);
  }
  const Eigen::Index m = n - k;

  // Bound rows: G d >= h.
  std::vector<Eigen::Index> rows;
  std::vector<double> sign, rhs;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isfinite(lower[i])) {
      rows.push_back(i);
      sign.push_back(1.0);
      rhs.push_back(lower[i]);
    }
    if (std::isfinite(upper[i])) {
      rows.push_back(i);
      sign.push_back(-1.0);
      rhs.push_back(-upper[i]);
    }
  }
  const auto p = static_cast<Eigen::Index>(rows.size());

  Eigen::VectorXd d = d0;
  if (m > 0) {
    const Eigen::MatrixXd C = E * Z;
    const Eigen::VectorXd c = f - E * d0;
    const Eigen::HouseholderQR<Eigen::MatrixXd> cqr(C);
    const Eigen::MatrixXd Rc = cqr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    const Eigen::VectorXd c1 = (cqr.householderQ().transpose() * c).head(m);

    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    if (p > 0) {
      Eigen::MatrixXd GZ(p, m);
      Eigen::VectorXd q(p);
      for (Eigen::Index i = 0; i < p; ++i) {
        GZ.row(i) = sign[i] * Z.row(rows[i]);
        q[i] = rhs[i] - sign[i] * d0[rows[i]];
      }
      // Hm = GZ Rc^-1, computed as (Rc^-T GZ')'.
      const Eigen::MatrixXd Hm = Rc.transpose().triangularView<Eigen::Lower>().solve(GZ.transpose()).transpose();
      q -= Hm * c1;
      Eigen::MatrixXd En(m + 1, p);
      En.topRows(m) = Hm.transpose();
      En.row(m) = q.transpose();
      Eigen::VectorXd fn = Eigen::VectorXd::Zero(m + 1);
      fn[m] = 1.0;
      const NnlsResult ls = nnls(En, fn);
      if (!ls.ok) return out;
      const double denom = ls.residual[m];
      if (ls.residual.norm() < 1e-12 || std::abs(denom) < 1e-12) {
        out.status = QpStatus::Infeasible;
        return out;
      }
      w = -ls.residual.head(m) / denom;
    }
    const Eigen::VectorXd z = Rc.triangularView<Eigen::Upper>().solve(w + c1);
    d = d0 + Z * z;
  }

  // Validate feasibility before trimming round-off against the bounds.
  const double feas_tol = 1e-8 * (1.0 + d.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d[i] < lower[i] - feas_tol || d[i] > upper[i] + feas_tol) {
      out.status = m == 0 ? QpStatus::Infeasible : QpStatus::Failed;
      return out;
    }
    d[i] = std::clamp(d[i], lower[i], upper[i]);
  }
  if (!d.allFinite()) return out;

  out.step = d;
  out.status = QpStatus::Solved;
  if (k > 0) {
    // Equality multipliers from the free coordinates: H d + g = A' mu on them.
    const Eigen::VectorXd grad = Hr * d + g;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double tol = 1e-10 * (1.0 + std::abs(d[i]));
      if (d[i] > lower[i] + tol && d[i] < upper[i] - tol) free.push_back(i);
    }
    Eigen::MatrixXd At(static_cast<Eigen::Index>(free.size()), k);
    Eigen::VectorXd rhs_free(static_cast<Eigen::Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) {
      At.row(static_cast<Eigen::Index>(i)) = A.col(free[i]).transpose();
      rhs_free[static_cast<Eigen::Index>(i)] = grad[free[i]];
    }
    out.eq_multipliers = free.empty() ? Eigen::VectorXd::Zero(k)
                                      : Eigen::VectorXd(At.completeOrthogonalDecomposition().solve(rhs_free));
  } else {
    out.eq_multipliers.resize(0);
  }
  return out;
}

}  // namespace softgrasp
