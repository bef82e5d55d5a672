#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "softgrasp/error.hpp"
#include "softgrasp/qp.hpp"

namespace softgrasp {

// min f(x)  s.t.  A x = b,  lower <= x <= upper.
struct NlpProblem {
  int dimension = 0;
  std::function<double(const Eigen::VectorXd&)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd eq_matrix;  // k x dimension
  Eigen::VectorXd eq_rhs;     // k

  void validate() const {
    const auto n = static_cast<Eigen::Index>(dimension);
    if (dimension <= 0) throw Error(ErrorKind::InvalidProblem, "dimension", "must be positive");
    if (!objective || !gradient) throw Error(ErrorKind::InvalidProblem, "callbacks", "objective and gradient required");
    if (lower.size() != n || upper.size() != n) throw Error(ErrorKind::DimensionMismatch, "bounds");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(lower[i] <= upper[i])) throw Error(ErrorKind::InvalidProblem, "bounds", "lower > upper at " + std::to_string(i));
    }
    if (eq_matrix.rows() != eq_rhs.size() || (eq_matrix.rows() > 0 && eq_matrix.cols() != n)) {
      throw Error(ErrorKind::DimensionMismatch, "equality constraints");
    }
  }

  Eigen::Index num_equalities() const { return eq_matrix.rows(); }

  double violation(const Eigen::VectorXd& x) const {
    if (num_equalities() == 0) return 0.0;
    return (eq_matrix * x - eq_rhs).cwiseAbs().maxCoeff();
  }
};

struct SolveOptions {
  int max_iterations = 200;
  double tol_objective = 1e-8;   // relative change, stall detection
  double tol_constraint = 1e-6;  // infinity norm of A x - b
  double tol_step = 1e-9;
  double tol_kkt = 1e-8;         // projected gradient, relative to 1 + |f|
  std::uint64_t seed = 0;
};

enum class SolveStatus { Converged, MaxIterations, Infeasible, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

inline SolveStatus solve_status_from_string(const std::string& s) {
  for (auto st : {SolveStatus::Converged, SolveStatus::MaxIterations, SolveStatus::Infeasible,
                  SolveStatus::NumericalFailure}) {
    if (s == to_string(st)) return st;
  }
  throw Error(ErrorKind::SchemaViolation, s, "unknown solve status");
}

struct SolveResult {
  Eigen::VectorXd x;
  SolveStatus status = SolveStatus::NumericalFailure;
  int iterations = 0;
  double objective = 0.0;
  double violation = 0.0;
  int clamped_start = 0;  // coordinates of x0 moved into bounds
};

// First-order optimality measure. Coordinates sitting on a bound are removed
// when their multiplier has the admissible sign; the remaining gradient is
// projected onto the null space of the equality rows. Wrong-signed bound
// multipliers are counted as residual.
inline double kkt_residual(const NlpProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
  const Eigen::Index n = x.size();
  const Eigen::Index k = problem.num_equalities();
  auto at_lower = [&](Eigen::Index i) { return x[i] <= problem.lower[i] + 1e-9 * (1.0 + std::abs(problem.lower[i])); };
  auto at_upper = [&](Eigen::Index i) { return x[i] >= problem.upper[i] - 1e-9 * (1.0 + std::abs(problem.upper[i])); };

  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!at_lower(i) && !at_upper(i)) free.push_back(i);
  }
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(k);
  if (k > 0 && !free.empty()) {
    Eigen::MatrixXd Af(static_cast<Eigen::Index>(free.size()), k);
    Eigen::VectorXd gf(static_cast<Eigen::Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) {
      Af.row(static_cast<Eigen::Index>(i)) = problem.eq_matrix.col(free[i]).transpose();
      gf[static_cast<Eigen::Index>(i)] = grad[free[i]];
    }
    mu = Af.completeOrthogonalDecomposition().solve(gf);
  }
  const Eigen::VectorXd reduced = k > 0 ? Eigen::VectorXd(grad - problem.eq_matrix.transpose() * mu) : grad;
  double res = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool lo = at_lower(i), hi = at_upper(i);
    if (lo && hi) continue;  // fixed coordinate
    if (lo) {
      res = std::max(res, std::max(0.0, -reduced[i]));
    } else if (hi) {
      res = std::max(res, std::max(0.0, reduced[i]));
    } else {
      res = std::max(res, std::abs(reduced[i]));
    }
  }
  return res;
}

namespace sqp_detail {

// Rows of A must be linearly independent.
inline void check_rank(const Eigen::MatrixXd& A) {
  if (A.rows() == 0) return;
  if (A.rows() > A.cols()) throw Error(ErrorKind::RankDeficientConstraints, "more rows than variables");
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  const Eigen::VectorXd diag = qr.matrixQR().diagonal().head(A.rows()).cwiseAbs();
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (diag[i] <= 1e-10 * scale) throw Error(ErrorKind::RankDeficientConstraints, "row " + std::to_string(i));
  }
}

}  // namespace sqp_detail

// Sequential least-squares QP for bound and linear-equality constrained
// problems: damped BFGS Lagrangian Hessian, QP steps via solve_qp with
// escalating Tikhonov regularization, backtracking on an l1 merit function.
inline SolveResult sqp_solve(const NlpProblem& problem, const Eigen::VectorXd& x0, const SolveOptions& options = {}) {
  problem.validate();
  const Eigen::Index n = problem.dimension;
  if (x0.size() != n) throw Error(ErrorKind::DimensionMismatch, "x0");
  sqp_detail::check_rank(problem.eq_matrix);
  const Eigen::Index k = problem.num_equalities();
  const Eigen::MatrixXd& A = problem.eq_matrix;

  SolveResult out;
  Eigen::VectorXd x = x0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = std::clamp(x[i], problem.lower[i], problem.upper[i]);
    if (c != x[i]) ++out.clamped_start;
    x[i] = c;
  }

  auto finish = [&](SolveStatus status, int iterations, double f) {
    out.x = x;
    out.status = status;
    out.iterations = iterations;
    out.objective = f;
    out.violation = problem.violation(x);
    return out;
  };

  double f = problem.objective(x);
  Eigen::VectorXd g = problem.gradient(x);
  if (!std::isfinite(f) || !g.allFinite()) return finish(SolveStatus::NumericalFailure, 0, f);

  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  bool b_is_identity = true;
  bool first_update = true;
  Eigen::VectorXd penalty = Eigen::VectorXd::Zero(k);

  auto merit = [&](double fx, const Eigen::VectorXd& xx) {
    return k > 0 ? fx + penalty.dot((A * xx - problem.eq_rhs).cwiseAbs()) : fx;
  };
  auto converged_at = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& gx, double fx) {
    return problem.violation(xx) <= options.tol_constraint &&
           kkt_residual(problem, xx, gx) <= options.tol_kkt * (1.0 + std::abs(fx));
  };

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXd r = k > 0 ? Eigen::VectorXd(problem.eq_rhs - A * x) : Eigen::VectorXd();
    QpResult qp;
    for (double reg = 0.0;;) {
      qp = solve_qp(B, g, A, r, problem.lower - x, problem.upper - x, reg);
      if (qp.status != QpStatus::Failed) break;
      reg = reg == 0.0 ? 1e-10 : reg * 10.0;
      if (reg > 1e-4 * (1.0 + 1e-9)) return finish(SolveStatus::NumericalFailure, iter, f);
    }
    if (qp.status == QpStatus::Infeasible) return finish(SolveStatus::Infeasible, iter, f);
    const Eigen::VectorXd& d = qp.step;

    if (d.cwiseAbs().maxCoeff() <= options.tol_step && converged_at(x, g, f)) {
      return finish(SolveStatus::Converged, iter, f);
    }

    for (Eigen::Index i = 0; i < k; ++i) {
      const double lam = std::abs(qp.eq_multipliers[i]);
      penalty[i] = std::max(lam, 0.5 * (penalty[i] + lam));
    }
    const double phi0 = merit(f, x);
    const double slope = g.dot(d) - (k > 0 ? penalty.dot(r.cwiseAbs()) : 0.0);
    if (!(slope < 0.0)) {
      if (converged_at(x, g, f)) return finish(SolveStatus::Converged, iter, f);
      if (!b_is_identity) {
        B.setIdentity();
        b_is_identity = true;
        continue;
      }
      if (d.cwiseAbs().maxCoeff() <= options.tol_step) return finish(SolveStatus::NumericalFailure, iter, f);
    }

    double alpha = 1.0;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = (x + alpha * d).cwiseMax(problem.lower).cwiseMin(problem.upper);
      f_new = problem.objective(x_new);
      if (std::isfinite(f_new) && merit(f_new, x_new) <= phi0 + 1e-4 * alpha * std::min(slope, 0.0)) {
        accepted = true;
        break;
      }
      // Quadratic interpolation, safeguarded to [0.1, 0.5] of the previous step.
      const double phi = std::isfinite(f_new) ? merit(f_new, x_new) : std::numeric_limits<double>::infinity();
      double next = 0.5 * alpha;
      if (std::isfinite(phi) && slope < 0.0) {
        const double denom = 2.0 * (phi - phi0 - alpha * slope);
        if (denom > 0.0) next = std::clamp(-slope * alpha * alpha / denom, 0.1 * alpha, 0.5 * alpha);
      }
      alpha = next;
    }
    if (!accepted) {
      if (converged_at(x, g, f)) return finish(SolveStatus::Converged, iter, f);
      if (!b_is_identity) {
        B.setIdentity();
        b_is_identity = true;
        continue;
      }
      return finish(SolveStatus::NumericalFailure, iter, f);
    }

    const Eigen::VectorXd g_new = problem.gradient(x_new);
    if (!g_new.allFinite()) return finish(SolveStatus::NumericalFailure, iter, f);
    const Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    const double f_old = f;
    x = x_new;
    f = f_new;
    g = g_new;

    // Powell-damped BFGS update keeps B positive definite.
    const double ss = s.squaredNorm();
    if (ss > 1e-300) {
      if (first_update && s.dot(y) > 0.0) {
        B = (y.squaredNorm() / s.dot(y)) * Eigen::MatrixXd::Identity(n, n);
      }
      first_update = false;
      const Eigen::VectorXd Bs = B * s;
      const double sBs = s.dot(Bs);
      const double sy = s.dot(y);
      if (sBs > 0.0) {
        if (sy < 0.2 * sBs) {
          const double theta = 0.8 * sBs / (sBs - sy);
          y = theta * y + (1.0 - theta) * Bs;
        }
        const double sy_damped = s.dot(y);
        if (sy_damped > 1e-300) {
          B += (y * y.transpose()) / sy_damped - (Bs * Bs.transpose()) / sBs;
          B = 0.5 * (B + B.transpose());
          b_is_identity = false;
        }
      }
    }

    if (converged_at(x, g, f)) {
      const bool small_change = std::abs(f_old - f) <= options.tol_objective * (1.0 + std::abs(f));
      const bool small_step = s.cwiseAbs().maxCoeff() <= options.tol_step;
      if (small_change || small_step) return finish(SolveStatus::Converged, iter, f);
    }
  }
  return finish(SolveStatus::MaxIterations, options.max_iterations, f);
}

// Same problem with every equality row dropped; bounds are kept.
inline SolveResult unconstrained_stage_solve(const NlpProblem& problem, const Eigen::VectorXd& x0,
                                             const SolveOptions& options = {}) {
  NlpProblem relaxed = problem;
  relaxed.eq_matrix.resize(0, problem.dimension);
  relaxed.eq_rhs.resize(0);
  return sqp_solve(relaxed, x0, options);
}

}  // namespace softgrasp
