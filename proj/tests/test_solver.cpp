#include <gtest/gtest.h>

#include <cmath>

#include "softgrasp/cascade.hpp"
#include "softgrasp/qp.hpp"
#include "softgrasp/sqp.hpp"

using namespace softgrasp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

NlpProblem quadratic(Eigen::VectorXd center, Eigen::VectorXd weights) {
  NlpProblem p;
  p.dimension = static_cast<int>(center.size());
  p.objective = [=](const Eigen::VectorXd& x) { return (weights.array() * (x - center).array().square()).sum(); };
  p.gradient = [=](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return 2.0 * (weights.array() * (x - center).array()).matrix();
  };
  p.lower = Eigen::VectorXd::Constant(p.dimension, -kInf);
  p.upper = Eigen::VectorXd::Constant(p.dimension, kInf);
  p.eq_matrix.resize(0, p.dimension);
  p.eq_rhs.resize(0);
  return p;
}

NlpProblem rosenbrock_on_line() {
  NlpProblem p;
  p.dimension = 2;
  p.objective = [](const Eigen::VectorXd& v) {
    return 100.0 * std::pow(v[1] - v[0] * v[0], 2) + std::pow(1.0 - v[0], 2);
  };
  p.gradient = [](const Eigen::VectorXd& v) {
    Eigen::VectorXd g(2);
    g[0] = -400.0 * v[0] * (v[1] - v[0] * v[0]) - 2.0 * (1.0 - v[0]);
    g[1] = 200.0 * (v[1] - v[0] * v[0]);
    return g;
  };
  p.lower = Eigen::VectorXd::Constant(2, -kInf);
  p.upper = Eigen::VectorXd::Constant(2, kInf);
  p.eq_matrix = Eigen::RowVector2d(1.0, 1.0);
  p.eq_rhs = Eigen::VectorXd::Ones(1);
  return p;
}

// Brute-force minimiser of f(x, 1 - x): coarse grid then repeated refinement.
double grid_search_on_line(const NlpProblem& p, double lo, double hi) {
  for (int level = 0; level < 12; ++level) {
    double best_x = lo, best_f = kInf;
    const int n = 2000;
    for (int i = 0; i <= n; ++i) {
      const double x = lo + (hi - lo) * i / n;
      const double f = p.objective(Eigen::Vector2d(x, 1.0 - x));
      if (f < best_f) {
        best_f = f;
        best_x = x;
      }
    }
    const double h = (hi - lo) / n;
    lo = best_x - 2 * h;
    hi = best_x + 2 * h;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Nnls, MatchesKnownSolution) {
  Eigen::MatrixXd E(3, 2);
  E << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd f(3);
  f << -1, 2, 1;
  const auto r = nnls(E, f);
  ASSERT_TRUE(r.ok);
  // x0 clipped at zero; x1 then minimises (x1-2)^2 + (x1-1)^2.
  EXPECT_NEAR(r.x[0], 0.0, 1e-12);
  EXPECT_NEAR(r.x[1], 1.5, 1e-12);
}

TEST(Qp, EqualityAndBounds) {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  const Eigen::Vector2d g(-2.0, -4.0);
  const Eigen::MatrixXd A = Eigen::RowVector2d(1.0, -1.0);
  const Eigen::VectorXd r = Eigen::VectorXd::Zero(1);
  const Eigen::Vector2d lo(-kInf, -kInf), hi(kInf, kInf);
  const auto q = solve_qp(H, g, A, r, lo, hi);
  ASSERT_EQ(q.status, QpStatus::Solved);
  EXPECT_NEAR(q.step[0], 1.5, 1e-12);
  EXPECT_NEAR(q.step[1], 1.5, 1e-12);

  const Eigen::Vector2d hi2(1.0, kInf);
  const auto q2 = solve_qp(H, g, A, r, lo, hi2);
  ASSERT_EQ(q2.status, QpStatus::Solved);
  EXPECT_NEAR(q2.step[0], 1.0, 1e-12);
  EXPECT_NEAR(q2.step[1], 1.0, 1e-12);
}

TEST(Qp, InfeasibleBoundsAndEquality) {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::Vector2d g(0, 0);
  const Eigen::MatrixXd A = Eigen::RowVector2d(1.0, 1.0);
  const Eigen::VectorXd r = Eigen::VectorXd::Constant(1, 5.0);
  const Eigen::Vector2d lo(0, 0), hi(1, 1);
  EXPECT_NE(solve_qp(H, g, A, r, lo, hi).status, QpStatus::Solved);
}

TEST(Qp, DependentRowsRejected) {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd A(2, 2);
  A << 1, 1, 2, 2;
  EXPECT_THROW(solve_qp(H, Eigen::Vector2d::Zero(), A, Eigen::Vector2d::Zero(), Eigen::Vector2d::Constant(-1),
                        Eigen::Vector2d::Constant(1)),
               Error);
}

TEST(Sqp, EqualityConstrainedQuadratic) {
  NlpProblem p = quadratic(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1));
  p.eq_matrix = Eigen::RowVector2d(1.0, -1.0);
  p.eq_rhs = Eigen::VectorXd::Zero(1);
  const auto r = sqp_solve(p, Eigen::Vector2d(0, 0));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_NEAR(r.x[0], 1.5, 1e-8);
  EXPECT_NEAR(r.x[1], 1.5, 1e-8);
  EXPECT_NEAR(r.objective, 0.5, 1e-8);
  EXPECT_LE(kkt_residual(p, r.x, p.gradient(r.x)), 1e-5 * (1 + std::abs(r.objective)));
}

TEST(Sqp, ActiveBound) {
  NlpProblem p = quadratic(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  p.lower = Eigen::VectorXd::Constant(1, 1.0);
  p.upper = Eigen::VectorXd::Constant(1, 2.0);
  const auto r = sqp_solve(p, Eigen::VectorXd::Constant(1, 1.7));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-8);
}

TEST(Sqp, StartOutsideBoundsIsClamped) {
  NlpProblem p = quadratic(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  p.lower = Eigen::VectorXd::Constant(1, 1.0);
  p.upper = Eigen::VectorXd::Constant(1, 2.0);
  const auto r = sqp_solve(p, Eigen::VectorXd::Constant(1, 5.0));
  EXPECT_TRUE(r.clamped_start);
  EXPECT_NEAR(r.x[0], 1.0, 1e-8);
}

TEST(Sqp, RosenbrockOnLineMatchesGridSearch) {
  const NlpProblem p = rosenbrock_on_line();
  const auto r = sqp_solve(p, Eigen::Vector2d(0, 0));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  const double oracle = grid_search_on_line(p, -2.0, 2.0);
  EXPECT_NEAR(r.x[0], oracle, 1e-4);
  EXPECT_NEAR(r.x[0] + r.x[1], 1.0, 1e-9);
}

TEST(Sqp, DependentEqualitiesThrow) {
  NlpProblem p = quadratic(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1));
  p.eq_matrix.resize(2, 2);
  p.eq_matrix << 1, -1, -2, 2;
  p.eq_rhs = Eigen::Vector2d::Zero();
  try {
    sqp_solve(p, Eigen::Vector2d(0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RankDeficientConstraints);
  }
}

TEST(Sqp, UnconstrainedStageDropsEqualities) {
  NlpProblem p = quadratic(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1));
  p.eq_matrix = Eigen::RowVector2d(1.0, -1.0);
  p.eq_rhs = Eigen::VectorXd::Zero(1);
  const auto r = unconstrained_stage_solve(p, Eigen::Vector2d(0, 0));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-8);
  EXPECT_NEAR(r.x[1], 2.0, 1e-8);
}

TEST(Sqp, QuadraticBowl) {
  Eigen::VectorXd c(4);
  c << 0.3, -1.2, 2.0, 0.0;
  Eigen::VectorXd w(4);
  w << 1.0, 3.0, 0.5, 10.0;
  const auto r = unconstrained_stage_solve(quadratic(c, w), Eigen::VectorXd::Zero(4));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE((r.x - c).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Sqp, DeterministicIterationCounts) {
  const NlpProblem p = rosenbrock_on_line();
  const auto a = sqp_solve(p, Eigen::Vector2d(-1, 0.3));
  const auto b = sqp_solve(p, Eigen::Vector2d(-1, 0.3));
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.x, b.x);
}

TEST(Schedule, DefaultTwoFingers) {
  const CouplingModel c({"a_j1", "b_j1"}, {"a_j2", "a_j3", "b_j2", "b_j3"},
                        {{0, 0, 0.8}, {1, 0, 0.6}, {2, 1, 0.8}, {3, 1, 0.6}}, {"a", "a", "b", "b"});
  const auto s = default_schedule(c);
  ASSERT_EQ(s.stages.size(), 3u);
  EXPECT_TRUE(s.stages[0].empty());
  EXPECT_EQ(s.stages[1], (std::vector<int>{0, 1}));
  EXPECT_EQ(s.stages[2], (std::vector<int>{0, 1, 2, 3}));
}

TEST(Schedule, ThumbGoesLast) {
  const CouplingModel c({"thumb_j1", "index_j1"}, {"thumb_j2", "index_j2"}, {{0, 0, 0.8}, {1, 1, 0.8}},
                        {"thumb", "index"});
  const auto s = default_schedule(c);
  ASSERT_EQ(s.stages.size(), 3u);
  EXPECT_EQ(s.stages[1], (std::vector<int>{1}));
}

TEST(Schedule, EmptyCouplingIsOneEmptyStage) {
  const CouplingModel c({"a"}, {}, {});
  const auto s = default_schedule(c);
  ASSERT_EQ(s.stages.size(), 1u);
  EXPECT_TRUE(s.stages[0].empty());
}

TEST(Schedule, ValidationRejectsBadSchedules) {
  auto kind_of = [](const CascadeSchedule& s, int rows) {
    try {
      s.validate(rows);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::FileNotFound;
  };
  EXPECT_EQ(kind_of({{{0}, {1}}}, 2), ErrorKind::InvalidSchedule);
  EXPECT_EQ(kind_of({{{0}}}, 2), ErrorKind::InvalidSchedule);
  EXPECT_EQ(kind_of({{{0, 5}}}, 2), ErrorKind::InvalidSchedule);
  EXPECT_EQ(kind_of({{}}, 0), ErrorKind::InvalidSchedule);
  EXPECT_NO_THROW(CascadeSchedule({{{}, {1}, {0, 1}}}).validate(2));
}

TEST(Cascade, SingleStageEqualsDirectSolve) {
  Eigen::VectorXd c(3);
  c << 1, 2, -1;
  NlpProblem p = quadratic(c, Eigen::Vector3d(1, 2, 3));
  p.eq_matrix.resize(2, 3);
  p.eq_matrix << 1, -1, 0, 0, 1, 1;
  p.eq_rhs = Eigen::Vector2d(0, 0.5);
  FixedProblemBuilder builder{p};
  const auto cas = cascade_solve(builder, CascadeSchedule::single_stage(2), Eigen::Vector3d::Zero());
  const auto direct = sqp_solve(p, Eigen::Vector3d::Zero());
  ASSERT_EQ(cas.status, SolveStatus::Converged);
  EXPECT_LE((cas.x - direct.x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Cascade, StagedMatchesDirectOnConvexProblem) {
  Eigen::VectorXd c(4);
  c << 1, 2, -1, 0.5;
  NlpProblem p = quadratic(c, Eigen::Vector4d(1, 2, 3, 4));
  p.eq_matrix.resize(2, 4);
  p.eq_matrix << 0.8, -1, 0, 0, 0, 0, 0.6, -1;
  p.eq_rhs = Eigen::Vector2d::Zero();
  FixedProblemBuilder builder{p};
  const auto cas = cascade_solve(builder, CascadeSchedule{{{}, {0}, {0, 1}}}, Eigen::Vector4d::Zero());
  const auto direct = sqp_solve(p, Eigen::Vector4d::Zero());
  ASSERT_EQ(cas.status, SolveStatus::Converged);
  EXPECT_NEAR(cas.objective, direct.objective, 1e-6);
  // adding constraints can only raise the optimum
  for (std::size_t s = 1; s < cas.trace.size(); ++s) EXPECT_GE(cas.trace[s].energy, cas.trace[s - 1].energy - 1e-8);
}
