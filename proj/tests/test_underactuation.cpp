#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "softgrasp/presets.hpp"
#include "softgrasp/underactuation.hpp"

using namespace softgrasp;

namespace {

ErrorKind error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidProblem;
}

std::string csv(const std::vector<std::array<double, 3>>& rows, const std::string& finger = "index") {
  std::string s = std::string(kTrajectoryHeader) + "\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "m0,%s,%.17g,%.17g,%.17g\n", finger.c_str(), r[0], r[1], r[2]);
    s += buf;
  }
  return s;
}

}  // namespace

TEST(ExpandAngles, SingleColumnExample) {
  const CouplingModel c({"j1"}, {"j2", "j3"}, {{0, 0, 0.7}, {1, 0, 0.5}});
  const JointAngles a = expand_angles(c, Eigen::VectorXd::Constant(1, 1.0));
  EXPECT_DOUBLE_EQ(a.values.at("j2"), 0.7);
  EXPECT_DOUBLE_EQ(a.values.at("j3"), 0.5);
  EXPECT_FALSE(a.clamped);
  const JointAngles z = expand_angles(c, Eigen::VectorXd::Zero(1));
  EXPECT_EQ(z.values.at("j2"), 0.0);
  EXPECT_EQ(z.values.at("j3"), 0.0);
  EXPECT_EQ(error_of([&] { expand_angles(c, Eigen::VectorXd::Zero(2)); }), ErrorKind::DimensionMismatch);
}

TEST(ExpandAngles, RandomSparseMatchesDense) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::string> indep, dep;
  for (int i = 0; i < 7; ++i) indep.push_back("i" + std::to_string(i));
  for (int i = 0; i < 14; ++i) dep.push_back("d" + std::to_string(i));
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CouplingTriplet> t;
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(14, 7);
    for (int r = 0; r < 14; ++r) {
      const int k = std::uniform_int_distribution<int>(1, 3)(rng);
      for (int e = 0; e < k; ++e) {
        const int col = std::uniform_int_distribution<int>(0, 6)(rng);
        const double v = u(rng) + 2.0;  // never zero
        t.push_back({r, col, v});
        dense(r, col) += v;
      }
    }
    const CouplingModel c(indep, dep, t);
    Eigen::VectorXd th(7);
    for (int i = 0; i < 7; ++i) th[i] = u(rng);
    const JointAngles a = expand_angles(c, th);
    for (int r = 0; r < 14; ++r) {
      double ref = 0;
      for (int col = 0; col < 7; ++col) ref += dense(r, col) * th[col];
      EXPECT_NEAR(a.values.at(dep[r]), ref, 1e-12);
    }
    EXPECT_LE(constraint_residual(c, a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ConstraintResidual, Examples) {
  const CouplingModel id({"a"}, {"b"}, {{0, 0, 1.0}});
  EXPECT_EQ(constraint_residual(id, {{{"a", 0.3}, {"b", 0.3}}})[0], 0.0);
  const CouplingModel c = presets::default_coupling();
  Eigen::VectorXd th = Eigen::VectorXd::LinSpaced(c.cols(), 0.1, 0.9);
  JointAngles a = expand_angles(c, th);
  EXPECT_LE(constraint_residual(c, a).cwiseAbs().maxCoeff(), 1e-12);
  const int k = 3;
  a.values[c.dependent()[k]] += 0.01;
  const Eigen::VectorXd r = constraint_residual(c, a);
  for (int i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], i == k ? -0.01 : 0.0, 1e-12);
  a.values.erase(c.dependent()[0]);
  EXPECT_EQ(error_of([&] { constraint_residual(c, a); }), ErrorKind::MissingAngle);
}

TEST(CouplingModel, InvariantsEnforced) {
  EXPECT_EQ(error_of([] { CouplingModel({"a"}, {"a"}, {{0, 0, 1}}); }), ErrorKind::InvalidCoupling);
  EXPECT_EQ(error_of([] { CouplingModel({"a"}, {"b"}, {}); }), ErrorKind::InvalidCoupling);
  EXPECT_EQ(error_of([] { CouplingModel({"a"}, {"b"}, {{0, 1, 1}}); }), ErrorKind::InvalidCoupling);
  EXPECT_EQ(error_of([] { CouplingModel({"a"}, {"b"}, {{0, 0, std::nan("")}}); }), ErrorKind::InvalidCoupling);
  const CouplingModel c = presets::default_coupling();
  EXPECT_NO_THROW(c.check_partition(presets::default_hand()));
  const CouplingModel partial({"index_j1"}, {"index_j2"}, {{0, 0, 0.8}});
  EXPECT_EQ(error_of([&] { partial.check_partition(presets::default_hand()); }), ErrorKind::InvalidCoupling);
}

TEST(FitCoupling, ExactLineGivesExactSlope) {
  const auto data = parse_trajectory_csv(
      std::string(kTrajectoryHeader) + "\nm,index,0,0,\nm,index,0.5,0.4,\nm,index,1.0,0.8,\n");
  const CouplingFit fit = fit_coupling(data);
  ASSERT_EQ(fit.fingers.size(), 1u);
  EXPECT_EQ(fit.fingers[0].coefficients.size(), 1u);
  EXPECT_NEAR(fit.fingers[0].coefficients[0], 0.8, 1e-15);
  EXPECT_EQ(fit.coupling.independent(), std::vector<std::string>{"index_j1"});
  EXPECT_EQ(fit.coupling.dependent(), std::vector<std::string>{"index_j2"});
}

TEST(FitCoupling, DegenerateAndInsufficient) {
  EXPECT_EQ(error_of([] { fit_coupling(parse_trajectory_csv(csv({{0, 0.1, 0.2}, {0, 0.3, 0.1}}))); }),
            ErrorKind::DegenerateData);
  EXPECT_EQ(error_of([] { fit_coupling(parse_trajectory_csv(csv({{0.5, 0.4, 0.3}}))); }),
            ErrorKind::InsufficientData);
  EXPECT_EQ(error_of([] { fit_coupling(parse_trajectory_csv(std::string(kTrajectoryHeader) + "\n")); }),
            ErrorKind::InsufficientData);
}

TEST(FitCoupling, NormalEquationOracle) {
  const auto data = parse_trajectory_csv(presets::synthetic_trajectory_csv(0.8, 0.6, 0.01, 5));
  const CouplingFit fit = fit_coupling(data);
  EXPECT_EQ(fit.fingers.size(), 5u);
  for (const auto& f : fit.fingers) {
    std::vector<double> t1, t2, t3;
    for (const auto& s : data.records) {
      if (s.finger != f.finger) continue;
      t1.push_back(s.theta1), t2.push_back(s.theta2), t3.push_back(*s.theta3);
    }
    EXPECT_NEAR(f.coefficients[0], oracle::normal_equation_slope(t1, t2), 1e-10) << f.finger;
    EXPECT_NEAR(f.coefficients[1], oracle::normal_equation_slope(t1, t3), 1e-10) << f.finger;
  }
}

TEST(FitCoupling, ScaleEquivariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1.5);
  std::normal_distribution<double> n(0, 0.01);
  std::vector<std::array<double, 3>> rows, scaled;
  for (int i = 0; i < 50; ++i) {
    const double t = u(rng);
    rows.push_back({t, 0.8 * t + n(rng), 0.6 * t + n(rng)});
    scaled.push_back({rows.back()[0] * 2.5, rows.back()[1] * 2.5, rows.back()[2] * 2.5});
  }
  const auto a = fit_coupling(parse_trajectory_csv(csv(rows))).fingers[0].coefficients;
  const auto b = fit_coupling(parse_trajectory_csv(csv(scaled))).fingers[0].coefficients;
  EXPECT_NEAR(a[0], b[0], 1e-12);
  EXPECT_NEAR(a[1], b[1], 1e-12);
}

TEST(FitCoupling, NoiselessRecoveryAndPartition) {
  const auto data = parse_trajectory_csv(presets::synthetic_trajectory_csv(0.8, 0.6, 0.0, 1));
  CouplingFitOptions opt;
  opt.extra_independent = {"thumb_abd", "thumb_opp"};
  const CouplingFit fit = fit_coupling(data, opt);
  for (const auto& f : fit.fingers) {
    EXPECT_NEAR(f.coefficients[0], 0.8, 1e-12);
    EXPECT_NEAR(f.coefficients[1], 0.6, 1e-12);
    EXPECT_LE(f.residual_rms, 1e-12);
  }
  EXPECT_NO_THROW(fit.coupling.check_partition(presets::default_hand()));
  EXPECT_EQ(fit.coupling.independent(), presets::default_coupling().independent());
}

TEST(TrajectoryCsv, SchemaErrorsCarryRowNumbers) {
  auto row_of = [](const std::string& text) {
    try {
      parse_trajectory_csv(text, "t.csv");
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::SchemaViolation);
      return e.subject();
    }
    return std::string("no error");
  };
  const std::string h = std::string(kTrajectoryHeader) + "\n";
  EXPECT_EQ(row_of("a,b,c\n"), "t.csv:1");
  EXPECT_EQ(row_of(h + "m,index,0.1,0.1,0.1\nm,index,x,0.1,0.1\n"), "t.csv:3");
  EXPECT_EQ(row_of(h + "m,index,0.1,0.1\n"), "t.csv:2");
  EXPECT_EQ(row_of(h + "m,,0.1,0.1,0.1\n"), "t.csv:2");
  EXPECT_EQ(row_of(h + "m,index,inf,0.1,0.1\n"), "t.csv:2");
  EXPECT_EQ(row_of(""), "t.csv:1");
  EXPECT_EQ(parse_trajectory_csv("\xEF\xBB\xBF" + h + "m,index,0.1,0.2,0.3\r\n").records.size(), 1u);
}
