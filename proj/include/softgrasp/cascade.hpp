#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cstdint>
#include <future>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "softgrasp/grasp_objective.hpp"
#include "softgrasp/sqp.hpp"
#include "softgrasp/underactuation.hpp"

namespace softgrasp {

// Ordered constraint-row subsets, each containing the previous one; the last
// stage activates every row.
struct CascadeSchedule {
  std::vector<std::vector<int>> stages;

  static CascadeSchedule single_stage(int rows) {
    std::vector<int> all(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) all[i] = i;
    return {{all}};
  }

  void validate(int rows) const {
    if (stages.empty()) throw Error(ErrorKind::InvalidSchedule, "stages", "schedule has no stages");
    std::set<int> prev;
    for (std::size_t s = 0; s < stages.size(); ++s) {
      std::set<int> cur;
      for (int r : stages[s]) {
        if (r < 0 || r >= rows) {
          throw Error(ErrorKind::InvalidSchedule, "stage " + std::to_string(s), "row " + std::to_string(r) + " out of range");
        }
        if (!cur.insert(r).second) throw Error(ErrorKind::InvalidSchedule, "stage " + std::to_string(s), "repeated row");
      }
      if (!std::includes(cur.begin(), cur.end(), prev.begin(), prev.end())) {
        throw Error(ErrorKind::InvalidSchedule, "stage " + std::to_string(s), "does not contain the previous stage");
      }
      prev = std::move(cur);
    }
    if (static_cast<int>(prev.size()) != rows) throw Error(ErrorKind::InvalidSchedule, "last stage", "must contain every row");
  }
};

// [{}, rows of finger 1, rows of fingers 1-2, ..., all rows]; fingers keep
// their first-appearance order except thumbs, which go last.
inline CascadeSchedule default_schedule(const CouplingModel& coupling) {
  const auto groups = coupling.row_groups();
  std::vector<std::string> order;
  for (const auto& g : groups) {
    if (std::find(order.begin(), order.end(), g) == order.end()) order.push_back(g);
  }
  auto is_thumb = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s.find("thumb") != std::string::npos;
  };
  std::stable_partition(order.begin(), order.end(), [&](const std::string& g) { return !is_thumb(g); });

  CascadeSchedule schedule;
  schedule.stages.push_back({});
  std::vector<int> active;
  for (const auto& g : order) {
    for (int r = 0; r < coupling.rows(); ++r) {
      if (groups[r] == g) active.push_back(r);
    }
    std::vector<int> sorted = active;
    std::sort(sorted.begin(), sorted.end());
    schedule.stages.push_back(sorted);
  }
  return schedule;
}

struct StageRecord {
  std::vector<int> rows;
  double energy = 0.0;
  double violation = 0.0;  // over every constraint row
  int iterations = 0;
  int rounds = 0;          // solver invocations (correspondence refreshes + 1)
  SolveStatus status = SolveStatus::NumericalFailure;
};

struct CascadeOptions {
  SolveOptions solve;
  // Solver invocations per stage; correspondences are refreshed between them
  // and frozen during each.
  int correspondence_rounds = 8;
};

struct CascadeResult {
  Eigen::VectorXd x;
  SolveStatus status = SolveStatus::NumericalFailure;
  double objective = 0.0;
  double violation = 0.0;
  std::vector<StageRecord> trace;
};

// Builder contract:
//   int constraint_rows() const;
//   NlpProblem problem(const std::vector<int>& rows) const;
//   bool refresh(const Eigen::VectorXd& x);       // true when the objective changed
//   Eigen::VectorXd stage_boundary(const Eigen::VectorXd& x);
//   double violation(const Eigen::VectorXd& x) const;  // all rows
template <typename Builder>
CascadeResult cascade_solve(Builder& builder, const CascadeSchedule& schedule, const Eigen::VectorXd& x0,
                            const CascadeOptions& options = {}) {
  schedule.validate(builder.constraint_rows());
  CascadeResult out;
  Eigen::VectorXd x = x0;
  for (const auto& rows : schedule.stages) {
    x = builder.stage_boundary(x);
    builder.refresh(x);
    StageRecord rec;
    rec.rows = rows;
    const int rounds = std::max(1, options.correspondence_rounds);
    for (int round = 0; round < rounds; ++round) {
      const NlpProblem problem = builder.problem(rows);
      const SolveResult res = rows.empty() ? unconstrained_stage_solve(problem, x, options.solve)
                                           : sqp_solve(problem, x, options.solve);
      x = res.x;
      rec.iterations += res.iterations;
      rec.rounds = round + 1;
      rec.status = res.status;
      rec.energy = res.objective;
      if (res.status == SolveStatus::NumericalFailure || res.status == SolveStatus::Infeasible) break;
      if (round + 1 == rounds || !builder.refresh(x)) break;
    }
    rec.violation = builder.violation(x);
    out.trace.push_back(rec);
    out.status = rec.status;
    out.objective = rec.energy;
  }
  out.x = x;
  out.violation = builder.violation(x);
  if (out.status == SolveStatus::Converged && out.violation > options.solve.tol_constraint) {
    out.status = SolveStatus::MaxIterations;
  }
  return out;
}

// Wraps a fixed problem whose equality rows are activated by the schedule.
struct FixedProblemBuilder {
  NlpProblem full;

  int constraint_rows() const { return static_cast<int>(full.num_equalities()); }
  NlpProblem problem(const std::vector<int>& rows) const {
    NlpProblem p = full;
    p.eq_matrix.resize(static_cast<Eigen::Index>(rows.size()), full.dimension);
    p.eq_rhs.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      p.eq_matrix.row(static_cast<Eigen::Index>(i)) = full.eq_matrix.row(rows[i]);
      p.eq_rhs[static_cast<Eigen::Index>(i)] = full.eq_rhs[rows[i]];
    }
    return p;
  }
  bool refresh(const Eigen::VectorXd&) { return false; }
  Eigen::VectorXd stage_boundary(const Eigen::VectorXd& x) { return x; }
  double violation(const Eigen::VectorXd& x) const { return full.violation(x); }
};

struct GraspBuildOptions {
  ObjectiveOptions objective;
  bool freeze_wrist = false;
  double wrist_translation_bound = 1.0;  // meters, per axis, around the reference
};

// Decision vector: [wrist (6) | theta_I | theta_D]; the coupling enters as
// equality rows [M | -I] on the joint block.
class GraspProblemBuilder {
 public:
  GraspProblemBuilder(const HandModel& model, const CouplingModel& coupling, const GraspTask& task,
                      GraspBuildOptions options = {})
      : scene_(model, task, options.objective),
        coupling_(coupling),
        index_(scene_.tree(), coupling),
        options_(options),
        reference_(task.wrist_reference) {
    const int n = dimension();
    lower_.resize(n);
    upper_.resize(n);
    const double tb = options.freeze_wrist ? 0.0 : options.wrist_translation_bound;
    const double rb = options.freeze_wrist ? 0.0 : 0.5 * std::numbers::pi;
    lower_.head<3>().setConstant(-tb);
    upper_.head<3>().setConstant(tb);
    lower_.segment<3>(3).setConstant(-rb);
    upper_.segment<3>(3).setConstant(rb);
    for (int j = 0; j < scene_.tree().num_revolute(); ++j) {
      const auto& lim = scene_.tree().revolute_joint(j).limits;
      lower_[position_of_revolute(j)] = lim.lower;
      upper_[position_of_revolute(j)] = lim.upper;
    }
    eq_.setZero(coupling.rows(), n);
    for (const auto& t : coupling.triplets()) eq_(t.row, 6 + t.col) += t.value;
    for (int r = 0; r < coupling.rows(); ++r) eq_(r, 6 + coupling.cols() + r) = -1.0;
  }

  int dimension() const { return 6 + coupling_.cols() + coupling_.rows(); }
  int constraint_rows() const { return coupling_.rows(); }
  const GraspScene& scene() const { return scene_; }
  const CouplingModel& coupling() const { return coupling_; }
  const RigidTransform& reference() const { return reference_; }
  const Correspondences& correspondences() const { return corr_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const Eigen::MatrixXd& eq_matrix() const { return eq_; }

  int position_of_revolute(int r) const {
    for (std::size_t c = 0; c < index_.independent.size(); ++c) {
      if (index_.independent[c] == r) return 6 + static_cast<int>(c);
    }
    for (std::size_t d = 0; d < index_.dependent.size(); ++d) {
      if (index_.dependent[d] == r) return 6 + coupling_.cols() + static_cast<int>(d);
    }
    throw Error(ErrorKind::InvalidCoupling, scene_.tree().revolute_names()[r]);
  }

  Eigen::VectorXd revolute_angles(const Eigen::VectorXd& x) const {
    Eigen::VectorXd q(scene_.tree().num_revolute());
    for (std::size_t c = 0; c < index_.independent.size(); ++c) q[index_.independent[c]] = x[6 + static_cast<Eigen::Index>(c)];
    for (std::size_t d = 0; d < index_.dependent.size(); ++d) {
      q[index_.dependent[d]] = x[6 + coupling_.cols() + static_cast<Eigen::Index>(d)];
    }
    return q;
  }

  Eigen::VectorXd pack(const Vector6d& wrist, const Eigen::VectorXd& q) const {
    Eigen::VectorXd x(dimension());
    x.head<6>() = wrist;
    for (int r = 0; r < scene_.tree().num_revolute(); ++r) x[position_of_revolute(r)] = q[r];
    return x;
  }

  NlpProblem problem(const std::vector<int>& rows) const {
    NlpProblem p;
    p.dimension = dimension();
    p.lower = lower_;
    p.upper = upper_;
    p.eq_matrix.resize(static_cast<Eigen::Index>(rows.size()), dimension());
    p.eq_rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) p.eq_matrix.row(static_cast<Eigen::Index>(i)) = eq_.row(rows[i]);
    // Captured by value: the problem stays valid if the builder moves on.
    const GraspScene scene = scene_;
    const RigidTransform ref = reference_;
    const Correspondences corr = corr_;
    const auto self = *this;
    p.objective = [self, scene, ref, corr](const Eigen::VectorXd& x) {
      return scene.evaluate(ref, x.head<6>(), self.revolute_angles(x), corr);
    };
    p.gradient = [self, scene, ref, corr](const Eigen::VectorXd& x) {
      Eigen::VectorXd full;
      scene.evaluate(ref, x.head<6>(), self.revolute_angles(x), corr, nullptr, &full);
      Eigen::VectorXd g(x.size());
      g.head<6>() = full.head<6>();
      for (int r = 0; r < scene.tree().num_revolute(); ++r) g[self.position_of_revolute(r)] = full[6 + r];
      return g;
    };
    return p;
  }

  bool refresh(const Eigen::VectorXd& x) {
    Correspondences next = scene_.nearest(wrist_pose(reference_, x.head<6>()), revolute_angles(x), corr_.version + 1);
    if (initialized_ && next == corr_) return false;
    corr_ = std::move(next);
    initialized_ = true;
    return true;
  }

  // Pins the correspondences, e.g. to re-evaluate a finished solve.
  void set_correspondences(Correspondences c) {
    corr_ = std::move(c);
    initialized_ = true;
  }

  // Folds a large wrist rotation increment into the reference pose.
  Eigen::VectorXd stage_boundary(const Eigen::VectorXd& x) {
    if (x.segment<3>(3).norm() <= 0.5 * std::numbers::pi) return x;
    Eigen::VectorXd out = x;
    const RigidTransform pose = wrist_pose(reference_, x.head<6>());
    // Keep translation relative to the original bounds box by re-centering it too.
    reference_ = pose;
    out.head<6>().setZero();
    return out;
  }

  double violation(const Eigen::VectorXd& x) const {
    if (coupling_.rows() == 0) return 0.0;
    return (eq_ * x).cwiseAbs().maxCoeff();
  }

  double energy(const Eigen::VectorXd& x, EnergyBreakdown* breakdown = nullptr) const {
    return scene_.evaluate(reference_, x.head<6>(), revolute_angles(x), corr_, breakdown);
  }

 private:
  GraspScene scene_;
  CouplingModel coupling_;
  CouplingIndex index_;
  GraspBuildOptions options_;
  RigidTransform reference_;
  Correspondences corr_;
  bool initialized_ = false;
  Eigen::VectorXd lower_, upper_;
  Eigen::MatrixXd eq_;
};

struct GraspSolution {
  GraspVariables vars;  // relative to the task's wrist reference
  RigidTransform wrist;  // world
  JointAngles full_angles;
  double energy = 0.0;
  double constraint_violation = 0.0;
  SolveStatus status = SolveStatus::NumericalFailure;
  std::vector<StageRecord> stage_trace;
  EnergyBreakdown breakdown;
  Correspondences correspondences;  // those the final energy is measured with
  std::uint64_t seed = 0;
  int restart = 0;
};

struct GraspSolveOptions {
  CascadeOptions cascade;
  GraspBuildOptions build;
  int restarts = 5;
  double restart_theta_perturbation = 0.1;         // rad, uniform +-
  double restart_translation_perturbation = 0.005;  // m, uniform +-
  int workers = 1;
};

// Initial decision vector: independent joints from the task's initial angles or
// their mid-range, dependent joints from the coupling, clamped to limits.
inline Eigen::VectorXd initial_guess(const GraspProblemBuilder& builder, const GraspTask& task) {
  const auto& tree = builder.scene().tree();
  const auto& coupling = builder.coupling();
  Eigen::VectorXd theta_I(coupling.cols());
  for (int c = 0; c < coupling.cols(); ++c) {
    const auto& name = coupling.independent()[c];
    const auto& lim = tree.model().joint(name).limits;
    double v = 0.5 * (lim.lower + lim.upper);
    if (task.initial_angles) {
      if (auto it = task.initial_angles->values.find(name); it != task.initial_angles->values.end()) v = it->second;
    }
    theta_I[c] = std::clamp(v, lim.lower, lim.upper);
  }
  const Eigen::VectorXd theta_D = coupling.matrix() * theta_I;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(builder.dimension());
  x.segment(6, coupling.cols()) = theta_I;
  x.segment(6 + coupling.cols(), coupling.rows()) = theta_D;
  return x.cwiseMax(builder.lower()).cwiseMin(builder.upper());
}

// Runs one cascade from x0 and packages the result.
inline GraspSolution solve_grasp_cascade(GraspProblemBuilder builder, const GraspTask& task,
                                         const CascadeSchedule& schedule, const Eigen::VectorXd& x0,
                                         const CascadeOptions& options) {
  const CascadeResult res = cascade_solve(builder, schedule, x0, options);
  GraspSolution sol;
  sol.status = res.status;
  sol.stage_trace = res.trace;
  sol.constraint_violation = res.violation;
  sol.wrist = wrist_pose(builder.reference(), res.x.head<6>());
  sol.vars.wrist = wrist_increment(task.wrist_reference, sol.wrist);
  sol.vars.theta_I = res.x.segment(6, builder.coupling().cols());
  sol.full_angles = builder.scene().tree().to_angles(builder.revolute_angles(res.x));
  sol.correspondences = builder.correspondences();
  sol.energy = builder.energy(res.x, &sol.breakdown);
  sol.seed = options.solve.seed;
  return sol;
}

inline bool better_solution(const GraspSolution& a, const GraspSolution& b) {
  const bool fa = a.status == SolveStatus::Converged, fb = b.status == SolveStatus::Converged;
  if (fa != fb) return fa;
  if (a.energy != b.energy) return a.energy < b.energy;
  return a.restart < b.restart;
}

// Multi-start cascade: restart 0 starts from the initial guess, later restarts
// perturb theta_I and the wrist translation. Lowest-energy converged result
// wins, ties by restart index.
inline GraspSolution solve_grasp(const HandModel& model, const CouplingModel& coupling, const GraspTask& task,
                                 const std::optional<CascadeSchedule>& schedule, const GraspSolveOptions& options,
                                 const std::optional<Eigen::VectorXd>& x0_override = std::nullopt) {
  const GraspProblemBuilder builder(model, coupling, task, options.build);
  const CascadeSchedule sched = schedule ? *schedule : default_schedule(coupling);
  sched.validate(coupling.rows());
  const Eigen::VectorXd x0 = x0_override ? *x0_override : initial_guess(builder, task);
  if (x0.size() != builder.dimension()) throw Error(ErrorKind::DimensionMismatch, "x0");

  std::mt19937_64 rng(options.cascade.solve.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Eigen::VectorXd> starts;
  const int restarts = std::max(1, options.restarts);
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd x = x0;
    if (r > 0) {
      for (int i = 0; i < 3; ++i) x[i] += options.restart_translation_perturbation * unit(rng);
      for (int c = 0; c < coupling.cols(); ++c) x[6 + c] += options.restart_theta_perturbation * unit(rng);
      x = x.cwiseMax(builder.lower()).cwiseMin(builder.upper());
    }
    starts.push_back(std::move(x));
  }

  auto run = [&](int r) {
    GraspSolution s = solve_grasp_cascade(builder, task, sched, starts[r], options.cascade);
    s.restart = r;
    return s;
  };
  std::vector<GraspSolution> results(starts.size());
  if (options.workers > 1 && restarts > 1) {
    std::vector<std::future<GraspSolution>> futures;
    for (int r = 0; r < restarts; ++r) futures.push_back(std::async(std::launch::async, run, r));
    for (int r = 0; r < restarts; ++r) results[r] = futures[r].get();
  } else {
    for (int r = 0; r < restarts; ++r) results[r] = run(r);
  }
  return *std::min_element(results.begin(), results.end(), better_solution);
}

}  // namespace softgrasp
