#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "softgrasp/error.hpp"
#include "softgrasp/hand_model.hpp"
#include "softgrasp/kinematics.hpp"

namespace softgrasp {

struct CouplingTriplet {
  int row = 0;  // dependent index
  int col = 0;  // independent index
  double value = 0.0;
};

// Linear tendon coupling theta_D = M theta_I, stored as sparse triplets.
// `groups` optionally labels each dependent row with its finger.
class CouplingModel {
 public:
  CouplingModel() = default;
  CouplingModel(std::vector<std::string> independent, std::vector<std::string> dependent,
                std::vector<CouplingTriplet> triplets, std::vector<std::string> groups = {})
      : independent_(std::move(independent)),
        dependent_(std::move(dependent)),
        triplets_(std::move(triplets)),
        groups_(std::move(groups)) {
    validate();
  }

  const std::vector<std::string>& independent() const { return independent_; }
  const std::vector<std::string>& dependent() const { return dependent_; }
  const std::vector<CouplingTriplet>& triplets() const { return triplets_; }
  const std::vector<std::string>& groups() const { return groups_; }
  int rows() const { return static_cast<int>(dependent_.size()); }
  int cols() const { return static_cast<int>(independent_.size()); }

  Eigen::SparseMatrix<double> matrix() const {
    std::vector<Eigen::Triplet<double>> t;
    for (const auto& e : triplets_) t.emplace_back(e.row, e.col, e.value);
    Eigen::SparseMatrix<double> m(rows(), cols());
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix()); }

  // Finger label of each dependent row. Falls back to the independent joint
  // the row is driven by when no explicit groups were given.
  std::vector<std::string> row_groups() const {
    if (!groups_.empty()) return groups_;
    std::vector<std::string> out(rows());
    for (const auto& e : triplets_) {
      if (out[e.row].empty() && e.value != 0.0) out[e.row] = independent_[e.col];
    }
    return out;
  }

  // Independent and dependent joints must partition the revolute joints.
  void check_partition(const HandModel& model) const {
    std::set<std::string> revolute;
    for (const auto& n : model.revolute_joint_names()) revolute.insert(n);
    std::set<std::string> covered;
    for (const auto* list : {&independent_, &dependent_}) {
      for (const auto& n : *list) {
        if (!revolute.count(n)) throw Error(ErrorKind::InvalidCoupling, n, "not a revolute joint of the model");
        covered.insert(n);
      }
    }
    for (const auto& n : revolute) {
      if (!covered.count(n)) throw Error(ErrorKind::InvalidCoupling, n, "revolute joint missing from coupling");
    }
  }

 private:
  void validate() const {
    std::set<std::string> seen;
    for (const auto* list : {&independent_, &dependent_}) {
      for (const auto& n : *list) {
        if (!seen.insert(n).second) throw Error(ErrorKind::InvalidCoupling, n, "joint listed twice");
      }
    }
    std::vector<bool> has_nonzero(dependent_.size(), false);
    for (const auto& e : triplets_) {
      if (e.row < 0 || e.row >= rows() || e.col < 0 || e.col >= cols()) {
        throw Error(ErrorKind::InvalidCoupling, std::to_string(e.row) + "," + std::to_string(e.col),
                    "triplet out of range");
      }
      if (!std::isfinite(e.value)) throw Error(ErrorKind::InvalidCoupling, dependent_[e.row], "non-finite entry");
      if (e.value != 0.0) has_nonzero[e.row] = true;
    }
    for (std::size_t r = 0; r < dependent_.size(); ++r) {
      if (!has_nonzero[r]) throw Error(ErrorKind::InvalidCoupling, dependent_[r], "dependent row has no entries");
    }
    if (!groups_.empty() && groups_.size() != dependent_.size()) {
      throw Error(ErrorKind::InvalidCoupling, "groups", "one group label per dependent row required");
    }
  }

  std::vector<std::string> independent_;
  std::vector<std::string> dependent_;
  std::vector<CouplingTriplet> triplets_;
  std::vector<std::string> groups_;
};

// Every joint independent, nothing coupled.
inline CouplingModel independent_coupling(const HandModel& model) {
  return CouplingModel(model.revolute_joint_names(), {}, {});
}

inline JointAngles expand_angles(const CouplingModel& coupling, const Eigen::VectorXd& theta_I) {
  if (theta_I.size() != coupling.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "theta_I",
                "expected " + std::to_string(coupling.cols()) + ", got " + std::to_string(theta_I.size()));
  }
  const Eigen::VectorXd theta_D = coupling.matrix() * theta_I;
  JointAngles out;
  for (int c = 0; c < coupling.cols(); ++c) out.values[coupling.independent()[c]] = theta_I[c];
  for (int r = 0; r < coupling.rows(); ++r) out.values[coupling.dependent()[r]] = theta_D[r];
  return out;
}

// M theta_I - theta_D, ordered as coupling.dependent().
inline Eigen::VectorXd constraint_residual(const CouplingModel& coupling, const JointAngles& angles) {
  auto get = [&](const std::string& name) {
    auto it = angles.values.find(name);
    if (it == angles.values.end()) throw Error(ErrorKind::MissingAngle, name);
    return it->second;
  };
  Eigen::VectorXd theta_I(coupling.cols());
  for (int c = 0; c < coupling.cols(); ++c) theta_I[c] = get(coupling.independent()[c]);
  Eigen::VectorXd theta_D(coupling.rows());
  for (int r = 0; r < coupling.rows(); ++r) theta_D[r] = get(coupling.dependent()[r]);
  return coupling.matrix() * theta_I - theta_D;
}

// ---- trajectory data and fitting ----

struct TrajectorySample {
  std::string motion_id;
  std::string finger;
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::optional<double> theta3;  // absent for two-segment fingers
};

struct JointTrajectoryDataset {
  std::vector<TrajectorySample> records;
  std::string source;
};

inline constexpr const char* kTrajectoryHeader = "motion_id,finger,theta1_rad,theta2_rad,theta3_rad";

inline JointTrajectoryDataset parse_trajectory_csv(const std::string& text, const std::string& source = "<csv>") {
  JointTrajectoryDataset data;
  data.source = source;
  std::istringstream in(text);
  std::string line;
  int row = 0;
  bool header_seen = false;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::SchemaViolation, source + ":" + std::to_string(row), msg);
  };
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kTrajectoryHeader) fail(std::string("expected header '") + kTrajectoryHeader + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 5) fail("expected 5 columns, got " + std::to_string(cells.size()));
    auto number = [&](const std::string& s, const char* col) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (...) {
        fail(std::string("column ") + col + " is not a number: '" + s + "'");
      }
      if (used != s.size() || !std::isfinite(v)) fail(std::string("column ") + col + " is not a finite number");
      return v;
    };
    TrajectorySample s;
    s.motion_id = cells[0];
    s.finger = cells[1];
    if (s.finger.empty()) fail("finger is empty");
    s.theta1 = number(cells[2], "theta1_rad");
    s.theta2 = number(cells[3], "theta2_rad");
    if (!cells[4].empty()) s.theta3 = number(cells[4], "theta3_rad");
    data.records.push_back(std::move(s));
  }
  if (!header_seen) {
    row = 1;
    fail("empty file");
  }
  return data;
}

struct CouplingFitOptions {
  // "{finger}" and "{k}" (1 = proximal) are substituted to form joint names.
  std::string joint_name_pattern = "{finger}_j{k}";
  // Separately actuated joints (e.g. thumb ab/adduction) kept independent.
  std::vector<std::string> extra_independent;
};

inline std::string finger_joint_name(const CouplingFitOptions& opt, const std::string& finger, int k) {
  std::string out = opt.joint_name_pattern;
  for (auto pos = out.find("{finger}"); pos != std::string::npos; pos = out.find("{finger}")) {
    out.replace(pos, 8, finger);
  }
  for (auto pos = out.find("{k}"); pos != std::string::npos; pos = out.find("{k}")) {
    out.replace(pos, 3, std::to_string(k));
  }
  return out;
}

struct FingerFit {
  std::string finger;
  std::vector<double> coefficients;  // m2, m3 (m3 absent for two-segment fingers)
  double residual_rms = 0.0;
  std::size_t samples = 0;
};

struct CouplingFit {
  CouplingModel coupling;
  std::vector<FingerFit> fingers;  // finger name ascending
};

// Zero-intercept least squares per finger: m_k = sum(t1 tk) / sum(t1^2). The
// proximal joint of each finger becomes the independent DoF.
inline CouplingFit fit_coupling(const JointTrajectoryDataset& dataset, const CouplingFitOptions& options = {}) {
  std::map<std::string, std::vector<const TrajectorySample*>> by_finger;
  for (const auto& s : dataset.records) by_finger[s.finger].push_back(&s);
  if (by_finger.empty()) throw Error(ErrorKind::InsufficientData, "<all>", "dataset has no samples");

  std::vector<std::string> independent, dependent, groups;
  std::vector<CouplingTriplet> triplets;
  std::vector<FingerFit> fits;
  for (const auto& [finger, samples] : by_finger) {
    if (samples.size() < 2) throw Error(ErrorKind::InsufficientData, finger, "need at least 2 samples");
    const bool three = samples.front()->theta3.has_value();
    for (const auto* s : samples) {
      if (s->theta3.has_value() != three) {
        throw Error(ErrorKind::SchemaViolation, finger, "theta3 present for some samples only");
      }
    }
    double s11 = 0, s12 = 0, s13 = 0;
    for (const auto* s : samples) {
      s11 += s->theta1 * s->theta1;
      s12 += s->theta1 * s->theta2;
      if (three) s13 += s->theta1 * *s->theta3;
    }
    if (s11 == 0.0) throw Error(ErrorKind::DegenerateData, finger, "all proximal angles are zero");

    FingerFit fit{finger, {s12 / s11}, 0.0, samples.size()};
    if (three) fit.coefficients.push_back(s13 / s11);
    double sq = 0;
    std::size_t terms = 0;
    for (const auto* s : samples) {
      const double e2 = s->theta2 - fit.coefficients[0] * s->theta1;
      sq += e2 * e2;
      ++terms;
      if (three) {
        const double e3 = *s->theta3 - fit.coefficients[1] * s->theta1;
        sq += e3 * e3;
        ++terms;
      }
    }
    fit.residual_rms = std::sqrt(sq / static_cast<double>(terms));

    const int col = static_cast<int>(independent.size());
    independent.push_back(finger_joint_name(options, finger, 1));
    for (std::size_t k = 0; k < fit.coefficients.size(); ++k) {
      triplets.push_back({static_cast<int>(dependent.size()), col, fit.coefficients[k]});
      dependent.push_back(finger_joint_name(options, finger, static_cast<int>(k) + 2));
      groups.push_back(finger);
    }
    fits.push_back(std::move(fit));
  }
  for (const auto& extra : options.extra_independent) independent.push_back(extra);
  return {CouplingModel(std::move(independent), std::move(dependent), std::move(triplets), std::move(groups)),
          std::move(fits)};
}

}  // namespace softgrasp
