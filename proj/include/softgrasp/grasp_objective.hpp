#pragma once

#include <Eigen/Core>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "softgrasp/hand_model.hpp"
#include "softgrasp/kinematics.hpp"
#include "softgrasp/mesh.hpp"
#include "softgrasp/underactuation.hpp"

namespace softgrasp {

using Vector6d = Eigen::Matrix<double, 6, 1>;

struct PatchPair {
  std::string hand;
  std::string object;
};

struct GraspTask {
  std::string name;
  TriangleMesh object_mesh;        // object frame, meters
  std::string object_mesh_path;    // as referenced by the task file, may be empty
  RigidTransform object_pose;      // world
  RigidTransform wrist_reference;  // world; wrist variables are increments on this
  std::vector<ContactPatch> patches;  // object-owned, plus optional hand-owned patches
  std::vector<PatchPair> pairs;
  std::optional<JointAngles> initial_angles;

  const ContactPatch* find_patch(const std::string& id) const {
    for (const auto& p : patches) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }
};

// Translation (m) then rotation vector (rad), both relative to a reference pose.
struct GraspVariables {
  Vector6d wrist = Vector6d::Zero();
  Eigen::VectorXd theta_I;
};

inline RigidTransform wrist_pose(const RigidTransform& reference, const Vector6d& wrist) {
  return {reference.translation + wrist.head<3>(), so3_exp(wrist.tail<3>()) * reference.rotation};
}

// Inverse of wrist_pose: the increment taking `reference` to `pose`.
inline Vector6d wrist_increment(const RigidTransform& reference, const RigidTransform& pose) {
  Vector6d w;
  w.head<3>() = pose.translation - reference.translation;
  w.tail<3>() = so3_log(pose.rotation * reference.rotation.conjugate());
  return w;
}

// For each pair, the object point index assigned to each hand patch point.
struct Correspondences {
  int version = 0;
  std::vector<std::vector<int>> nearest;

  bool operator==(const Correspondences& o) const { return nearest == o.nearest; }
};

struct PairEnergy {
  std::string hand;
  std::string object;
  double energy = 0.0;  // m^2
};

struct EnergyBreakdown {
  double total = 0.0;
  std::vector<PairEnergy> per_pair;
  int correspondence_version = 0;
};

struct ObjectiveOptions {
  // Weight of the optional normal-opposition term (1 + n_hand . n_object).
  double normal_weight = 0.0;
};

// Maps coupling order (independent / dependent lists) onto the revolute
// numbering of a KinematicTree.
struct CouplingIndex {
  std::vector<int> independent;
  std::vector<int> dependent;

  CouplingIndex() = default;
  CouplingIndex(const KinematicTree& tree, const CouplingModel& coupling) {
    coupling.check_partition(tree.model());
    std::map<std::string, int> rev;
    for (int r = 0; r < tree.num_revolute(); ++r) rev[tree.revolute_names()[r]] = r;
    for (const auto& n : coupling.independent()) independent.push_back(rev.at(n));
    for (const auto& n : coupling.dependent()) dependent.push_back(rev.at(n));
  }

  Eigen::VectorXd full_angles(const CouplingModel& coupling, const Eigen::VectorXd& theta_I, int n) const {
    if (theta_I.size() != static_cast<Eigen::Index>(independent.size())) {
      throw Error(ErrorKind::DimensionMismatch, "theta_I",
                  "expected " + std::to_string(independent.size()) + ", got " + std::to_string(theta_I.size()));
    }
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd theta_D = coupling.matrix() * theta_I;
    for (std::size_t c = 0; c < independent.size(); ++c) q[independent[c]] = theta_I[static_cast<Eigen::Index>(c)];
    for (std::size_t r = 0; r < dependent.size(); ++r) q[dependent[r]] = theta_D[static_cast<Eigen::Index>(r)];
    return q;
  }
};

// Precompiled hand/task pair for repeated energy evaluation. Hand-owned patches
// listed in the task are attached to the model copy held here.
class GraspScene {
 public:
  GraspScene(const HandModel& model, const GraspTask& task, ObjectiveOptions options = {})
      : options_(options), task_(std::make_shared<const GraspTask>(task)) {
    HandModel m = model;
    for (const auto& p : task.patches) {
      if (p.owner != kObjectOwner) m = attach_patch(m, p);
    }
    model_ = std::make_shared<const HandModel>(std::move(m));
    tree_ = std::make_shared<const KinematicTree>(*model_);

    std::set<std::string> used_hand;
    for (const auto& pair : task.pairs) {
      const ContactPatch* hp = model_->find_patch(pair.hand);
      if (!hp || hp->owner == kObjectOwner) throw Error(ErrorKind::UnknownPatch, pair.hand);
      const ContactPatch* op = task.find_patch(pair.object);
      if (!op || op->owner != kObjectOwner) throw Error(ErrorKind::UnknownPatch, pair.object);
      if (!used_hand.insert(pair.hand).second) {
        throw Error(ErrorKind::UnknownPatch, pair.hand, "hand patch paired more than once");
      }
      ResolvedPair rp;
      rp.hand = pair.hand;
      rp.object = pair.object;
      rp.link = *model_->find_link(hp->owner);
      rp.local_points = hp->points;
      rp.local_normals = hp->normals;
      for (const Vec3& p : op->points) rp.object_points.push_back(task.object_pose * p);
      if (op->normals) {
        rp.object_normals.emplace();
        for (const Vec3& n : *op->normals) rp.object_normals->push_back(task.object_pose.rotation * n);
      }
      pairs_.push_back(std::move(rp));
    }
  }

  const HandModel& model() const { return *model_; }
  const KinematicTree& tree() const { return *tree_; }
  const GraspTask& task() const { return *task_; }
  int num_pairs() const { return static_cast<int>(pairs_.size()); }

  std::vector<Vec3> hand_points(int pair, const KinematicTree::Frames& frames) const {
    const auto& rp = pairs_[pair];
    std::vector<Vec3> out;
    for (const Vec3& p : rp.local_points) out.push_back(frames.link_pose[rp.link] * p);
    return out;
  }
  const std::vector<Vec3>& object_points(int pair) const { return pairs_[pair].object_points; }

  // Nearest object point per hand point; ties go to the lowest index.
  Correspondences nearest(const RigidTransform& base, const Eigen::VectorXd& q, int version) const {
    const auto frames = tree_->frames(q, base);
    Correspondences c;
    c.version = version;
    for (int k = 0; k < num_pairs(); ++k) {
      std::vector<int> assign;
      for (const Vec3& x : hand_points(k, frames)) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        const auto& ys = pairs_[k].object_points;
        for (std::size_t i = 0; i < ys.size(); ++i) {
          const double d = (x - ys[i]).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
          }
        }
        assign.push_back(best);
      }
      c.nearest.push_back(std::move(assign));
    }
    return c;
  }

  // Energy at base = wrist_pose(reference, wrist) and revolute angles q.
  // `gradient`, when given, receives d/d(wrist, q) with size 6 + num_revolute.
  double evaluate(const RigidTransform& reference, const Vector6d& wrist, const Eigen::VectorXd& q,
                  const Correspondences& corr, EnergyBreakdown* breakdown = nullptr,
                  Eigen::VectorXd* gradient = nullptr) const {
    if (q.size() != tree_->num_revolute()) throw Error(ErrorKind::DimensionMismatch, "angles");
    if (static_cast<int>(corr.nearest.size()) != num_pairs()) {
      throw Error(ErrorKind::DimensionMismatch, "correspondences");
    }
    const RigidTransform base = wrist_pose(reference, wrist);
    const auto frames = tree_->frames(q, base);
    Mat3 jl_t;
    if (gradient) {
      gradient->setZero(6 + tree_->num_revolute());
      jl_t = so3_left_jacobian(wrist.tail<3>()).transpose();
    }
    if (breakdown) {
      breakdown->per_pair.clear();
      breakdown->correspondence_version = corr.version;
    }
    double total = 0.0;
    for (int k = 0; k < num_pairs(); ++k) {
      const auto& rp = pairs_[k];
      const auto& assign = corr.nearest[k];
      if (assign.size() != rp.local_points.size()) throw Error(ErrorKind::DimensionMismatch, "correspondences");
      const RigidTransform& pose = frames.link_pose[rp.link];
      const double inv_p = 1.0 / static_cast<double>(rp.local_points.size());
      const bool use_normals = options_.normal_weight != 0.0 && rp.local_normals && rp.object_normals;
      const auto& path = tree_->path(rp.link);
      double e = 0.0;
      for (std::size_t i = 0; i < rp.local_points.size(); ++i) {
        const Vec3 x = pose * rp.local_points[i];
        const Vec3 diff = x - rp.object_points[assign[i]];
        e += inv_p * diff.squaredNorm();
        std::optional<Vec3> n, m;
        if (use_normals) {
          n = pose.rotation * (*rp.local_normals)[i];
          m = (*rp.object_normals)[assign[i]];
          e += options_.normal_weight * inv_p * (1.0 + n->dot(*m));
        }
        if (!gradient) continue;
        const Vec3 r = 2.0 * inv_p * diff;
        const Vec3 v = x - base.translation;
        gradient->head<3>() += r;
        gradient->segment<3>(3) += jl_t * v.cross(r);
        for (int j : path) {
          (*gradient)[6 + j] += r.dot(frames.axis_world[j].cross(x - frames.origin_world[j]));
        }
        if (n) {
          const double w = options_.normal_weight * inv_p;
          gradient->segment<3>(3) += w * (jl_t * n->cross(*m));
          for (int j : path) (*gradient)[6 + j] += w * m->dot(frames.axis_world[j].cross(*n));
        }
      }
      if (breakdown) breakdown->per_pair.push_back({rp.hand, rp.object, e});
      total += e;
    }
    if (breakdown) breakdown->total = total;
    return total;
  }

 private:
  struct ResolvedPair {
    std::string hand;
    std::string object;
    int link = 0;
    std::vector<Vec3> local_points;
    std::optional<std::vector<Vec3>> local_normals;
    std::vector<Vec3> object_points;  // world
    std::optional<std::vector<Vec3>> object_normals;  // world
  };

  ObjectiveOptions options_;
  std::shared_ptr<const GraspTask> task_;
  std::shared_ptr<const HandModel> model_;
  std::shared_ptr<const KinematicTree> tree_;
  std::vector<ResolvedPair> pairs_;
};

inline Correspondences update_correspondences(const HandModel& model, const CouplingModel& coupling,
                                              const GraspTask& task, const GraspVariables& vars, int version = 0) {
  const GraspScene scene(model, task);
  const CouplingIndex index(scene.tree(), coupling);
  const Eigen::VectorXd q = index.full_angles(coupling, vars.theta_I, scene.tree().num_revolute());
  return scene.nearest(wrist_pose(task.wrist_reference, vars.wrist), q, version);
}

inline EnergyBreakdown alignment_energy(const HandModel& model, const CouplingModel& coupling, const GraspTask& task,
                                        const GraspVariables& vars, const Correspondences& corr,
                                        ObjectiveOptions options = {}) {
  const GraspScene scene(model, task, options);
  const CouplingIndex index(scene.tree(), coupling);
  const Eigen::VectorXd q = index.full_angles(coupling, vars.theta_I, scene.tree().num_revolute());
  EnergyBreakdown out;
  scene.evaluate(task.wrist_reference, vars.wrist, q, corr, &out);
  return out;
}

// d energy / d(wrist, theta_I); dependent joints contribute through M^T.
inline Eigen::VectorXd energy_gradient(const HandModel& model, const CouplingModel& coupling, const GraspTask& task,
                                       const GraspVariables& vars, const Correspondences& corr,
                                       ObjectiveOptions options = {}) {
  const GraspScene scene(model, task, options);
  const CouplingIndex index(scene.tree(), coupling);
  const Eigen::VectorXd q = index.full_angles(coupling, vars.theta_I, scene.tree().num_revolute());
  Eigen::VectorXd full;
  scene.evaluate(task.wrist_reference, vars.wrist, q, corr, nullptr, &full);
  Eigen::VectorXd g_dep(coupling.rows());
  for (int r = 0; r < coupling.rows(); ++r) g_dep[r] = full[6 + index.dependent[r]];
  Eigen::VectorXd out(6 + coupling.cols());
  out.head<6>() = full.head<6>();
  const Eigen::VectorXd chain = coupling.matrix().transpose() * g_dep;
  for (int c = 0; c < coupling.cols(); ++c) out[6 + c] = full[6 + index.independent[c]] + chain[c];
  return out;
}

}  // namespace softgrasp
