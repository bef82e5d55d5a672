#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "softgrasp/hand_model.hpp"
#include "softgrasp/transform.hpp"

namespace softgrasp {

struct JointAngles {
  std::map<std::string, double> values;  // radians, keyed by joint name
  bool clamped = false;
};

struct PoseMap {
  std::map<std::string, RigidTransform> poses;  // world frame, keyed by link name

  const RigidTransform& at(const std::string& link) const {
    auto it = poses.find(link);
    if (it == poses.end()) throw Error(ErrorKind::UnknownOwner, link);
    return it->second;
  }
};

// Index-based view of a HandModel for repeated evaluation. Revolute joints are
// numbered in topological order; `angles` vectors follow that numbering.
class KinematicTree {
 public:
  explicit KinematicTree(const HandModel& model) : model_(&model) {
    const auto& joints = model.joints();
    for (int ji : model.topological_joints()) {
      if (joints[ji].kind == JointKind::Revolute) {
        revolute_of_joint_[ji] = static_cast<int>(revolute_joints_.size());
        revolute_joints_.push_back(ji);
        revolute_names_.push_back(joints[ji].name);
      }
    }
    const int n_links = static_cast<int>(model.links().size());
    path_.resize(n_links);
    for (int l = 0; l < n_links; ++l) {
      std::vector<int> path;
      for (int cur = l; model.parent_joint(cur) >= 0;) {
        const int ji = model.parent_joint(cur);
        if (auto it = revolute_of_joint_.find(ji); it != revolute_of_joint_.end()) path.push_back(it->second);
        cur = *model.find_link(joints[ji].parent);
      }
      path_[l].assign(path.rbegin(), path.rend());
    }
    for (int ji : model.topological_joints()) {
      parent_link_.push_back(*model.find_link(joints[ji].parent));
      child_link_.push_back(*model.find_link(joints[ji].child));
    }
    root_ = *model.find_link(model.root());
  }

  const HandModel& model() const { return *model_; }
  int num_revolute() const { return static_cast<int>(revolute_joints_.size()); }
  const std::vector<std::string>& revolute_names() const { return revolute_names_; }
  const Joint& revolute_joint(int r) const { return model_->joints()[revolute_joints_[r]]; }

  // Revolute indices on the root -> link path, root side first.
  const std::vector<int>& path(int link) const { return path_[link]; }

  struct Frames {
    std::vector<RigidTransform> link_pose;  // indexed by link index
    std::vector<Vec3> axis_world;           // indexed by revolute index
    std::vector<Vec3> origin_world;         // indexed by revolute index
  };

  // child = parent ∘ origin ∘ Rot(axis, angle); fixed joints contribute origin only.
  Frames frames(const Eigen::VectorXd& angles, const RigidTransform& base) const {
    Frames f;
    f.link_pose.resize(model_->links().size());
    f.axis_world.resize(revolute_joints_.size());
    f.origin_world.resize(revolute_joints_.size());
    f.link_pose[root_] = base;
    const auto& topo = model_->topological_joints();
    for (std::size_t k = 0; k < topo.size(); ++k) {
      const Joint& j = model_->joints()[topo[k]];
      const RigidTransform joint_frame = f.link_pose[parent_link_[k]] * j.origin;
      if (j.kind == JointKind::Revolute) {
        const int r = revolute_of_joint_.at(topo[k]);
        f.axis_world[r] = joint_frame.rotation * j.axis;
        f.origin_world[r] = joint_frame.translation;
        f.link_pose[child_link_[k]] = joint_frame * RigidTransform::from_rotation(axis_angle(j.axis, angles[r]));
      } else {
        f.link_pose[child_link_[k]] = joint_frame;
      }
    }
    return f;
  }

  Eigen::VectorXd to_vector(const JointAngles& angles) const {
    Eigen::VectorXd q(num_revolute());
    for (int r = 0; r < num_revolute(); ++r) {
      auto it = angles.values.find(revolute_names_[r]);
      if (it == angles.values.end()) throw Error(ErrorKind::MissingAngle, revolute_names_[r]);
      q[r] = it->second;
    }
    return q;
  }

  JointAngles to_angles(const Eigen::VectorXd& q) const {
    JointAngles a;
    for (int r = 0; r < num_revolute(); ++r) a.values[revolute_names_[r]] = q[r];
    return a;
  }

 private:
  const HandModel* model_;
  std::map<int, int> revolute_of_joint_;
  std::vector<int> revolute_joints_;
  std::vector<std::string> revolute_names_;
  std::vector<std::vector<int>> path_;
  std::vector<int> parent_link_;
  std::vector<int> child_link_;
  int root_ = 0;
};

inline PoseMap forward_kinematics(const HandModel& model, const JointAngles& angles, const RigidTransform& base) {
  const KinematicTree tree(model);
  const auto frames = tree.frames(tree.to_vector(angles), base);
  PoseMap out;
  for (std::size_t l = 0; l < model.links().size(); ++l) out.poses[model.links()[l].name] = frames.link_pose[l];
  return out;
}

// Object-owned patches resolve through poses["object"] when present.
inline std::vector<Vec3> patch_world_points(const HandModel& model, const PoseMap& poses, const ContactPatch& patch) {
  if (patch.owner != kObjectOwner && !model.find_link(patch.owner)) throw Error(ErrorKind::UnknownOwner, patch.owner);
  const RigidTransform& pose = poses.at(patch.owner);
  std::vector<Vec3> out;
  out.reserve(patch.points.size());
  for (const Vec3& p : patch.points) out.push_back(pose * p);
  return out;
}

struct PointJacobian {
  std::vector<std::string> joints;  // revolute joints on the root -> link path
  Eigen::Matrix3Xd columns;         // one column per entry of `joints`
};

// Column j = axis_world_j x (p_world - o_world_j). Joints off the path are omitted.
inline PointJacobian point_jacobian(const HandModel& model, const JointAngles& angles, const RigidTransform& base,
                                   const std::string& link, const Vec3& local_point) {
  auto li = model.find_link(link);
  if (!li) throw Error(ErrorKind::UnknownLink, link);
  const KinematicTree tree(model);
  const auto frames = tree.frames(tree.to_vector(angles), base);
  const Vec3 p = frames.link_pose[*li] * local_point;
  const auto& path = tree.path(*li);
  PointJacobian out;
  out.columns.resize(3, static_cast<Eigen::Index>(path.size()));
  for (std::size_t k = 0; k < path.size(); ++k) {
    const int r = path[k];
    out.joints.push_back(tree.revolute_names()[r]);
    out.columns.col(static_cast<Eigen::Index>(k)) = frames.axis_world[r].cross(p - frames.origin_world[r]);
  }
  return out;
}

// Central differences, used where a term has no analytic derivative.
template <typename F>
Eigen::VectorXd central_difference_gradient(F&& f, const Eigen::VectorXd& x, double step = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + step;
    const double fp = f(xp);
    xp[i] = x[i] - step;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace softgrasp
