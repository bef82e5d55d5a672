#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "softgrasp/grasp_objective.hpp"
#include "softgrasp/hand_model.hpp"
#include "softgrasp/kinematics.hpp"
#include "softgrasp/mesh.hpp"
#include "softgrasp/underactuation.hpp"

// Default seven-tendon hand, study objects and task generators.
namespace softgrasp::presets {

inline const std::vector<std::string> kFingers = {"index", "middle", "ring", "little"};

struct HandOptions {
  std::string name = "soft_hand";
  // Palm geometry as a mesh reference (relative to the URDF) instead of a box.
  std::string palm_mesh;
  Vec3 palm_size{0.09, 0.10, 0.02};
};

inline Joint revolute(std::string name, std::string parent, std::string child, const RigidTransform& origin,
                      const Vec3& axis, double lower, double upper) {
  Joint j;
  j.name = std::move(name);
  j.kind = JointKind::Revolute;
  j.parent = std::move(parent);
  j.child = std::move(child);
  j.origin = origin;
  j.axis = axis;
  j.limits = {lower, upper};
  return j;
}

inline Joint fixed(std::string name, std::string parent, std::string child, const RigidTransform& origin) {
  Joint j;
  j.name = std::move(name);
  j.kind = JointKind::Fixed;
  j.parent = std::move(parent);
  j.child = std::move(child);
  j.origin = origin;
  return j;
}

// A segment along local +y, pad facing -z.
inline Link segment(std::string name, double length, double width = 0.016, double thickness = 0.014) {
  Link l;
  l.name = std::move(name);
  l.geometry = BoxGeometry{Vec3(width, length, thickness)};
  l.geometry_origin = RigidTransform::from_translation(Vec3(0, 0.5 * length, 0));
  return l;
}

struct FingerSpec {
  std::string name;
  double x;
  std::array<double, 3> lengths;
};

inline std::vector<FingerSpec> finger_specs() {
  return {{"index", 0.033, {0.045, 0.028, 0.022}},
          {"middle", 0.011, {0.048, 0.030, 0.023}},
          {"ring", -0.011, {0.045, 0.028, 0.022}},
          {"little", -0.033, {0.036, 0.022, 0.019}}};
}

inline constexpr std::array<double, 3> kThumbLengths = {0.040, 0.030, 0.025};
inline constexpr double kThumbMetacarpal = 0.030;

inline RigidTransform thumb_mount_origin() {
  return RigidTransform::from_xyz_rpy(Vec3(0.040, -0.025, -0.012), Vec3(0.0, 0.0, -0.7));
}

// 17 revolute joints: three per finger, plus thumb ab/adduction and opposition
// stacked through a zero-length fixed link, plus three thumb flexion joints.
inline HandModel default_hand(const HandOptions& opt = {}) {
  std::vector<Link> links;
  std::vector<Joint> joints;
  const double half_pi = 0.5 * std::numbers::pi;
  const Vec3 flex(-1.0, 0.0, 0.0);

  Link palm;
  palm.name = "palm";
  if (opt.palm_mesh.empty()) {
    palm.geometry = BoxGeometry{opt.palm_size};
  } else {
    palm.geometry = MeshGeometry{opt.palm_mesh, Vec3::Ones(), nullptr};
  }
  links.push_back(palm);

  const double top = 0.5 * opt.palm_size.y();
  for (const auto& f : finger_specs()) {
    const std::string names[3] = {f.name + "_proximal", f.name + "_middle", f.name + "_distal"};
    std::string parent = "palm";
    RigidTransform origin = RigidTransform::from_translation(Vec3(f.x, top, 0.0));
    for (int k = 0; k < 3; ++k) {
      links.push_back(segment(names[k], f.lengths[k]));
      joints.push_back(revolute(f.name + "_j" + std::to_string(k + 1), parent, names[k], origin, flex, 0.0, half_pi));
      parent = names[k];
      origin = RigidTransform::from_translation(Vec3(0, f.lengths[k], 0));
    }
  }

  Link base = segment("thumb_base", 0.012, 0.02, 0.016);
  links.push_back(base);
  joints.push_back(fixed("thumb_mount", "palm", "thumb_base", thumb_mount_origin()));
  Link abd;
  abd.name = "thumb_abd_link";
  links.push_back(abd);
  joints.push_back(revolute("thumb_abd", "thumb_base", "thumb_abd_link",
                            RigidTransform::from_translation(Vec3(0, 0.012, 0)), Vec3(0, 0, 1), -0.6, 0.6));
  Link layer;
  layer.name = "thumb_opp_link";
  links.push_back(layer);
  joints.push_back(fixed("thumb_layer", "thumb_abd_link", "thumb_opp_link", RigidTransform::identity()));
  links.push_back(segment("thumb_metacarpal", kThumbMetacarpal, 0.018, 0.016));
  joints.push_back(revolute("thumb_opp", "thumb_opp_link", "thumb_metacarpal", RigidTransform::identity(),
                            Vec3(0, 1, 0), 0.0, half_pi));
  std::string parent = "thumb_metacarpal";
  RigidTransform origin = RigidTransform::from_translation(Vec3(0, kThumbMetacarpal, 0));
  const std::string tnames[3] = {"thumb_proximal", "thumb_middle", "thumb_distal"};
  for (int k = 0; k < 3; ++k) {
    links.push_back(segment(tnames[k], kThumbLengths[k], 0.018, 0.016));
    joints.push_back(revolute("thumb_j" + std::to_string(k + 1), parent, tnames[k], origin, flex, 0.0, half_pi));
    parent = tnames[k];
    origin = RigidTransform::from_translation(Vec3(0, kThumbLengths[k], 0));
  }
  return HandModel::build(opt.name, std::move(links), std::move(joints), {});
}

// Four-point pad near the tip of each distal segment, normals out of the pad.
inline std::vector<ContactPatch> default_patches() {
  std::vector<ContactPatch> out;
  auto pad = [](const std::string& finger, double length, double half_thickness) {
    ContactPatch p;
    p.id = finger + "_tip";
    p.owner = finger + "_distal";
    p.label = finger;
    for (double fy : {0.55, 0.85}) {
      for (double x : {-0.004, 0.004}) p.points.emplace_back(x, fy * length, -half_thickness);
    }
    p.normals = std::vector<Vec3>(p.points.size(), Vec3(0, 0, -1));
    return p;
  };
  for (const auto& f : finger_specs()) out.push_back(pad(f.name, f.lengths[2], 0.007));
  out.push_back(pad("thumb", kThumbLengths[2], 0.008));
  ContactPatch palm;
  palm.id = "palm_center";
  palm.owner = "palm";
  palm.label = "palm";
  for (double x : {-0.02, 0.0, 0.02}) {
    for (double y : {-0.01, 0.02}) palm.points.emplace_back(x, y, -0.01);
  }
  palm.normals = std::vector<Vec3>(palm.points.size(), Vec3(0, 0, -1));
  out.push_back(palm);
  return out;
}

inline HandModel default_hand_with_patches(const HandOptions& opt = {}) {
  HandModel m = default_hand(opt);
  for (const auto& p : default_patches()) m = attach_patch(m, p);
  return m;
}

// Per-finger proportional coupling with the proximal joint independent; the
// thumb's ab/adduction and opposition joints stay independent.
inline CouplingModel default_coupling(double m2 = 0.8, double m3 = 0.6) {
  std::vector<std::string> fingers = kFingers;
  fingers.push_back("thumb");
  std::sort(fingers.begin(), fingers.end());
  std::vector<std::string> indep, dep, groups;
  std::vector<CouplingTriplet> trips;
  for (const auto& f : fingers) {
    const int col = static_cast<int>(indep.size());
    indep.push_back(f + "_j1");
    for (int k = 2; k <= 3; ++k) {
      trips.push_back({static_cast<int>(dep.size()), col, k == 2 ? m2 : m3});
      dep.push_back(f + "_j" + std::to_string(k));
      groups.push_back(f);
    }
  }
  indep.push_back("thumb_abd");
  indep.push_back("thumb_opp");
  return CouplingModel(indep, dep, trips, groups);
}

// Synthetic flexion recordings: five motions per finger, theta_k = m_k theta_1
// plus optional Gaussian noise.
inline std::string synthetic_trajectory_csv(double m2, double m3, double noise, std::uint64_t seed,
                                            int samples_per_motion = 20) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, noise);
  std::ostringstream out;
  out.precision(17);
  out << kTrajectoryHeader << "\n";
  std::vector<std::string> fingers = kFingers;
  fingers.push_back("thumb");
  for (int motion = 1; motion <= 5; ++motion) {
    for (const auto& f : fingers) {
      for (int i = 1; i <= samples_per_motion; ++i) {
        const double t1 = 0.5 * std::numbers::pi * i / samples_per_motion * (0.8 + 0.05 * motion);
        const double t2 = m2 * t1 + (noise > 0 ? eps(rng) : 0.0);
        const double t3 = m3 * t1 + (noise > 0 ? eps(rng) : 0.0);
        out << "motion" << motion << "," << f << "," << t1 << "," << t2 << "," << t3 << "\n";
      }
    }
  }
  return out.str();
}

// ---- objects ----

inline TriangleMesh study_object(const std::string& name) {
  if (name == "box") return box_mesh(Vec3(0.060, 0.050, 0.050));
  if (name == "lemon") return ellipsoid_mesh(Vec3(0.030, 0.026, 0.026), 14, 20);
  if (name == "bowl") {
    // Open bowl with a rounded (torus-section) rim, axis +z.
    std::vector<std::pair<double, double>> profile = {{0.0, -0.030}};
    for (int k = 1; k <= 6; ++k) {
      const double a = 0.5 * std::numbers::pi * k / 6;
      profile.emplace_back(0.055 * std::sin(a), -0.030 * std::cos(a) - 0.0);
    }
    for (int k = 1; k <= 4; ++k) {
      const double a = std::numbers::pi * k / 4;
      profile.emplace_back(0.060 - 0.005 * std::cos(a), 0.005 * std::sin(a));
    }
    for (int k = 1; k <= 5; ++k) {
      const double a = 0.5 * std::numbers::pi * (1.0 - k / 5.0);
      profile.emplace_back(0.050 * std::sin(a) + 0.0001, -0.025 * std::cos(a));
    }
    return lathe_mesh(profile, 28);
  }
  if (name == "glass") {
    return lathe_mesh({{0.0, -0.080},
                       {0.035, -0.080},
                       {0.035, -0.076},
                       {0.006, -0.072},
                       {0.004, -0.040},
                       {0.012, -0.032},
                       {0.030, -0.020},
                       {0.037, 0.000},
                       {0.035, 0.030},
                       {0.033, 0.045},
                       {0.0, 0.045}},
                      24);
  }
  throw Error(ErrorKind::FileNotFound, name, "unknown study object");
}

inline const std::vector<std::string>& study_objects() {
  static const std::vector<std::string> names = {"bowl", "box", "lemon", "glass"};
  return names;
}

// Curled reference posture used to place objects and pick their patches.
inline Eigen::VectorXd reference_grasp_theta(const CouplingModel& coupling, const std::string& object) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(coupling.cols());
  const double curl = object == "bowl" ? 0.55 : object == "lemon" ? 0.85 : 0.75;
  for (int c = 0; c < coupling.cols(); ++c) {
    const auto& n = coupling.independent()[c];
    if (n == "thumb_abd") theta[c] = 0.2;
    else if (n == "thumb_opp") theta[c] = 0.9;
    else if (n == "thumb_j1") theta[c] = 0.5;
    else theta[c] = curl;
  }
  return theta;
}

struct TaskSpec {
  std::string name;
  std::string object;
  // Patch pairs: hand patch id -> object patch id.
  std::vector<std::string> hand_patches = {"index_tip", "middle_tip", "ring_tip", "little_tip", "thumb_tip"};
  int points_per_object_patch = 6;
};

// Places the object at the fingertip centroid of the reference posture and
// cuts object patches from the vertices nearest each fingertip pad.
inline GraspTask make_study_task(const HandModel& hand, const CouplingModel& coupling, const TaskSpec& spec) {
  GraspTask task;
  task.name = spec.name;
  task.object_mesh = study_object(spec.object);
  const KinematicTree tree(hand);
  const CouplingIndex index(tree, coupling);
  const Eigen::VectorXd q =
      index.full_angles(coupling, reference_grasp_theta(coupling, spec.object), tree.num_revolute());
  const auto frames = tree.frames(q, RigidTransform::identity());

  std::vector<std::vector<Vec3>> pads;
  Vec3 centroid = Vec3::Zero();
  int count = 0;
  for (const auto& id : spec.hand_patches) {
    const ContactPatch* p = hand.find_patch(id);
    if (!p) throw Error(ErrorKind::UnknownPatch, id);
    const RigidTransform& pose = frames.link_pose[*hand.find_link(p->owner)];
    std::vector<Vec3> pts;
    for (const auto& x : p->points) {
      pts.push_back(pose * x);
      centroid += pts.back();
      ++count;
    }
    pads.push_back(std::move(pts));
  }
  centroid /= std::max(count, 1);
  task.object_pose = RigidTransform::from_translation(centroid);

  for (std::size_t i = 0; i < spec.hand_patches.size(); ++i) {
    Vec3 pad_center = Vec3::Zero();
    for (const auto& x : pads[i]) pad_center += x;
    pad_center /= static_cast<double>(pads[i].size());
    const Vec3 local = task.object_pose.inverse() * pad_center;
    std::vector<int> order(task.object_mesh.vertices.size());
    for (std::size_t v = 0; v < order.size(); ++v) order[v] = static_cast<int>(v);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return (task.object_mesh.vertices[a] - local).squaredNorm() < (task.object_mesh.vertices[b] - local).squaredNorm();
    });
    ContactPatch op;
    op.id = "obj_" + spec.hand_patches[i];
    op.owner = kObjectOwner;
    op.label = hand.find_patch(spec.hand_patches[i])->label;
    const int n = std::min<int>(spec.points_per_object_patch, static_cast<int>(order.size()));
    for (int k = 0; k < n; ++k) op.points.push_back(task.object_mesh.vertices[order[k]]);
    task.patches.push_back(op);
    task.pairs.push_back({spec.hand_patches[i], op.id});
  }
  return task;
}

// Object patches taken from the hand pads at joint angles q (which need not
// satisfy any coupling). With density > 1 each object patch samples the pad's
// local bounding box on a density^k grid instead of copying the pad points;
// the grid corners are the corners of the box, so rectangular pads keep an
// exact match.
inline GraspTask make_task_from_angles(const HandModel& hand, const Eigen::VectorXd& q, const RigidTransform& wrist,
                                       const std::vector<std::string>& hand_patches, const std::string& name,
                                       int density = 1) {
  GraspTask task;
  task.name = name;
  task.object_mesh = box_mesh(Vec3(0.02, 0.02, 0.02));
  const KinematicTree tree(hand);
  const auto frames = tree.frames(q, wrist);
  for (const auto& id : hand_patches) {
    const ContactPatch* p = hand.find_patch(id);
    if (!p) throw Error(ErrorKind::UnknownPatch, id);
    ContactPatch op;
    op.id = "obj_" + id;
    op.owner = kObjectOwner;
    op.label = p->label;
    const RigidTransform& pose = frames.link_pose[*hand.find_link(p->owner)];
    if (density <= 1) {
      for (const auto& x : p->points) op.points.push_back(pose * x);
    } else {
      Vec3 lo = p->points.front(), hi = lo;
      for (const auto& x : p->points) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
      }
      auto steps = [&](int axis) { return hi[axis] - lo[axis] > 1e-12 ? density : 1; };
      auto at = [&](int axis, int i) {
        return steps(axis) == 1 ? lo[axis] : lo[axis] + (hi[axis] - lo[axis]) * i / (density - 1);
      };
      for (int i = 0; i < steps(0); ++i) {
        for (int j = 0; j < steps(1); ++j) {
          for (int k = 0; k < steps(2); ++k) op.points.push_back(pose * Vec3(at(0, i), at(1, j), at(2, k)));
        }
      }
    }
    task.patches.push_back(op);
    task.pairs.push_back({id, op.id});
  }
  return task;
}

// Tasks built from a coupling-feasible configuration have a zero-energy
// solution by construction.
inline GraspTask make_constructive_task(const HandModel& hand, const CouplingModel& coupling,
                                        const Eigen::VectorXd& theta_I, const RigidTransform& wrist,
                                        const std::vector<std::string>& hand_patches,
                                        const std::string& name = "constructive", int density = 5) {
  const KinematicTree tree(hand);
  const CouplingIndex index(tree, coupling);
  return make_task_from_angles(hand, index.full_angles(coupling, theta_I, tree.num_revolute()), wrist, hand_patches,
                               name, density);
}

}  // namespace softgrasp::presets
