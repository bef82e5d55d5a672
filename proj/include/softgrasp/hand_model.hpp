#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "softgrasp/error.hpp"
#include "softgrasp/mesh.hpp"
#include "softgrasp/transform.hpp"

namespace softgrasp {

inline constexpr const char* kObjectOwner = "object";

enum class JointKind { Revolute, Fixed };

struct JointLimits {
  double lower = 0.0;
  double upper = 0.5 * std::numbers::pi;
};

struct Joint {
  std::string name;
  JointKind kind = JointKind::Revolute;
  std::string parent;
  std::string child;
  RigidTransform origin;  // child frame relative to parent at zero angle
  Vec3 axis = Vec3::UnitX();
  JointLimits limits;
};

struct BoxGeometry {
  Vec3 size = Vec3::Zero();
};
struct CylinderGeometry {
  double radius = 0.0;
  double length = 0.0;
};
struct SphereGeometry {
  double radius = 0.0;
};
struct MeshGeometry {
  std::string filename;  // as written in the URDF
  Vec3 scale = Vec3::Ones();
  std::shared_ptr<const TriangleMesh> mesh;  // populated by resolve_meshes
};

using Geometry = std::variant<std::monostate, MeshGeometry, BoxGeometry, CylinderGeometry, SphereGeometry>;

struct Link {
  std::string name;
  Geometry geometry;
  RigidTransform geometry_origin;
  std::vector<std::string> patches;
};

struct ContactPatch {
  std::string id;
  std::string owner;  // link name or kObjectOwner
  std::vector<Vec3> points;
  std::optional<std::vector<Vec3>> normals;
  std::string label;
};

inline void validate_patch(const ContactPatch& patch) {
  if (patch.id.empty()) throw Error(ErrorKind::InvalidPatch, "<unnamed>", "patch id is empty");
  if (patch.points.empty()) throw Error(ErrorKind::InvalidPatch, patch.id, "patch has no points");
  for (const Vec3& p : patch.points) {
    if (!p.allFinite()) throw Error(ErrorKind::InvalidPatch, patch.id, "non-finite point");
  }
  if (patch.normals) {
    if (patch.normals->size() != patch.points.size()) {
      throw Error(ErrorKind::InvalidPatch, patch.id, "normals/points length mismatch");
    }
    for (const Vec3& n : *patch.normals) {
      if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) {
        throw Error(ErrorKind::InvalidPatch, patch.id, "normal is not unit length");
      }
    }
  }
}

// Immutable kinematic tree. Construct through HandModel::build, which enforces
// the tree invariants; edits return new models.
class HandModel {
 public:
  static HandModel build(std::string name, std::vector<Link> links, std::vector<Joint> joints,
                         std::vector<std::string> warnings = {}) {
    HandModel m;
    m.name_ = std::move(name);
    m.links_ = std::move(links);
    m.joints_ = std::move(joints);
    m.warnings_ = std::move(warnings);
    m.validate_and_index();
    return m;
  }

  const std::string& name() const { return name_; }
  const std::string& root() const { return links_[root_].name; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::map<std::string, ContactPatch>& patches() const { return patches_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Joint indices ordered so that every parent link is placed before its child.
  const std::vector<int>& topological_joints() const { return topo_; }

  std::optional<int> find_link(const std::string& name) const {
    auto it = link_index_.find(name);
    if (it == link_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<int> find_joint(const std::string& name) const {
    auto it = joint_index_.find(name);
    if (it == joint_index_.end()) return std::nullopt;
    return it->second;
  }
  const Link& link(const std::string& name) const {
    auto i = find_link(name);
    if (!i) throw Error(ErrorKind::UnknownLink, name);
    return links_[*i];
  }
  const Joint& joint(const std::string& name) const {
    auto i = find_joint(name);
    if (!i) throw Error(ErrorKind::UnknownJoint, name);
    return joints_[*i];
  }
  const ContactPatch* find_patch(const std::string& id) const {
    auto it = patches_.find(id);
    return it == patches_.end() ? nullptr : &it->second;
  }

  // -1 for the root link.
  int parent_joint(int link_index) const { return parent_joint_[link_index]; }

  std::vector<std::string> revolute_joint_names() const {
    std::vector<std::string> out;
    for (int j : topo_) {
      if (joints_[j].kind == JointKind::Revolute) out.push_back(joints_[j].name);
    }
    return out;
  }

  HandModel with_joint_origin(const std::string& joint_name, const RigidTransform& origin) const {
    auto j = find_joint(joint_name);
    if (!j) throw Error(ErrorKind::UnknownJoint, joint_name);
    HandModel out = *this;
    out.joints_[*j].origin = origin;
    return out;
  }

  HandModel with_patch(ContactPatch patch) const {
    validate_patch(patch);
    if (patch.owner != kObjectOwner && !find_link(patch.owner)) {
      throw Error(ErrorKind::UnknownOwner, patch.owner);
    }
    HandModel out = *this;
    if (auto it = out.patches_.find(patch.id); it != out.patches_.end() && it->second.owner != kObjectOwner) {
      auto& ids = out.links_[*out.find_link(it->second.owner)].patches;
      ids.erase(std::remove(ids.begin(), ids.end(), patch.id), ids.end());
    }
    if (patch.owner != kObjectOwner) out.links_[*out.find_link(patch.owner)].patches.push_back(patch.id);
    out.patches_[patch.id] = std::move(patch);
    return out;
  }

  HandModel with_mesh(int link_index, std::shared_ptr<const TriangleMesh> mesh) const {
    HandModel out = *this;
    if (auto* g = std::get_if<MeshGeometry>(&out.links_[link_index].geometry)) g->mesh = std::move(mesh);
    return out;
  }

  HandModel with_warning(std::string w) const {
    HandModel out = *this;
    out.warnings_.push_back(std::move(w));
    return out;
  }

 private:
  HandModel() = default;

  void validate_and_index() {
    if (links_.empty()) throw Error(ErrorKind::MissingLink, "<none>", "model has no links");
    for (std::size_t i = 0; i < links_.size(); ++i) {
      if (!link_index_.emplace(links_[i].name, static_cast<int>(i)).second) {
        throw Error(ErrorKind::DuplicateName, links_[i].name, "duplicate link name");
      }
    }
    for (std::size_t i = 0; i < joints_.size(); ++i) {
      if (!joint_index_.emplace(joints_[i].name, static_cast<int>(i)).second) {
        throw Error(ErrorKind::DuplicateName, joints_[i].name, "duplicate joint name");
      }
    }
    for (const Joint& j : joints_) {
      if (!link_index_.count(j.parent)) throw Error(ErrorKind::MissingLink, j.parent, "parent of joint " + j.name);
      if (!link_index_.count(j.child)) throw Error(ErrorKind::MissingLink, j.child, "child of joint " + j.name);
      if (!(j.limits.lower <= j.limits.upper) || !std::isfinite(j.limits.lower) ||
          !std::isfinite(j.limits.upper)) {
        throw Error(ErrorKind::InvalidLimits, j.name);
      }
      if (j.kind == JointKind::Revolute && std::abs(j.axis.norm() - 1.0) > 1e-9) {
        throw Error(ErrorKind::NonUnitAxis, j.name);
      }
    }
    detect_cycles();

    parent_joint_.assign(links_.size(), -1);
    for (std::size_t ji = 0; ji < joints_.size(); ++ji) {
      const int child = link_index_.at(joints_[ji].child);
      if (parent_joint_[child] >= 0) {
        throw Error(ErrorKind::MultipleParents, joints_[ji].child,
                    "joints " + joints_[parent_joint_[child]].name + " and " + joints_[ji].name);
      }
      parent_joint_[child] = static_cast<int>(ji);
    }
    std::vector<int> roots;
    for (std::size_t i = 0; i < links_.size(); ++i) {
      if (parent_joint_[i] < 0) roots.push_back(static_cast<int>(i));
    }
    if (roots.size() != 1) {
      std::string names;
      for (int r : roots) names += (names.empty() ? "" : ",") + links_[r].name;
      throw Error(ErrorKind::DisconnectedTree, names, "expected exactly one root link");
    }
    root_ = roots.front();

    // Breadth-first joint order from the root.
    std::vector<std::vector<int>> children(links_.size());
    for (std::size_t ji = 0; ji < joints_.size(); ++ji) {
      children[link_index_.at(joints_[ji].parent)].push_back(static_cast<int>(ji));
    }
    topo_.clear();
    std::vector<int> frontier{root_};
    while (!frontier.empty()) {
      std::vector<int> next;
      for (int l : frontier) {
        for (int ji : children[l]) {
          topo_.push_back(ji);
          next.push_back(link_index_.at(joints_[ji].child));
        }
      }
      frontier = std::move(next);
    }
  }

  // Directed cycle search over parent -> child edges.
  void detect_cycles() const {
    std::vector<std::vector<int>> out(links_.size());
    for (const Joint& j : joints_) out[link_index_.at(j.parent)].push_back(link_index_.at(j.child));
    std::vector<int> state(links_.size(), 0);  // 0 new, 1 on stack, 2 done
    std::vector<int> stack;
    std::function<void(int)> visit = [&](int v) {
      state[v] = 1;
      stack.push_back(v);
      for (int w : out[v]) {
        if (state[w] == 1) {
          std::string path;
          auto it = std::find(stack.begin(), stack.end(), w);
          for (; it != stack.end(); ++it) path += links_[*it].name + " -> ";
          path += links_[w].name;
          throw Error(ErrorKind::KinematicCycle, path);
        }
        if (state[w] == 0) visit(w);
      }
      stack.pop_back();
      state[v] = 2;
    };
    for (std::size_t i = 0; i < links_.size(); ++i) {
      if (state[i] == 0) visit(static_cast<int>(i));
    }
  }

  std::string name_;
  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::map<std::string, ContactPatch> patches_;
  std::vector<std::string> warnings_;
  std::unordered_map<std::string, int> link_index_;
  std::unordered_map<std::string, int> joint_index_;
  std::vector<int> parent_joint_;
  std::vector<int> topo_;
  int root_ = 0;
};

// new_origin = delta ∘ origin (delta expressed in the parent frame).
inline HandModel apply_joint_edit(const HandModel& model, const std::string& joint, const RigidTransform& delta) {
  const Joint& j = model.joint(joint);
  return model.with_joint_origin(joint, delta * j.origin);
}

struct JointEdit {
  std::string joint;
  RigidTransform delta;
};

inline HandModel apply_edits(HandModel model, const std::vector<JointEdit>& edits) {
  for (const auto& e : edits) model = apply_joint_edit(model, e.joint, e.delta);
  return model;
}

inline HandModel attach_patch(const HandModel& model, ContactPatch patch) {
  return model.with_patch(std::move(patch));
}

namespace detail {

inline bool near(const Vec3& a, const Vec3& b, double tol) { return (a - b).cwiseAbs().maxCoeff() <= tol; }

inline bool geometry_equal(const Geometry& a, const Geometry& b, double tol) {
  if (a.index() != b.index()) return false;
  if (auto* ma = std::get_if<MeshGeometry>(&a)) {
    const auto& mb = std::get<MeshGeometry>(b);
    return ma->filename == mb.filename && near(ma->scale, mb.scale, tol);
  }
  if (auto* ba = std::get_if<BoxGeometry>(&a)) return near(ba->size, std::get<BoxGeometry>(b).size, tol);
  if (auto* ca = std::get_if<CylinderGeometry>(&a)) {
    const auto& cb = std::get<CylinderGeometry>(b);
    return std::abs(ca->radius - cb.radius) <= tol && std::abs(ca->length - cb.length) <= tol;
  }
  if (auto* sa = std::get_if<SphereGeometry>(&a)) {
    return std::abs(sa->radius - std::get<SphereGeometry>(b).radius) <= tol;
  }
  return true;
}

inline bool patch_equal(const ContactPatch& a, const ContactPatch& b, double tol) {
  if (a.id != b.id || a.owner != b.owner || a.label != b.label) return false;
  if (a.points.size() != b.points.size() || a.normals.has_value() != b.normals.has_value()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (!near(a.points[i], b.points[i], tol)) return false;
    if (a.normals && !near((*a.normals)[i], (*b.normals)[i], tol)) return false;
  }
  return true;
}

}  // namespace detail

struct SemanticCompareOptions {
  double tolerance = 1e-9;
  bool compare_patches = true;
};

// Names, topology and numeric fields within tolerance. Declaration order of
// links and joints is irrelevant.
inline bool semantically_equal(const HandModel& a, const HandModel& b, SemanticCompareOptions opt = {}) {
  const double tol = opt.tolerance;
  if (a.name() != b.name() || a.root() != b.root()) return false;
  if (a.links().size() != b.links().size() || a.joints().size() != b.joints().size()) return false;
  for (const Link& la : a.links()) {
    auto ib = b.find_link(la.name);
    if (!ib) return false;
    const Link& lb = b.links()[*ib];
    if (!detail::geometry_equal(la.geometry, lb.geometry, tol)) return false;
    if (!std::holds_alternative<std::monostate>(la.geometry) &&
        !approx_equal(la.geometry_origin, lb.geometry_origin, tol)) {
      return false;
    }
    if (opt.compare_patches) {
      std::set<std::string> pa(la.patches.begin(), la.patches.end());
      std::set<std::string> pb(lb.patches.begin(), lb.patches.end());
      if (pa != pb) return false;
    }
  }
  for (const Joint& ja : a.joints()) {
    auto ib = b.find_joint(ja.name);
    if (!ib) return false;
    const Joint& jb = b.joints()[*ib];
    if (ja.kind != jb.kind || ja.parent != jb.parent || ja.child != jb.child) return false;
    if (!approx_equal(ja.origin, jb.origin, tol)) return false;
    if (ja.kind == JointKind::Revolute) {
      if (!detail::near(ja.axis, jb.axis, tol)) return false;
      if (std::abs(ja.limits.lower - jb.limits.lower) > tol || std::abs(ja.limits.upper - jb.limits.upper) > tol) {
        return false;
      }
    }
  }
  if (opt.compare_patches) {
    if (a.patches().size() != b.patches().size()) return false;
    for (const auto& [id, pa] : a.patches()) {
      const ContactPatch* pb = b.find_patch(id);
      if (!pb || !detail::patch_equal(pa, *pb, tol)) return false;
    }
  }
  return true;
}

}  // namespace softgrasp
