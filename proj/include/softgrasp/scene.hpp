#pragma once

#include <string>
#include <variant>

#include "softgrasp/cascade.hpp"
#include "softgrasp/json_io.hpp"
#include "softgrasp/kinematics.hpp"

namespace softgrasp {

inline Json geometry_to_json(const Geometry& g) {
  if (auto* m = std::get_if<MeshGeometry>(&g)) {
    if (!m->mesh) return {{"type", "none"}, {"unresolved", m->filename}};
    Json j = to_json(*m->mesh);
    j["type"] = "mesh";
    return j;
  }
  if (auto* b = std::get_if<BoxGeometry>(&g)) return {{"type", "box"}, {"size", to_json(b->size)}};
  if (auto* c = std::get_if<CylinderGeometry>(&g)) {
    return {{"type", "cylinder"}, {"radius", c->radius}, {"length", c->length}};
  }
  if (auto* s = std::get_if<SphereGeometry>(&g)) return {{"type", "sphere"}, {"radius", s->radius}};
  return {{"type", "none"}};
}

struct SceneMeta {
  std::string task;
  std::string variant;
  std::string solve_id;
};

// Everything a viewer needs, meshes inlined: link frames from FK of the
// solution, object mesh at its pose, patches in world coordinates.
inline Json build_scene(const HandModel& model, const GraspTask& task, const GraspSolution& solution,
                        const SceneMeta& meta = {}) {
  HandModel hand = model;
  for (const auto& p : task.patches) {
    if (p.owner != kObjectOwner) hand = attach_patch(hand, p);
  }
  const PoseMap poses = forward_kinematics(hand, solution.full_angles, solution.wrist);

  Json links = Json::array();
  for (const auto& link : hand.links()) {
    links.push_back({{"name", link.name},
                     {"geometry", geometry_to_json(link.geometry)},
                     {"geometry_origin", to_json(link.geometry_origin)},
                     {"transform", to_json(poses.at(link.name))}});
  }
  PoseMap with_object = poses;
  with_object.poses[kObjectOwner] = task.object_pose;

  Json patches = Json::array();
  auto add_patch = [&](const ContactPatch& p) {
    patches.push_back({{"id", p.id},
                       {"owner", p.owner},
                       {"label", p.label},
                       {"points", to_json(patch_world_points(hand, with_object, p))}});
  };
  for (const auto& [id, p] : hand.patches()) add_patch(p);
  for (const auto& p : task.patches) {
    if (p.owner == kObjectOwner) add_patch(p);
  }
  Json object_geometry = to_json(task.object_mesh);
  object_geometry["type"] = "mesh";

  return {{"version", 1},
          {"model", hand.name()},
          {"links", links},
          {"object", {{"name", task.name}, {"geometry", object_geometry}, {"transform", to_json(task.object_pose)}}},
          {"patches", patches},
          {"solution",
           {{"task", meta.task.empty() ? task.name : meta.task},
            {"variant", meta.variant},
            {"solve_id", meta.solve_id},
            {"energy", solution.energy},
            {"constraint_violation", solution.constraint_violation},
            {"status", to_string(solution.status)},
            {"seed", solution.seed},
            {"full_angles", to_json(solution.full_angles)}}}};
}

// Structural checks beyond the JSON schema: unit quaternions, triangle
// indices in range. Throws SchemaViolation.
inline void validate_scene(const Json& scene) {
  using json_detail::fail;
  auto check_transform = [](const Json& t, const std::string& where) {
    const RigidTransform tr = transform_from_json(t, where);
    const Json& r = json_detail::field(t, "rotation", where);
    const double n = std::sqrt(r[0].get<double>() * r[0].get<double>() + r[1].get<double>() * r[1].get<double>() +
                               r[2].get<double>() * r[2].get<double>() + r[3].get<double>() * r[3].get<double>());
    if (std::abs(n - 1.0) > 1e-9) fail(where, "rotation is not a unit quaternion");
    (void)tr;
  };
  auto check_geometry = [](const Json& g, const std::string& where) {
    const std::string type = json_detail::string(json_detail::field(g, "type", where), where + ".type");
    if (type == "mesh") {
      try {
        mesh_from_json(g, where);
      } catch (const Error& e) {
        fail(where, e.what());
      }
    } else if (type != "box" && type != "cylinder" && type != "sphere" && type != "none") {
      fail(where, "unknown geometry type '" + type + "'");
    }
  };
  const Json& links = json_detail::field(scene, "links", "scene");
  if (!links.is_array()) fail("scene.links", "expected a list");
  for (const auto& l : links) {
    const std::string name = json_detail::string(json_detail::field(l, "name", "link"), "link.name");
    check_transform(json_detail::field(l, "transform", name), name + ".transform");
    check_geometry(json_detail::field(l, "geometry", name), name + ".geometry");
  }
  const Json& object = json_detail::field(scene, "object", "scene");
  check_transform(json_detail::field(object, "transform", "object"), "object.transform");
  check_geometry(json_detail::field(object, "geometry", "object"), "object.geometry");
  const Json& patches = json_detail::field(scene, "patches", "scene");
  if (!patches.is_array()) fail("scene.patches", "expected a list");
  for (const auto& p : patches) json_detail::points(json_detail::field(p, "points", "patch"), "patch.points");
  json_detail::field(scene, "solution", "scene");
}

}  // namespace softgrasp
