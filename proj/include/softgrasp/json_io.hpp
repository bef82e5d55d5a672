#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "softgrasp/cascade.hpp"
#include "softgrasp/grasp_objective.hpp"
#include "softgrasp/hand_model.hpp"
#include "softgrasp/mesh.hpp"
#include "softgrasp/underactuation.hpp"
#include "softgrasp/urdf.hpp"

namespace softgrasp {

using Json = nlohmann::json;

namespace json_detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& msg) {
  throw Error(ErrorKind::SchemaViolation, where, msg);
}

inline const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "non-finite number");
  return v;
}

inline std::string string(const Json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

inline int integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<int>();
}

inline Vec3 vec3(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where, "expected [x, y, z]");
  return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

inline std::vector<Vec3> points(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected a list of points");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(vec3(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::string> strings(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected a list of strings");
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(string(e, where));
  return out;
}

}  // namespace json_detail

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json to_json(const std::vector<Vec3>& pts) {
  Json out = Json::array();
  for (const auto& p : pts) out.push_back(to_json(p));
  return out;
}

inline Json to_json(const RigidTransform& t) {
  return {{"translation", to_json(t.translation)},
          {"rotation", Json::array({t.rotation.w(), t.rotation.x(), t.rotation.y(), t.rotation.z()})}};
}

// {translation, rotation [w,x,y,z]} or {translation, rpy}; missing parts are identity.
inline RigidTransform transform_from_json(const Json& j, const std::string& where = "transform") {
  using namespace json_detail;
  if (!j.is_object()) fail(where, "expected an object");
  Vec3 t = Vec3::Zero();
  if (j.contains("translation")) t = vec3(j["translation"], where + ".translation");
  if (j.contains("rotation") && j.contains("rpy")) fail(where, "give either rotation or rpy");
  if (j.contains("rotation")) {
    const Json& r = j["rotation"];
    if (!r.is_array() || r.size() != 4) fail(where + ".rotation", "expected [w, x, y, z]");
    const Quat q(number(r[0], where), number(r[1], where), number(r[2], where), number(r[3], where));
    if (q.norm() < 1e-12) fail(where + ".rotation", "zero quaternion");
    return {t, q};
  }
  if (j.contains("rpy")) return RigidTransform::from_xyz_rpy(t, vec3(j["rpy"], where + ".rpy"));
  return RigidTransform::from_translation(t);
}

inline Json to_json(const TriangleMesh& mesh) {
  Json tris = Json::array();
  for (const auto& t : mesh.triangles) tris.push_back(Json::array({t[0], t[1], t[2]}));
  return {{"vertices", to_json(mesh.vertices)}, {"triangles", tris}};
}

inline TriangleMesh mesh_from_json(const Json& j, const std::string& where = "mesh") {
  using namespace json_detail;
  TriangleMesh mesh;
  mesh.vertices = points(field(j, "vertices", where), where + ".vertices");
  const Json& tris = field(j, "triangles", where);
  if (!tris.is_array()) fail(where + ".triangles", "expected a list");
  for (const auto& t : tris) {
    if (!t.is_array() || t.size() != 3) fail(where + ".triangles", "expected [i, j, k]");
    mesh.triangles.push_back({integer(t[0], where), integer(t[1], where), integer(t[2], where)});
  }
  validate_mesh(mesh, where);
  return mesh;
}

inline Json to_json(const ContactPatch& p) {
  Json j = {{"id", p.id}, {"owner", p.owner}, {"points", to_json(p.points)}, {"label", p.label}};
  if (p.normals) j["normals"] = to_json(*p.normals);
  return j;
}

inline ContactPatch patch_from_json(const Json& j, const std::string& where = "patch") {
  using namespace json_detail;
  ContactPatch p;
  p.id = string(field(j, "id", where), where + ".id");
  const std::string w = where + "(" + p.id + ")";
  p.owner = string(field(j, "owner", w), w + ".owner");
  p.points = points(field(j, "points", w), w + ".points");
  if (j.contains("normals") && !j["normals"].is_null()) p.normals = points(j["normals"], w + ".normals");
  if (j.contains("label")) p.label = string(j["label"], w + ".label");
  validate_patch(p);
  return p;
}

inline std::vector<ContactPatch> patches_from_json(const Json& j, const std::string& where = "patches") {
  if (!j.is_array()) json_detail::fail(where, "expected a list of patches");
  std::vector<ContactPatch> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(patch_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

// Patch sidecar: {"patches": [...]} next to the URDF as <stem>.patches.json.
inline std::filesystem::path patch_sidecar_path(const std::filesystem::path& urdf) {
  auto p = urdf;
  p.replace_extension(".patches.json");
  return p;
}

inline HandModel attach_patches(HandModel model, const std::vector<ContactPatch>& patches) {
  for (const auto& p : patches) model = attach_patch(model, p);
  return model;
}

inline HandModel load_patch_sidecar(const HandModel& model, const std::filesystem::path& sidecar) {
  const Json j = Json::parse(read_text_file(sidecar), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::SchemaViolation, sidecar.string(), "not valid JSON");
  return attach_patches(model, patches_from_json(json_detail::field(j, "patches", sidecar.string())));
}

inline Json patches_to_json(const HandModel& model) {
  Json arr = Json::array();
  for (const auto& [id, p] : model.patches()) arr.push_back(to_json(p));
  return {{"patches", arr}};
}

// URDF plus its patch sidecar, when one exists.
inline HandModel load_hand(const std::filesystem::path& urdf, bool load_meshes = true) {
  HandModel model = load_urdf_file(urdf, load_meshes);
  const auto sidecar = patch_sidecar_path(urdf);
  if (std::filesystem::exists(sidecar)) model = load_patch_sidecar(model, sidecar);
  return model;
}

inline Json to_json(const CouplingModel& c) {
  Json trips = Json::array();
  for (const auto& t : c.triplets()) trips.push_back(Json::array({t.row, t.col, t.value}));
  Json j = {{"independent", c.independent()}, {"dependent", c.dependent()}, {"triplets", trips}};
  if (!c.groups().empty()) j["groups"] = c.groups();
  return j;
}

inline CouplingModel coupling_from_json(const Json& j, const std::string& where = "coupling") {
  using namespace json_detail;
  auto indep = strings(field(j, "independent", where), where + ".independent");
  auto dep = strings(field(j, "dependent", where), where + ".dependent");
  const Json& trips = field(j, "triplets", where);
  if (!trips.is_array()) fail(where + ".triplets", "expected a list");
  std::vector<CouplingTriplet> triplets;
  for (const auto& t : trips) {
    if (!t.is_array() || t.size() != 3) fail(where + ".triplets", "expected [row, col, value]");
    triplets.push_back({integer(t[0], where + ".triplets"), integer(t[1], where + ".triplets"),
                        number(t[2], where + ".triplets")});
  }
  std::vector<std::string> groups;
  if (j.contains("groups")) groups = strings(j["groups"], where + ".groups");
  return CouplingModel(std::move(indep), std::move(dep), std::move(triplets), std::move(groups));
}

inline Json to_json(const JointAngles& a) {
  Json j = Json::object();
  for (const auto& [k, v] : a.values) j[k] = v;
  return j;
}

inline JointAngles angles_from_json(const Json& j, const std::string& where = "angles") {
  if (!j.is_object()) json_detail::fail(where, "expected {joint: angle}");
  JointAngles a;
  for (const auto& [k, v] : j.items()) a.values[k] = json_detail::number(v, where + "." + k);
  return a;
}

// object_mesh is a path (relative to base_dir) or an inline {vertices, triangles}.
inline GraspTask task_from_json(const Json& j, const std::filesystem::path& base_dir = {}, const std::string& where = "task") {
  using namespace json_detail;
  GraspTask task;
  if (j.contains("name")) task.name = string(j["name"], where + ".name");
  const Json& mesh = field(j, "object_mesh", where);
  if (mesh.is_string()) {
    task.object_mesh_path = mesh.get<std::string>();
    task.object_mesh = load_mesh(resolve_mesh_path(task.object_mesh_path, base_dir));
  } else {
    task.object_mesh = mesh_from_json(mesh, where + ".object_mesh");
  }
  if (j.contains("object_pose")) task.object_pose = transform_from_json(j["object_pose"], where + ".object_pose");
  if (j.contains("wrist_reference")) {
    task.wrist_reference = transform_from_json(j["wrist_reference"], where + ".wrist_reference");
  }
  if (j.contains("patches")) task.patches = patches_from_json(j["patches"], where + ".patches");
  const Json& pairs = field(j, "pairs", where);
  if (!pairs.is_array()) fail(where + ".pairs", "expected a list");
  for (const auto& p : pairs) {
    if (!p.is_array() || p.size() != 2) fail(where + ".pairs", "expected [hand_id, object_id]");
    task.pairs.push_back({string(p[0], where + ".pairs"), string(p[1], where + ".pairs")});
  }
  if (j.contains("initial_angles")) task.initial_angles = angles_from_json(j["initial_angles"], where + ".initial_angles");
  return task;
}

inline Json to_json(const GraspTask& task, bool inline_mesh = false) {
  Json j;
  j["name"] = task.name;
  if (!inline_mesh && !task.object_mesh_path.empty()) {
    j["object_mesh"] = task.object_mesh_path;
  } else {
    j["object_mesh"] = to_json(task.object_mesh);
  }
  j["object_pose"] = to_json(task.object_pose);
  j["wrist_reference"] = to_json(task.wrist_reference);
  Json patches = Json::array();
  for (const auto& p : task.patches) patches.push_back(to_json(p));
  j["patches"] = patches;
  Json pairs = Json::array();
  for (const auto& p : task.pairs) pairs.push_back(Json::array({p.hand, p.object}));
  j["pairs"] = pairs;
  if (task.initial_angles) j["initial_angles"] = to_json(*task.initial_angles);
  return j;
}

inline Json parse_json_text(const std::string& text, const std::string& source) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::SchemaViolation, source, "not valid JSON");
  return j;
}

inline GraspTask load_task_file(const std::filesystem::path& path) {
  return task_from_json(parse_json_text(read_text_file(path), path.string()), path.parent_path(), path.string());
}

inline CouplingModel load_coupling_file(const std::filesystem::path& path) {
  return coupling_from_json(parse_json_text(read_text_file(path), path.string()), path.string());
}

inline Json to_json(const CascadeSchedule& s) { return {{"stages", s.stages}}; }

inline CascadeSchedule schedule_from_json(const Json& j, const std::string& where = "schedule") {
  using namespace json_detail;
  const Json& stages = field(j, "stages", where);
  if (!stages.is_array()) fail(where + ".stages", "expected a list of row lists");
  CascadeSchedule s;
  for (const auto& st : stages) {
    if (!st.is_array()) fail(where + ".stages", "expected a list of row indices");
    std::vector<int> rows;
    for (const auto& r : st) rows.push_back(integer(r, where + ".stages"));
    s.stages.push_back(std::move(rows));
  }
  return s;
}

inline Json to_json(const JointEdit& e) { return {{"joint", e.joint}, {"delta", to_json(e.delta)}}; }

inline std::vector<JointEdit> edits_from_json(const Json& j, const std::string& where = "edits") {
  using namespace json_detail;
  if (!j.is_array()) fail(where, "expected a list of {joint, delta}");
  std::vector<JointEdit> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    out.push_back({string(field(j[i], "joint", w), w + ".joint"), transform_from_json(field(j[i], "delta", w), w + ".delta")});
  }
  return out;
}

inline Json to_json(const StageRecord& s) {
  return {{"rows", s.rows},           {"energy", s.energy}, {"violation", s.violation},
          {"iterations", s.iterations}, {"rounds", s.rounds}, {"status", to_string(s.status)}};
}

inline Json to_json(const GraspSolution& s, const CouplingModel& coupling) {
  Json wrist = Json::array();
  for (int i = 0; i < 6; ++i) wrist.push_back(s.vars.wrist[i]);
  Json theta = Json::array();
  for (Eigen::Index i = 0; i < s.vars.theta_I.size(); ++i) theta.push_back(s.vars.theta_I[i]);
  Json trace = Json::array();
  for (const auto& st : s.stage_trace) trace.push_back(to_json(st));
  Json per_pair = Json::array();
  for (const auto& p : s.breakdown.per_pair) per_pair.push_back({{"hand", p.hand}, {"object", p.object}, {"energy", p.energy}});
  return {{"vars", {{"wrist", wrist}, {"theta_I", theta}, {"independent", coupling.independent()}}},
          {"wrist_pose", to_json(s.wrist)},
          {"full_angles", to_json(s.full_angles)},
          {"energy", s.energy},
          {"per_pair", per_pair},
          {"constraint_violation", s.constraint_violation},
          {"status", to_string(s.status)},
          {"stage_trace", trace},
          {"correspondence_version", s.correspondences.version},
          {"restart", s.restart},
          {"seed", s.seed}};
}

}  // namespace softgrasp
