#pragma once

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "softgrasp/hand_model.hpp"
#include "softgrasp/mesh.hpp"

namespace softgrasp {

namespace urdf_detail {

namespace pt = boost::property_tree;

inline std::string attr(const pt::ptree& node, const std::string& key) {
  return node.get<std::string>("<xmlattr>." + key, "");
}

inline std::string required_attr(const pt::ptree& node, const std::string& key, const std::string& where) {
  auto v = node.get_optional<std::string>("<xmlattr>." + key);
  if (!v || v->empty()) throw Error(ErrorKind::MalformedXml, where, "missing attribute '" + key + "'");
  return *v;
}

inline double parse_double(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  double v = 0;
  if (!(in >> v)) throw Error(ErrorKind::MalformedXml, where, "expected a number, got '" + text + "'");
  std::string rest;
  if (in >> rest) throw Error(ErrorKind::MalformedXml, where, "trailing characters in '" + text + "'");
  return v;
}

inline Vec3 parse_vec3(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  Vec3 v;
  if (!(in >> v.x() >> v.y() >> v.z())) {
    throw Error(ErrorKind::MalformedXml, where, "expected three numbers, got '" + text + "'");
  }
  std::string rest;
  if (in >> rest) throw Error(ErrorKind::MalformedXml, where, "trailing characters in '" + text + "'");
  return v;
}

inline RigidTransform parse_origin(const pt::ptree& parent, const std::string& where) {
  auto origin = parent.get_child_optional("origin");
  if (!origin) return RigidTransform::identity();
  const std::string xyz = attr(*origin, "xyz");
  const std::string rpy = attr(*origin, "rpy");
  return RigidTransform::from_xyz_rpy(xyz.empty() ? Vec3::Zero() : parse_vec3(xyz, where + "/origin@xyz"),
                                      rpy.empty() ? Vec3::Zero() : parse_vec3(rpy, where + "/origin@rpy"));
}

inline Geometry parse_geometry(const pt::ptree& geometry, const std::string& where) {
  if (auto mesh = geometry.get_child_optional("mesh")) {
    MeshGeometry g;
    g.filename = required_attr(*mesh, "filename", where + "/mesh");
    const std::string scale = attr(*mesh, "scale");
    if (!scale.empty()) g.scale = parse_vec3(scale, where + "/mesh@scale");
    return g;
  }
  if (auto box = geometry.get_child_optional("box")) {
    return BoxGeometry{parse_vec3(required_attr(*box, "size", where + "/box"), where + "/box@size")};
  }
  if (auto cyl = geometry.get_child_optional("cylinder")) {
    return CylinderGeometry{parse_double(required_attr(*cyl, "radius", where), where + "/cylinder@radius"),
                            parse_double(required_attr(*cyl, "length", where), where + "/cylinder@length")};
  }
  if (auto sph = geometry.get_child_optional("sphere")) {
    return SphereGeometry{parse_double(required_attr(*sph, "radius", where), where + "/sphere@radius")};
  }
  return std::monostate{};
}

inline Link parse_link(const pt::ptree& node) {
  Link link;
  link.name = required_attr(node, "name", "link");
  // Visual geometry wins; collision is the fallback.
  for (const char* section : {"visual", "collision"}) {
    auto sec = node.get_child_optional(section);
    if (!sec) continue;
    auto geom = sec->get_child_optional("geometry");
    if (!geom) continue;
    Geometry g = parse_geometry(*geom, link.name + "/" + section);
    if (std::holds_alternative<std::monostate>(g)) continue;
    link.geometry = std::move(g);
    link.geometry_origin = parse_origin(*sec, link.name + "/" + section);
    break;
  }
  return link;
}

inline Joint parse_joint(const pt::ptree& node, std::vector<std::string>& warnings) {
  Joint joint;
  joint.name = required_attr(node, "name", "joint");
  const std::string type = required_attr(node, "type", joint.name);
  if (type == "revolute") {
    joint.kind = JointKind::Revolute;
  } else if (type == "fixed") {
    joint.kind = JointKind::Fixed;
  } else {
    throw Error(ErrorKind::UnsupportedJointKind, joint.name, "joint type '" + type + "'");
  }
  auto parent = node.get_child_optional("parent");
  auto child = node.get_child_optional("child");
  if (!parent || !child) throw Error(ErrorKind::MalformedXml, joint.name, "joint needs <parent> and <child>");
  joint.parent = required_attr(*parent, "link", joint.name + "/parent");
  joint.child = required_attr(*child, "link", joint.name + "/child");
  joint.origin = parse_origin(node, joint.name);

  if (auto axis = node.get_child_optional("axis")) {
    const std::string xyz = attr(*axis, "xyz");
    if (!xyz.empty()) joint.axis = parse_vec3(xyz, joint.name + "/axis@xyz");
  }
  if (joint.kind == JointKind::Revolute) {
    const double norm = joint.axis.norm();
    if (!std::isfinite(norm) || norm < 1e-12) throw Error(ErrorKind::NonUnitAxis, joint.name, "axis has zero length");
    if (std::abs(norm - 1.0) > 1e-9) {
      std::ostringstream w;
      w.precision(17);
      w << "joint " << joint.name << ": axis normalized (norm was " << norm << ")";
      warnings.push_back(w.str());
      joint.axis /= norm;
    }
  }
  if (auto limit = node.get_child_optional("limit")) {
    const std::string lower = attr(*limit, "lower");
    const std::string upper = attr(*limit, "upper");
    if (!lower.empty()) joint.limits.lower = parse_double(lower, joint.name + "/limit@lower");
    if (!upper.empty()) joint.limits.upper = parse_double(upper, joint.name + "/limit@upper");
  }
  return joint;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt3(const Vec3& v) {
  std::ostringstream out;
  out.precision(17);
  out << v.x() << ' ' << v.y() << ' ' << v.z();
  return out.str();
}

inline std::string fmt1(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

inline void write_origin(std::ostream& out, const RigidTransform& t, const std::string& indent) {
  out << indent << "<origin xyz=\"" << fmt3(t.translation) << "\" rpy=\"" << fmt3(t.rpy()) << "\"/>\n";
}

}  // namespace urdf_detail

// Parses the revolute/fixed URDF subset into a validated HandModel. Non-unit
// revolute axes are normalized and reported in HandModel::warnings().
inline HandModel parse_urdf(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorKind::MalformedXml, "line " + std::to_string(e.line()), e.message());
  }
  auto robot = tree.get_child_optional("robot");
  if (!robot) throw Error(ErrorKind::MalformedXml, "<root>", "missing <robot> element");

  std::vector<Link> links;
  std::vector<Joint> joints;
  std::vector<std::string> warnings;
  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      links.push_back(urdf_detail::parse_link(node));
    } else if (tag == "joint") {
      joints.push_back(urdf_detail::parse_joint(node, warnings));
    }
  }
  return HandModel::build(urdf_detail::attr(*robot, "name"), std::move(links), std::move(joints),
                          std::move(warnings));
}

// Contact patches are not written; they live in the sidecar file.
inline std::string serialize_urdf(const HandModel& model) {
  using namespace urdf_detail;
  std::ostringstream out;
  out << "<?xml version=\"1.0\"?>\n";
  out << "<robot name=\"" << escape(model.name()) << "\">\n";
  for (const Link& link : model.links()) {
    out << "  <link name=\"" << escape(link.name) << "\"";
    if (std::holds_alternative<std::monostate>(link.geometry)) {
      out << "/>\n";
      continue;
    }
    out << ">\n    <visual>\n";
    write_origin(out, link.geometry_origin, "      ");
    out << "      <geometry>\n        ";
    if (auto* m = std::get_if<MeshGeometry>(&link.geometry)) {
      out << "<mesh filename=\"" << escape(m->filename) << "\"";
      if (m->scale != Vec3::Ones()) out << " scale=\"" << fmt3(m->scale) << "\"";
      out << "/>";
    } else if (auto* b = std::get_if<BoxGeometry>(&link.geometry)) {
      out << "<box size=\"" << fmt3(b->size) << "\"/>";
    } else if (auto* c = std::get_if<CylinderGeometry>(&link.geometry)) {
      out << "<cylinder radius=\"" << fmt1(c->radius) << "\" length=\"" << fmt1(c->length) << "\"/>";
    } else if (auto* s = std::get_if<SphereGeometry>(&link.geometry)) {
      out << "<sphere radius=\"" << fmt1(s->radius) << "\"/>";
    }
    out << "\n      </geometry>\n    </visual>\n  </link>\n";
  }
  for (int ji : model.topological_joints()) {
    const Joint& j = model.joints()[ji];
    out << "  <joint name=\"" << escape(j.name) << "\" type=\""
        << (j.kind == JointKind::Revolute ? "revolute" : "fixed") << "\">\n";
    out << "    <parent link=\"" << escape(j.parent) << "\"/>\n";
    out << "    <child link=\"" << escape(j.child) << "\"/>\n";
    write_origin(out, j.origin, "    ");
    if (j.kind == JointKind::Revolute) {
      out << "    <axis xyz=\"" << fmt3(j.axis) << "\"/>\n";
      out << "    <limit lower=\"" << fmt1(j.limits.lower) << "\" upper=\"" << fmt1(j.limits.upper)
          << "\" effort=\"0\" velocity=\"0\"/>\n";
    }
    out << "  </joint>\n";
  }
  out << "</robot>\n";
  return out.str();
}

inline std::filesystem::path resolve_mesh_path(const std::string& filename, const std::filesystem::path& base_dir) {
  std::string f = filename;
  for (const char* prefix : {"file://", "package://"}) {
    if (f.rfind(prefix, 0) == 0) f = f.substr(std::string(prefix).size());
  }
  std::filesystem::path p(f);
  return p.is_absolute() ? p : base_dir / p;
}

// Paths of mesh references that do not exist on disk.
inline std::vector<std::string> missing_meshes(const HandModel& model, const std::filesystem::path& base_dir) {
  std::vector<std::string> out;
  for (const Link& link : model.links()) {
    if (auto* m = std::get_if<MeshGeometry>(&link.geometry)) {
      const auto p = resolve_mesh_path(m->filename, base_dir);
      if (!std::filesystem::exists(p)) out.push_back(p.string());
    }
  }
  return out;
}

// Loads every referenced mesh. Meshes must be in meters: a URDF scale other
// than 1 or a file declaring other units is rejected.
inline HandModel resolve_meshes(const HandModel& model, const std::filesystem::path& base_dir) {
  HandModel out = model;
  for (std::size_t i = 0; i < model.links().size(); ++i) {
    const auto* m = std::get_if<MeshGeometry>(&model.links()[i].geometry);
    if (!m) continue;
    if ((m->scale - Vec3::Ones()).cwiseAbs().maxCoeff() > 1e-12) {
      throw Error(ErrorKind::NonMetricUnits, m->filename, "mesh scale must be 1 (meters)");
    }
    auto mesh = std::make_shared<const TriangleMesh>(load_mesh(resolve_mesh_path(m->filename, base_dir)));
    out = out.with_mesh(static_cast<int>(i), std::move(mesh));
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline HandModel load_urdf_file(const std::filesystem::path& path, bool load_meshes = true) {
  HandModel model = parse_urdf(read_text_file(path));
  if (load_meshes) model = resolve_meshes(model, path.parent_path());
  return model;
}

}  // namespace softgrasp
