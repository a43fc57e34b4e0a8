#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "inertia.hpp"
#include "metasim/assets/formats.hpp"
#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"
#include "xml_util.hpp"

namespace metasim::assets {

namespace {

using xml::Tree;

Pose parse_origin(const Tree& parent, const std::string& what) {
  Pose pose;
  auto origin = parent.get_child_optional("origin");
  if (!origin) return pose;
  if (auto xyz = xml::attr(*origin, "xyz")) pose.pos = xml::vec3(*xyz, what + " origin xyz");
  if (auto rpy = xml::attr(*origin, "rpy")) {
    const Vec3 r = xml::vec3(*rpy, what + " origin rpy");
    pose.rot = quat_from_rpy(r.x(), r.y(), r.z());
  }
  return pose;
}

std::optional<std::array<double, 3>> parse_color(const Tree& material, const std::string& what) {
  if (auto color = material.get_child_optional("color")) {
    if (auto rgba = xml::attr(*color, "rgba")) {
      auto v = xml::numbers(*rgba, 4, what + " color");
      return std::array<double, 3>{v[0], v[1], v[2]};
    }
  }
  return std::nullopt;
}

struct UrdfContext {
  std::map<std::string, std::array<double, 3>> named_colors;
  std::vector<std::string>* warnings;
};

std::optional<Geom> parse_geom(const Tree& node, GeomRole role, const std::string& link,
                               const UrdfContext& ctx) {
  Geom geom;
  geom.role = role;
  geom.name = xml::attr_or(node, "name", "");
  const std::string what = "link '" + link + "'";
  geom.pose_in_body = parse_origin(node, what);
  auto geometry = node.get_child_optional("geometry");
  if (!geometry) throw Error(Errc::MalformedXml, what + " geometry element missing");
  if (auto box = geometry->get_child_optional("box")) {
    geom.shape = GeomShape::Box;
    geom.dims = xml::numbers(xml::attr_or(*box, "size", ""), 3, what + " box size");
  } else if (auto sphere = geometry->get_child_optional("sphere")) {
    geom.shape = GeomShape::Sphere;
    geom.dims = xml::numbers(xml::attr_or(*sphere, "radius", ""), 1, what + " sphere radius");
  } else if (auto mesh = geometry->get_child_optional("mesh")) {
    geom.shape = GeomShape::Mesh;
    geom.mesh_path = xml::attr_or(*mesh, "filename", "");
    geom.dims = {1.0, 1.0, 1.0};
    if (auto scale = xml::attr(*mesh, "scale")) geom.dims = xml::numbers(*scale, 3, what + " mesh scale");
  } else {
    std::string kind = geometry->empty() ? "empty" : geometry->front().first;
    ctx.warnings->push_back("URDF: unsupported geometry <" + kind + "> on " + what + " skipped");
    return std::nullopt;
  }
  if (auto material = node.get_child_optional("material")) {
    if (auto c = parse_color(*material, what)) {
      geom.material.base_color = *c;
    } else if (auto name = xml::attr(*material, "name")) {
      auto it = ctx.named_colors.find(*name);
      if (it != ctx.named_colors.end()) geom.material.base_color = it->second;
    }
  }
  return geom;
}

Body parse_link(const Tree& node, const UrdfContext& ctx) {
  Body body;
  auto name = xml::attr(node, "name");
  if (!name) throw Error(Errc::MalformedXml, "<link> without name");
  body.name = *name;
  for (const auto& [tag, child] : node) {
    if (tag == "<xmlattr>") continue;
    if (tag == "inertial") {
      const Pose origin = parse_origin(child, "link '" + body.name + "' inertial");
      double mass = 0.0;
      if (auto m = child.get_child_optional("mass"))
        mass = xml::numbers(xml::attr_or(*m, "value", "0"), 1, "mass")[0];
      Eigen::Matrix3d tensor = Eigen::Matrix3d::Zero();
      if (auto in = child.get_child_optional("inertia")) {
        auto get = [&](const char* key) {
          return xml::numbers(xml::attr_or(*in, key, "0"), 1, std::string("inertia ") + key)[0];
        };
        tensor << get("ixx"), get("ixy"), get("ixz"), get("ixy"), get("iyy"), get("iyz"), get("ixz"),
            get("iyz"), get("izz");
      }
      body.inertial = principal_inertial(mass, origin.pos, origin.rot, tensor);
    } else if (tag == "visual" || tag == "collision") {
      auto geom = parse_geom(child, tag == "visual" ? GeomRole::Visual : GeomRole::Collision, body.name, ctx);
      if (geom) body.geoms.push_back(std::move(*geom));
    } else {
      ctx.warnings->push_back("URDF: ignored <" + tag + "> in link '" + body.name + "'");
    }
  }
  return body;
}

Joint parse_joint(const Tree& node, std::vector<std::string>& warnings) {
  Joint joint;
  auto name = xml::attr(node, "name");
  if (!name) throw Error(Errc::MalformedXml, "<joint> without name");
  joint.name = *name;
  const std::string type = xml::attr_or(node, "type", "");
  const double inf = std::numeric_limits<double>::infinity();
  bool bounded = true;
  if (type == "revolute") {
    joint.kind = JointKind::Revolute;
  } else if (type == "continuous") {
    joint.kind = JointKind::Revolute;
    bounded = false;
  } else if (type == "prismatic") {
    joint.kind = JointKind::Prismatic;
  } else if (type == "fixed") {
    joint.kind = JointKind::Fixed;
  } else if (type == "floating") {
    joint.kind = JointKind::Free;
  } else {
    throw Error(Errc::UnsupportedJointKind, "joint '" + joint.name + "' has type '" + type + "'");
  }
  auto parent = node.get_child_optional("parent");
  auto child = node.get_child_optional("child");
  if (!parent || !child)
    throw Error(Errc::MalformedXml, "joint '" + joint.name + "' lacks <parent> or <child>");
  joint.parent_body = xml::attr_or(*parent, "link", "");
  joint.child_body = xml::attr_or(*child, "link", "");
  joint.origin = parse_origin(node, "joint '" + joint.name + "'");
  if (auto axis = node.get_child_optional("axis")) {
    joint.axis = xml::vec3(xml::attr_or(*axis, "xyz", "1 0 0"), "joint '" + joint.name + "' axis");
  }
  const double n = joint.axis.norm();
  if (n == 0.0) throw Error(Errc::InvariantViolation, "joint '" + joint.name + "' has a zero axis");
  if (std::abs(n - 1.0) >= 1e-12) joint.axis /= n;

  if (auto limit = node.get_child_optional("limit")) {
    auto num = [&](const char* key) {
      return xml::numbers(xml::attr_or(*limit, key, "0"), 1, "joint '" + joint.name + "' limit")[0];
    };
    joint.lower = num("lower");
    joint.upper = num("upper");
    joint.effort = num("effort");
    joint.velocity = num("velocity");
  } else if (joint.kind == JointKind::Revolute && bounded) {
    warnings.push_back("URDF: revolute joint '" + joint.name + "' has no <limit>; range set to [0, 0]");
  } else if (joint.kind == JointKind::Prismatic) {
    warnings.push_back("URDF: prismatic joint '" + joint.name + "' has no <limit>; range set to [0, 0]");
  }
  if (!bounded) {
    joint.lower = -inf;
    joint.upper = inf;
  }
  for (const auto& [tag, sub] : node) {
    if (tag == "mimic" || tag == "dynamics" || tag == "calibration" || tag == "safety_controller")
      warnings.push_back("URDF: ignored <" + tag + "> on joint '" + joint.name + "'");
  }
  return joint;
}

std::string fmt(double v) { return format_double(v); }

std::string fmt3(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

std::string origin_xml(const Pose& pose) {
  const Vec3 rpy = rpy_from_quat(pose.rot);
  return "<origin xyz=\"" + fmt3(pose.pos) + "\" rpy=\"" + fmt3(rpy) + "\"/>";
}

void write_geom(std::ostringstream& out, const Geom& g, const std::string& link, std::size_t index,
                std::vector<std::string>& warnings) {
  const char* tag = g.role == GeomRole::Visual ? "visual" : "collision";
  out << "    <" << tag;
  if (!g.name.empty()) out << " name=\"" << xml::escape(g.name) << "\"";
  out << ">\n      " << origin_xml(g.pose_in_body) << "\n      <geometry>";
  switch (g.shape) {
    case GeomShape::Box:
      out << "<box size=\"" << fmt(g.dims.at(0)) << " " << fmt(g.dims.at(1)) << " " << fmt(g.dims.at(2)) << "\"/>";
      break;
    case GeomShape::Sphere:
      out << "<sphere radius=\"" << fmt(g.dims.at(0)) << "\"/>";
      break;
    case GeomShape::Mesh: {
      out << "<mesh filename=\"" << xml::escape(g.mesh_path) << "\"";
      if (g.dims.size() == 3 && !(g.dims[0] == 1.0 && g.dims[1] == 1.0 && g.dims[2] == 1.0))
        out << " scale=\"" << fmt(g.dims[0]) << " " << fmt(g.dims[1]) << " " << fmt(g.dims[2]) << "\"";
      out << "/>";
      break;
    }
    case GeomShape::Plane: {
      const double hx = g.dims.size() > 0 && g.dims[0] > 0 ? g.dims[0] : 10.0;
      const double hy = g.dims.size() > 1 && g.dims[1] > 0 ? g.dims[1] : 10.0;
      out << "<box size=\"" << fmt(2 * hx) << " " << fmt(2 * hy) << " 0.001\"/>";
      warnings.push_back("URDF export: plane geom on link '" + link + "' written as a thin box");
      break;
    }
  }
  out << "</geometry>\n";
  if (g.role == GeomRole::Visual) {
    const auto& c = g.material.base_color;
    out << "      <material name=\"" << xml::escape(link) << "_mat" << index << "\"><color rgba=\""
        << fmt(c[0]) << " " << fmt(c[1]) << " " << fmt(c[2]) << " 1\"/></material>\n";
  }
  out << "    </" << tag << ">\n";
}

}  // namespace

CanonicalAsset parse_urdf(std::string_view text) {
  const Tree doc = xml::parse(text);
  auto robot = doc.get_child_optional("robot");
  if (!robot) throw Error(Errc::MalformedXml, "missing <robot> root element");

  CanonicalAsset asset;
  asset.name = xml::attr_or(*robot, "name", "robot");
  UrdfContext ctx{{}, &asset.warnings};
  for (const auto& [tag, child] : *robot) {
    if (tag != "material") continue;
    if (auto name = xml::attr(child, "name"))
      if (auto c = parse_color(child, "material '" + *name + "'")) ctx.named_colors[*name] = *c;
  }
  for (const auto& [tag, child] : *robot) {
    if (tag == "<xmlattr>" || tag == "material") continue;
    if (tag == "link") {
      asset.bodies.push_back(parse_link(child, ctx));
    } else if (tag == "joint") {
      asset.joints.push_back(parse_joint(child, asset.warnings));
    } else {
      asset.warnings.push_back("URDF: ignored <" + tag + "> element");
    }
  }
  finalize_topology(asset);
  validate_tree(asset);
  return asset;
}

std::string export_urdf(const CanonicalAsset& asset, std::vector<std::string>* warnings_out) {
  validate_tree(asset);
  std::vector<std::string> warnings;
  const std::string root = asset.root().name;
  for (const auto& j : asset.joints) {
    if (j.kind == JointKind::Free && j.child_body != root)
      throw Error(Errc::UnrepresentableInUrdf,
                  "free joint '" + j.name + "' moves non-root body '" + j.child_body + "'");
  }

  std::ostringstream out;
  out << "<?xml version=\"1.0\"?>\n<robot name=\"" << xml::escape(asset.name) << "\">\n";
  for (const auto& body : asset.bodies) {
    out << "  <link name=\"" << xml::escape(body.name) << "\">\n";
    const Inertial& in = body.inertial;
    out << "    <inertial>\n      " << origin_xml(Pose(in.com, in.frame)) << "\n      <mass value=\""
        << fmt(in.mass) << "\"/>\n      <inertia ixx=\"" << fmt(in.diag_inertia.x())
        << "\" ixy=\"0\" ixz=\"0\" iyy=\"" << fmt(in.diag_inertia.y()) << "\" iyz=\"0\" izz=\""
        << fmt(in.diag_inertia.z()) << "\"/>\n    </inertial>\n";
    for (std::size_t i = 0; i < body.geoms.size(); ++i) write_geom(out, body.geoms[i], body.name, i, warnings);
    out << "  </link>\n";
  }
  for (const auto& j : asset.joints) {
    if (j.kind == JointKind::Free) {
      warnings.push_back("URDF export: free joint '" + j.name + "' on the root dropped (root floats implicitly)");
      continue;
    }
    const bool continuous = j.kind == JointKind::Revolute && std::isinf(j.lower) && std::isinf(j.upper);
    const char* type = continuous ? "continuous" : to_string(j.kind);
    out << "  <joint name=\"" << xml::escape(j.name) << "\" type=\"" << type << "\">\n";
    out << "    <parent link=\"" << xml::escape(j.parent_body) << "\"/>\n";
    out << "    <child link=\"" << xml::escape(j.child_body) << "\"/>\n";
    out << "    " << origin_xml(j.origin) << "\n";
    if (j.kind != JointKind::Fixed) {
      out << "    <axis xyz=\"" << fmt3(j.axis) << "\"/>\n";
      out << "    <limit";
      if (!continuous) out << " lower=\"" << fmt(j.lower) << "\" upper=\"" << fmt(j.upper) << "\"";
      out << " effort=\"" << fmt(j.effort) << "\" velocity=\"" << fmt(j.velocity) << "\"/>\n";
    }
    out << "  </joint>\n";
  }
  out << "</robot>\n";
  if (warnings_out) warnings_out->insert(warnings_out->end(), warnings.begin(), warnings.end());
  return out.str();
}

}  // namespace metasim::assets
