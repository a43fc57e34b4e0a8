#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include "inertia.hpp"
#include "metasim/assets/formats.hpp"
#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"
#include "xml_util.hpp"

namespace metasim::assets {

namespace {

using xml::Tree;
using AttrMap = std::map<std::string, std::string>;

struct DefaultClass {
  std::string parent;
  std::map<std::string, AttrMap> by_tag;
};

const std::set<std::string> kUnsupportedTopLevel = {"tendon", "actuator", "equality", "sensor",
                                                     "contact", "keyframe", "custom", "extension",
                                                     "deformable", "include"};

AttrMap attributes(const Tree& node) {
  AttrMap out;
  if (auto attrs = node.get_child_optional("<xmlattr>"))
    for (const auto& [k, v] : *attrs) out[k] = v.data();
  return out;
}

std::optional<std::string> lookup(const AttrMap& m, const char* key) {
  auto it = m.find(key);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

class MjcfReader {
 public:
  CanonicalAsset read(std::string_view text) {
    const Tree doc = xml::parse(text);
    auto root = doc.get_child_optional("mujoco");
    if (!root) throw Error(Errc::MalformedXml, "missing <mujoco> root element");
    asset_.name = xml::attr_or(*root, "model", "model");

    // Compiler and defaults first: they affect every element that follows.
    for (const auto& [tag, node] : *root) {
      if (tag == "compiler") read_compiler(node);
    }
    classes_["main"] = DefaultClass{};
    for (const auto& [tag, node] : *root) {
      if (tag == "default") read_default(node, "", true);
    }
    for (const auto& [tag, node] : *root) {
      if (tag == "asset") read_assets(node);
    }
    const Tree* world = nullptr;
    for (const auto& [tag, node] : *root) {
      if (tag == "<xmlattr>" || tag == "compiler" || tag == "default" || tag == "asset") continue;
      if (tag == "worldbody") {
        if (world) throw Error(Errc::MalformedXml, "more than one <worldbody>");
        world = &node;
      } else if (kUnsupportedTopLevel.count(tag)) {
        asset_.warnings.push_back("MJCF: unsupported <" + tag + "> section ignored (" +
                                  std::to_string(count_children(node)) + " entries)");
      } else {
        asset_.warnings.push_back("MJCF: <" + tag + "> ignored");
      }
    }
    if (!world) throw Error(Errc::MalformedXml, "missing <worldbody>");
    read_world(*world);
    if (inferred_inertia_)
      asset_.warnings.push_back("MJCF: bodies without <inertial> keep zero mass (no inference from geoms)");
    finalize_topology(asset_);
    validate_tree(asset_);
    return std::move(asset_);
  }

 private:
  static std::size_t count_children(const Tree& node) {
    std::size_t n = 0;
    for (const auto& [tag, child] : node)
      if (tag != "<xmlattr>") ++n;
    return n;
  }

  void read_compiler(const Tree& node) {
    for (const auto& [key, value] : attributes(node)) {
      if (key == "angle") {
        if (value == "degree") degrees_ = true;
        else if (value == "radian") degrees_ = false;
        else throw Error(Errc::MalformedXml, "compiler angle must be degree or radian");
      } else if (key == "eulerseq") {
        if (value.size() != 3 || value.find_first_not_of("xyzXYZ") != std::string::npos)
          throw Error(Errc::MalformedXml, "bad eulerseq '" + value + "'");
        eulerseq_ = value;
      } else if (key == "meshdir") {
        meshdir_ = value;
      } else if (key == "assetdir") {
        if (meshdir_.empty()) meshdir_ = value;
      } else {
        asset_.warnings.push_back("MJCF: compiler attribute '" + key + "' ignored");
      }
    }
  }

  void read_default(const Tree& node, const std::string& parent, bool top) {
    const std::string name = top ? "main" : xml::attr_or(node, "class", "");
    if (name.empty()) throw Error(Errc::InconsistentDefaultClass, "nested <default> without class");
    if (!top && classes_.count(name))
      throw Error(Errc::InconsistentDefaultClass, "default class '" + name + "' defined twice");
    classes_[name].parent = top ? "" : parent;
    for (const auto& [tag, child] : node) {
      if (tag == "<xmlattr>") continue;
      if (tag == "default") {
        read_default(child, name, false);
      } else {
        for (const auto& [k, v] : attributes(child)) classes_[name].by_tag[tag][k] = v;
      }
    }
  }

  void read_assets(const Tree& node) {
    for (const auto& [tag, child] : node) {
      if (tag == "mesh") {
        const AttrMap a = attributes(child);
        const std::string file = lookup(a, "file").value_or("");
        std::string name = lookup(a, "name").value_or("");
        if (name.empty()) {
          const auto slash = file.find_last_of('/');
          std::string stem = slash == std::string::npos ? file : file.substr(slash + 1);
          name = stem.substr(0, stem.find_last_of('.'));
        }
        std::string path = meshdir_.empty() ? file : meshdir_ + "/" + file;
        mesh_files_[name] = path;
        if (auto scale = lookup(a, "scale")) mesh_scales_[name] = xml::numbers(*scale, 3, "mesh scale");
      } else if (tag == "material") {
        const AttrMap a = attributes(child);
        if (auto rgba = lookup(a, "rgba")) {
          auto v = xml::numbers(*rgba, 4, "material rgba");
          material_colors_[lookup(a, "name").value_or("")] = {v[0], v[1], v[2]};
        }
      } else if (tag != "<xmlattr>") {
        asset_.warnings.push_back("MJCF: asset <" + tag + "> ignored");
      }
    }
  }

  /// Element attributes layered over the default-class chain for `tag`.
  AttrMap resolve(const Tree& node, const std::string& tag, const std::string& inherited_class) {
    AttrMap own = attributes(node);
    std::string cls = lookup(own, "class").value_or(inherited_class);
    if (!classes_.count(cls))
      throw Error(Errc::InconsistentDefaultClass, "<" + tag + "> refers to undefined class '" + cls + "'");
    std::vector<std::string> chain;
    for (std::string c = cls; !c.empty(); c = classes_.at(c).parent) {
      if (chain.size() > classes_.size())
        throw Error(Errc::InconsistentDefaultClass, "default class chain loops at '" + c + "'");
      chain.push_back(c);
    }
    AttrMap out;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      auto found = classes_.at(*it).by_tag.find(tag);
      if (found == classes_.at(*it).by_tag.end()) continue;
      for (const auto& [k, v] : found->second) out[k] = v;
    }
    for (const auto& [k, v] : own) out[k] = v;
    return out;
  }

  double angle_unit() const { return degrees_ ? std::numbers::pi / 180.0 : 1.0; }

  Quat orientation(const AttrMap& a, const std::string& what) const {
    if (auto q = lookup(a, "quat")) {
      auto v = xml::numbers(*q, 4, what + " quat");
      return normalized_if_needed(Quat(v[0], v[1], v[2], v[3]));
    }
    if (auto aa = lookup(a, "axisangle")) {
      auto v = xml::numbers(*aa, 4, what + " axisangle");
      Vec3 axis(v[0], v[1], v[2]);
      return Quat(Eigen::AngleAxisd(v[3] * angle_unit(), axis.normalized()));
    }
    if (auto e = lookup(a, "euler")) {
      auto v = xml::numbers(*e, 3, what + " euler");
      Quat q = Quat::Identity();
      for (int i = 0; i < 3; ++i) {
        const char c = eulerseq_[i];
        const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        Vec3 axis = lower == 'x' ? Vec3::UnitX() : (lower == 'y' ? Vec3::UnitY() : Vec3::UnitZ());
        Quat r(Eigen::AngleAxisd(v[i] * angle_unit(), axis));
        q = (c == lower) ? Quat(q * r) : Quat(r * q);
      }
      return q.normalized();
    }
    if (auto xy = lookup(a, "xyaxes")) {
      auto v = xml::numbers(*xy, 6, what + " xyaxes");
      Vec3 x = Vec3(v[0], v[1], v[2]).normalized();
      Vec3 y(v[3], v[4], v[5]);
      y = (y - y.dot(x) * x).normalized();
      Eigen::Matrix3d m;
      m.col(0) = x;
      m.col(1) = y;
      m.col(2) = x.cross(y);
      return Quat(m).normalized();
    }
    if (auto z = lookup(a, "zaxis")) {
      return Quat::FromTwoVectors(Vec3::UnitZ(), xml::vec3(*z, what + " zaxis").normalized());
    }
    return Quat::Identity();
  }

  Pose frame_of(const AttrMap& a, const std::string& what) const {
    Pose p;
    if (auto pos = lookup(a, "pos")) p.pos = xml::vec3(*pos, what + " pos");
    p.rot = orientation(a, what);
    return p;
  }

  std::optional<Geom> read_geom(const Tree& node, const std::string& cls, const std::string& body) {
    const AttrMap a = resolve(node, "geom", cls);
    const std::string what = "geom in body '" + body + "'";
    const std::string type = lookup(a, "type").value_or("sphere");
    Geom g;
    g.name = lookup(a, "name").value_or("");
    if (lookup(a, "fromto")) {
      asset_.warnings.push_back("MJCF: " + what + " uses fromto; skipped");
      return std::nullopt;
    }
    std::vector<double> size;
    if (auto s = lookup(a, "size")) size = xml::numbers(*s, 0, what + " size");
    if (type == "sphere") {
      g.shape = GeomShape::Sphere;
      if (size.empty()) throw Error(Errc::MalformedXml, what + " sphere needs size");
      g.dims = {size[0]};
    } else if (type == "box") {
      g.shape = GeomShape::Box;
      if (size.size() < 3) throw Error(Errc::MalformedXml, what + " box needs 3 half-sizes");
      g.dims = {2 * size[0], 2 * size[1], 2 * size[2]};
    } else if (type == "plane") {
      g.shape = GeomShape::Plane;
      g.dims = {size.size() > 0 ? size[0] : 0.0, size.size() > 1 ? size[1] : 0.0};
    } else if (type == "mesh") {
      g.shape = GeomShape::Mesh;
      const std::string mesh = lookup(a, "mesh").value_or("");
      auto it = mesh_files_.find(mesh);
      if (it == mesh_files_.end()) throw Error(Errc::MalformedXml, what + " references unknown mesh '" + mesh + "'");
      g.mesh_path = it->second;
      auto sc = mesh_scales_.find(mesh);
      g.dims = sc != mesh_scales_.end() ? sc->second : std::vector<double>{1.0, 1.0, 1.0};
    } else {
      asset_.warnings.push_back("MJCF: unsupported geom type '" + type + "' in body '" + body + "' skipped");
      return std::nullopt;
    }
    g.pose_in_body = frame_of(a, what);
    if (auto rgba = lookup(a, "rgba")) {
      auto v = xml::numbers(*rgba, 4, what + " rgba");
      g.material.base_color = {v[0], v[1], v[2]};
    } else if (auto mat = lookup(a, "material")) {
      auto it = material_colors_.find(*mat);
      if (it != material_colors_.end()) g.material.base_color = it->second;
    }
    const bool no_contact = lookup(a, "contype").value_or("1") == "0" &&
                            lookup(a, "conaffinity").value_or("1") == "0";
    g.role = no_contact ? GeomRole::Visual : GeomRole::Collision;
    return g;
  }

  struct JointSpec {
    std::string name;
    JointKind kind;
    Vec3 axis;
    Vec3 pos;
    double lower, upper;
  };

  JointSpec read_joint(const Tree& node, const std::string& tag, const std::string& cls,
                       const std::string& body, std::size_t index) {
    const AttrMap a = tag == "freejoint" ? attributes(node) : resolve(node, "joint", cls);
    JointSpec j;
    j.name = lookup(a, "name").value_or(body + "_joint" + std::to_string(index));
    const std::string type = tag == "freejoint" ? "free" : lookup(a, "type").value_or("hinge");
    if (type == "hinge") j.kind = JointKind::Revolute;
    else if (type == "slide") j.kind = JointKind::Prismatic;
    else if (type == "free") j.kind = JointKind::Free;
    else throw Error(Errc::UnsupportedJointKind, "joint '" + j.name + "' has type '" + type + "'");
    const std::string what = "joint '" + j.name + "'";
    j.axis = Vec3::UnitZ();
    if (auto ax = lookup(a, "axis")) j.axis = xml::vec3(*ax, what + " axis");
    if (j.axis.norm() == 0.0) throw Error(Errc::InvariantViolation, what + " has a zero axis");
    if (std::abs(j.axis.norm() - 1.0) >= 1e-12) j.axis.normalize();
    j.pos = Vec3::Zero();
    if (auto p = lookup(a, "pos")) j.pos = xml::vec3(*p, what + " pos");
    const double inf = std::numeric_limits<double>::infinity();
    j.lower = -inf;
    j.upper = inf;
    auto range = lookup(a, "range");
    const std::string limited = lookup(a, "limited").value_or("auto");
    if (limited == "true" || (limited == "auto" && range)) {
      auto r = range ? xml::numbers(*range, 2, what + " range") : std::vector<double>{0.0, 0.0};
      const double unit = j.kind == JointKind::Revolute ? angle_unit() : 1.0;
      j.lower = r[0] * unit;
      j.upper = r[1] * unit;
    }
    return j;
  }

  std::string unique_body_name(const std::string& wanted) {
    std::string name = wanted;
    int n = 1;
    while (body_names_.count(name)) name = wanted + "_" + std::to_string(n++);
    body_names_.insert(name);
    return name;
  }

  /// Adds `node` below canonical body `parent` (empty for a world-rooted
  /// body). `parent_shift` maps the parent's canonical frame into its MJCF
  /// frame; the canonical frame of a jointed body sits on its last joint.
  void read_body(const Tree& node, const std::string& parent, const Pose& parent_shift,
                 const std::string& inherited_class) {
    const AttrMap own = attributes(node);
    const std::string name = unique_body_name(lookup(own, "name").value_or("body" + std::to_string(body_counter_++)));
    const std::string child_class = lookup(own, "childclass").value_or(inherited_class);
    if (!classes_.count(child_class))
      throw Error(Errc::InconsistentDefaultClass, "body '" + name + "' childclass '" + child_class + "' undefined");
    const Pose local = parent_shift.inverse() * frame_of(own, "body '" + name + "'");

    std::vector<JointSpec> joints;
    for (const auto& [tag, child] : node) {
      if (tag == "joint" || tag == "freejoint")
        joints.push_back(read_joint(child, tag, child_class, name, joints.size()));
    }
    const bool has_free = std::any_of(joints.begin(), joints.end(),
                                      [](const JointSpec& j) { return j.kind == JointKind::Free; });
    if (has_free && joints.size() > 1)
      throw Error(Errc::UnsupportedJointKind, "body '" + name + "' combines a free joint with other joints");

    Pose shift = Pose::identity();
    std::string attach_to = parent;
    Pose attach_origin = local;
    Body body;
    body.name = name;

    if (joints.empty()) {
      if (parent.empty()) {
        body.pose_in_parent = local;
      } else {
        Joint fixed;
        fixed.name = name + "_fixed";
        fixed.kind = JointKind::Fixed;
        fixed.parent_body = parent;
        fixed.child_body = name;
        fixed.origin = local;
        asset_.joints.push_back(fixed);
      }
    } else if (has_free) {
      Joint free;
      free.name = joints.front().name;
      free.kind = JointKind::Free;
      free.parent_body = parent;
      free.child_body = name;
      free.origin = local;
      body.pose_in_parent = local;
      asset_.joints.push_back(free);
    } else {
      // Chain multiple joints through massless intermediate bodies.
      Vec3 prev_pos = Vec3::Zero();
      for (std::size_t i = 0; i < joints.size(); ++i) {
        const JointSpec& js = joints[i];
        const bool last = i + 1 == joints.size();
        Joint j;
        j.name = js.name;
        j.kind = js.kind;
        j.axis = js.axis;
        j.lower = js.lower;
        j.upper = js.upper;
        j.parent_body = attach_to;
        j.origin = (i == 0) ? attach_origin * Pose::from_translation(js.pos)
                            : Pose::from_translation(js.pos - prev_pos);
        if (last) {
          j.child_body = name;
        } else {
          Body dummy;
          dummy.name = unique_body_name(name + "_" + js.name + "_link");
          j.child_body = dummy.name;
          asset_.bodies.push_back(dummy);
          attach_to = dummy.name;
        }
        asset_.joints.push_back(j);
        prev_pos = js.pos;
      }
      shift = Pose::from_translation(prev_pos);
    }

    const Pose to_canonical = shift.inverse();
    bool has_inertial = false;
    for (const auto& [tag, child] : node) {
      if (tag == "<xmlattr>" || tag == "joint" || tag == "freejoint" || tag == "body") continue;
      if (tag == "geom") {
        if (auto g = read_geom(child, child_class, name)) {
          g->pose_in_body = to_canonical * g->pose_in_body;
          body.geoms.push_back(std::move(*g));
        }
      } else if (tag == "inertial") {
        has_inertial = true;
        const AttrMap a = attributes(child);
        const std::string what = "inertial of body '" + name + "'";
        const Pose frame = to_canonical * frame_of(a, what);
        const double mass = xml::numbers(lookup(a, "mass").value_or("0"), 1, what + " mass")[0];
        Eigen::Matrix3d tensor = Eigen::Matrix3d::Zero();
        if (auto d = lookup(a, "diaginertia")) {
          auto v = xml::numbers(*d, 3, what + " diaginertia");
          tensor.diagonal() << v[0], v[1], v[2];
        } else if (auto f = lookup(a, "fullinertia")) {
          auto v = xml::numbers(*f, 6, what + " fullinertia");
          tensor << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
        }
        body.inertial = principal_inertial(mass, frame.pos, frame.rot, tensor);
      } else {
        asset_.warnings.push_back("MJCF: <" + tag + "> in body '" + name + "' ignored");
      }
    }
    if (!has_inertial) inferred_inertia_ = true;
    asset_.bodies.push_back(std::move(body));

    for (const auto& [tag, child] : node) {
      if (tag == "body") read_body(child, name, shift, child_class);
    }
  }

  void read_world(const Tree& world) {
    std::vector<const Tree*> top_bodies;
    std::vector<const Tree*> world_geoms;
    for (const auto& [tag, child] : world) {
      if (tag == "body") top_bodies.push_back(&child);
      else if (tag == "geom") world_geoms.push_back(&child);
      else if (tag != "<xmlattr>") asset_.warnings.push_back("MJCF: <" + tag + "> in worldbody ignored");
    }
    bool need_world = !world_geoms.empty() || top_bodies.size() != 1;
    if (!need_world) {
      // A lone top-level body can be the root unless it hinges or slides on the world.
      for (const auto& [tag, child] : *top_bodies.front()) {
        if (tag == "joint") {
          const AttrMap a = resolve(child, "joint", "main");
          if (lookup(a, "type").value_or("hinge") != "free") need_world = true;
        }
      }
    }
    std::string parent;
    if (need_world) {
      Body root;
      root.name = unique_body_name("world");
      for (const Tree* g : world_geoms)
        if (auto geom = read_geom(*g, "main", root.name)) root.geoms.push_back(std::move(*geom));
      asset_.bodies.push_back(std::move(root));
      parent = asset_.bodies.back().name;
    }
    for (const Tree* b : top_bodies) read_body(*b, parent, Pose::identity(), "main");
  }

  CanonicalAsset asset_;
  std::map<std::string, DefaultClass> classes_;
  std::map<std::string, std::string> mesh_files_;
  std::map<std::string, std::vector<double>> mesh_scales_;
  std::map<std::string, std::array<double, 3>> material_colors_;
  std::set<std::string> body_names_;
  bool degrees_ = true;
  bool inferred_inertia_ = false;
  std::string eulerseq_ = "xyz";
  std::string meshdir_;
  int body_counter_ = 0;
};

}  // namespace

CanonicalAsset parse_mjcf(std::string_view text) { return MjcfReader{}.read(text); }

Conversion convert_mjcf_to_urdf(std::string_view mjcf_text) {
  CanonicalAsset asset = parse_mjcf(mjcf_text);
  Conversion out;
  out.warnings = asset.warnings;
  out.urdf = export_urdf(asset, &out.warnings);
  return out;
}

}  // namespace metasim::assets
