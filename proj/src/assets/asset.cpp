#include "metasim/assets/asset.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "metasim/assets/formats.hpp"
#include "metasim/common/error.hpp"

namespace metasim::assets {

const char* to_string(JointKind kind) {
  switch (kind) {
    case JointKind::Fixed: return "fixed";
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Free: return "free";
  }
  return "?";
}

const char* to_string(GeomShape shape) {
  switch (shape) {
    case GeomShape::Sphere: return "sphere";
    case GeomShape::Box: return "box";
    case GeomShape::Plane: return "plane";
    case GeomShape::Mesh: return "mesh";
  }
  return "?";
}

const Body* CanonicalAsset::find_body(std::string_view body_name) const {
  for (const auto& b : bodies)
    if (b.name == body_name) return &b;
  return nullptr;
}

const Joint* CanonicalAsset::find_joint(std::string_view joint_name) const {
  for (const auto& j : joints)
    if (j.name == joint_name) return &j;
  return nullptr;
}

int CanonicalAsset::actuated_index(std::string_view joint_name) const {
  for (std::size_t i = 0; i < actuated_order.size(); ++i)
    if (actuated_order[i] == joint_name) return static_cast<int>(i);
  return -1;
}

const Body& CanonicalAsset::root() const {
  for (const auto& b : bodies)
    if (!b.parent) return b;
  throw Error(Errc::CyclicBodyGraph, "asset '" + name + "' has no root body");
}

void finalize_topology(CanonicalAsset& asset) {
  asset.actuated_order.clear();
  for (auto& b : asset.bodies) b.parent.reset();
  for (const auto& j : asset.joints) {
    if (j.kind == JointKind::Revolute || j.kind == JointKind::Prismatic)
      asset.actuated_order.push_back(j.name);
    if (j.parent_body.empty()) continue;
    for (auto& b : asset.bodies) {
      if (b.name == j.child_body && !b.parent) {
        b.parent = j.parent_body;
        b.pose_in_parent = j.origin;
      }
    }
  }
}

void validate_tree(const CanonicalAsset& asset) {
  std::map<std::string, std::size_t> body_index;
  for (std::size_t i = 0; i < asset.bodies.size(); ++i) {
    if (!body_index.emplace(asset.bodies[i].name, i).second)
      throw Error(Errc::InvariantViolation, "duplicate body name '" + asset.bodies[i].name + "'");
  }
  if (asset.bodies.empty()) throw Error(Errc::InvariantViolation, "asset has no bodies");

  std::set<std::string> joint_names;
  std::map<std::string, std::string> parent_of;
  for (const auto& j : asset.joints) {
    if (!joint_names.insert(j.name).second)
      throw Error(Errc::InvariantViolation, "duplicate joint name '" + j.name + "'");
    if (!body_index.count(j.child_body))
      throw Error(Errc::MissingLinkReference,
                  "joint '" + j.name + "' references undeclared child '" + j.child_body + "'");
    if (j.parent_body.empty()) {
      if (j.kind != JointKind::Free)
        throw Error(Errc::MissingLinkReference, "joint '" + j.name + "' has no parent body");
      continue;
    }
    if (!body_index.count(j.parent_body))
      throw Error(Errc::MissingLinkReference,
                  "joint '" + j.name + "' references undeclared parent '" + j.parent_body + "'");
    if (j.parent_body == j.child_body)
      throw Error(Errc::CyclicBodyGraph, "joint '" + j.name + "' connects a body to itself");
    if (!parent_of.emplace(j.child_body, j.parent_body).second)
      throw Error(Errc::CyclicBodyGraph, "body '" + j.child_body + "' has more than one parent");
    if (j.kind == JointKind::Revolute || j.kind == JointKind::Prismatic) {
      if (std::abs(j.axis.norm() - 1.0) >= 1e-9)
        throw Error(Errc::InvariantViolation, "joint '" + j.name + "' axis is not unit length");
      if (!(j.lower <= j.upper))
        throw Error(Errc::InvariantViolation, "joint '" + j.name + "' has lower > upper");
    }
  }

  std::vector<std::string> roots;
  for (const auto& b : asset.bodies)
    if (!parent_of.count(b.name)) roots.push_back(b.name);
  if (roots.empty()) throw Error(Errc::CyclicBodyGraph, "no root body: the body graph is cyclic");
  if (roots.size() > 1) {
    std::string list;
    for (const auto& r : roots) list += (list.empty() ? "" : ", ") + r;
    throw Error(Errc::MultipleRoots, "bodies without a parent joint: " + list);
  }

  // Every body must reach the root by following parents.
  for (const auto& b : asset.bodies) {
    std::set<std::string> seen;
    std::string cur = b.name;
    while (parent_of.count(cur)) {
      if (!seen.insert(cur).second)
        throw Error(Errc::CyclicBodyGraph, "cycle through body '" + cur + "'");
      cur = parent_of.at(cur);
    }
  }

  for (const auto& j : asset.joints) {
    if (j.kind == JointKind::Free && j.parent_body.empty() && j.child_body != roots.front())
      throw Error(Errc::InvariantViolation, "world free joint '" + j.name + "' is not on the root");
  }

  std::vector<std::string> expected;
  for (const auto& j : asset.joints)
    if (j.kind == JointKind::Revolute || j.kind == JointKind::Prismatic) expected.push_back(j.name);
  if (std::multiset<std::string>(expected.begin(), expected.end()) !=
      std::multiset<std::string>(asset.actuated_order.begin(), asset.actuated_order.end()))
    throw Error(Errc::InvariantViolation,
                "actuated_order must list exactly the revolute and prismatic joints");
}

namespace {

bool near(double a, double b, double tol) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol;
}

bool near(const Vec3& a, const Vec3& b, double tol) {
  return near(a.x(), b.x(), tol) && near(a.y(), b.y(), tol) && near(a.z(), b.z(), tol);
}

bool near(const Pose& a, const Pose& b, double tol) {
  return near(a.pos, b.pos, tol) && rotation_angle(a.rot, b.rot) <= tol;
}

bool fail(std::string* why, std::string msg) {
  if (why) *why = std::move(msg);
  return false;
}

}  // namespace

bool structurally_equal(const CanonicalAsset& a, const CanonicalAsset& b, double tol,
                        std::string* why) {
  if (a.name != b.name) return fail(why, "asset name differs");
  if (a.bodies.size() != b.bodies.size()) return fail(why, "body count differs");
  if (a.joints.size() != b.joints.size()) return fail(why, "joint count differs");
  if (a.actuated_order != b.actuated_order) return fail(why, "actuated_order differs");
  for (std::size_t i = 0; i < a.bodies.size(); ++i) {
    const Body& x = a.bodies[i];
    const Body* y = b.find_body(x.name);
    if (!y) return fail(why, "body '" + x.name + "' missing");
    if (x.parent != y->parent) return fail(why, "body '" + x.name + "' parent differs");
    if (!near(x.pose_in_parent, y->pose_in_parent, tol))
      return fail(why, "body '" + x.name + "' pose differs");
    const Inertial& p = x.inertial;
    const Inertial& q = y->inertial;
    if (!near(p.mass, q.mass, tol) || !near(p.com, q.com, tol) ||
        !near(p.diag_inertia, q.diag_inertia, tol) || rotation_angle(p.frame, q.frame) > tol)
      return fail(why, "body '" + x.name + "' inertial differs");
  }
  for (const Joint& x : a.joints) {
    const Joint* y = b.find_joint(x.name);
    if (!y) return fail(why, "joint '" + x.name + "' missing");
    if (x.kind != y->kind) return fail(why, "joint '" + x.name + "' kind differs");
    if (x.parent_body != y->parent_body || x.child_body != y->child_body)
      return fail(why, "joint '" + x.name + "' connectivity differs");
    if (!near(x.origin, y->origin, tol)) return fail(why, "joint '" + x.name + "' origin differs");
    if (x.kind == JointKind::Revolute || x.kind == JointKind::Prismatic) {
      if (!near(x.axis, y->axis, tol)) return fail(why, "joint '" + x.name + "' axis differs");
      if (!near(x.lower, y->lower, tol) || !near(x.upper, y->upper, tol))
        return fail(why, "joint '" + x.name + "' limits differ");
    }
  }
  return true;
}

CanonicalAsset load_asset_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::AssetNotFound, "cannot open asset file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto ext = path.extension().string();
  CanonicalAsset asset = (ext == ".urdf") ? parse_urdf(ss.str()) : parse_mjcf(ss.str());
  asset.base_dir = path.parent_path();
  return asset;
}

}  // namespace metasim::assets
