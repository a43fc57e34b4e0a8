#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metasim/common/material.hpp"
#include "metasim/common/math.hpp"

namespace metasim::assets {

enum class JointKind { Fixed, Revolute, Prismatic, Free };
enum class GeomShape { Sphere, Box, Plane, Mesh };
enum class GeomRole { Visual, Collision };

const char* to_string(JointKind kind);
const char* to_string(GeomShape shape);

/// Collision or visual primitive attached to a body.
///
/// dims: sphere {radius}; box {full x, y, z extents}; plane {half x, half y}
/// (0 = unbounded); mesh {scale x, y, z}. Mesh paths are relative to the
/// owning asset's base directory unless absolute.
struct Geom {
  std::string name;
  GeomShape shape = GeomShape::Box;
  std::vector<double> dims;
  std::string mesh_path;
  Pose pose_in_body;
  MaterialParams material;
  GeomRole role = GeomRole::Collision;
};

/// Mass properties with a diagonal inertia expressed in the principal frame
/// located at `com` with orientation `frame`.
struct Inertial {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Quat frame = Quat::Identity();
  Vec3 diag_inertia = Vec3::Zero();
};

struct Body {
  std::string name;
  std::optional<std::string> parent;
  Pose pose_in_parent;
  Inertial inertial;
  std::vector<Geom> geoms;
};

/// A joint places its frame at `origin` in the parent body; the child body
/// frame is that joint frame moved by the joint coordinate. A free joint
/// whose parent_body is empty attaches the root body to the world.
struct Joint {
  std::string name;
  JointKind kind = JointKind::Fixed;
  std::string parent_body;
  std::string child_body;
  Vec3 axis = Vec3::UnitX();
  double lower = 0.0;
  double upper = 0.0;
  Pose origin;
  double effort = 0.0;
  double velocity = 0.0;
};

struct CanonicalAsset {
  std::string name;
  std::vector<Body> bodies;
  std::vector<Joint> joints;
  std::vector<std::string> actuated_order;
  std::vector<std::string> warnings;
  std::filesystem::path base_dir;

  const Body* find_body(std::string_view body_name) const;
  const Joint* find_joint(std::string_view joint_name) const;
  /// Index into actuated_order, or -1.
  int actuated_index(std::string_view joint_name) const;
  std::size_t dof() const { return actuated_order.size(); }
  const Body& root() const;
};

/// Throws MissingLinkReference, CyclicBodyGraph, MultipleRoots or
/// InvariantViolation.
void validate_tree(const CanonicalAsset& asset);

/// Rebuilds actuated_order (declaration order of revolute/prismatic joints)
/// and each body's parent link from the joint list.
void finalize_topology(CanonicalAsset& asset);

/// Same names, topology, joint kinds, axes, limits, origins and inertials to
/// within `tol`. On mismatch, `why` receives the first difference.
bool structurally_equal(const CanonicalAsset& a, const CanonicalAsset& b, double tol,
                        std::string* why = nullptr);

/// Loads .urdf or MJCF (.xml/.mjcf) by extension; relative paths are taken
/// from `base_dir`. Throws AssetNotFound for missing files.
CanonicalAsset load_asset_file(const std::filesystem::path& path);

}  // namespace metasim::assets
