#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace metasim {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;

/// Builds a quaternion from scalar-first components. Every file format and
/// wire protocol in this project stores orientations as (w, x, y, z).
inline Quat quat_wxyz(double w, double x, double y, double z) { return Quat(w, x, y, z); }

/// Rigid transform: rotation followed by translation.
struct Pose {
  Vec3 pos = Vec3::Zero();
  Quat rot = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& p, const Quat& q) : pos(p), rot(q) {}

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& p) { return {p, Quat::Identity()}; }

  Pose operator*(const Pose& rhs) const { return {pos + rot * rhs.pos, rot * rhs.rot}; }
  Vec3 apply(const Vec3& p) const { return pos + rot * p; }
  Pose inverse() const {
    const Quat inv = rot.conjugate();
    return {-(inv * pos), inv};
  }

  /// Bitwise component equality (no sign canonicalization).
  bool operator==(const Pose& o) const { return pos == o.pos && rot.coeffs() == o.rot.coeffs(); }
};

inline bool exactly_equal(const Pose& a, const Pose& b) { return a == b; }

/// Geodesic angle between two rotations in [0, pi]; invariant to the sign
/// of either quaternion.
double rotation_angle(const Quat& a, const Quat& b);

/// Axis-angle vector of q on the shortest branch (angle in [0, pi]).
Vec3 log_map(const Quat& q);
Quat exp_map(const Vec3& rotvec);

/// Fixed-axis XYZ roll/pitch/yaw as used by URDF: R = Rz(yaw) Ry(pitch) Rx(roll).
Quat quat_from_rpy(double roll, double pitch, double yaw);
Vec3 rpy_from_quat(const Quat& q);

/// Rotation for a camera at `eye` looking at `target`: local +z forward,
/// +x right, +y down in the image.
Quat look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// Skips renormalization when already unit to within 1e-12 so stored values
/// keep their bit patterns.
Quat normalized_if_needed(const Quat& q);

bool is_finite(const Vec3& v);
bool is_finite(const Quat& q);

}  // namespace metasim
