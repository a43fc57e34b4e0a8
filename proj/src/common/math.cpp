#include "metasim/common/math.hpp"

#include <cmath>

namespace metasim {

double rotation_angle(const Quat& a, const Quat& b) {
  const Quat rel = a.conjugate() * b;
  const double s = rel.vec().norm();
  return 2.0 * std::atan2(s, std::abs(rel.w()));
}

Vec3 log_map(const Quat& q_in) {
  Quat q = q_in;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double s = q.vec().norm();
  if (s < 1e-12) {
    // Small-angle limit of 2*atan2(s, w)/s.
    return 2.0 * q.vec() / q.w();
  }
  const double angle = 2.0 * std::atan2(s, q.w());
  return q.vec() * (angle / s);
}

Quat exp_map(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
    return q.normalized();
  }
  return Quat(Eigen::AngleAxisd(angle, rotvec / angle));
}

Quat quat_from_rpy(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll * 0.5), sr = std::sin(roll * 0.5);
  const double cp = std::cos(pitch * 0.5), sp = std::sin(pitch * 0.5);
  const double cy = std::cos(yaw * 0.5), sy = std::sin(yaw * 0.5);
  return Quat(cr * cp * cy + sr * sp * sy, sr * cp * cy - cr * sp * sy,
              cr * sp * cy + sr * cp * sy, cr * cp * sy - sr * sp * cy);
}

Vec3 rpy_from_quat(const Quat& q_in) {
  const Eigen::Matrix3d m = q_in.normalized().toRotationMatrix();
  const double pitch = std::atan2(-m(2, 0), std::hypot(m(0, 0), m(1, 0)));
  double roll = 0.0;
  double yaw = 0.0;
  if (std::abs(std::cos(pitch)) > 1e-12) {
    roll = std::atan2(m(2, 1), m(2, 2));
    yaw = std::atan2(m(1, 0), m(0, 0));
  } else {
    // Gimbal lock: fold everything into yaw.
    yaw = std::atan2(-m(0, 1), m(1, 1));
  }
  return {roll, pitch, yaw};
}

Quat look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Eigen::Matrix3d m;
  m.col(0) = right;
  m.col(1) = down;
  m.col(2) = forward;
  return Quat(m).normalized();
}

Quat normalized_if_needed(const Quat& q) {
  if (std::abs(q.norm() - 1.0) < 1e-12) return q;
  return q.normalized();
}

bool is_finite(const Vec3& v) { return v.allFinite(); }
bool is_finite(const Quat& q) { return q.coeffs().allFinite(); }

}  // namespace metasim
