#pragma once

#include <Eigen/Eigenvalues>

#include "metasim/assets/asset.hpp"

namespace metasim::assets {

/// Inertia tensor `tensor` expressed in a frame at `com` rotated by `frame`.
/// Diagonal tensors are kept as-is; others are diagonalized and the
/// principal-axis rotation is folded into the inertial frame.
inline Inertial principal_inertial(double mass, const Vec3& com, const Quat& frame,
                                   const Eigen::Matrix3d& tensor) {
  Inertial out;
  out.mass = mass;
  out.com = com;
  if (tensor(0, 1) == 0.0 && tensor(0, 2) == 0.0 && tensor(1, 2) == 0.0 && tensor(1, 0) == 0.0 &&
      tensor(2, 0) == 0.0 && tensor(2, 1) == 0.0) {
    out.frame = frame;
    out.diag_inertia = tensor.diagonal();
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(tensor);
  Eigen::Matrix3d axes = solver.eigenvectors();
  if (axes.determinant() < 0.0) axes.col(2) = -axes.col(2);
  out.frame = (frame * Quat(axes)).normalized();
  out.diag_inertia = solver.eigenvalues();
  return out;
}

}  // namespace metasim::assets
