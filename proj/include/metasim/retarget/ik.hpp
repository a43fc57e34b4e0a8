#pragma once

#include <string>

#include "metasim/backends/kinematics.hpp"

namespace metasim::retarget {

struct IkOptions {
  int max_iters = 200;
  double pos_tol = 1e-3;  // m
  double rot_tol = 1e-2;  // rad
  double damping = 0.05;  // lambda
};

struct IkResult {
  VecX q;
  int iterations = 0;
  double pos_err = 0.0;
  double rot_err = 0.0;
  bool converged = false;
};

/// Damped least squares: dq = J^T (J J^T + lambda^2 I)^-1 e with
/// e = (position error; log of the relative rotation), clamped to the joint
/// limits after every iterate. Returns the first iterate inside both
/// tolerances, or the last one with converged = false.
IkResult ik_solve_detail(const backends::KinematicModel& kin, int ee_body, const Pose& base, const Pose& target,
                         const VecX& q0, const IkOptions& opts = {});

/// Throws NoConvergence (message carries the residual) when the target is
/// not reached, UnknownEntity for a missing frame and DofLengthMismatch for
/// a bad seed.
VecX ik_solve(const assets::CanonicalAsset& asset, const std::string& ee_frame, const Pose& target, const VecX& q0,
              const IkOptions& opts = {}, const Pose& base = Pose::identity());

/// Position and rotation error of the frame at q against target.
std::pair<double, double> pose_error(const backends::KinematicModel& kin, int ee_body, const Pose& base,
                                     const Pose& target, const VecX& q);

}  // namespace metasim::retarget
