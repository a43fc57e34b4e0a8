#include "metasim/retarget/ik.hpp"

#include <memory>

#include <Eigen/Cholesky>

#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"

namespace metasim::retarget {

namespace {

Eigen::Matrix<double, 6, 1> twist_error(const Pose& target, const Pose& current) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.pos - current.pos;
  e.tail<3>() = log_map(target.rot * current.rot.conjugate());
  return e;
}

VecX clamp(const backends::KinematicModel& kin, const VecX& q) {
  return q.cwiseMax(kin.lower_limits()).cwiseMin(kin.upper_limits());
}

}  // namespace

std::pair<double, double> pose_error(const backends::KinematicModel& kin, int ee_body, const Pose& base,
                                     const Pose& target, const VecX& q) {
  const auto e = twist_error(target, kin.body_pose(ee_body, base, q));
  return {e.head<3>().norm(), e.tail<3>().norm()};
}

IkResult ik_solve_detail(const backends::KinematicModel& kin, int ee_body, const Pose& base, const Pose& target,
                         const VecX& q0, const IkOptions& opts) {
  if (static_cast<std::size_t>(q0.size()) != kin.dof())
    throw Error(Errc::DofLengthMismatch, "IK seed has " + std::to_string(q0.size()) + " values, expected " +
                                             std::to_string(kin.dof()));
  if (!is_finite(target.pos) || !is_finite(target.rot))
    throw Error(Errc::InvalidArgument, "IK target is not finite");
  IkResult r;
  r.q = q0;
  const double lambda2 = opts.damping * opts.damping;
  for (int it = 0;; ++it) {
    const auto e = twist_error(target, kin.body_pose(ee_body, base, r.q));
    r.pos_err = e.head<3>().norm();
    r.rot_err = e.tail<3>().norm();
    r.iterations = it;
    if (r.pos_err < opts.pos_tol && r.rot_err < opts.rot_tol) {
      r.converged = true;
      return r;
    }
    if (it == opts.max_iters) return r;
    const Eigen::MatrixXd J = kin.jacobian(ee_body, base, r.q);
    const Eigen::Matrix<double, 6, 6> A = J * J.transpose() + lambda2 * Eigen::Matrix<double, 6, 6>::Identity();
    const VecX dq = J.transpose() * A.ldlt().solve(e);
    r.q = clamp(kin, r.q + dq);
  }
}

VecX ik_solve(const assets::CanonicalAsset& asset, const std::string& ee_frame, const Pose& target, const VecX& q0,
              const IkOptions& opts, const Pose& base) {
  const backends::KinematicModel kin(std::make_shared<assets::CanonicalAsset>(asset));
  const int ee = kin.body_index(ee_frame);
  if (ee < 0) throw Error(Errc::UnknownEntity, "asset '" + asset.name + "' has no frame '" + ee_frame + "'");
  const IkResult r = ik_solve_detail(kin, ee, base, target, q0, opts);
  if (!r.converged)
    throw Error(Errc::NoConvergence, "no IK solution after " + std::to_string(r.iterations) +
                                         " iterations; residual pos " + format_double(r.pos_err) + " m, rot " +
                                         format_double(r.rot_err) + " rad");
  return r.q;
}

}  // namespace metasim::retarget
