#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "metasim/assets/asset.hpp"

namespace metasim::backends {

/// Precomputed traversal of a validated asset for forward kinematics and
/// geometric Jacobians. Joint coordinates follow asset.actuated_order.
class KinematicModel {
 public:
  explicit KinematicModel(std::shared_ptr<const assets::CanonicalAsset> asset);

  const assets::CanonicalAsset& asset() const { return *asset_; }
  std::shared_ptr<const assets::CanonicalAsset> asset_ptr() const { return asset_; }
  std::size_t dof() const { return asset_->actuated_order.size(); }
  /// Index into asset().bodies, or -1.
  int body_index(std::string_view name) const;

  const VecX& lower_limits() const { return lower_; }
  const VecX& upper_limits() const { return upper_; }

  /// World pose of every body, indexed like asset().bodies. Throws
  /// DofLengthMismatch if q has the wrong length.
  std::vector<Pose> body_poses(const Pose& base, const VecX& q) const;
  Pose body_pose(int body, const Pose& base, const VecX& q) const;

  /// 6 x dof geometric Jacobian of the frame origin of `body`: rows 0-2 map
  /// joint rates to linear velocity, rows 3-5 to angular velocity (world).
  Eigen::MatrixXd jacobian(int body, const Pose& base, const VecX& q) const;

 private:
  struct Link {
    int body = -1;
    int parent = -1;  // index into asset bodies
    int joint = -1;   // joint connecting parent -> body, -1 for the root
    int dof = -1;     // actuated coordinate index, -1 if not actuated
  };

  void check_length(const VecX& q) const;
  /// Fills body world poses and joint frames (pre-motion) in traversal order.
  void traverse(const Pose& base, const VecX& q, std::vector<Pose>& bodies, std::vector<Pose>& joint_frames) const;

  std::shared_ptr<const assets::CanonicalAsset> asset_;
  std::vector<Link> order_;                    // topological (parents first)
  std::vector<std::vector<int>> ancestors_;    // per body: traversal indices of actuated links on the root path
  VecX lower_;
  VecX upper_;
};

/// World pose of every body keyed by name: the root sits at `base` composed
/// with its own pose; each joint applies its origin, then its motion.
std::map<std::string, Pose> forward_kinematics(const assets::CanonicalAsset& asset, const Pose& base,
                                               const VecX& dof_pos);

}  // namespace metasim::backends
