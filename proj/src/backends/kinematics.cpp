#include "metasim/backends/kinematics.hpp"

#include "metasim/common/error.hpp"

namespace metasim::backends {

using assets::JointKind;

KinematicModel::KinematicModel(std::shared_ptr<const assets::CanonicalAsset> asset) : asset_(std::move(asset)) {
  const auto& a = *asset_;
  assets::validate_tree(a);
  const int n = static_cast<int>(a.bodies.size());

  std::vector<int> parent_joint(n, -1);
  for (std::size_t j = 0; j < a.joints.size(); ++j) {
    if (a.joints[j].parent_body.empty()) continue;
    parent_joint[body_index(a.joints[j].child_body)] = static_cast<int>(j);
  }
  std::vector<std::vector<int>> children(n);
  int root = -1;
  for (int b = 0; b < n; ++b) {
    if (parent_joint[b] < 0) {
      root = b;
    } else {
      children[body_index(a.joints[parent_joint[b]].parent_body)].push_back(b);
    }
  }
  std::vector<int> stack{root};
  std::vector<int> position(n, -1);
  ancestors_.assign(n, {});
  while (!stack.empty()) {
    const int b = stack.back();
    stack.pop_back();
    Link link;
    link.body = b;
    link.joint = parent_joint[b];
    if (link.joint >= 0) {
      const auto& j = a.joints[link.joint];
      link.parent = body_index(j.parent_body);
      link.dof = a.actuated_index(j.name);
      ancestors_[b] = ancestors_[link.parent];
    }
    position[b] = static_cast<int>(order_.size());
    if (link.dof >= 0) ancestors_[b].push_back(position[b]);
    order_.push_back(link);
    for (auto it = children[b].rbegin(); it != children[b].rend(); ++it) stack.push_back(*it);
  }

  lower_.resize(dof());
  upper_.resize(dof());
  for (std::size_t i = 0; i < dof(); ++i) {
    const auto* j = a.find_joint(a.actuated_order[i]);
    lower_[i] = j->lower;
    upper_[i] = j->upper;
  }
}

int KinematicModel::body_index(std::string_view name) const {
  const auto& bodies = asset_->bodies;
  for (std::size_t i = 0; i < bodies.size(); ++i)
    if (bodies[i].name == name) return static_cast<int>(i);
  return -1;
}

void KinematicModel::check_length(const VecX& q) const {
  if (static_cast<std::size_t>(q.size()) != dof())
    throw Error(Errc::DofLengthMismatch, "asset '" + asset_->name + "' has " + std::to_string(dof()) +
                                             " DoF, got " + std::to_string(q.size()) + " values");
}

void KinematicModel::traverse(const Pose& base, const VecX& q, std::vector<Pose>& bodies,
                              std::vector<Pose>& joint_frames) const {
  const auto& a = *asset_;
  bodies.assign(a.bodies.size(), Pose::identity());
  joint_frames.assign(order_.size(), Pose::identity());
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const Link& link = order_[i];
    if (link.joint < 0) {
      bodies[link.body] = base * a.bodies[link.body].pose_in_parent;
      joint_frames[i] = bodies[link.body];
      continue;
    }
    const auto& j = a.joints[link.joint];
    const Pose frame = bodies[link.parent] * j.origin;
    joint_frames[i] = frame;
    if (link.dof < 0) {
      bodies[link.body] = frame;
    } else if (j.kind == JointKind::Revolute) {
      bodies[link.body] = frame * Pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(q[link.dof], j.axis)));
    } else {
      bodies[link.body] = frame * Pose::from_translation(j.axis * q[link.dof]);
    }
  }
}

std::vector<Pose> KinematicModel::body_poses(const Pose& base, const VecX& q) const {
  check_length(q);
  std::vector<Pose> bodies, frames;
  traverse(base, q, bodies, frames);
  return bodies;
}

Pose KinematicModel::body_pose(int body, const Pose& base, const VecX& q) const {
  return body_poses(base, q).at(static_cast<std::size_t>(body));
}

Eigen::MatrixXd KinematicModel::jacobian(int body, const Pose& base, const VecX& q) const {
  check_length(q);
  std::vector<Pose> bodies, frames;
  traverse(base, q, bodies, frames);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6, static_cast<Eigen::Index>(dof()));
  const Vec3 p_end = bodies.at(static_cast<std::size_t>(body)).pos;
  for (int idx : ancestors_.at(static_cast<std::size_t>(body))) {
    const Link& link = order_[idx];
    const auto& j = asset_->joints[link.joint];
    const Vec3 axis = frames[idx].rot * j.axis;
    if (j.kind == JointKind::Revolute) {
      jac.block<3, 1>(0, link.dof) = axis.cross(p_end - frames[idx].pos);
      jac.block<3, 1>(3, link.dof) = axis;
    } else {
      jac.block<3, 1>(0, link.dof) = axis;
    }
  }
  return jac;
}

std::map<std::string, Pose> forward_kinematics(const assets::CanonicalAsset& asset, const Pose& base,
                                               const VecX& dof_pos) {
  KinematicModel model(std::make_shared<const assets::CanonicalAsset>(asset));
  const auto poses = model.body_poses(base, dof_pos);
  std::map<std::string, Pose> out;
  for (std::size_t i = 0; i < poses.size(); ++i) out[asset.bodies[i].name] = poses[i];
  return out;
}

}  // namespace metasim::backends
