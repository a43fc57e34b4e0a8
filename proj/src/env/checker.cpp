#include "metasim/env/checker.hpp"

#include <algorithm>

#include "metasim/common/error.hpp"

namespace metasim::env {

namespace {

const state::EntityState& entity(const state::EnvState& s, const std::string& name) {
  auto it = s.find(name);
  if (it == s.end()) throw Error(Errc::UnknownEntity, "checker references unknown entity '" + name + "'");
  return it->second;
}

struct Eval {
  const CheckContext& ctx;
  const state::EnvState& s;

  bool operator()(const config::AllOf& c) const {
    bool all = true;
    for (const auto& item : c.items) all = std::visit(*this, item.node) && all;
    return all;
  }

  bool operator()(const config::AnyOf& c) const {
    bool any = false;
    for (const auto& item : c.items) any = std::visit(*this, item.node) || any;
    return any;
  }

  bool operator()(const config::PositionWithin& c) const {
    return (entity(s, c.entity).pos - c.center).norm() <= c.radius;
  }

  bool operator()(const config::PositionShift& c) const {
    if (!ctx.initial) throw Error(Errc::InvalidArgument, "position_shift needs the initial state");
    const Vec3 d = entity(s, c.entity).pos - entity(*ctx.initial, c.entity).pos;
    return d.dot(c.axis.normalized()) >= c.min_shift;
  }

  bool operator()(const config::JointPosThreshold& c) const {
    if (!ctx.model) throw Error(Errc::InvalidArgument, "joint_pos_threshold needs the scene model");
    const auto names = ctx.model->joint_names(c.entity);
    auto it = std::find(names.begin(), names.end(), c.joint);
    if (it == names.end())
      throw Error(Errc::UnknownEntity, "entity '" + c.entity + "' has no actuated joint '" + c.joint + "'");
    const double q = entity(s, c.entity).dof_pos[it - names.begin()];
    return c.direction == config::Direction::AtLeast ? q >= c.threshold : q <= c.threshold;
  }

  bool operator()(const config::RelativePose& c) const {
    const auto& a = entity(s, c.entity_a);
    const auto& b = entity(s, c.entity_b);
    const Pose rel = Pose(a.pos, a.rot).inverse() * Pose(b.pos, b.rot);
    return (rel.pos - c.target_rel.pos).norm() <= c.max_pos_err &&
           rotation_angle(rel.rot, c.target_rel.rot) <= c.max_rot_err;
  }

  bool operator()(const config::Custom& c) const {
    if (ctx.customs) {
      auto it = ctx.customs->find(c.name);
      if (it != ctx.customs->end()) return it->second(s);
    }
    throw Error(Errc::InvalidArgument, "no callback registered for custom checker '" + c.name + "'");
  }
};

}  // namespace

bool check_success(const CheckContext& ctx, const state::EnvState& s, const config::SuccessChecker& checker) {
  return std::visit(Eval{ctx, s}, checker.node);
}

}  // namespace metasim::env
