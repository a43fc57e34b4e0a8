#include "metasim/retarget/retarget.hpp"

#include "metasim/common/error.hpp"

namespace metasim::retarget {

namespace {

const backends::EntityModel& robot_of(const backends::SceneModel& model, const std::string& name) {
  const auto& m = model.at(name);
  if (m.type != backends::EntityType::Robot || m.ee_body < 0)
    throw Error(Errc::InvalidArgument, "'" + name + "' is not a robot with an ee_frame");
  return m;
}

Pose robot_base(const state::Trajectory& traj, const backends::EntityModel& robot) {
  if (!traj.init_state.envs.empty()) {
    auto it = traj.init_state.envs[0].find(robot.name);
    if (it != traj.init_state.envs[0].end()) {
      const auto& s = it->second;
      return Pose(s.has(state::kPos) ? s.pos : robot.base_pose.pos,
                  s.has(state::kRot) ? s.rot : robot.base_pose.rot);
    }
  }
  return robot.base_pose;
}

}  // namespace

EePath ee_path_from_trajectory(const state::Trajectory& traj, const backends::SceneModel& model,
                               const std::string& robot) {
  const auto& r = robot_of(model, robot);
  const Pose base = robot_base(traj, r);
  EePath path;
  path.reserve(traj.actions.size());
  for (std::size_t i = 0; i < traj.actions.size(); ++i) {
    auto it = traj.actions[i].dof_targets.find(robot);
    if (it == traj.actions[i].dof_targets.end())
      throw Error(Errc::UnknownEntity, "action " + std::to_string(i) + " has no target for '" + robot + "'");
    const VecX& q = it->second;
    if (static_cast<std::size_t>(q.size()) != r.dof())
      throw Error(Errc::DofLengthMismatch, "action " + std::to_string(i) + " for '" + robot + "' has " +
                                               std::to_string(q.size()) + " values, expected " +
                                               std::to_string(r.dof()));
    path.push_back({model.ee_pose(r, base, q), model.gripper_opening(r, q)});
  }
  return path;
}

void apply_gripper_open(const backends::EntityModel& robot, double open, VecX& q) {
  const double f = std::clamp(open, 0.0, 1.0);
  for (int i : robot.gripper_dofs) {
    const double lo = robot.kin->lower_limits()[i];
    const double hi = robot.kin->upper_limits()[i];
    q[i] = f == 1.0 ? hi : lo + f * (hi - lo);
  }
}

RetargetResult retarget_trajectory(const state::Trajectory& src, const backends::SceneModel& src_model,
                                   const std::string& src_robot, const backends::SceneModel& dst_model,
                                   const std::string& dst_robot, const RetargetOptions& opts,
                                   env::Env* validate_env) {
  const auto& sr = robot_of(src_model, src_robot);
  const auto& dr = robot_of(dst_model, dst_robot);
  const EePath path = ee_path_from_trajectory(src, src_model, src_robot);
  RetargetResult out;

  // Start pose: the source robot's initial EE pose.
  const Pose src_base = robot_base(src, sr);
  VecX src_q0 = sr.default_dof;
  if (!src.init_state.envs.empty()) {
    auto it = src.init_state.envs[0].find(src_robot);
    if (it != src.init_state.envs[0].end() && it->second.has(state::kDofPos)) src_q0 = it->second.dof_pos;
  }
  const Pose dst_base = dr.base_pose;
  IkResult start = ik_solve_detail(*dr.kin, dr.ee_body, dst_base, src_model.ee_pose(sr, src_base, src_q0),
                                   dr.default_dof, opts.ik);
  if (!start.converged) {
    out.reason = "initial EE pose unreachable for '" + dst_robot + "'";
    return out;
  }
  apply_gripper_open(dr, src_model.gripper_opening(sr, src_q0), start.q);

  state::Trajectory t;
  t.scenario_name = dst_model.config().name;
  state::EnvState init = dst_model.initial_state();
  if (!src.init_state.envs.empty()) {
    for (const auto& [name, s] : src.init_state.envs[0]) {
      if (name == src_robot || !init.count(name)) continue;
      if (init.at(name).dof_pos.size() != s.dof_pos.size()) continue;
      init[name] = s;
    }
  }
  auto& rs = init.at(dst_robot);
  rs.dof_pos = start.q;
  rs.dof_target = start.q;
  rs.dof_vel.setZero();
  t.init_state = state::single(init);

  VecX seed = start.q;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const IkResult r = ik_solve_detail(*dr.kin, dr.ee_body, dst_base, path[i].pose, seed, opts.ik);
    if (!r.converged) {
      out.failed_index = static_cast<int>(i);
      out.reason = "IkUnreachable at waypoint " + std::to_string(i);
      return out;
    }
    VecX q = r.q;
    apply_gripper_open(dr, path[i].gripper_open, q);
    seed = q;
    state::Action a;
    for (const auto& [name, target] : src.actions[i].dof_targets)
      if (name != src_robot && dst_model.find(name)) a.dof_targets[name] = target;
    a.dof_targets[dst_robot] = q;
    t.actions.push_back(std::move(a));
  }
  t.extras = src.extras;
  t.extras["retargeted_from"] = src_robot;

  if (validate_env) {
    const auto rep = env::replay(*validate_env, t);
    t.success = rep.success;
    if (!rep.success) {
      out.reason = "retargeted trajectory fails the task checker on replay";
      return out;
    }
  }
  out.accepted = true;
  out.trajectory = std::move(t);
  return out;
}

}  // namespace metasim::retarget
