#include "world.hpp"

#include <cmath>
#include <limits>

#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"

namespace metasim::backends {

WorldHandler::WorldHandler(const config::ScenarioConfig& cfg, std::size_t num_envs) : model_(cfg) {
  if (num_envs < 1) throw Error(Errc::InvalidArgument, "num_envs must be >= 1");
  envs_.assign(num_envs, model_.initial_state());
}

void WorldHandler::check_open() const {
  if (closed_) throw Error(Errc::InvalidArgument, "handler is closed");
}

state::SceneState WorldHandler::get_states(const state::StateQuery& query) const {
  check_open();
  return state::apply_query(state::SceneState{envs_}, query);
}

void WorldHandler::set_states(const state::SceneState& partial) {
  check_open();
  envs_ = state::merge_states(state::SceneState{envs_}, partial).envs;
}

void WorldHandler::step(int n) {
  check_open();
  const int substeps = n * model_.config().sim.decimation;
  for (auto& env : envs_) {
    for (int i = 0; i < substeps; ++i) {
      substep(env);
      check_finite(env);
    }
  }
  substeps_ += substeps;
}

Image WorldHandler::render(const config::CameraConfig& camera, std::size_t env) const {
  check_open();
  return render_scene(model_, envs_.at(env), camera);
}

std::map<std::string, std::string> WorldHandler::get_extra() const {
  return {{"backend", backend_name()},
          {"num_envs", std::to_string(envs_.size())},
          {"substeps", std::to_string(substeps_)},
          {"sim_time", format_double(static_cast<double>(substeps_) * dt())}};
}

void WorldHandler::check_finite(const state::EnvState& env) const {
  for (const auto& [name, s] : env) {
    const bool ok = is_finite(s.pos) && is_finite(s.rot) && is_finite(s.lin_vel) && is_finite(s.ang_vel) &&
                    s.dof_pos.allFinite() && s.dof_vel.allFinite();
    if (!ok) throw Error(Errc::NaNDetected, "non-finite state for entity '" + name + "' after substep " +
                                                std::to_string(substeps_));
  }
}

std::vector<std::string> WorldHandler::carry_grasped(const state::EnvState& before, state::EnvState& env,
                                                     double step_dt) const {
  std::vector<std::string> carried;
  for (const auto& robot : model_.entities()) {
    if (robot.type != EntityType::Robot || robot.ee_body < 0 || robot.gripper_dofs.empty()) continue;
    const auto& now = env.at(robot.name);
    if (model_.gripper_opening(robot, now.dof_pos) >= 0.5) continue;
    const auto& was = before.at(robot.name);
    const Pose pre = model_.ee_pose(robot, Pose(was.pos, was.rot), was.dof_pos);
    const Pose post = model_.ee_pose(robot, Pose(now.pos, now.rot), now.dof_pos);

    const EntityModel* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& obj : model_.entities()) {
      if (!obj.dynamic()) continue;
      if (std::find(carried.begin(), carried.end(), obj.name) != carried.end()) continue;
      const double d = (env.at(obj.name).pos - pre.pos).norm();
      if (d <= robot.grasp_radius && d < best) {
        best = d;
        nearest = &obj;
      }
    }
    if (!nearest) continue;
    auto& s = env.at(nearest->name);
    const Pose old(s.pos, s.rot);
    const Pose moved = post * pre.inverse() * old;
    s.lin_vel = (moved.pos - old.pos) / step_dt;
    s.ang_vel = log_map(moved.rot * old.rot.conjugate()) / step_dt;
    s.pos = moved.pos;
    s.rot = normalized_if_needed(moved.rot);
    carried.push_back(nearest->name);
  }
  return carried;
}

std::vector<std::string> backend_names() { return {"dyn", "kin"}; }

}  // namespace metasim::backends
