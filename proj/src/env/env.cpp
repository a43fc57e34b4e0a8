#include "metasim/env/env.hpp"

#include "metasim/common/error.hpp"

namespace metasim::env {

namespace {

void check_same_entities(const backends::Handler& a, const backends::Handler& b) {
  const auto sa = a.get_states().envs.at(0);
  const auto sb = b.get_states().envs.at(0);
  auto ia = sa.begin();
  auto ib = sb.begin();
  for (; ia != sa.end() && ib != sb.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.dof_pos.size() != ib->second.dof_pos.size())
      throw Error(Errc::EntitySetMismatch, "physics and render backends disagree on entity '" + ia->first + "'");
  }
  if (ia != sa.end() || ib != sb.end())
    throw Error(Errc::EntitySetMismatch, "physics and render backends have different entity counts");
}

}  // namespace

state::SceneState action_targets(const state::Action& action) {
  state::EnvState p;
  for (const auto& [name, target] : action.dof_targets) {
    state::EntityState s;
    s.mask = state::kDofTarget;
    s.dof_target = target;
    p[name] = s;
  }
  return state::single(p);
}

Env::Env(std::unique_ptr<backends::Handler> physics, std::unique_ptr<backends::Handler> render, EnvOptions opts)
    : physics_(std::move(physics)), render_(std::move(render)), opts_(std::move(opts)) {
  if (!physics_) throw Error(Errc::InvalidArgument, "env needs a physics handler");
  if (physics_->num_envs() != 1 || (render_ && render_->num_envs() != 1))
    throw Error(Errc::InvalidArgument, "env wraps single-env handlers");
  if (render_) check_same_entities(*physics_, *render_);
  initial_ = physics_->model().initial_state();
}

Observation Env::reset(const std::optional<state::EnvState>& init) {
  state::EnvState start = physics_->model().initial_state();
  if (init) start = state::merge_states(state::single(start), state::single(*init)).envs.at(0);
  physics_->set_states(state::single(start));
  initial_ = physics_->get_states().envs.at(0);
  steps_ = 0;
  success_ = false;
  over_ = false;
  auto states = physics_->get_states();
  if (render_) {
    render_->set_states(states);
    render_->refresh_render();
    states = render_->get_states();
  }
  return observe(std::move(states));
}

bool Env::check(const state::EnvState& s) const {
  const CheckContext ctx{&physics_->model(), &initial_, &opts_.customs};
  return check_success(ctx, s, scenario().task.checker);
}

StepResult Env::step(const state::Action& action) {
  if (over_) throw Error(Errc::EpisodeOver, "episode is over after " + std::to_string(steps_) + " steps; reset first");
  return advance(action);
}

StepResult Env::advance(const state::Action& action) {
  physics_->set_states(action_targets(action));
  physics_->step();
  state::SceneState phys = physics_->get_states();
  ++steps_;

  StepResult r;
  success_ = success_ || check(phys.envs.at(0));
  if (render_) {
    render_->set_states(phys);
    render_->refresh_render();
    r.observation = observe(render_->get_states());
  } else {
    r.observation = observe(std::move(phys));
  }
  r.success = success_;
  r.reward = success_ ? 1.0 : 0.0;
  r.time_out = steps_ >= scenario().task.episode_length;
  r.termination = r.success || r.time_out;
  over_ = over_ || r.termination;
  r.extra["step"] = std::to_string(steps_);
  r.extra["physics"] = physics_->backend_name();
  if (render_) r.extra["renderer"] = render_->backend_name();
  return r;
}

Observation Env::observe(state::SceneState states) {
  Observation o;
  o.states = std::move(states);
  if (opts_.render && !scenario().cameras.empty()) {
    const backends::Handler& h = render_ ? *render_ : *physics_;
    o.rgb = h.render(scenario().cameras.front());
  }
  return o;
}

ReplayResult replay(Env& env, const state::Trajectory& traj) {
  if (traj.scenario_name != env.scenario().name)
    throw Error(Errc::ScenarioMismatch, "trajectory was recorded for '" + traj.scenario_name + "', env runs '" +
                                            env.scenario().name + "'");
  if (traj.init_state.envs.size() != 1)
    throw Error(Errc::InvalidArgument, "trajectory init_state must hold exactly one env");
  for (std::size_t i = 0; i < traj.actions.size(); ++i) {
    for (const auto& [name, target] : traj.actions[i].dof_targets) {
      const auto* m = env.model().find(name);
      if (!m) throw Error(Errc::UnknownEntity, "action " + std::to_string(i) + " targets unknown entity '" + name + "'");
      if (static_cast<std::size_t>(target.size()) != m->dof())
        throw Error(Errc::DofLengthMismatch, "action " + std::to_string(i) + " for '" + name + "' has " +
                                                 std::to_string(target.size()) + " values, expected " +
                                                 std::to_string(m->dof()));
    }
  }

  ReplayResult out;
  env.reset(traj.init_state.envs.at(0));
  bool success = false;
  for (std::size_t i = 0; i < traj.actions.size(); ++i) {
    const StepResult r = env.advance(traj.actions[i]);
    success = r.success;
    if (traj.states && i < traj.states->size()) {
      auto d = state::diff_states(r.observation.states, (*traj.states)[i]);
      out.max_pos_diff = std::max(out.max_pos_diff, d.max_pos);
      out.max_dof_diff = std::max(out.max_dof_diff, d.max_dof);
      out.diffs.push_back(std::move(d));
    }
    out.states.push_back(env.physics().get_states());
  }
  if (traj.actions.empty()) success = env.check(env.current_state());
  out.final_state = env.current_state();
  out.success = success;
  return out;
}

Recorder::Recorder(std::string scenario_name, const state::EnvState& init) {
  traj_.scenario_name = std::move(scenario_name);
  traj_.init_state = state::single(init);
  traj_.states.emplace();
}

void Recorder::push(const state::Action& action, const state::EnvState& post_step) {
  traj_.actions.push_back(action);
  traj_.states->push_back(state::single(post_step));
}

state::Trajectory Recorder::finish(std::optional<bool> success) const {
  state::Trajectory t = traj_;
  t.success = success;
  return t;
}

}  // namespace metasim::env
