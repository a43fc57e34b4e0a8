#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "metasim/backends/handler.hpp"
#include "metasim/env/checker.hpp"
#include "metasim/state/trajectory.hpp"

namespace metasim::env {

struct Observation {
  state::SceneState states;
  std::optional<backends::Image> rgb;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool success = false;
  bool termination = false;
  bool time_out = false;
  std::map<std::string, std::string> extra;
};

struct EnvOptions {
  /// Attach an RGB image from the scenario's first camera to observations.
  bool render = false;
  CustomRegistry customs;
};

/// Gym-style wrapper over one single-env handler. With a second, render
/// handler the env runs hybrid: physics steps on the first, its state is
/// pushed into the second each step and observations come from there.
class Env {
 public:
  /// Throws InvalidArgument for batched handlers and EntitySetMismatch when
  /// the render handler's entities differ from the physics handler's.
  explicit Env(std::unique_ptr<backends::Handler> physics, std::unique_ptr<backends::Handler> render = nullptr,
               EnvOptions opts = {});

  /// Restores the scenario initial state, or `init` merged onto it.
  Observation reset(const std::optional<state::EnvState>& init = std::nullopt);

  /// Targets, step, read, then checker. Success latches; termination is
  /// success or time out. Throws EpisodeOver once terminated, and
  /// UnknownEntity / DofLengthMismatch for bad actions.
  StepResult step(const state::Action& action);

  /// Steps without the episode-end guard (replay and collection of
  /// demonstrations that continue after success). Same call order as step.
  StepResult advance(const state::Action& action);

  bool check(const state::EnvState& s) const;

  const config::ScenarioConfig& scenario() const { return physics_->scenario(); }
  const backends::SceneModel& model() const { return physics_->model(); }
  backends::Handler& physics() { return *physics_; }
  backends::Handler* renderer() { return render_.get(); }
  const state::EnvState& initial_state() const { return initial_; }
  state::EnvState current_state() const { return physics_->get_states().envs.at(0); }
  int step_count() const { return steps_; }
  bool episode_over() const { return over_; }
  bool hybrid() const { return render_ != nullptr; }

 private:
  Observation observe(state::SceneState states);

  std::unique_ptr<backends::Handler> physics_;
  std::unique_ptr<backends::Handler> render_;
  EnvOptions opts_;
  state::EnvState initial_;
  int steps_ = 0;
  bool success_ = false;
  bool over_ = false;
};

/// dof_target partial for every entity in the action.
state::SceneState action_targets(const state::Action& action);

struct ReplayResult {
  state::EnvState final_state;
  bool success = false;
  /// Per step, against the trajectory's stored states (when present).
  std::vector<state::DiffReport> diffs;
  double max_pos_diff = 0.0;
  double max_dof_diff = 0.0;
  /// Post-step states in the trajectory layout.
  std::vector<state::SceneState> states;
};

/// Runs a trajectory from its init_state. Throws ScenarioMismatch if it was
/// recorded for another scenario and DofLengthMismatch / UnknownEntity for
/// actions that do not fit (checked before anything is executed).
ReplayResult replay(Env& env, const state::Trajectory& traj);

/// Builds a Trajectory as an env runs: construct after reset, push each
/// action with the post-step state.
class Recorder {
 public:
  Recorder(std::string scenario_name, const state::EnvState& init);
  void push(const state::Action& action, const state::EnvState& post_step);
  std::size_t size() const { return traj_.actions.size(); }
  state::Trajectory finish(std::optional<bool> success) const;

 private:
  state::Trajectory traj_;
};

}  // namespace metasim::env
