#pragma once

#include "metasim/backends/handler.hpp"

namespace metasim::backends {

/// State storage, get/set, rendering and the stepping loop shared by the
/// built-in backends. Subclasses supply one physics substep.
class WorldHandler : public Handler {
 public:
  WorldHandler(const config::ScenarioConfig& cfg, std::size_t num_envs);

  const SceneModel& model() const override { return model_; }
  std::size_t num_envs() const override { return envs_.size(); }
  state::SceneState get_states(const state::StateQuery& query) const override;
  void set_states(const state::SceneState& partial) override;
  void step(int n) override;
  Image render(const config::CameraConfig& camera, std::size_t env) const override;
  void close() override { closed_ = true; }
  std::map<std::string, std::string> get_extra() const override;

 protected:
  virtual void substep(state::EnvState& env) = 0;

  /// Moves objects held by closed grippers rigidly with their end effector.
  /// `before` holds the robot joint positions from the start of the substep.
  /// Returns the names of carried objects.
  std::vector<std::string> carry_grasped(const state::EnvState& before, state::EnvState& env, double dt) const;

  double dt() const { return model_.config().sim.dt; }

 private:
  void check_open() const;
  void check_finite(const state::EnvState& env) const;

  SceneModel model_;
  std::vector<state::EnvState> envs_;
  long long substeps_ = 0;
  bool closed_ = false;
};

}  // namespace metasim::backends
