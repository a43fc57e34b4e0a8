#include "backends.hpp"
#include "world.hpp"

namespace metasim::backends {

namespace {

/// Kinematic replay: joints jump to their targets (clamped to the joint
/// limits, as in dyn), free bodies hold their pose unless carried by a
/// closed gripper.
class KinHandler final : public WorldHandler {
 public:
  using WorldHandler::WorldHandler;

  std::string backend_name() const override { return "kin"; }

 protected:
  void substep(state::EnvState& env) override {
    const state::EnvState before = env;
    for (const auto& m : model().entities()) {
      if (!m.articulated()) continue;
      auto& s = env.at(m.name);
      s.dof_pos = s.dof_target.cwiseMax(m.kin->lower_limits()).cwiseMin(m.kin->upper_limits());
      s.dof_vel.setZero();
    }
    carry_grasped(before, env, dt());
  }
};

}  // namespace

std::unique_ptr<Handler> make_kin_handler(const config::ScenarioConfig& cfg, std::size_t num_envs) {
  return std::make_unique<KinHandler>(cfg, num_envs);
}

}  // namespace metasim::backends
