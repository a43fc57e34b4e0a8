#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "metasim/backends/render.hpp"
#include "metasim/backends/scene_model.hpp"
#include "metasim/config/scenario.hpp"
#include "metasim/state/state.hpp"

namespace metasim::backends {

/// Simulator contract. A handler is single-owner; distinct handlers may run
/// on distinct threads.
class Handler {
 public:
  virtual ~Handler() = default;

  virtual std::string backend_name() const = 0;
  virtual const SceneModel& model() const = 0;
  const config::ScenarioConfig& scenario() const { return model().config(); }
  virtual std::size_t num_envs() const = 0;

  /// Every scenario entity with every field, restricted by `query`.
  virtual state::SceneState get_states(const state::StateQuery& query = {}) const = 0;
  /// Teleports: the fields present in `partial` replace the current ones,
  /// nothing else changes. A single-env partial applies to every env.
  virtual void set_states(const state::SceneState& partial) = 0;
  /// Advances n x decimation substeps of dt.
  virtual void step(int n = 1) = 0;

  virtual Image render(const config::CameraConfig& camera, std::size_t env = 0) const = 0;
  /// Hook for backends that cache render state; the built-in ones draw
  /// straight from the current state.
  virtual void refresh_render() {}
  virtual void close() {}
  virtual std::map<std::string, std::string> get_extra() const = 0;
};

/// Known backend names: "dyn" and "kin".
std::vector<std::string> backend_names();

/// Throws WrongBackend for unknown names, InvariantViolation if the config
/// does not validate, AssetNotFound for missing assets, InvalidArgument for
/// num_envs < 1.
std::unique_ptr<Handler> launch(const std::string& backend, const config::ScenarioConfig& cfg,
                                std::size_t num_envs = 1);

struct ConservationSample {
  int step = 0;
  Vec3 momentum = Vec3::Zero();
  Vec3 angular_momentum = Vec3::Zero();  // about the world origin
  double kinetic_energy = 0.0;
};

/// Samples env 0 before stepping and after each of `steps` steps. Throws
/// WrongBackend unless `h` is a dyn handler with zero gravity.
std::vector<ConservationSample> conservation_probe(Handler& h, int steps);

/// Totals over the dynamic bodies of one env.
ConservationSample conservation_totals(const SceneModel& model, const state::EnvState& env);

}  // namespace metasim::backends
