#include "metasim/common/error.hpp"
#include "backends.hpp"

namespace metasim::backends {

std::unique_ptr<Handler> launch(const std::string& backend, const config::ScenarioConfig& cfg,
                                std::size_t num_envs) {
  if (backend != "dyn" && backend != "kin") throw Error(Errc::WrongBackend, "unknown backend '" + backend + "'");
  const auto violations = config::validate(cfg);
  if (!violations.empty())
    throw Error(Errc::InvariantViolation,
                "scenario '" + cfg.name + "' is invalid: " + violations[0].path + ": " + violations[0].message);
  if (backend == "dyn") return make_dyn_handler(cfg, num_envs);
  return make_kin_handler(cfg, num_envs);
}

ConservationSample conservation_totals(const SceneModel& model, const state::EnvState& env) {
  ConservationSample out;
  for (const auto& m : model.entities()) {
    if (!m.dynamic()) continue;
    const auto& s = env.at(m.name);
    const Vec3 p = m.mass * s.lin_vel;
    const Eigen::Matrix3d r = s.rot.normalized().toRotationMatrix();
    const Eigen::Matrix3d inertia = r * m.inertia_diag.asDiagonal() * r.transpose();
    const Vec3 spin = inertia * s.ang_vel;
    out.momentum += p;
    out.angular_momentum += s.pos.cross(p) + spin;
    out.kinetic_energy += 0.5 * m.mass * s.lin_vel.squaredNorm() + 0.5 * s.ang_vel.dot(spin);
  }
  return out;
}

std::vector<ConservationSample> conservation_probe(Handler& h, int steps) {
  if (h.backend_name() != "dyn")
    throw Error(Errc::WrongBackend, "conservation_probe needs the dyn backend, got '" + h.backend_name() + "'");
  if (!h.scenario().sim.gravity.isZero())
    throw Error(Errc::WrongBackend, "conservation_probe needs zero gravity");
  std::vector<ConservationSample> out;
  for (int i = 0; i <= steps; ++i) {
    if (i > 0) h.step(1);
    ConservationSample s = conservation_totals(h.model(), h.get_states().envs.at(0));
    s.step = i;
    out.push_back(s);
  }
  return out;
}

}  // namespace metasim::backends
