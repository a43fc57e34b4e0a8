#include "metasim/backends/scene_model.hpp"

#include <algorithm>

#include "metasim/common/error.hpp"

namespace metasim::backends {

namespace {

Vec3 primitive_inertia(config::ObjectKind shape, const std::vector<double>& dims, double mass) {
  if (mass <= 0.0) return Vec3::Zero();
  if (shape == config::ObjectKind::Sphere) {
    const double i = 0.4 * mass * dims[0] * dims[0];
    return {i, i, i};
  }
  if (shape == config::ObjectKind::Box) {
    const double x2 = dims[0] * dims[0], y2 = dims[1] * dims[1], z2 = dims[2] * dims[2];
    return {mass * (y2 + z2) / 12.0, mass * (x2 + z2) / 12.0, mass * (x2 + y2) / 12.0};
  }
  return Vec3::Zero();
}

VecX to_vec(const std::vector<double>& v, std::size_t dof) {
  if (v.empty()) return VecX::Zero(static_cast<Eigen::Index>(dof));
  return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

SceneModel::SceneModel(config::ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  for (const auto& r : cfg_.robots) {
    EntityModel e;
    e.name = r.name;
    e.type = EntityType::Robot;
    e.kin = std::make_shared<const KinematicModel>(
        std::make_shared<const assets::CanonicalAsset>(config::load_entity_asset(cfg_, r.name)));
    e.default_dof = to_vec(r.default_dof_pos, e.kin->dof());
    if (static_cast<std::size_t>(e.default_dof.size()) != e.kin->dof())
      throw Error(Errc::DofLengthMismatch, "robot '" + r.name + "' default_dof_pos length");
    if (!r.ee_frame.empty()) {
      e.ee_body = e.kin->body_index(r.ee_frame);
      if (e.ee_body < 0) throw Error(Errc::InvariantViolation, "robot '" + r.name + "' has no body '" + r.ee_frame + "'");
    }
    for (const auto& j : r.gripper_joints) {
      const int idx = e.kin->asset().actuated_index(j);
      if (idx < 0) throw Error(Errc::InvariantViolation, "robot '" + r.name + "' has no actuated joint '" + j + "'");
      e.gripper_dofs.push_back(idx);
    }
    e.grasp_radius = r.grasp_radius;
    e.base_pose = r.base_pose;
    entities_.push_back(std::move(e));
  }
  for (const auto& o : cfg_.objects) {
    EntityModel e;
    e.name = o.name;
    e.base_pose = o.base_pose;
    if (o.kind == config::ObjectKind::Articulated) {
      e.type = EntityType::Articulation;
      e.kin = std::make_shared<const KinematicModel>(
          std::make_shared<const assets::CanonicalAsset>(config::load_entity_asset(cfg_, o.name)));
      e.default_dof = to_vec(o.default_dof_pos, e.kin->dof());
      if (static_cast<std::size_t>(e.default_dof.size()) != e.kin->dof())
        throw Error(Errc::DofLengthMismatch, "object '" + o.name + "' default_dof_pos length");
    } else {
      e.type = EntityType::Primitive;
      e.shape = o.kind;
      e.dims = o.dims;
      e.mass = o.mass;
      e.inertia_diag = primitive_inertia(o.kind, o.dims, o.mass);
      e.restitution = o.restitution;
      e.material = o.material;
      e.init_lin_vel = o.init_lin_vel;
      e.init_ang_vel = o.init_ang_vel;
    }
    entities_.push_back(std::move(e));
  }
}

const EntityModel* SceneModel::find(std::string_view name) const {
  for (const auto& e : entities_)
    if (e.name == name) return &e;
  return nullptr;
}

const EntityModel& SceneModel::at(std::string_view name) const {
  const EntityModel* e = find(name);
  if (!e) throw Error(Errc::UnknownEntity, "no entity '" + std::string(name) + "'");
  return *e;
}

state::EnvState SceneModel::initial_state() const {
  state::EnvState env;
  for (const auto& e : entities_) {
    state::EntityState s;
    s.pos = e.base_pose.pos;
    s.rot = e.base_pose.rot;
    if (e.articulated()) {
      s.dof_pos = e.default_dof;
      s.dof_vel = VecX::Zero(e.default_dof.size());
      s.dof_target = e.default_dof;
    } else if (e.dynamic()) {
      s.lin_vel = e.init_lin_vel;
      s.ang_vel = e.init_ang_vel;
    }
    env.emplace(e.name, std::move(s));
  }
  return env;
}

std::vector<std::string> SceneModel::joint_names(std::string_view entity) const {
  const EntityModel& e = at(entity);
  if (!e.kin) return {};
  return e.kin->asset().actuated_order;
}

Pose SceneModel::ee_pose(const EntityModel& robot, const Pose& base, const VecX& q) const {
  if (robot.ee_body < 0) throw Error(Errc::InvariantViolation, "robot '" + robot.name + "' has no ee_frame");
  return robot.kin->body_pose(robot.ee_body, base, q);
}

double SceneModel::gripper_opening(const EntityModel& robot, const VecX& q) const {
  if (robot.gripper_dofs.empty()) return 1.0;
  const VecX& lo = robot.kin->lower_limits();
  const VecX& hi = robot.kin->upper_limits();
  double sum = 0.0;
  for (int i : robot.gripper_dofs) {
    const double span = hi[i] - lo[i];
    const double f = span > 0.0 && std::isfinite(span) ? (q[i] - lo[i]) / span : 1.0;
    sum += std::clamp(f, 0.0, 1.0);
  }
  return sum / static_cast<double>(robot.gripper_dofs.size());
}

}  // namespace metasim::backends
