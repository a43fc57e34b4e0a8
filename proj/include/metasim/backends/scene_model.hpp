#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "metasim/backends/kinematics.hpp"
#include "metasim/config/scenario.hpp"
#include "metasim/state/state.hpp"

namespace metasim::backends {

enum class EntityType { Robot, Articulation, Primitive };

/// Immutable per-entity data derived from the scenario at launch.
struct EntityModel {
  std::string name;
  EntityType type = EntityType::Primitive;

  // Robots and articulations.
  std::shared_ptr<const KinematicModel> kin;
  VecX default_dof;
  int ee_body = -1;
  std::vector<int> gripper_dofs;
  double grasp_radius = 0.0;

  // Primitives.
  config::ObjectKind shape = config::ObjectKind::Box;
  std::vector<double> dims;
  double mass = 0.0;
  Vec3 inertia_diag = Vec3::Zero();  // body frame, closed form
  double restitution = 0.5;
  MaterialParams material;
  Vec3 init_lin_vel = Vec3::Zero();
  Vec3 init_ang_vel = Vec3::Zero();

  Pose base_pose;

  bool articulated() const { return type != EntityType::Primitive; }
  bool dynamic() const { return type == EntityType::Primitive && mass > 0.0; }
  std::size_t dof() const { return kin ? kin->dof() : 0; }
};

/// Loads every asset a scenario references and fixes entity order (robots,
/// then objects). Throws AssetNotFound, UnsupportedGeom or parser errors.
class SceneModel {
 public:
  explicit SceneModel(config::ScenarioConfig cfg);

  const config::ScenarioConfig& config() const { return cfg_; }
  const std::vector<EntityModel>& entities() const { return entities_; }
  const EntityModel* find(std::string_view name) const;
  const EntityModel& at(std::string_view name) const;

  /// Entities at base_pose with default_dof_pos (targets equal positions) and
  /// initial velocities; all fields present.
  state::EnvState initial_state() const;

  /// Actuated joint names in dof order, empty for primitives.
  std::vector<std::string> joint_names(std::string_view entity) const;

  /// World pose of the robot's ee_frame for the given joint positions.
  Pose ee_pose(const EntityModel& robot, const Pose& base, const VecX& q) const;

  /// Mean normalized gripper opening in [0, 1]: 0 closed (lower limits), 1
  /// open. Returns 1 for robots without gripper joints.
  double gripper_opening(const EntityModel& robot, const VecX& q) const;

 private:
  config::ScenarioConfig cfg_;
  std::vector<EntityModel> entities_;
};

}  // namespace metasim::backends
