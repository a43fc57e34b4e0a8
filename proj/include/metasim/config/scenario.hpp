#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metasim/assets/asset.hpp"
#include "metasim/common/error.hpp"
#include "metasim/common/material.hpp"
#include "metasim/common/math.hpp"
#include "metasim/config/checker.hpp"

namespace metasim::config {

struct RobotConfig {
  std::string name;
  /// Path to a .urdf / MJCF file, relative to the scenario's base_dir.
  std::string asset;
  /// URDF text embedded in the scenario; used when `asset` is empty.
  std::string asset_inline;
  Pose base_pose;
  std::vector<double> default_dof_pos;
  std::string ee_frame;
  std::vector<std::string> gripper_joints;
  /// Objects closer than this to the EE while the gripper is closed are carried.
  double grasp_radius = 0.04;

  bool operator==(const RobotConfig&) const = default;
};

enum class ObjectKind { Sphere, Box, Plane, Articulated };

struct ObjectConfig {
  std::string name;
  ObjectKind kind = ObjectKind::Box;
  /// sphere {radius}; box {x, y, z full extents}; plane {} or {half x, half y}.
  std::vector<double> dims;
  std::string asset;
  Pose base_pose;
  double mass = 1.0;
  double restitution = 0.5;
  MaterialParams material;
  Vec3 init_lin_vel = Vec3::Zero();
  Vec3 init_ang_vel = Vec3::Zero();
  std::vector<double> default_dof_pos;

  bool is_primitive() const { return kind != ObjectKind::Articulated; }
  bool operator==(const ObjectConfig&) const = default;
};

struct CameraConfig {
  std::string name;
  Pose pose;
  double vertical_fov = 60.0;
  int width = 256;
  int height = 256;

  bool operator==(const CameraConfig&) const = default;
};

enum class LightKind { Distant, CylinderArray };

struct LightConfig {
  LightKind kind = LightKind::Distant;
  double polar = 45.0;
  double azimuth = 0.0;
  int rows = 1;
  int cols = 1;
  double size = 0.1;
  double height = 2.0;
  double intensity = 1.0;
  double color_temperature = 6500.0;

  bool operator==(const LightConfig&) const = default;
};

struct SubtaskSpec {
  std::string name;
  std::string anchor;
  SuccessChecker checker;

  bool operator==(const SubtaskSpec&) const = default;
};

/// Axis-aligned range for an entity's initial position (Level-0 task space).
struct TaskSpaceRange {
  std::string entity;
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool operator==(const TaskSpaceRange&) const = default;
};

struct TaskConfig {
  int episode_length = 100;
  std::string instruction;
  SuccessChecker checker;
  std::vector<SubtaskSpec> subtasks;
  std::vector<TaskSpaceRange> task_space;

  bool operator==(const TaskConfig&) const = default;
};

struct SimParams {
  double dt = 1.0 / 60.0;
  int decimation = 1;
  Vec3 gravity{0.0, 0.0, -9.81};
  int solver_iterations = 8;

  bool operator==(const SimParams&) const = default;
};

/// One choice from a randomization pool: an identifier plus its appearance.
struct SceneSurface {
  std::string id;
  MaterialParams material;

  bool operator==(const SceneSurface&) const = default;
};

/// Background surfaces that Level-1 randomization swaps.
struct SceneLayout {
  std::string layout = "default";
  SceneSurface table{"table_default", {}};
  SceneSurface wall{"wall_default", {}};
  SceneSurface ground{"ground_default", {}};

  bool operator==(const SceneLayout&) const = default;
};

struct ScenarioConfig {
  std::string name;
  std::vector<RobotConfig> robots;
  std::vector<ObjectConfig> objects;
  std::vector<CameraConfig> cameras;
  std::vector<LightConfig> lights;
  TaskConfig task;
  SimParams sim;
  SceneLayout scene;
  std::map<std::string, std::map<std::string, std::string>> backend_extras;

  /// Directory relative asset paths are resolved against. Not serialized.
  std::filesystem::path base_dir;

  const RobotConfig* find_robot(std::string_view entity) const;
  const ObjectConfig* find_object(std::string_view entity) const;
  /// Robots first, then objects, each in declaration order.
  std::vector<std::string> entity_names() const;

  /// Field-for-field equality; base_dir is ignored.
  bool operator==(const ScenarioConfig& o) const;
};

struct Violation {
  std::string path;
  std::string message;
  Errc code = Errc::InvariantViolation;

  bool operator==(const Violation&) const = default;
};

/// Parses and validates. Throws SyntaxError (with line and column),
/// UnknownField, TypeMismatch, UnknownOrDuplicateEntity or InvariantViolation.
ScenarioConfig parse_scenario(std::string_view source);
ScenarioConfig load_scenario_file(const std::filesystem::path& path);

/// Canonical text: every field written, doubles in shortest round-trip form.
std::string serialize_scenario(const ScenarioConfig& cfg);

/// Each override is `dotted.path=value`, list elements addressed by zero-based
/// index. Applied left to right; the input is not modified. Throws
/// SyntaxError (no `=`), PathNotFound, TypeMismatch or InvariantViolation.
ScenarioConfig apply_overrides(const ScenarioConfig& cfg, const std::vector<std::string>& overrides);

/// Loads the asset behind a robot or articulated object (file or inline
/// URDF). Throws AssetNotFound, UnknownEntity, or the parser's errors.
assets::CanonicalAsset load_entity_asset(const ScenarioConfig& cfg, std::string_view entity);

/// Every invariant violation, sorted by path. Asset-dependent checks
/// (DoF counts, ee_frame) run only when the referenced asset can be loaded.
std::vector<Violation> validate(const ScenarioConfig& cfg);

}  // namespace metasim::config
