#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metasim/backends/scene_model.hpp"
#include "metasim/env/env.hpp"
#include "metasim/retarget/ik.hpp"
#include "metasim/state/trajectory.hpp"

namespace metasim::retarget {

struct EeWaypoint {
  Pose pose;                 // EE frame in world
  double gripper_open = 1.0; // 0 closed, 1 open
};

using EePath = std::vector<EeWaypoint>;

/// One step per action: FK of the robot's dof_target with the robot base
/// taken from the trajectory's init_state. Throws DofLengthMismatch.
EePath ee_path_from_trajectory(const state::Trajectory& traj, const backends::SceneModel& model,
                               const std::string& robot);

/// Linear map of an open fraction onto the robot's gripper joint ranges:
/// 0 puts every gripper joint on its lower limit, 1 on its upper limit.
void apply_gripper_open(const backends::EntityModel& robot, double open, VecX& q);

struct RetargetOptions {
  IkOptions ik;
};

struct RetargetResult {
  std::optional<state::Trajectory> trajectory;  // set when accepted
  bool accepted = false;
  int failed_index = -1;  // first waypoint without an IK solution; -1 for the start pose
  std::string reason;
};

/// Re-solves a source robot's EE path for the destination robot, each
/// waypoint seeded with the previous solution. The output uses the
/// destination scenario's name and initial state, with object states copied
/// from the source where names match. When `validate_env` is given the
/// result must also replay with success.
RetargetResult retarget_trajectory(const state::Trajectory& src, const backends::SceneModel& src_model,
                                   const std::string& src_robot, const backends::SceneModel& dst_model,
                                   const std::string& dst_robot, const RetargetOptions& opts = {},
                                   env::Env* validate_env = nullptr);

}  // namespace metasim::retarget
