#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metasim/env/env.hpp"
#include "metasim/retarget/retarget.hpp"

namespace metasim::augment {

/// Contiguous slice of a demo whose motion is expressed relative to one
/// anchor object.
struct Segment {
  std::string subtask;
  std::string anchor;
  std::string robot;
  /// Index of the first action in the source demo.
  std::size_t begin = 0;
  std::vector<state::Action> actions;
  /// World pose of the anchor before the segment's first action.
  Pose anchor_pose;
  /// Commanded EE pose per action, in the anchor frame at segment start.
  std::vector<retarget::EeWaypoint> ee_rel;
};

/// Splits `traj` at the first step each subtask's end predicate holds; the
/// last segment runs to the end of the demo. Uses the stored states when
/// present, otherwise replays on `env`. `robot` defaults to the scenario's
/// first robot. Throws SegmentationFailed naming the subtask whose
/// predicate does not fire after the previous one, InvalidArgument for an
/// empty spec and UnknownEntity for a missing anchor.
std::vector<Segment> segment_demo(const state::Trajectory& traj, const std::vector<config::SubtaskSpec>& spec,
                                  env::Env& env, const std::string& robot = "");

/// World EE targets of a segment whose anchor now sits at `anchor`.
std::vector<Pose> reanchor(const Segment& segment, const Pose& anchor);

struct AugmentOptions {
  /// Largest change of any non-gripper joint between consecutive actions.
  double max_joint_step = 0.05;
  retarget::IkOptions ik;
  /// Replay the result and require the task checker to succeed.
  bool validate = true;
};

struct AugmentResult {
  std::optional<state::Trajectory> trajectory;
  bool accepted = false;
  /// "IkUnreachable ..." or "ReplayFailed ..." for rejected samples.
  std::string reason;
};

/// Re-anchors every segment on the anchor poses in `new_init` (merged onto
/// the scenario initial state), solves IK along each path warm-started from
/// the previous solution, and inserts linear joint-space bridges wherever a
/// step would exceed max_joint_step. With validation on, the trajectory is
/// replayed on `env` and kept only if the task succeeds. Failures reject the
/// sample rather than throw.
AugmentResult generate_augmented(const std::vector<Segment>& segments, const state::EnvState& new_init,
                                 env::Env& env, const AugmentOptions& opts = {});

struct DatasetOptions {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  AugmentOptions augment;
  std::string backend = "dyn";
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct DatasetResult {
  std::size_t requested = 0;
  /// Accepted trajectories in sample order, with their replayed states.
  std::vector<state::Trajectory> accepted;
  std::vector<std::size_t> accepted_indices;
  /// Rejection count per reason kind ("IkUnreachable", "ReplayFailed").
  std::map<std::string, std::size_t> rejections;
};

/// Sample k draws its source demo and a task-space initial state from
/// Rng(seed, k) alone, so the first n samples of a larger request are the
/// same n samples. Each worker thread owns its own env.
DatasetResult generate_dataset(const config::ScenarioConfig& cfg, const std::vector<std::vector<Segment>>& sources,
                               const DatasetOptions& opts);

struct ScriptOptions {
  /// EE travel per control step, metres.
  double speed = 0.01;
  double approach_height = 0.1;
  /// Gap left under the object when it is let go above the target.
  double release_gap = 0.005;
  /// Steps held still before and after each gripper change.
  int dwell = 6;
  retarget::IkOptions ik;
};

/// Demo for a scenario whose subtasks are pick(object) then place(target):
/// approach, grasp at the object centre, lift, carry over the target, lower,
/// release and retreat, keeping the initial EE orientation. Throws
/// InvalidArgument for other subtask shapes and IkUnreachable when a
/// waypoint has no IK solution.
state::Trajectory scripted_pick_place(const backends::SceneModel& model, const state::EnvState& init,
                                      const ScriptOptions& opts = {});

}  // namespace metasim::augment
