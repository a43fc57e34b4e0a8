#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metasim/env/env.hpp"
#include "metasim/retarget/ik.hpp"
#include "metasim/teleop/protocol.hpp"

namespace metasim::teleop {

struct SessionOptions {
  /// Control ticks per second; at most 50.
  double rate = 50.0;
  /// EE translation speed, m/s.
  double speed = 0.1;
  /// Defaults to the scenario's first robot.
  std::string robot;
  retarget::IkOptions ik;
};

enum class SessionStatus { Running, Paused, Closed };

/// Drives one robot of a live env from operator commands and records what
/// was executed. Only the thread that owns the env may call into it.
class TeleopSession {
 public:
  /// Resets the env. Throws InvalidArgument for a rate outside (0, 50] or a
  /// scenario without a robot.
  TeleopSession(env::Env& env, SessionOptions opts = {});

  /// Updates the EE target from `cmd` and returns the joint action, without
  /// stepping. An unreachable target is reverted to the last feasible one
  /// and a warning is queued. Throws DuplicateOrStale for seq <= last_seq(),
  /// SessionClosed after close().
  state::Action apply_command(const TeleopCommand& cmd);

  /// apply_command, one env step and a recorded sample.
  env::StepResult tick(const TeleopCommand& cmd);

  const Pose& ee_target() const { return target_; }
  bool gripper_open() const { return open_; }
  std::uint64_t last_seq() const { return last_seq_; }
  std::size_t applied() const { return recorder_.size(); }
  const std::string& robot() const { return robot_; }
  env::Env& env() { return env_; }

  SessionStatus status() const { return status_; }
  void pause();
  void resume();

  /// Closes the session; success is the task checker on the final state.
  state::Trajectory close();

  std::vector<std::string> take_warnings();

 private:
  env::Env& env_;
  SessionOptions opts_;
  std::string robot_;
  const backends::EntityModel* entity_ = nullptr;
  Pose base_;
  Pose target_;
  bool open_ = true;
  VecX q_;
  std::uint64_t last_seq_ = 0;
  bool any_seq_ = false;
  bool success_ = false;
  env::Recorder recorder_;
  SessionStatus status_ = SessionStatus::Running;
  std::vector<std::string> warnings_;
};

/// Bounded, thread-safe hand-off between network receipt and stepping.
/// Stale frames are rejected on push; on overflow the incoming command is
/// merged into the newest queued one (latest intent and orientation, gripper
/// toggles combined by parity) so nothing grows without bound.
class CommandQueue {
 public:
  explicit CommandQueue(std::size_t capacity);

  /// Throws DuplicateOrStale when cmd.seq is not above every seq seen.
  void push(const TeleopCommand& cmd);
  std::optional<TeleopCommand> pop();
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t coalesced() const;
  /// Highest seq accepted so far (0 if none).
  std::uint64_t last_seq() const;
  /// Accept only seq values above `seq` from now on.
  void set_floor(std::uint64_t seq);

 private:
  mutable std::mutex mu_;
  std::deque<TeleopCommand> q_;
  std::size_t capacity_;
  std::uint64_t last_ = 0;
  bool any_ = false;
  std::uint64_t coalesced_ = 0;
};

/// Terminal keys to commands. Arrows move +-X / +-Y, 'e'/'d' +-Z; 'q'/'w'
/// roll, 'a'/'s' pitch and 'z'/'x' yaw rotate the held orientation about the
/// EE's own axes; space toggles the gripper.
class KeyboardMapper {
 public:
  enum Key { Up, Down, Left, Right, E, D, Q, W, A, S, Z, X, Space };

  /// `rot_step` is the rotation per command in radians.
  explicit KeyboardMapper(const Quat& start = Quat::Identity(), double rot_step = 0.05);

  void press(Key k) { held_.insert(k); }
  void release(Key k) { held_.erase(k); }
  void release_all() { held_.clear(); }
  void set_orientation(const Quat& q) { orientation_ = q; }

  /// Command for the current key set; Space held yields one toggle per call.
  TeleopCommand next(std::uint64_t t_ms);

  /// Maps a terminal byte or escape sequence ("\x1b[A" etc.); nullopt for
  /// anything else.
  static std::optional<Key> from_terminal(std::string_view bytes);

 private:
  std::set<Key> held_;
  Quat orientation_;
  double rot_step_;
  std::uint64_t seq_ = 0;
  bool rotated_ = false;
};

}  // namespace metasim::teleop
