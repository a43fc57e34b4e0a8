#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "metasim/backends/scene_model.hpp"
#include "metasim/common/math.hpp"
#include "metasim/state/state.hpp"

namespace metasim::teleop {

/// One operator input sample.
struct TeleopCommand {
  std::uint64_t seq = 0;
  std::uint64_t t_ms = 0;
  /// Per-axis world-frame intent, each -1, 0 or +1.
  std::array<int, 3> translate{0, 0, 0};
  bool orientation_enabled = false;
  Quat orientation = Quat::Identity();
  bool gripper_toggle = false;

  bool operator==(const TeleopCommand& o) const {
    return seq == o.seq && t_ms == o.t_ms && translate == o.translate &&
           orientation_enabled == o.orientation_enabled && orientation.coeffs() == o.orientation.coeffs() &&
           gripper_toggle == o.gripper_toggle;
  }
};

/// `CMD <seq> <t_ms> <tx> <ty> <tz> <oriflag> <qw> <qx> <qy> <qz> <grip>`.
/// Throws MalformedFrame for anything else, including translate values
/// outside {-1, 0, 1} and, with oriflag 1, a quaternion whose norm is off
/// by more than 1e-3.
TeleopCommand decode_command(std::string_view frame);
std::string encode_command(const TeleopCommand& cmd);

/// Decoded server state record.
struct StateFrame {
  std::uint64_t seq = 0;
  std::uint64_t t_ms = 0;
  std::vector<std::pair<std::string, Pose>> entities;
  std::vector<std::pair<std::string, VecX>> dofs;
};

/// `STATE <seq> <t_ms>`, then one `E <name> <px> <py> <pz> <qw> <qx> <qy>
/// <qz>` line per entity in scenario order and one `D <robot> <q...>` line
/// per robot, newline separated.
std::string encode_state(const backends::SceneModel& model, const state::EnvState& s, std::uint64_t seq,
                         std::uint64_t t_ms);
/// Throws MalformedFrame.
StateFrame decode_state(std::string_view frame);

/// Control records besides CMD: `HELLO [token]`, `BYE`. Server replies are
/// `SESSION <token> <last_seq> <qw> <qx> <qy> <qz>` (the current EE target
/// orientation), `ERR <code> <text>`, `WARN <text>` and
/// `BYE <actions>`.
enum class ControlKind { Hello, Bye, Cmd };

struct ClientMessage {
  ControlKind kind = ControlKind::Cmd;
  std::string token;  // HELLO only, may be empty
  TeleopCommand cmd;  // CMD only
};

/// Throws MalformedFrame.
ClientMessage decode_client_message(std::string_view frame);

/// First whitespace-separated word of a frame.
std::string_view frame_kind(std::string_view frame);

}  // namespace metasim::teleop
