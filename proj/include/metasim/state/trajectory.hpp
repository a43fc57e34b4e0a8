#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metasim/state/state.hpp"

namespace metasim::state {

/// Joint targets for each robot commanded in one control step.
struct Action {
  std::map<std::string, VecX> dof_targets;

  bool operator==(const Action& o) const;
};

/// A demonstration. states[i], when present, is the world after actions[i].
struct Trajectory {
  std::string scenario_name;
  SceneState init_state;
  std::vector<Action> actions;
  std::optional<std::vector<SceneState>> states;
  std::optional<bool> success;
  std::map<std::string, std::string> extras;

  bool operator==(const Trajectory&) const = default;
};

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kRvtMajor = 1;
inline constexpr std::uint16_t kRvtMinor = 0;

/// RVT1 container (layout in docs/rvt1.md). Throws InvalidArgument for
/// multi-env states or states/actions length mismatch.
Bytes serialize_trajectory(const Trajectory& t);

/// Throws BadMagic, VersionMismatch, TruncatedStream or ChecksumFailure,
/// checked in that order.
Trajectory deserialize_trajectory(const Bytes& bytes);

void write_trajectory_file(const std::filesystem::path& path, const Trajectory& t);
Trajectory read_trajectory_file(const std::filesystem::path& path);

}  // namespace metasim::state
