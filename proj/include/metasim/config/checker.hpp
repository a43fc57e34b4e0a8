#pragma once

#include <string>
#include <variant>
#include <vector>

#include "metasim/common/math.hpp"

namespace metasim::config {

struct SuccessChecker;

/// Entity origin within `radius` of `center` (world frame).
struct PositionWithin {
  std::string entity;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  bool operator==(const PositionWithin&) const = default;
};

/// Displacement from the episode's initial position, projected on `axis`,
/// is at least `min_shift`.
struct PositionShift {
  std::string entity;
  Vec3 axis = Vec3::UnitZ();
  double min_shift = 0.0;
  bool operator==(const PositionShift&) const = default;
};

enum class Direction { AtLeast, AtMost };

struct JointPosThreshold {
  std::string entity;
  std::string joint;
  double threshold = 0.0;
  Direction direction = Direction::AtLeast;
  bool operator==(const JointPosThreshold&) const = default;
};

/// Pose of entity_b in the frame of entity_a matches `target_rel`.
struct RelativePose {
  std::string entity_a;
  std::string entity_b;
  Pose target_rel;
  double max_pos_err = 0.0;
  double max_rot_err = 0.0;
  bool operator==(const RelativePose&) const = default;
};

struct AllOf {
  std::vector<SuccessChecker> items;
  bool operator==(const AllOf&) const;
};

struct AnyOf {
  std::vector<SuccessChecker> items;
  bool operator==(const AnyOf&) const;
};

/// Named hook resolved against a callback registry at evaluation time.
struct Custom {
  std::string name;
  bool operator==(const Custom&) const = default;
};

/// Composable success predicate. The default (empty AnyOf) never succeeds.
struct SuccessChecker {
  std::variant<AnyOf, AllOf, PositionWithin, PositionShift, JointPosThreshold, RelativePose, Custom> node;

  bool operator==(const SuccessChecker&) const = default;
};

inline bool AllOf::operator==(const AllOf& o) const { return items == o.items; }
inline bool AnyOf::operator==(const AnyOf& o) const { return items == o.items; }

/// Entity names referenced anywhere in the checker tree.
std::vector<std::string> referenced_entities(const SuccessChecker& checker);

}  // namespace metasim::config
