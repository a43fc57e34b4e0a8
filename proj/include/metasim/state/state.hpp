#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metasim/common/math.hpp"

namespace metasim::state {

/// Bit set naming the fields an EntityState carries.
enum Field : std::uint8_t {
  kPos = 1 << 0,
  kRot = 1 << 1,
  kLinVel = 1 << 2,
  kAngVel = 1 << 3,
  kDofPos = 1 << 4,
  kDofVel = 1 << 5,
  kDofTarget = 1 << 6,
};
using FieldMask = std::uint8_t;
inline constexpr FieldMask kAllFields = 0x7f;

const char* field_name(Field f);
/// Parses "pos", "rot", "lin_vel", ... into a mask bit; 0 if unknown.
FieldMask field_from_name(std::string_view name);

/// State of one robot, object or articulation. Fields outside `mask` are
/// ignored by every consumer; get_states fills all of them.
struct EntityState {
  FieldMask mask = kAllFields;
  Vec3 pos = Vec3::Zero();
  Quat rot = Quat::Identity();
  Vec3 lin_vel = Vec3::Zero();
  Vec3 ang_vel = Vec3::Zero();
  VecX dof_pos;
  VecX dof_vel;
  VecX dof_target;

  bool has(Field f) const { return (mask & f) != 0; }
  /// Equal masks and equal values on the masked fields.
  bool operator==(const EntityState& o) const;
};

using EnvState = std::map<std::string, EntityState>;

struct SceneState {
  std::vector<EnvState> envs;

  bool operator==(const SceneState&) const = default;
};

/// Empty entity list means every entity.
struct StateQuery {
  std::vector<std::string> entities;
  FieldMask fields = kAllFields;
};

/// Restricts `s` to the query. Throws UnknownEntity for names not present.
SceneState apply_query(const SceneState& s, const StateQuery& q);

/// Fields present in `partial` replace those of `base`. A single-env partial
/// applies to every env of `base`; otherwise env counts must match. Throws
/// UnknownEntity, UnknownField (field absent from base) or DofLengthMismatch.
SceneState merge_states(const SceneState& base, const SceneState& partial);

struct EntityDiff {
  double pos = 0.0;
  double rot = 0.0;  // geodesic angle, rad
  double lin_vel = 0.0;
  double ang_vel = 0.0;
  double dof = 0.0;  // max |dof_pos difference|

  bool operator==(const EntityDiff&) const = default;
};

struct DiffReport {
  std::map<std::string, EntityDiff> entities;
  double max_pos = 0.0;
  double max_rot = 0.0;
  double max_vel = 0.0;
  double max_dof = 0.0;

  bool within(double tol) const { return max_pos <= tol && max_rot <= tol && max_vel <= tol && max_dof <= tol; }
  bool is_zero() const { return within(0.0); }
};

/// Per-entity maximum errors over all envs, comparing fields present in
/// both records. Symmetric. Throws EntitySetMismatch if env counts or
/// entity key sets differ, DofLengthMismatch if dof vectors differ in length.
DiffReport diff_states(const SceneState& a, const SceneState& b);

/// Convenience for single-env records.
SceneState single(EnvState env);

}  // namespace metasim::state
