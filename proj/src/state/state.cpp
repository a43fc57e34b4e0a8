#include "metasim/state/state.hpp"

#include <algorithm>
#include <cmath>

#include "metasim/common/error.hpp"

namespace metasim::state {

namespace {

constexpr Field kFields[] = {kPos, kRot, kLinVel, kAngVel, kDofPos, kDofVel, kDofTarget};

bool same(const VecX& a, const VecX& b) { return a.size() == b.size() && a == b; }

double max_abs_diff(const VecX& a, const VecX& b, const std::string& entity) {
  if (a.size() != b.size())
    throw Error(Errc::DofLengthMismatch, "'" + entity + "' dof lengths differ (" + std::to_string(a.size()) + " vs " +
                                             std::to_string(b.size()) + ")");
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

const char* field_name(Field f) {
  switch (f) {
    case kPos: return "pos";
    case kRot: return "rot";
    case kLinVel: return "lin_vel";
    case kAngVel: return "ang_vel";
    case kDofPos: return "dof_pos";
    case kDofVel: return "dof_vel";
    case kDofTarget: return "dof_target";
  }
  return "";
}

FieldMask field_from_name(std::string_view name) {
  for (Field f : kFields)
    if (name == field_name(f)) return f;
  return 0;
}

bool EntityState::operator==(const EntityState& o) const {
  if (mask != o.mask) return false;
  if (has(kPos) && pos != o.pos) return false;
  if (has(kRot) && rot.coeffs() != o.rot.coeffs()) return false;
  if (has(kLinVel) && lin_vel != o.lin_vel) return false;
  if (has(kAngVel) && ang_vel != o.ang_vel) return false;
  if (has(kDofPos) && !same(dof_pos, o.dof_pos)) return false;
  if (has(kDofVel) && !same(dof_vel, o.dof_vel)) return false;
  if (has(kDofTarget) && !same(dof_target, o.dof_target)) return false;
  return true;
}

SceneState apply_query(const SceneState& s, const StateQuery& q) {
  SceneState out;
  for (const auto& env : s.envs) {
    EnvState filtered;
    auto take = [&](const std::string& name, const EntityState& e) {
      EntityState c = e;
      c.mask &= q.fields;
      filtered.emplace(name, std::move(c));
    };
    if (q.entities.empty()) {
      for (const auto& [name, e] : env) take(name, e);
    } else {
      for (const auto& name : q.entities) {
        auto it = env.find(name);
        if (it == env.end()) throw Error(Errc::UnknownEntity, "no entity '" + name + "'");
        take(name, it->second);
      }
    }
    out.envs.push_back(std::move(filtered));
  }
  return out;
}

SceneState merge_states(const SceneState& base, const SceneState& partial) {
  if (partial.envs.empty()) return base;
  if (partial.envs.size() != 1 && partial.envs.size() != base.envs.size())
    throw Error(Errc::EntitySetMismatch, "partial state has " + std::to_string(partial.envs.size()) +
                                             " envs, base has " + std::to_string(base.envs.size()));
  SceneState out = base;
  for (std::size_t i = 0; i < out.envs.size(); ++i) {
    const EnvState& src = partial.envs.size() == 1 ? partial.envs[0] : partial.envs[i];
    for (const auto& [name, p] : src) {
      auto it = out.envs[i].find(name);
      if (it == out.envs[i].end()) throw Error(Errc::UnknownEntity, "no entity '" + name + "'");
      EntityState& e = it->second;
      for (Field f : kFields) {
        if (p.has(f) && !e.has(f))
          throw Error(Errc::UnknownField, "'" + name + "' has no field '" + field_name(f) + "'");
      }
      auto dof = [&](const VecX& from, VecX& to, const char* field) {
        if (from.size() != to.size())
          throw Error(Errc::DofLengthMismatch, "'" + name + "." + field + "' expects " + std::to_string(to.size()) +
                                                   " values, got " + std::to_string(from.size()));
        to = from;
      };
      if (p.has(kPos)) e.pos = p.pos;
      if (p.has(kRot)) e.rot = p.rot;
      if (p.has(kLinVel)) e.lin_vel = p.lin_vel;
      if (p.has(kAngVel)) e.ang_vel = p.ang_vel;
      if (p.has(kDofPos)) dof(p.dof_pos, e.dof_pos, "dof_pos");
      if (p.has(kDofVel)) dof(p.dof_vel, e.dof_vel, "dof_vel");
      if (p.has(kDofTarget)) dof(p.dof_target, e.dof_target, "dof_target");
    }
  }
  return out;
}

DiffReport diff_states(const SceneState& a, const SceneState& b) {
  if (a.envs.size() != b.envs.size())
    throw Error(Errc::EntitySetMismatch, "env counts differ (" + std::to_string(a.envs.size()) + " vs " +
                                             std::to_string(b.envs.size()) + ")");
  DiffReport r;
  for (std::size_t i = 0; i < a.envs.size(); ++i) {
    const EnvState& ea = a.envs[i];
    const EnvState& eb = b.envs[i];
    if (ea.size() != eb.size() ||
        !std::equal(ea.begin(), ea.end(), eb.begin(), [](const auto& x, const auto& y) { return x.first == y.first; }))
      throw Error(Errc::EntitySetMismatch, "entity sets differ in env " + std::to_string(i));
    for (const auto& [name, x] : ea) {
      const EntityState& y = eb.at(name);
      const FieldMask both = x.mask & y.mask;
      EntityDiff& d = r.entities[name];
      if (both & kPos) d.pos = std::max(d.pos, (x.pos - y.pos).norm());
      if (both & kRot) d.rot = std::max(d.rot, rotation_angle(x.rot, y.rot));
      if (both & kLinVel) d.lin_vel = std::max(d.lin_vel, (x.lin_vel - y.lin_vel).norm());
      if (both & kAngVel) d.ang_vel = std::max(d.ang_vel, (x.ang_vel - y.ang_vel).norm());
      if (both & kDofPos) d.dof = std::max(d.dof, max_abs_diff(x.dof_pos, y.dof_pos, name));
      r.max_pos = std::max(r.max_pos, d.pos);
      r.max_rot = std::max(r.max_rot, d.rot);
      r.max_vel = std::max({r.max_vel, d.lin_vel, d.ang_vel});
      r.max_dof = std::max(r.max_dof, d.dof);
    }
  }
  return r;
}

SceneState single(EnvState env) {
  SceneState s;
  s.envs.push_back(std::move(env));
  return s;
}

}  // namespace metasim::state
