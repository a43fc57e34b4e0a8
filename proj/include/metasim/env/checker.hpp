#pragma once

#include <functional>
#include <map>
#include <string>

#include "metasim/backends/scene_model.hpp"
#include "metasim/config/checker.hpp"
#include "metasim/state/state.hpp"

namespace metasim::env {

using CustomChecker = std::function<bool(const state::EnvState&)>;
using CustomRegistry = std::map<std::string, CustomChecker>;

/// What a checker needs besides the current state: joint names from the
/// model and the episode's initial state for shift predicates.
struct CheckContext {
  const backends::SceneModel* model = nullptr;
  const state::EnvState* initial = nullptr;
  const CustomRegistry* customs = nullptr;
};

/// Pure predicate over one env record. All/Any evaluate every child.
/// Throws UnknownEntity for missing entities or joints and InvalidArgument
/// for a custom checker without a registered callback.
bool check_success(const CheckContext& ctx, const state::EnvState& s, const config::SuccessChecker& checker);

}  // namespace metasim::env
