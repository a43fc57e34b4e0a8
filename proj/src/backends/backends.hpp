#pragma once

#include <memory>

#include "metasim/backends/handler.hpp"

namespace metasim::backends {

std::unique_ptr<Handler> make_dyn_handler(const config::ScenarioConfig& cfg, std::size_t num_envs);
std::unique_ptr<Handler> make_kin_handler(const config::ScenarioConfig& cfg, std::size_t num_envs);

}  // namespace metasim::backends
