#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "metasim/common/error.hpp"
#include "metasim/common/rng.hpp"
#include "metasim/config/scenario.hpp"
#include "metasim/state/state.hpp"

namespace metasim::augment {

enum class Split { Train, Test };

const char* split_name(Split s);
/// "train" or "test"; throws InvalidArgument otherwise.
Split split_from_name(std::string_view name);

/// Permutation of [0, n) shuffled by seed; the last round(0.1 n) entries form
/// the test partition. Throws TooFewItems for n < 10.
std::vector<std::size_t> split_order(std::size_t n, std::uint64_t seed, std::size_t* test_count);

template <typename T>
struct PoolSplit {
  std::vector<T> train;
  std::vector<T> test;

  const std::vector<T>& part(Split s) const { return s == Split::Train ? train : test; }
};

/// 90/10 train/test partition, deterministic per seed.
template <typename T>
PoolSplit<T> split_pool(const std::vector<T>& items, std::uint64_t seed) {
  std::size_t n_test = 0;
  const auto order = split_order(items.size(), seed, &n_test);
  PoolSplit<T> out;
  const std::size_t n_train = items.size() - n_test;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? out.train : out.test).push_back(items[order[i]]);
  return out;
}

struct RandomizationPools {
  std::vector<config::SceneSurface> table_materials;
  std::vector<config::SceneSurface> wall_materials;
  std::vector<config::SceneSurface> ground_materials;
  /// Camera poses in a frame at the workspace centre (see workspace_center).
  std::vector<Pose> camera_poses;
  std::vector<std::string> layouts;
  std::vector<config::LightKind> light_kinds;
};

/// 300 table, 150 wall and 150 ground materials, 59 camera poses, 12 layouts
/// and both light kinds. Identical on every call.
const RandomizationPools& builtin_pools();

struct RandomizationSpec {
  int level = 0;
  std::uint64_t seed = 0;
  /// Index of this draw within the (seed, split) sequence.
  std::uint64_t draw = 0;
  RandomizationPools pools = builtin_pools();
};

/// Mean of the task-space range centres, else of the non-plane object
/// positions, else the origin.
Vec3 workspace_center(const config::ScenarioConfig& cfg);

/// Level 0 moves entities with a task-space range to a uniform position in
/// it. Level 1 adds layout and table/wall/ground materials, level 2 camera
/// poses, level 3 light parameters and roughness/specular/metallic on every
/// material. Pools are first partitioned by spec.seed and draws only come
/// from `split`. Throws InvalidArgument for a level outside 0..3, EmptyPool
/// when a needed partition is empty, TooFewItems for pools under 10.
config::ScenarioConfig randomize_scene(const config::ScenarioConfig& cfg, const RandomizationSpec& spec, Split split);

/// The Level-0 draw applied to a state: entities with a task-space range get
/// a uniform position inside it, everything else is copied.
state::EnvState sample_task_space(const config::ScenarioConfig& cfg, const state::EnvState& base, Rng& rng);

}  // namespace metasim::augment
