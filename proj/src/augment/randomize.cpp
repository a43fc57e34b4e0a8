#include "metasim/augment/randomize.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace metasim::augment {

namespace {

// Stream tags keep each randomization factor on its own sequence, so the
// Level-0 positions of a draw are the same at every level.
enum Stream : std::uint64_t { kSplit = 1, kTaskSpace, kLayout, kSurface, kCamera, kLight, kReflection, kPool };

constexpr std::uint64_t kPoolSeed = 0x4d657461;

std::vector<config::SceneSurface> material_pool(const std::string& prefix, std::size_t n, std::uint64_t tag,
                                                double lo, double hi) {
  std::vector<config::SceneSurface> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(kPoolSeed, {kPool, tag, i});
    config::SceneSurface s;
    char id[32];
    std::snprintf(id, sizeof id, "%s_%03zu", prefix.c_str(), i);
    s.id = id;
    for (auto& c : s.material.base_color) c = rng.uniform(lo, hi);
    s.material.roughness = rng.uniform01();
    s.material.specular = rng.uniform01();
    s.material.metallic = rng.uniform01();
    out.push_back(std::move(s));
  }
  return out;
}

// Golden-angle spiral over the front hemisphere: elevation 15..75 degrees,
// azimuth within +-100 degrees of +x, distance 0.9..1.5 m.
std::vector<Pose> camera_pool() {
  std::vector<Pose> out;
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 59; ++i) {
    const double el = (15.0 + 60.0 * i / 58.0) * std::numbers::pi / 180.0;
    const double az = (-100.0 + 200.0 * std::fmod(i * golden, 1.0)) * std::numbers::pi / 180.0;
    const double d = 0.9 + 0.6 * std::fmod(i * std::numbers::sqrt2, 1.0);
    const Vec3 eye = d * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    out.emplace_back(eye, look_at_rotation(eye, Vec3::Zero()));
  }
  return out;
}

RandomizationPools make_builtin() {
  RandomizationPools p;
  p.table_materials = material_pool("table", 300, 1, 0.2, 0.9);
  p.wall_materials = material_pool("wall", 150, 2, 0.3, 1.0);
  p.ground_materials = material_pool("ground", 150, 3, 0.1, 0.8);
  p.camera_poses = camera_pool();
  p.layouts = {"open",      "corner_left", "corner_right", "alcove",    "galley",     "island",
               "peninsula", "u_shape",     "l_shape",      "workbench", "lab_bench", "kitchen"};
  p.light_kinds = {config::LightKind::Distant, config::LightKind::CylinderArray};
  return p;
}

template <typename T>
const T& pick(const std::vector<T>& items, std::uint64_t seed, Split split, Rng& rng, const char* what) {
  if (items.empty()) throw Error(Errc::EmptyPool, std::string(what) + " pool is empty");
  std::size_t n_test = 0;
  const auto order = split_order(items.size(), seed, &n_test);
  const std::size_t n_train = items.size() - n_test;
  const std::size_t n = split == Split::Train ? n_train : n_test;
  if (n == 0) throw Error(Errc::EmptyPool, std::string(what) + " pool has no " + split_name(split) + " items");
  const std::size_t k = rng.index(n);
  return items[order[split == Split::Train ? k : n_train + k]];
}

void randomize_reflection(MaterialParams& m, Rng& rng) {
  m.roughness = rng.uniform01();
  m.specular = rng.uniform01();
  m.metallic = rng.uniform01();
}

Vec3 draw_in(const config::TaskSpaceRange& r, Rng& rng) {
  Vec3 p;
  for (int i = 0; i < 3; ++i) p(i) = rng.uniform(r.min(i), r.max(i));
  return p;
}

}  // namespace

const char* split_name(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  throw Error(Errc::InvalidArgument, "split must be 'train' or 'test', got '" + std::string(name) + "'");
}

std::vector<std::size_t> split_order(std::size_t n, std::uint64_t seed, std::size_t* test_count) {
  if (n < 10) throw Error(Errc::TooFewItems, "a pool needs at least 10 items to split, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, {kSplit, n});
  rng.shuffle(order);
  *test_count = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  return order;
}

const RandomizationPools& builtin_pools() {
  static const RandomizationPools pools = make_builtin();
  return pools;
}

Vec3 workspace_center(const config::ScenarioConfig& cfg) {
  Vec3 sum = Vec3::Zero();
  if (!cfg.task.task_space.empty()) {
    for (const auto& r : cfg.task.task_space) sum += 0.5 * (r.min + r.max);
    return sum / static_cast<double>(cfg.task.task_space.size());
  }
  int n = 0;
  for (const auto& o : cfg.objects) {
    if (o.kind == config::ObjectKind::Plane) continue;
    sum += o.base_pose.pos;
    ++n;
  }
  return n ? Vec3(sum / n) : Vec3::Zero();
}

state::EnvState sample_task_space(const config::ScenarioConfig& cfg, const state::EnvState& base, Rng& rng) {
  state::EnvState out = base;
  for (const auto& r : cfg.task.task_space) {
    auto it = out.find(r.entity);
    if (it == out.end()) throw Error(Errc::UnknownEntity, "task-space range for unknown entity '" + r.entity + "'");
    it->second.pos = draw_in(r, rng);
  }
  return out;
}

config::ScenarioConfig randomize_scene(const config::ScenarioConfig& cfg, const RandomizationSpec& spec, Split split) {
  if (spec.level < 0 || spec.level > 3)
    throw Error(Errc::InvalidArgument, "randomization level must be 0..3, got " + std::to_string(spec.level));
  config::ScenarioConfig out = cfg;
  const std::uint64_t s = split == Split::Train ? 0 : 1;
  auto stream = [&](Stream tag) { return Rng(spec.seed, {s, spec.draw, tag}); };
  const auto& pools = spec.pools;

  Rng space = stream(kTaskSpace);
  for (const auto& r : cfg.task.task_space) {
    const Vec3 p = draw_in(r, space);
    bool found = false;
    for (auto& o : out.objects)
      if (o.name == r.entity) o.base_pose.pos = p, found = true;
    for (auto& rb : out.robots)
      if (rb.name == r.entity) rb.base_pose.pos = p, found = true;
    if (!found) throw Error(Errc::UnknownEntity, "task-space range for unknown entity '" + r.entity + "'");
  }
  if (spec.level < 1) return out;

  Rng layout = stream(kLayout);
  out.scene.layout = pick(pools.layouts, spec.seed, split, layout, "layout");
  Rng surface = stream(kSurface);
  out.scene.table = pick(pools.table_materials, spec.seed, split, surface, "table material");
  out.scene.wall = pick(pools.wall_materials, spec.seed, split, surface, "wall material");
  out.scene.ground = pick(pools.ground_materials, spec.seed, split, surface, "ground material");
  for (auto& o : out.objects) {
    if (o.name == "table") o.material = out.scene.table.material;
    else if (o.kind == config::ObjectKind::Plane) o.material = out.scene.ground.material;
  }
  if (spec.level < 2) return out;

  Rng camera = stream(kCamera);
  const Pose center = Pose::from_translation(workspace_center(cfg));
  for (auto& c : out.cameras) c.pose = center * pick(pools.camera_poses, spec.seed, split, camera, "camera pose");
  if (spec.level < 3) return out;

  Rng light = stream(kLight);
  if (pools.light_kinds.empty()) throw Error(Errc::EmptyPool, "light kind pool is empty");
  for (auto& l : out.lights) {
    l.kind = pools.light_kinds[light.index(pools.light_kinds.size())];
    l.polar = light.uniform(0.0, 60.0);
    l.azimuth = light.uniform(-180.0, 180.0);
    l.intensity = light.uniform(0.3, 1.5);
    l.color_temperature = light.uniform(2700.0, 8000.0);
  }
  Rng refl = stream(kReflection);
  randomize_reflection(out.scene.table.material, refl);
  randomize_reflection(out.scene.wall.material, refl);
  randomize_reflection(out.scene.ground.material, refl);
  for (auto& o : out.objects) randomize_reflection(o.material, refl);
  return out;
}

}  // namespace metasim::augment
