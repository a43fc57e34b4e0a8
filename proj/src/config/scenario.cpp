#include "metasim/config/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "metasim/assets/formats.hpp"
#include "metasim/common/numfmt.hpp"
#include "metasim/config/tree.hpp"

namespace metasim::config {

const RobotConfig* ScenarioConfig::find_robot(std::string_view entity) const {
  for (const auto& r : robots)
    if (r.name == entity) return &r;
  return nullptr;
}

const ObjectConfig* ScenarioConfig::find_object(std::string_view entity) const {
  for (const auto& o : objects)
    if (o.name == entity) return &o;
  return nullptr;
}

std::vector<std::string> ScenarioConfig::entity_names() const {
  std::vector<std::string> out;
  for (const auto& r : robots) out.push_back(r.name);
  for (const auto& o : objects) out.push_back(o.name);
  return out;
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return name == o.name && robots == o.robots && objects == o.objects && cameras == o.cameras &&
         lights == o.lights && task == o.task && sim == o.sim && scene == o.scene &&
         backend_extras == o.backend_extras;
}

namespace {

using Kind = Node::Kind;

// ---------------------------------------------------------------- reading

[[noreturn]] void mismatch(const std::string& path, const std::string& what) {
  throw Error(Errc::TypeMismatch, path + ": expected " + what);
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string join(const std::string& path, std::size_t index) { return path + "." + std::to_string(index); }

void check_keys(const Node& n, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (n.kind != Kind::Map) mismatch(path.empty() ? "<root>" : path, "a map");
  for (const auto& [key, value] : n.entries) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(Errc::UnknownField, "unknown field '" + join(path, key) + "'");
  }
}

std::string str(const Node& n, const std::string& path) {
  if (n.kind != Kind::Scalar) mismatch(path, "a string");
  return n.scalar;
}

double num(const Node& n, const std::string& path) {
  if (n.kind != Kind::Scalar || n.quoted) mismatch(path, "a number");
  const auto v = parse_double(n.scalar);
  if (!v) mismatch(path, "a number, got '" + n.scalar + "'");
  return *v;
}

int integer(const Node& n, const std::string& path) {
  if (n.kind != Kind::Scalar || n.quoted) mismatch(path, "an integer");
  const auto v = parse_int(n.scalar);
  if (!v || *v < INT32_MIN || *v > INT32_MAX) mismatch(path, "an integer, got '" + n.scalar + "'");
  return static_cast<int>(*v);
}

const Node& list(const Node& n, const std::string& path) {
  if (n.kind != Kind::List) mismatch(path, "a list");
  return n;
}

std::vector<double> numbers(const Node& n, const std::string& path) {
  std::vector<double> out;
  for (std::size_t i = 0; i < list(n, path).items.size(); ++i) out.push_back(num(n.items[i], join(path, i)));
  return out;
}

std::vector<std::string> strings(const Node& n, const std::string& path) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < list(n, path).items.size(); ++i) out.push_back(str(n.items[i], join(path, i)));
  return out;
}

Vec3 vec3(const Node& n, const std::string& path) {
  const auto v = numbers(n, path);
  if (v.size() != 3) mismatch(path, "a 3-vector");
  return {v[0], v[1], v[2]};
}

Quat quat(const Node& n, const std::string& path) {
  const auto v = numbers(n, path);
  if (v.size() != 4) mismatch(path, "a quaternion [w, x, y, z]");
  return quat_wxyz(v[0], v[1], v[2], v[3]);
}

/// Reads an optional field in place.
template <typename F>
void opt(const Node& map, const std::string& path, std::string_view key, F&& read) {
  if (const Node* c = map.find(key)) read(*c, join(path, key));
}

template <typename F>
void required(const Node& map, const std::string& path, std::string_view key, F&& read) {
  const Node* c = map.find(key);
  if (!c) throw Error(Errc::InvariantViolation, "missing required field '" + join(path, key) + "'");
  read(*c, join(path, key));
}

Pose read_pose(const Node& n, const std::string& path) {
  check_keys(n, path, {"pos", "rot", "look_at"});
  Pose p;
  opt(n, path, "pos", [&](const Node& c, const std::string& cp) { p.pos = vec3(c, cp); });
  opt(n, path, "rot", [&](const Node& c, const std::string& cp) { p.rot = quat(c, cp); });
  if (const Node* c = n.find("look_at")) {
    if (n.find("rot")) throw Error(Errc::InvariantViolation, path + ": rot and look_at are exclusive");
    const Vec3 target = vec3(*c, join(path, "look_at"));
    if ((target - p.pos).norm() == 0.0) throw Error(Errc::InvariantViolation, path + ": look_at equals pos");
    p.rot = look_at_rotation(p.pos, target);
  }
  return p;
}

MaterialParams read_material(const Node& n, const std::string& path) {
  check_keys(n, path, {"roughness", "specular", "metallic", "base_color"});
  MaterialParams m;
  opt(n, path, "roughness", [&](const Node& c, const std::string& cp) { m.roughness = num(c, cp); });
  opt(n, path, "specular", [&](const Node& c, const std::string& cp) { m.specular = num(c, cp); });
  opt(n, path, "metallic", [&](const Node& c, const std::string& cp) { m.metallic = num(c, cp); });
  opt(n, path, "base_color", [&](const Node& c, const std::string& cp) {
    const Vec3 v = vec3(c, cp);
    m.base_color = {v[0], v[1], v[2]};
  });
  return m;
}

SuccessChecker read_checker(const Node& n, const std::string& path);

std::vector<SuccessChecker> read_checker_list(const Node& n, const std::string& path) {
  std::vector<SuccessChecker> out;
  for (std::size_t i = 0; i < list(n, path).items.size(); ++i) out.push_back(read_checker(n.items[i], join(path, i)));
  return out;
}

SuccessChecker read_checker(const Node& n, const std::string& path) {
  if (n.kind != Kind::Map) mismatch(path, "a checker map");
  std::string type;
  required(n, path, "type", [&](const Node& c, const std::string& cp) { type = str(c, cp); });
  SuccessChecker out;
  auto entity = [&](std::string_view key) {
    std::string e;
    required(n, path, key, [&](const Node& c, const std::string& cp) { e = str(c, cp); });
    return e;
  };
  if (type == "position_within") {
    check_keys(n, path, {"type", "entity", "center", "radius"});
    PositionWithin c;
    c.entity = entity("entity");
    required(n, path, "center", [&](const Node& v, const std::string& cp) { c.center = vec3(v, cp); });
    required(n, path, "radius", [&](const Node& v, const std::string& cp) { c.radius = num(v, cp); });
    out.node = c;
  } else if (type == "position_shift") {
    check_keys(n, path, {"type", "entity", "axis", "min_shift"});
    PositionShift c;
    c.entity = entity("entity");
    opt(n, path, "axis", [&](const Node& v, const std::string& cp) { c.axis = vec3(v, cp); });
    required(n, path, "min_shift", [&](const Node& v, const std::string& cp) { c.min_shift = num(v, cp); });
    out.node = c;
  } else if (type == "joint_pos_threshold") {
    check_keys(n, path, {"type", "entity", "joint", "threshold", "direction"});
    JointPosThreshold c;
    c.entity = entity("entity");
    c.joint = entity("joint");
    required(n, path, "threshold", [&](const Node& v, const std::string& cp) { c.threshold = num(v, cp); });
    opt(n, path, "direction", [&](const Node& v, const std::string& cp) {
      const std::string d = str(v, cp);
      if (d == "ge") c.direction = Direction::AtLeast;
      else if (d == "le") c.direction = Direction::AtMost;
      else mismatch(cp, "'ge' or 'le'");
    });
    out.node = c;
  } else if (type == "relative_pose") {
    check_keys(n, path, {"type", "entity_a", "entity_b", "target_rel", "max_pos_err", "max_rot_err"});
    RelativePose c;
    c.entity_a = entity("entity_a");
    c.entity_b = entity("entity_b");
    opt(n, path, "target_rel", [&](const Node& v, const std::string& cp) { c.target_rel = read_pose(v, cp); });
    required(n, path, "max_pos_err", [&](const Node& v, const std::string& cp) { c.max_pos_err = num(v, cp); });
    required(n, path, "max_rot_err", [&](const Node& v, const std::string& cp) { c.max_rot_err = num(v, cp); });
    out.node = c;
  } else if (type == "all" || type == "any") {
    check_keys(n, path, {"type", "items"});
    std::vector<SuccessChecker> items;
    opt(n, path, "items", [&](const Node& v, const std::string& cp) { items = read_checker_list(v, cp); });
    if (type == "all") out.node = AllOf{std::move(items)};
    else out.node = AnyOf{std::move(items)};
  } else if (type == "custom") {
    check_keys(n, path, {"type", "name"});
    out.node = Custom{entity("name")};
  } else {
    mismatch(join(path, "type"), "a checker type, got '" + type + "'");
  }
  return out;
}

RobotConfig read_robot(const Node& n, const std::string& path) {
  check_keys(n, path,
             {"name", "asset", "asset_inline", "base_pose", "default_dof_pos", "ee_frame", "gripper_joints",
              "grasp_radius"});
  RobotConfig r;
  required(n, path, "name", [&](const Node& c, const std::string& cp) { r.name = str(c, cp); });
  opt(n, path, "asset", [&](const Node& c, const std::string& cp) { r.asset = str(c, cp); });
  opt(n, path, "asset_inline", [&](const Node& c, const std::string& cp) { r.asset_inline = str(c, cp); });
  opt(n, path, "base_pose", [&](const Node& c, const std::string& cp) { r.base_pose = read_pose(c, cp); });
  opt(n, path, "default_dof_pos", [&](const Node& c, const std::string& cp) { r.default_dof_pos = numbers(c, cp); });
  opt(n, path, "ee_frame", [&](const Node& c, const std::string& cp) { r.ee_frame = str(c, cp); });
  opt(n, path, "gripper_joints", [&](const Node& c, const std::string& cp) { r.gripper_joints = strings(c, cp); });
  opt(n, path, "grasp_radius", [&](const Node& c, const std::string& cp) { r.grasp_radius = num(c, cp); });
  return r;
}

const char* kind_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::Sphere: return "sphere";
    case ObjectKind::Box: return "box";
    case ObjectKind::Plane: return "plane";
    case ObjectKind::Articulated: return "articulated";
  }
  return "";
}

ObjectConfig read_object(const Node& n, const std::string& path) {
  if (n.kind != Kind::Map) mismatch(path, "a map");
  ObjectConfig o;
  std::string kind;
  required(n, path, "kind", [&](const Node& c, const std::string& cp) { kind = str(c, cp); });
  if (kind == "sphere") o.kind = ObjectKind::Sphere;
  else if (kind == "box") o.kind = ObjectKind::Box;
  else if (kind == "plane") o.kind = ObjectKind::Plane;
  else if (kind == "articulated") o.kind = ObjectKind::Articulated;
  else mismatch(join(path, "kind"), "sphere, box, plane or articulated");

  if (o.kind == ObjectKind::Articulated) {
    check_keys(n, path, {"name", "kind", "asset", "base_pose", "default_dof_pos"});
    required(n, path, "asset", [&](const Node& c, const std::string& cp) { o.asset = str(c, cp); });
    opt(n, path, "default_dof_pos", [&](const Node& c, const std::string& cp) { o.default_dof_pos = numbers(c, cp); });
  } else {
    check_keys(n, path,
               {"name", "kind", "dims", "base_pose", "mass", "restitution", "material", "init_lin_vel",
                "init_ang_vel"});
    if (o.kind == ObjectKind::Plane) o.mass = 0.0;
    opt(n, path, "dims", [&](const Node& c, const std::string& cp) { o.dims = numbers(c, cp); });
    opt(n, path, "mass", [&](const Node& c, const std::string& cp) { o.mass = num(c, cp); });
    opt(n, path, "restitution", [&](const Node& c, const std::string& cp) { o.restitution = num(c, cp); });
    opt(n, path, "material", [&](const Node& c, const std::string& cp) { o.material = read_material(c, cp); });
    opt(n, path, "init_lin_vel", [&](const Node& c, const std::string& cp) { o.init_lin_vel = vec3(c, cp); });
    opt(n, path, "init_ang_vel", [&](const Node& c, const std::string& cp) { o.init_ang_vel = vec3(c, cp); });
  }
  required(n, path, "name", [&](const Node& c, const std::string& cp) { o.name = str(c, cp); });
  opt(n, path, "base_pose", [&](const Node& c, const std::string& cp) { o.base_pose = read_pose(c, cp); });
  return o;
}

CameraConfig read_camera(const Node& n, const std::string& path) {
  check_keys(n, path, {"name", "pose", "vertical_fov", "width", "height"});
  CameraConfig c;
  required(n, path, "name", [&](const Node& v, const std::string& cp) { c.name = str(v, cp); });
  opt(n, path, "pose", [&](const Node& v, const std::string& cp) { c.pose = read_pose(v, cp); });
  opt(n, path, "vertical_fov", [&](const Node& v, const std::string& cp) { c.vertical_fov = num(v, cp); });
  opt(n, path, "width", [&](const Node& v, const std::string& cp) { c.width = integer(v, cp); });
  opt(n, path, "height", [&](const Node& v, const std::string& cp) { c.height = integer(v, cp); });
  return c;
}

LightConfig read_light(const Node& n, const std::string& path) {
  if (n.kind != Kind::Map) mismatch(path, "a map");
  LightConfig l;
  std::string kind = "distant";
  opt(n, path, "kind", [&](const Node& v, const std::string& cp) { kind = str(v, cp); });
  if (kind == "distant") {
    check_keys(n, path, {"kind", "polar", "azimuth", "intensity", "color_temperature"});
    opt(n, path, "polar", [&](const Node& v, const std::string& cp) { l.polar = num(v, cp); });
    opt(n, path, "azimuth", [&](const Node& v, const std::string& cp) { l.azimuth = num(v, cp); });
  } else if (kind == "cylinder_array") {
    l.kind = LightKind::CylinderArray;
    check_keys(n, path, {"kind", "rows", "cols", "size", "height", "intensity", "color_temperature"});
    opt(n, path, "rows", [&](const Node& v, const std::string& cp) { l.rows = integer(v, cp); });
    opt(n, path, "cols", [&](const Node& v, const std::string& cp) { l.cols = integer(v, cp); });
    opt(n, path, "size", [&](const Node& v, const std::string& cp) { l.size = num(v, cp); });
    opt(n, path, "height", [&](const Node& v, const std::string& cp) { l.height = num(v, cp); });
  } else {
    mismatch(join(path, "kind"), "distant or cylinder_array");
  }
  opt(n, path, "intensity", [&](const Node& v, const std::string& cp) { l.intensity = num(v, cp); });
  opt(n, path, "color_temperature", [&](const Node& v, const std::string& cp) { l.color_temperature = num(v, cp); });
  return l;
}

TaskConfig read_task(const Node& n, const std::string& path) {
  check_keys(n, path, {"episode_length", "instruction", "checker", "subtasks", "task_space"});
  TaskConfig t;
  opt(n, path, "episode_length", [&](const Node& v, const std::string& cp) { t.episode_length = integer(v, cp); });
  opt(n, path, "instruction", [&](const Node& v, const std::string& cp) { t.instruction = str(v, cp); });
  opt(n, path, "checker", [&](const Node& v, const std::string& cp) { t.checker = read_checker(v, cp); });
  opt(n, path, "subtasks", [&](const Node& v, const std::string& cp) {
    for (std::size_t i = 0; i < list(v, cp).items.size(); ++i) {
      const Node& s = v.items[i];
      const std::string sp = join(cp, i);
      check_keys(s, sp, {"name", "anchor", "checker"});
      SubtaskSpec spec;
      required(s, sp, "name", [&](const Node& x, const std::string& xp) { spec.name = str(x, xp); });
      required(s, sp, "anchor", [&](const Node& x, const std::string& xp) { spec.anchor = str(x, xp); });
      required(s, sp, "checker", [&](const Node& x, const std::string& xp) { spec.checker = read_checker(x, xp); });
      t.subtasks.push_back(std::move(spec));
    }
  });
  opt(n, path, "task_space", [&](const Node& v, const std::string& cp) {
    for (std::size_t i = 0; i < list(v, cp).items.size(); ++i) {
      const Node& s = v.items[i];
      const std::string sp = join(cp, i);
      check_keys(s, sp, {"entity", "min", "max"});
      TaskSpaceRange r;
      required(s, sp, "entity", [&](const Node& x, const std::string& xp) { r.entity = str(x, xp); });
      required(s, sp, "min", [&](const Node& x, const std::string& xp) { r.min = vec3(x, xp); });
      required(s, sp, "max", [&](const Node& x, const std::string& xp) { r.max = vec3(x, xp); });
      t.task_space.push_back(r);
    }
  });
  return t;
}

SimParams read_sim(const Node& n, const std::string& path) {
  check_keys(n, path, {"dt", "decimation", "gravity", "solver_iterations"});
  SimParams s;
  opt(n, path, "dt", [&](const Node& v, const std::string& cp) { s.dt = num(v, cp); });
  opt(n, path, "decimation", [&](const Node& v, const std::string& cp) { s.decimation = integer(v, cp); });
  opt(n, path, "gravity", [&](const Node& v, const std::string& cp) { s.gravity = vec3(v, cp); });
  opt(n, path, "solver_iterations", [&](const Node& v, const std::string& cp) { s.solver_iterations = integer(v, cp); });
  return s;
}

SceneSurface read_surface(const Node& n, const std::string& path, SceneSurface s) {
  check_keys(n, path, {"id", "material"});
  opt(n, path, "id", [&](const Node& v, const std::string& cp) { s.id = str(v, cp); });
  opt(n, path, "material", [&](const Node& v, const std::string& cp) { s.material = read_material(v, cp); });
  return s;
}

SceneLayout read_scene(const Node& n, const std::string& path) {
  check_keys(n, path, {"layout", "table", "wall", "ground"});
  SceneLayout s;
  opt(n, path, "layout", [&](const Node& v, const std::string& cp) { s.layout = str(v, cp); });
  opt(n, path, "table", [&](const Node& v, const std::string& cp) { s.table = read_surface(v, cp, s.table); });
  opt(n, path, "wall", [&](const Node& v, const std::string& cp) { s.wall = read_surface(v, cp, s.wall); });
  opt(n, path, "ground", [&](const Node& v, const std::string& cp) { s.ground = read_surface(v, cp, s.ground); });
  return s;
}

template <typename T, typename F>
std::vector<T> read_list(const Node& root, std::string_view key, F&& read) {
  std::vector<T> out;
  opt(root, "", key, [&](const Node& v, const std::string& cp) {
    for (std::size_t i = 0; i < list(v, cp).items.size(); ++i) out.push_back(read(v.items[i], join(cp, i)));
  });
  return out;
}

ScenarioConfig from_tree(const Node& root) {
  check_keys(root, "", {"name", "robots", "objects", "cameras", "lights", "task", "sim", "scene", "backend_extras"});
  ScenarioConfig cfg;
  required(root, "", "name", [&](const Node& v, const std::string& cp) { cfg.name = str(v, cp); });
  cfg.robots = read_list<RobotConfig>(root, "robots", read_robot);
  cfg.objects = read_list<ObjectConfig>(root, "objects", read_object);
  cfg.cameras = read_list<CameraConfig>(root, "cameras", read_camera);
  cfg.lights = read_list<LightConfig>(root, "lights", read_light);
  opt(root, "", "task", [&](const Node& v, const std::string& cp) { cfg.task = read_task(v, cp); });
  opt(root, "", "sim", [&](const Node& v, const std::string& cp) { cfg.sim = read_sim(v, cp); });
  opt(root, "", "scene", [&](const Node& v, const std::string& cp) { cfg.scene = read_scene(v, cp); });
  opt(root, "", "backend_extras", [&](const Node& v, const std::string& cp) {
    if (v.kind != Kind::Map) mismatch(cp, "a map");
    for (const auto& [backend, kv] : v.entries) {
      const std::string bp = join(cp, backend);
      if (kv.kind != Kind::Map) mismatch(bp, "a map");
      auto& dst = cfg.backend_extras[backend];
      for (const auto& [key, value] : kv.entries) dst[key] = str(value, join(bp, key));
    }
  });
  return cfg;
}

// ---------------------------------------------------------------- writing

Node num_node(double v) { return Node::make_scalar(format_double(v)); }
Node int_node(int v) { return Node::make_scalar(std::to_string(v)); }

Node vec_node(const double* v, std::size_t n) {
  Node out = Node::make_list();
  for (std::size_t i = 0; i < n; ++i) out.items.push_back(num_node(v[i]));
  return out;
}

Node vec_node(const Vec3& v) { return vec_node(v.data(), 3); }
Node vec_node(const std::vector<double>& v) { return vec_node(v.data(), v.size()); }

Node strings_node(const std::vector<std::string>& v) {
  Node out = Node::make_list();
  for (const auto& s : v) out.items.push_back(string_node(s));
  return out;
}

Node pose_node(const Pose& p) {
  Node n = Node::make_map();
  n.set("pos", vec_node(p.pos));
  const double q[4] = {p.rot.w(), p.rot.x(), p.rot.y(), p.rot.z()};
  n.set("rot", vec_node(q, 4));
  return n;
}

Node material_node(const MaterialParams& m) {
  Node n = Node::make_map();
  n.set("roughness", num_node(m.roughness));
  n.set("specular", num_node(m.specular));
  n.set("metallic", num_node(m.metallic));
  n.set("base_color", vec_node(m.base_color.data(), 3));
  return n;
}

Node checker_node(const SuccessChecker& c) {
  Node n = Node::make_map();
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PositionWithin>) {
          n.set("type", string_node("position_within"));
          n.set("entity", string_node(v.entity));
          n.set("center", vec_node(v.center));
          n.set("radius", num_node(v.radius));
        } else if constexpr (std::is_same_v<T, PositionShift>) {
          n.set("type", string_node("position_shift"));
          n.set("entity", string_node(v.entity));
          n.set("axis", vec_node(v.axis));
          n.set("min_shift", num_node(v.min_shift));
        } else if constexpr (std::is_same_v<T, JointPosThreshold>) {
          n.set("type", string_node("joint_pos_threshold"));
          n.set("entity", string_node(v.entity));
          n.set("joint", string_node(v.joint));
          n.set("threshold", num_node(v.threshold));
          n.set("direction", string_node(v.direction == Direction::AtLeast ? "ge" : "le"));
        } else if constexpr (std::is_same_v<T, RelativePose>) {
          n.set("type", string_node("relative_pose"));
          n.set("entity_a", string_node(v.entity_a));
          n.set("entity_b", string_node(v.entity_b));
          n.set("target_rel", pose_node(v.target_rel));
          n.set("max_pos_err", num_node(v.max_pos_err));
          n.set("max_rot_err", num_node(v.max_rot_err));
        } else if constexpr (std::is_same_v<T, AllOf> || std::is_same_v<T, AnyOf>) {
          n.set("type", string_node(std::is_same_v<T, AllOf> ? "all" : "any"));
          Node items = Node::make_list();
          for (const auto& item : v.items) items.items.push_back(checker_node(item));
          n.set("items", std::move(items));
        } else {
          n.set("type", string_node("custom"));
          n.set("name", string_node(v.name));
        }
      },
      c.node);
  return n;
}

Node surface_node(const SceneSurface& s) {
  Node n = Node::make_map();
  n.set("id", string_node(s.id));
  n.set("material", material_node(s.material));
  return n;
}

Node to_tree(const ScenarioConfig& cfg) {
  Node root = Node::make_map();
  root.set("name", string_node(cfg.name));

  Node robots = Node::make_list();
  for (const auto& r : cfg.robots) {
    Node n = Node::make_map();
    n.set("name", string_node(r.name));
    if (!r.asset.empty() || r.asset_inline.empty()) n.set("asset", string_node(r.asset));
    if (!r.asset_inline.empty()) n.set("asset_inline", Node::make_scalar(r.asset_inline, true));
    n.set("base_pose", pose_node(r.base_pose));
    n.set("default_dof_pos", vec_node(r.default_dof_pos));
    n.set("ee_frame", string_node(r.ee_frame));
    n.set("gripper_joints", strings_node(r.gripper_joints));
    n.set("grasp_radius", num_node(r.grasp_radius));
    robots.items.push_back(std::move(n));
  }
  root.set("robots", std::move(robots));

  Node objects = Node::make_list();
  for (const auto& o : cfg.objects) {
    Node n = Node::make_map();
    n.set("name", string_node(o.name));
    n.set("kind", string_node(kind_name(o.kind)));
    if (o.kind == ObjectKind::Articulated) {
      n.set("asset", string_node(o.asset));
      n.set("base_pose", pose_node(o.base_pose));
      n.set("default_dof_pos", vec_node(o.default_dof_pos));
    } else {
      n.set("dims", vec_node(o.dims));
      n.set("base_pose", pose_node(o.base_pose));
      n.set("mass", num_node(o.mass));
      n.set("restitution", num_node(o.restitution));
      n.set("material", material_node(o.material));
      n.set("init_lin_vel", vec_node(o.init_lin_vel));
      n.set("init_ang_vel", vec_node(o.init_ang_vel));
    }
    objects.items.push_back(std::move(n));
  }
  root.set("objects", std::move(objects));

  Node cameras = Node::make_list();
  for (const auto& c : cfg.cameras) {
    Node n = Node::make_map();
    n.set("name", string_node(c.name));
    n.set("pose", pose_node(c.pose));
    n.set("vertical_fov", num_node(c.vertical_fov));
    n.set("width", int_node(c.width));
    n.set("height", int_node(c.height));
    cameras.items.push_back(std::move(n));
  }
  root.set("cameras", std::move(cameras));

  Node lights = Node::make_list();
  for (const auto& l : cfg.lights) {
    Node n = Node::make_map();
    if (l.kind == LightKind::Distant) {
      n.set("kind", string_node("distant"));
      n.set("polar", num_node(l.polar));
      n.set("azimuth", num_node(l.azimuth));
    } else {
      n.set("kind", string_node("cylinder_array"));
      n.set("rows", int_node(l.rows));
      n.set("cols", int_node(l.cols));
      n.set("size", num_node(l.size));
      n.set("height", num_node(l.height));
    }
    n.set("intensity", num_node(l.intensity));
    n.set("color_temperature", num_node(l.color_temperature));
    lights.items.push_back(std::move(n));
  }
  root.set("lights", std::move(lights));

  Node task = Node::make_map();
  task.set("episode_length", int_node(cfg.task.episode_length));
  task.set("instruction", Node::make_scalar(cfg.task.instruction, true));
  task.set("checker", checker_node(cfg.task.checker));
  Node subtasks = Node::make_list();
  for (const auto& s : cfg.task.subtasks) {
    Node n = Node::make_map();
    n.set("name", string_node(s.name));
    n.set("anchor", string_node(s.anchor));
    n.set("checker", checker_node(s.checker));
    subtasks.items.push_back(std::move(n));
  }
  task.set("subtasks", std::move(subtasks));
  Node space = Node::make_list();
  for (const auto& r : cfg.task.task_space) {
    Node n = Node::make_map();
    n.set("entity", string_node(r.entity));
    n.set("min", vec_node(r.min));
    n.set("max", vec_node(r.max));
    space.items.push_back(std::move(n));
  }
  task.set("task_space", std::move(space));
  root.set("task", std::move(task));

  Node sim = Node::make_map();
  sim.set("dt", num_node(cfg.sim.dt));
  sim.set("decimation", int_node(cfg.sim.decimation));
  sim.set("gravity", vec_node(cfg.sim.gravity));
  sim.set("solver_iterations", int_node(cfg.sim.solver_iterations));
  root.set("sim", std::move(sim));

  Node scene = Node::make_map();
  scene.set("layout", string_node(cfg.scene.layout));
  scene.set("table", surface_node(cfg.scene.table));
  scene.set("wall", surface_node(cfg.scene.wall));
  scene.set("ground", surface_node(cfg.scene.ground));
  root.set("scene", std::move(scene));

  Node extras = Node::make_map();
  for (const auto& [backend, kv] : cfg.backend_extras) {
    Node m = Node::make_map();
    for (const auto& [key, value] : kv) m.set(key, string_node(value));
    extras.set(backend, std::move(m));
  }
  root.set("backend_extras", std::move(extras));
  return root;
}

// ---------------------------------------------------------------- validation

class Validator {
 public:
  explicit Validator(const ScenarioConfig& cfg) : cfg_(cfg) {}

  std::vector<Violation> run() {
    if (cfg_.name.empty()) add("name", "must not be empty");
    if (cfg_.robots.empty() && cfg_.objects.empty()) add("objects", "scenario needs at least one robot or object");

    std::set<std::string> seen;
    auto unique = [&](const std::string& name, const std::string& path) {
      if (name.empty()) add(path, "entity name must not be empty", Errc::UnknownOrDuplicateEntity);
      else if (!seen.insert(name).second) add(path, "duplicate entity name '" + name + "'", Errc::UnknownOrDuplicateEntity);
    };
    for (std::size_t i = 0; i < cfg_.robots.size(); ++i) unique(cfg_.robots[i].name, join("robots", i) + ".name");
    for (std::size_t i = 0; i < cfg_.objects.size(); ++i) unique(cfg_.objects[i].name, join("objects", i) + ".name");

    for (std::size_t i = 0; i < cfg_.robots.size(); ++i) robot(cfg_.robots[i], join("robots", i));
    for (std::size_t i = 0; i < cfg_.objects.size(); ++i) object(cfg_.objects[i], join("objects", i));

    std::set<std::string> cams;
    for (std::size_t i = 0; i < cfg_.cameras.size(); ++i) {
      const auto& c = cfg_.cameras[i];
      const std::string p = join("cameras", i);
      if (!cams.insert(c.name).second) add(p + ".name", "duplicate camera name '" + c.name + "'");
      pose(c.pose, p + ".pose");
      if (!(c.vertical_fov > 0.0 && c.vertical_fov < 180.0)) add(p + ".vertical_fov", "must lie in (0, 180)");
      if (c.width < 1) add(p + ".width", "must be >= 1");
      if (c.height < 1) add(p + ".height", "must be >= 1");
    }
    for (std::size_t i = 0; i < cfg_.lights.size(); ++i) {
      const auto& l = cfg_.lights[i];
      const std::string p = join("lights", i);
      if (l.rows < 1) add(p + ".rows", "must be >= 1");
      if (l.cols < 1) add(p + ".cols", "must be >= 1");
      if (!(l.size > 0.0)) add(p + ".size", "must be > 0");
      if (!(l.intensity >= 0.0) || !std::isfinite(l.intensity)) add(p + ".intensity", "must be >= 0");
      if (!(l.color_temperature > 0.0)) add(p + ".color_temperature", "must be > 0");
      if (!std::isfinite(l.polar) || !std::isfinite(l.azimuth)) add(p, "angles must be finite");
    }

    const auto& t = cfg_.task;
    if (t.episode_length < 1) add("task.episode_length", "must be >= 1");
    checker(t.checker, "task.checker");
    for (std::size_t i = 0; i < t.subtasks.size(); ++i) {
      const std::string p = join("task.subtasks", i);
      if (!entity_exists(t.subtasks[i].anchor))
        add(p + ".anchor", "unknown entity '" + t.subtasks[i].anchor + "'", Errc::UnknownOrDuplicateEntity);
      checker(t.subtasks[i].checker, p + ".checker");
    }
    for (std::size_t i = 0; i < t.task_space.size(); ++i) {
      const auto& r = t.task_space[i];
      const std::string p = join("task.task_space", i);
      if (!cfg_.find_object(r.entity)) add(p + ".entity", "unknown object '" + r.entity + "'", Errc::UnknownOrDuplicateEntity);
      if (!is_finite(r.min) || !is_finite(r.max) || (r.min.array() > r.max.array()).any())
        add(p, "min must be <= max component-wise");
    }

    const auto& s = cfg_.sim;
    if (!(s.dt > 0.0) || !std::isfinite(s.dt)) add("sim.dt", "must be > 0");
    if (s.decimation < 1) add("sim.decimation", "must be >= 1");
    if (!is_finite(s.gravity)) add("sim.gravity", "must be finite");
    if (s.solver_iterations < 1) add("sim.solver_iterations", "must be >= 1");

    material(cfg_.scene.table.material, "scene.table.material");
    material(cfg_.scene.wall.material, "scene.wall.material");
    material(cfg_.scene.ground.material, "scene.ground.material");

    std::stable_sort(out_.begin(), out_.end(), [](const Violation& a, const Violation& b) { return a.path < b.path; });
    return out_;
  }

 private:
  void add(std::string path, std::string msg, Errc code = Errc::InvariantViolation) {
    out_.push_back({std::move(path), std::move(msg), code});
  }

  bool entity_exists(const std::string& name) const { return cfg_.find_robot(name) || cfg_.find_object(name); }

  void pose(const Pose& p, const std::string& path) {
    if (!is_finite(p.pos)) add(path + ".pos", "must be finite");
    if (!is_finite(p.rot) || std::abs(p.rot.norm() - 1.0) >= 1e-6) add(path + ".rot", "must be a unit quaternion");
  }

  void material(const MaterialParams& m, const std::string& path) {
    auto unit = [&](double v, const char* key) {
      if (!(v >= 0.0 && v <= 1.0)) add(path + "." + key, "must lie in [0, 1]");
    };
    unit(m.roughness, "roughness");
    unit(m.specular, "specular");
    unit(m.metallic, "metallic");
    for (double c : m.base_color) {
      if (!(c >= 0.0 && c <= 1.0)) {
        add(path + ".base_color", "channels must lie in [0, 1]");
        break;
      }
    }
  }

  /// Loads the entity's asset if it exists; missing files are a launch-time
  /// error, not a validation one.
  const assets::CanonicalAsset* asset(const std::string& entity, const std::string& path) {
    auto it = assets_.find(entity);
    if (it != assets_.end()) return it->second ? &*it->second : nullptr;
    std::optional<assets::CanonicalAsset> loaded;
    try {
      loaded = load_entity_asset(cfg_, entity);
    } catch (const Error& e) {
      if (e.code() != Errc::AssetNotFound) add(path, e.what());
    }
    auto& slot = assets_[entity];
    slot = std::move(loaded);
    return slot ? &*slot : nullptr;
  }

  void dofs(const assets::CanonicalAsset& a, const std::vector<double>& q, const std::string& path) {
    if (!q.empty() && q.size() != a.dof())
      add(path, "has " + std::to_string(q.size()) + " entries, asset has " + std::to_string(a.dof()) + " DoF");
  }

  void robot(const RobotConfig& r, const std::string& path) {
    if (r.asset.empty() == r.asset_inline.empty()) add(path + ".asset", "exactly one of asset and asset_inline is required");
    pose(r.base_pose, path + ".base_pose");
    if (!(r.grasp_radius >= 0.0)) add(path + ".grasp_radius", "must be >= 0");
    const auto* a = (r.asset.empty() == r.asset_inline.empty()) ? nullptr : asset(r.name, path + ".asset");
    if (!a) return;
    dofs(*a, r.default_dof_pos, path + ".default_dof_pos");
    if (!r.ee_frame.empty() && !a->find_body(r.ee_frame))
      add(path + ".ee_frame", "body '" + r.ee_frame + "' not in asset");
    for (std::size_t i = 0; i < r.gripper_joints.size(); ++i) {
      if (a->actuated_index(r.gripper_joints[i]) < 0)
        add(join(path + ".gripper_joints", i), "'" + r.gripper_joints[i] + "' is not an actuated joint");
    }
  }

  void object(const ObjectConfig& o, const std::string& path) {
    pose(o.base_pose, path + ".base_pose");
    if (o.kind == ObjectKind::Articulated) {
      if (o.asset.empty()) add(path + ".asset", "must not be empty");
      else if (const auto* a = asset(o.name, path + ".asset")) dofs(*a, o.default_dof_pos, path + ".default_dof_pos");
      return;
    }
    const std::size_t want = o.kind == ObjectKind::Sphere ? 1 : o.kind == ObjectKind::Box ? 3 : 2;
    const bool plane_ok = o.kind == ObjectKind::Plane && o.dims.empty();
    if (o.dims.size() != want && !plane_ok) {
      add(path + ".dims", std::string(kind_name(o.kind)) + " needs " + std::to_string(want) + " dims");
    } else {
      for (double d : o.dims) {
        if (!(d > 0.0) || !std::isfinite(d)) {
          add(path + ".dims", "dims must be positive");
          break;
        }
      }
    }
    if (!(o.mass >= 0.0) || !std::isfinite(o.mass)) add(path + ".mass", "must be >= 0");
    if (o.kind == ObjectKind::Plane && o.mass != 0.0) add(path + ".mass", "planes are static (mass 0)");
    if (!(o.restitution >= 0.0 && o.restitution <= 1.0)) add(path + ".restitution", "must lie in [0, 1]");
    if (!is_finite(o.init_lin_vel)) add(path + ".init_lin_vel", "must be finite");
    if (!is_finite(o.init_ang_vel)) add(path + ".init_ang_vel", "must be finite");
    material(o.material, path + ".material");
  }

  void entity_ref(const std::string& name, const std::string& path) {
    if (!entity_exists(name)) add(path, "unknown entity '" + name + "'", Errc::UnknownOrDuplicateEntity);
  }

  void checker(const SuccessChecker& c, const std::string& path) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, PositionWithin>) {
            entity_ref(v.entity, path);
            if (!(v.radius >= 0.0)) add(path + ".radius", "must be >= 0");
          } else if constexpr (std::is_same_v<T, PositionShift>) {
            entity_ref(v.entity, path);
            if (std::abs(v.axis.norm() - 1.0) >= 1e-9) add(path + ".axis", "must be unit length");
          } else if constexpr (std::is_same_v<T, JointPosThreshold>) {
            entity_ref(v.entity, path);
            if (!entity_exists(v.entity)) return;
            if (const auto* a = asset(v.entity, path); a && a->actuated_index(v.joint) < 0)
              add(path + ".joint", "'" + v.joint + "' is not an actuated joint of '" + v.entity + "'");
            if (!cfg_.find_robot(v.entity) && cfg_.find_object(v.entity)->is_primitive())
              add(path + ".entity", "'" + v.entity + "' has no joints");
          } else if constexpr (std::is_same_v<T, RelativePose>) {
            entity_ref(v.entity_a, path);
            entity_ref(v.entity_b, path);
            pose(v.target_rel, path + ".target_rel");
          } else if constexpr (std::is_same_v<T, AllOf> || std::is_same_v<T, AnyOf>) {
            for (std::size_t i = 0; i < v.items.size(); ++i) checker(v.items[i], join(path + ".items", i));
          }
        },
        c.node);
  }

  const ScenarioConfig& cfg_;
  std::vector<Violation> out_;
  std::map<std::string, std::optional<assets::CanonicalAsset>> assets_;
};

void throw_if_invalid(const ScenarioConfig& cfg) {
  const auto violations = validate(cfg);
  if (violations.empty()) return;
  Errc code = Errc::InvariantViolation;
  for (const auto& v : violations) {
    if (v.code == Errc::UnknownOrDuplicateEntity) code = v.code;
  }
  std::string msg;
  for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v.path + ": " + v.message;
  throw Error(code, msg);
}

}  // namespace

std::vector<std::string> referenced_entities(const SuccessChecker& checker) {
  std::vector<std::string> out;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RelativePose>) {
          out.push_back(v.entity_a);
          out.push_back(v.entity_b);
        } else if constexpr (std::is_same_v<T, AllOf> || std::is_same_v<T, AnyOf>) {
          for (const auto& item : v.items) {
            auto sub = referenced_entities(item);
            out.insert(out.end(), sub.begin(), sub.end());
          }
        } else if constexpr (!std::is_same_v<T, Custom>) {
          out.push_back(v.entity);
        }
      },
      checker.node);
  return out;
}

ScenarioConfig parse_scenario(std::string_view source) {
  ScenarioConfig cfg = from_tree(parse_tree(source));
  throw_if_invalid(cfg);
  return cfg;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read scenario '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  ScenarioConfig cfg = from_tree(parse_tree(buf.str()));
  cfg.base_dir = path.parent_path();
  throw_if_invalid(cfg);
  return cfg;
}

std::string serialize_scenario(const ScenarioConfig& cfg) { return write_tree(to_tree(cfg)); }

ScenarioConfig apply_overrides(const ScenarioConfig& cfg, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return cfg;
  Node tree = to_tree(cfg);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(Errc::SyntaxError, "override '" + ov + "' is not of the form path=value");
    const std::string path(trim(std::string_view(ov).substr(0, eq)));
    Node* node = &tree;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      Node* next = nullptr;
      if (node->kind == Kind::Map) {
        next = node->find(part);
      } else if (node->kind == Kind::List) {
        const auto idx = parse_int(part);
        if (idx && *idx >= 0 && static_cast<std::size_t>(*idx) < node->items.size())
          next = &node->items[static_cast<std::size_t>(*idx)];
      }
      if (!next) throw Error(Errc::PathNotFound, "no field at '" + path + "'");
      node = next;
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    Node value = parse_value(std::string_view(ov).substr(eq + 1));
    if (node->kind == Kind::Scalar && node->quoted && value.kind == Kind::Scalar) value.quoted = true;
    *node = std::move(value);
  }
  ScenarioConfig out = from_tree(tree);
  out.base_dir = cfg.base_dir;
  throw_if_invalid(out);
  return out;
}

assets::CanonicalAsset load_entity_asset(const ScenarioConfig& cfg, std::string_view entity) {
  std::string file;
  if (const auto* r = cfg.find_robot(entity)) {
    if (!r->asset_inline.empty()) {
      assets::CanonicalAsset a = assets::parse_urdf(r->asset_inline);
      a.base_dir = cfg.base_dir;
      return a;
    }
    file = r->asset;
  } else if (const auto* o = cfg.find_object(entity); o && !o->is_primitive()) {
    file = o->asset;
  } else {
    throw Error(Errc::UnknownEntity, "'" + std::string(entity) + "' has no asset");
  }
  std::filesystem::path p(file);
  if (p.is_relative()) p = cfg.base_dir / p;
  return assets::load_asset_file(p);
}

std::vector<Violation> validate(const ScenarioConfig& cfg) { return Validator(cfg).run(); }

}  // namespace metasim::config
