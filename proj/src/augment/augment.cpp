#include "metasim/augment/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "metasim/augment/randomize.hpp"
#include "metasim/common/error.hpp"
#include "metasim/common/rng.hpp"

namespace metasim::augment {

namespace {

constexpr std::uint64_t kSampleStream = 0x41554731;

const backends::EntityModel& robot_entity(const backends::SceneModel& model, const std::string& name) {
  if (name.empty()) {
    for (const auto& e : model.entities())
      if (e.type == backends::EntityType::Robot) return robot_entity(model, e.name);
    throw Error(Errc::InvalidArgument, "scenario '" + model.config().name + "' has no robot");
  }
  const auto& m = model.at(name);
  if (m.type != backends::EntityType::Robot || m.ee_body < 0)
    throw Error(Errc::InvalidArgument, "'" + name + "' is not a robot with an ee_frame");
  return m;
}

Pose pose_of(const state::EntityState& s) { return Pose(s.pos, s.rot); }

state::EnvState merged_init(const backends::SceneModel& model, const state::EnvState& partial) {
  return state::merge_states(state::single(model.initial_state()), state::single(partial)).envs.at(0);
}

double max_arm_step(const backends::EntityModel& robot, const VecX& a, const VecX& b) {
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    if (std::find(robot.gripper_dofs.begin(), robot.gripper_dofs.end(), i) != robot.gripper_dofs.end()) continue;
    m = std::max(m, std::abs(a(i) - b(i)));
  }
  return m;
}

/// Appends `q`, preceded by evenly spaced arm-joint steps from `prev` when
/// the jump exceeds `cap`. Bridge steps keep the previous gripper values.
void push_capped(const backends::EntityModel& robot, const VecX& prev, const VecX& q, double cap,
                 std::vector<state::Action>& out) {
  const double jump = max_arm_step(robot, prev, q);
  const int n = static_cast<int>(std::ceil(jump / cap - 1e-12));
  for (int k = 1; k < n; ++k) {
    VecX mid = prev + (q - prev) * (static_cast<double>(k) / n);
    for (int g : robot.gripper_dofs) mid(g) = prev(g);
    state::Action a;
    a.dof_targets[robot.name] = mid;
    out.push_back(std::move(a));
  }
  state::Action a;
  a.dof_targets[robot.name] = q;
  out.push_back(std::move(a));
}

double half_height(const backends::EntityModel& e) {
  if (e.type != backends::EntityType::Primitive) return 0.0;
  switch (e.shape) {
    case config::ObjectKind::Sphere: return e.dims.at(0);
    case config::ObjectKind::Box: return 0.5 * e.dims.at(2);
    default: return 0.0;
  }
}

}  // namespace

std::vector<Segment> segment_demo(const state::Trajectory& traj, const std::vector<config::SubtaskSpec>& spec,
                                  env::Env& env, const std::string& robot) {
  if (spec.empty()) throw Error(Errc::InvalidArgument, "subtask spec is empty");
  const auto& model = env.model();
  const auto& r = robot_entity(model, robot);
  for (const auto& s : spec)
    if (!model.find(s.anchor))
      throw Error(Errc::UnknownEntity, "subtask '" + s.name + "' anchors on unknown entity '" + s.anchor + "'");

  const state::EnvState init =
      merged_init(model, traj.init_state.envs.empty() ? state::EnvState{} : traj.init_state.envs.at(0));
  std::vector<state::EnvState> states;
  if (traj.states && traj.states->size() == traj.actions.size()) {
    for (const auto& s : *traj.states) states.push_back(state::merge_states(state::single(init), s).envs.at(0));
  } else {
    for (auto& s : env::replay(env, traj).states) states.push_back(s.envs.at(0));
  }
  const auto path = retarget::ee_path_from_trajectory(traj, model, r.name);
  const env::CheckContext ctx{&model, &init, nullptr};

  std::vector<Segment> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& sub = spec[i];
    std::size_t end = states.size();
    for (std::size_t k = start; k < states.size(); ++k) {
      if (env::check_success(ctx, states[k], sub.checker)) {
        end = k;
        break;
      }
    }
    if (end == states.size())
      throw Error(Errc::SegmentationFailed, "subtask '" + sub.name + "' never completes after step " +
                                                std::to_string(start) + " of " + std::to_string(states.size()));
    if (i + 1 == spec.size()) end = states.size() - 1;

    Segment seg;
    seg.subtask = sub.name;
    seg.anchor = sub.anchor;
    seg.robot = r.name;
    seg.begin = start;
    seg.anchor_pose = pose_of((start == 0 ? init : states[start - 1]).at(sub.anchor));
    const Pose inv = seg.anchor_pose.inverse();
    for (std::size_t k = start; k <= end; ++k) {
      seg.actions.push_back(traj.actions[k]);
      seg.ee_rel.push_back({inv * path[k].pose, path[k].gripper_open});
    }
    out.push_back(std::move(seg));
    start = end + 1;
  }
  return out;
}

std::vector<Pose> reanchor(const Segment& segment, const Pose& anchor) {
  std::vector<Pose> out;
  out.reserve(segment.ee_rel.size());
  for (const auto& w : segment.ee_rel) out.push_back(anchor * w.pose);
  return out;
}

AugmentResult generate_augmented(const std::vector<Segment>& segments, const state::EnvState& new_init,
                                 env::Env& env, const AugmentOptions& opts) {
  if (segments.empty()) throw Error(Errc::InvalidArgument, "no segments to augment");
  if (!(opts.max_joint_step > 0.0)) throw Error(Errc::InvalidArgument, "max_joint_step must be > 0");
  const auto& model = env.model();
  const auto& robot = robot_entity(model, segments.front().robot);
  const state::EnvState init = merged_init(model, new_init);
  const auto& rs = init.at(robot.name);
  const Pose base = pose_of(rs);

  AugmentResult out;
  state::Trajectory t;
  t.scenario_name = model.config().name;
  t.init_state = state::single(init);
  VecX prev = rs.dof_pos;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    auto it = init.find(seg.anchor);
    if (it == init.end()) throw Error(Errc::UnknownEntity, "new initial state lacks anchor '" + seg.anchor + "'");
    const auto targets = reanchor(seg, pose_of(it->second));
    for (std::size_t j = 0; j < targets.size(); ++j) {
      const auto ik = retarget::ik_solve_detail(*robot.kin, robot.ee_body, base, targets[j], prev, opts.ik);
      if (!ik.converged) {
        out.reason = "IkUnreachable at segment " + std::to_string(s) + " ('" + seg.subtask + "') waypoint " +
                     std::to_string(j);
        return out;
      }
      VecX q = ik.q;
      retarget::apply_gripper_open(robot, seg.ee_rel[j].gripper_open, q);
      push_capped(robot, prev, q, opts.max_joint_step, t.actions);
      prev = q;
    }
  }

  if (opts.validate) {
    const auto rep = env::replay(env, t);
    if (!rep.success) {
      out.reason = "ReplayFailed: task checker false after " + std::to_string(t.actions.size()) + " steps";
      return out;
    }
    t.states = rep.states;
    t.success = true;
  }
  out.trajectory = std::move(t);
  out.accepted = true;
  return out;
}

DatasetResult generate_dataset(const config::ScenarioConfig& cfg, const std::vector<std::vector<Segment>>& sources,
                               const DatasetOptions& opts) {
  if (sources.empty()) throw Error(Errc::InvalidArgument, "no source demos");
  DatasetResult out;
  out.requested = opts.n;
  std::vector<AugmentResult> results(opts.n);

  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(opts.n, 1)));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned w) {
    try {
      env::Env env(backends::launch(opts.backend, cfg));
      const state::EnvState base = env.model().initial_state();
      for (std::size_t k = next++; k < opts.n; k = next++) {
        Rng rng(opts.seed, {kSampleStream, k});
        const auto& segs = sources[rng.index(sources.size())];
        const state::EnvState init = sample_task_space(cfg, base, rng);
        results[k] = generate_augmented(segs, init, env, opts.augment);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t k = 0; k < results.size(); ++k) {
    auto& r = results[k];
    if (r.accepted) {
      out.accepted.push_back(std::move(*r.trajectory));
      out.accepted_indices.push_back(k);
    } else {
      ++out.rejections[r.reason.substr(0, r.reason.find_first_of(" :"))];
    }
  }
  return out;
}

state::Trajectory scripted_pick_place(const backends::SceneModel& model, const state::EnvState& init_partial,
                                      const ScriptOptions& opts) {
  const auto& cfg = model.config();
  if (cfg.task.subtasks.size() != 2)
    throw Error(Errc::InvalidArgument, "scripted pick-place needs exactly two subtasks, scenario has " +
                                           std::to_string(cfg.task.subtasks.size()));
  const auto& robot = robot_entity(model, "");
  const auto& object = model.at(cfg.task.subtasks[0].anchor);
  const auto& target = model.at(cfg.task.subtasks[1].anchor);
  const state::EnvState init = merged_init(model, init_partial);
  const auto& rs = init.at(robot.name);
  const Pose base = pose_of(rs);

  VecX q = rs.dof_pos;
  const Pose start = model.ee_pose(robot, base, q);
  const Quat rot = start.rot;
  const Vec3 obj = init.at(object.name).pos;
  const Vec3 up(0, 0, opts.approach_height);
  const Vec3 place =
      init.at(target.name).pos + Vec3(0, 0, half_height(target) + half_height(object) + opts.release_gap);

  state::Trajectory t;
  t.scenario_name = cfg.name;
  t.init_state = state::single(init);
  double open = 1.0;
  Vec3 at = start.pos;
  auto emit = [&]() {
    state::Action a;
    a.dof_targets[robot.name] = q;
    t.actions.push_back(std::move(a));
  };
  auto move_to = [&](const Vec3& goal) {
    const int n = std::max(1, static_cast<int>(std::ceil((goal - at).norm() / opts.speed)));
    const Vec3 from = at;
    for (int k = 1; k <= n; ++k) {
      const Vec3 p = from + (goal - from) * (static_cast<double>(k) / n);
      const auto ik = retarget::ik_solve_detail(*robot.kin, robot.ee_body, base, Pose(p, rot), q, opts.ik);
      if (!ik.converged)
        throw Error(Errc::IkUnreachable, "scripted waypoint (" + std::to_string(p.x()) + ", " +
                                             std::to_string(p.y()) + ", " + std::to_string(p.z()) +
                                             ") has no IK solution");
      q = ik.q;
      retarget::apply_gripper_open(robot, open, q);
      emit();
    }
    at = goal;
  };
  auto grip = [&](double value) {
    for (int k = 0; k < opts.dwell; ++k) emit();
    open = value;
    retarget::apply_gripper_open(robot, open, q);
    for (int k = 0; k < opts.dwell; ++k) emit();
  };

  move_to(obj + up);
  move_to(obj);
  grip(0.0);
  move_to(obj + up);
  move_to(place + up);
  move_to(place);
  grip(1.0);
  move_to(place + up);
  return t;
}

}  // namespace metasim::augment
