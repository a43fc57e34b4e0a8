#include "metasim/teleop/session.hpp"

#include "metasim/common/error.hpp"
#include "metasim/retarget/retarget.hpp"

namespace metasim::teleop {

namespace {

const backends::EntityModel& pick_robot(const backends::SceneModel& model, const std::string& name) {
  for (const auto& e : model.entities()) {
    if (e.type != backends::EntityType::Robot) continue;
    if (!name.empty() && e.name != name) continue;
    if (e.ee_body < 0) throw Error(Errc::InvalidArgument, "robot '" + e.name + "' has no ee_frame");
    return e;
  }
  throw Error(Errc::InvalidArgument, name.empty() ? "scenario '" + model.config().name + "' has no robot"
                                                  : "no robot named '" + name + "'");
}

state::EnvState reset_env(env::Env& env, const SessionOptions& opts) {
  if (!(opts.rate > 0.0 && opts.rate <= 50.0))
    throw Error(Errc::InvalidArgument, "control rate must be in (0, 50] Hz");
  if (!(opts.speed >= 0.0)) throw Error(Errc::InvalidArgument, "speed must be >= 0");
  env.reset();
  return env.current_state();
}

}  // namespace

TeleopSession::TeleopSession(env::Env& env, SessionOptions opts)
    : env_(env), opts_(std::move(opts)), recorder_(env.scenario().name, reset_env(env, opts_)) {
  entity_ = &pick_robot(env_.model(), opts_.robot);
  robot_ = entity_->name;
  const auto s = env_.current_state().at(robot_);
  base_ = Pose(s.pos, s.rot);
  q_ = s.dof_pos;
  target_ = env_.model().ee_pose(*entity_, base_, q_);
  open_ = env_.model().gripper_opening(*entity_, q_) >= 0.5;
}

state::Action TeleopSession::apply_command(const TeleopCommand& cmd) {
  if (status_ == SessionStatus::Closed) throw Error(Errc::SessionClosed, "session is closed");
  if (any_seq_ && cmd.seq <= last_seq_)
    throw Error(Errc::DuplicateOrStale, "seq " + std::to_string(cmd.seq) + " is not above " +
                                            std::to_string(last_seq_));
  last_seq_ = cmd.seq;
  any_seq_ = true;

  Pose want = target_;
  const double step = opts_.speed / opts_.rate;
  for (int i = 0; i < 3; ++i) want.pos(i) += cmd.translate[i] * step;
  if (cmd.orientation_enabled) want.rot = cmd.orientation.normalized();
  if (cmd.gripper_toggle) open_ = !open_;

  const VecX seed = env_.current_state().at(robot_).dof_pos;
  const auto ik = retarget::ik_solve_detail(*entity_->kin, entity_->ee_body, base_, want, seed, opts_.ik);
  VecX q = q_;
  if (ik.converged) {
    target_ = want;
    q = ik.q;
  } else {
    warnings_.push_back("IK did not converge for seq " + std::to_string(cmd.seq) +
                        "; EE target kept at the last feasible pose");
  }
  retarget::apply_gripper_open(*entity_, open_ ? 1.0 : 0.0, q);
  q_ = q;
  state::Action a;
  a.dof_targets[robot_] = q;
  return a;
}

env::StepResult TeleopSession::tick(const TeleopCommand& cmd) {
  const state::Action a = apply_command(cmd);
  auto r = env_.advance(a);
  recorder_.push(a, r.observation.states.envs.at(0));
  success_ = success_ || r.success;
  return r;
}

void TeleopSession::pause() {
  if (status_ == SessionStatus::Running) status_ = SessionStatus::Paused;
}

void TeleopSession::resume() {
  if (status_ == SessionStatus::Paused) status_ = SessionStatus::Running;
}

state::Trajectory TeleopSession::close() {
  status_ = SessionStatus::Closed;
  const bool ok = success_ || env_.check(env_.current_state());
  return recorder_.finish(ok);
}

std::vector<std::string> TeleopSession::take_warnings() {
  std::vector<std::string> out;
  out.swap(warnings_);
  return out;
}

CommandQueue::CommandQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw Error(Errc::InvalidArgument, "command queue capacity must be >= 1");
}

void CommandQueue::push(const TeleopCommand& cmd) {
  std::lock_guard lock(mu_);
  if (any_ && cmd.seq <= last_)
    throw Error(Errc::DuplicateOrStale, "seq " + std::to_string(cmd.seq) + " is not above " + std::to_string(last_));
  last_ = cmd.seq;
  any_ = true;
  if (q_.size() < capacity_) {
    q_.push_back(cmd);
    return;
  }
  TeleopCommand merged = cmd;
  merged.gripper_toggle = q_.back().gripper_toggle != cmd.gripper_toggle;
  q_.back() = merged;
  ++coalesced_;
}

std::optional<TeleopCommand> CommandQueue::pop() {
  std::lock_guard lock(mu_);
  if (q_.empty()) return std::nullopt;
  TeleopCommand c = q_.front();
  q_.pop_front();
  return c;
}

std::size_t CommandQueue::size() const {
  std::lock_guard lock(mu_);
  return q_.size();
}

std::uint64_t CommandQueue::coalesced() const {
  std::lock_guard lock(mu_);
  return coalesced_;
}

std::uint64_t CommandQueue::last_seq() const {
  std::lock_guard lock(mu_);
  return last_;
}

void CommandQueue::set_floor(std::uint64_t seq) {
  std::lock_guard lock(mu_);
  if (!any_ || seq > last_) last_ = seq;
  any_ = true;
}

KeyboardMapper::KeyboardMapper(const Quat& start, double rot_step) : orientation_(start), rot_step_(rot_step) {}

TeleopCommand KeyboardMapper::next(std::uint64_t t_ms) {
  auto held = [&](Key k) { return held_.count(k) ? 1 : 0; };
  TeleopCommand c;
  c.seq = ++seq_;
  c.t_ms = t_ms;
  c.translate = {held(Up) - held(Down), held(Left) - held(Right), held(E) - held(D)};
  const Vec3 spin(held(Q) - held(W), held(A) - held(S), held(Z) - held(X));
  if (!spin.isZero()) {
    orientation_ = (orientation_ * exp_map(spin * rot_step_)).normalized();
    rotated_ = true;
  }
  c.orientation_enabled = rotated_;
  c.orientation = orientation_;
  c.gripper_toggle = held(Space) != 0;
  return c;
}

std::optional<KeyboardMapper::Key> KeyboardMapper::from_terminal(std::string_view b) {
  if (b == "\x1b[A") return Up;
  if (b == "\x1b[B") return Down;
  if (b == "\x1b[C") return Right;
  if (b == "\x1b[D") return Left;
  if (b.size() != 1) return std::nullopt;
  switch (b[0]) {
    case 'e': return E;
    case 'd': return D;
    case 'q': return Q;
    case 'w': return W;
    case 'a': return A;
    case 's': return S;
    case 'z': return Z;
    case 'x': return X;
    case ' ': return Space;
    default: return std::nullopt;
  }
}

}  // namespace metasim::teleop
