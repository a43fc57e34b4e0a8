#include <doctest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "metasim/common/error.hpp"
#include "metasim/teleop/client.hpp"
#include "metasim/teleop/server.hpp"

using namespace metasim;
using namespace metasim::teleop;
using namespace std::chrono_literals;

namespace {

const std::filesystem::path kFixtures = METASIM_FIXTURES;

config::ScenarioConfig pick_place() { return config::load_scenario_file(kFixtures / "scenarios" / "pick_place.scn"); }

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

TeleopCommand cmd(std::uint64_t seq, std::array<int, 3> t = {0, 0, 0}, bool grip = false) {
  TeleopCommand c;
  c.seq = seq;
  c.t_ms = seq * 20;
  c.translate = t;
  c.gripper_toggle = grip;
  return c;
}

ServerOptions server_opts() {
  ServerOptions o;
  o.port = 0;
  return o;
}

/// Sends `n` CMD frames paced at `hz` after a HELLO, then BYE. Returns the
/// number of STATE frames seen before BYE.
std::size_t drive(TeleopClient& c, std::uint64_t first_seq, int n, double hz, std::array<int, 3> t = {0, 0, 1}) {
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(1.0 / hz));
  auto next = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) {
    c.send(encode_command(cmd(first_seq + i, t, i == n / 2)));
    next += period;
    std::this_thread::sleep_until(next);
  }
  c.send("BYE");
  std::size_t states = 0;
  while (auto f = c.receive(5s)) {
    if (frame_kind(*f) == "STATE") ++states;
    if (frame_kind(*f) == "BYE") break;
  }
  return states;
}

}  // namespace

TEST_CASE("CMD codec round trip and strictness") {
  TeleopCommand c = cmd(7, {1, 0, -1}, true);
  c.orientation_enabled = true;
  c.orientation = Quat(Eigen::AngleAxisd(0.3, Vec3(0, 0, 1)));
  CHECK(decode_command(encode_command(c)) == c);

  const auto plus_x = decode_command("CMD 1 0 1 0 0 1 1 0 0 0 0");
  CHECK(plus_x.translate == std::array<int, 3>{1, 0, 0});
  CHECK(plus_x.orientation_enabled);
  CHECK(plus_x.orientation.w() == 1.0);

  for (const char* bad : {"", "CMD", "CMD 1 0 2 0 0 0 1 0 0 0 0", "CMD 1 0 0 0 0 1 2 0 0 0 0", "CMD 1 0 0 0 0 0 1 0 0 0 2",
                          "CMD x 0 0 0 0 0 1 0 0 0 0", "CMD 1 0 0 0 0 0 1 0 0 0 0 9", "CMD  1 0 0 0 0 0 1 0 0 0 0",
                          "STATE 1 0", "CMD -1 0 0 0 0 0 1 0 0 0 0"})
    CHECK_MESSAGE(error_of([&] { decode_command(bad); }) == Errc::MalformedFrame, bad);
  // with orientation disabled the quaternion is carried but not checked
  CHECK_NOTHROW(decode_command("CMD 1 0 0 0 0 0 2 0 0 0 0"));

  CHECK(decode_client_message("HELLO").kind == ControlKind::Hello);
  CHECK(decode_client_message("HELLO abc").token == "abc");
  CHECK(decode_client_message("BYE").kind == ControlKind::Bye);
  CHECK(error_of([] { decode_client_message("PING"); }) == Errc::MalformedFrame);
}

TEST_CASE("STATE frame carries every entity and robot") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  env.reset();
  const auto s = env.current_state();
  const auto f = decode_state(encode_state(env.model(), s, 12, 340));
  CHECK(f.seq == 12);
  CHECK(f.t_ms == 340);
  REQUIRE(f.entities.size() == s.size());
  for (const auto& [name, pose] : f.entities) {
    CHECK(pose.pos == s.at(name).pos);
    CHECK(pose.rot.coeffs() == s.at(name).rot.coeffs());
  }
  REQUIRE(f.dofs.size() == 1);
  CHECK(f.dofs[0].first == "arm");
  CHECK(f.dofs[0].second == s.at("arm").dof_pos);
  CHECK(error_of([] { decode_state("STATE 1"); }) == Errc::MalformedFrame);
}

TEST_CASE("session integrates translation intent") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  SessionOptions o;
  o.rate = 50;
  o.speed = 0.1;
  TeleopSession s(env, o);
  const Pose start = s.ee_target();
  // 50 ticks at 50 Hz and 0.1 m/s move the target by 0.1 m
  for (std::uint64_t i = 1; i <= 50; ++i) s.tick(cmd(i, {0, 0, 1}));
  CHECK(s.ee_target().pos.z() - start.pos.z() == doctest::Approx(50 * 0.1 / 50).epsilon(1e-12));
  CHECK(s.ee_target().pos.x() == start.pos.x());
  CHECK(s.ee_target().rot.coeffs() == start.rot.coeffs());
  CHECK(s.applied() == 50);
  CHECK(s.take_warnings().empty());

  CHECK(error_of([&] { s.apply_command(cmd(50)); }) == Errc::DuplicateOrStale);
  CHECK(error_of([&] { s.apply_command(cmd(3)); }) == Errc::DuplicateOrStale);

  const bool open = s.gripper_open();
  s.tick(cmd(51, {0, 0, 0}, true));
  CHECK(s.gripper_open() != open);
  s.tick(cmd(52, {0, 0, 0}, true));
  CHECK(s.gripper_open() == open);

  const auto t = s.close();
  CHECK(t.actions.size() == 52);
  CHECK(t.success.has_value());
  CHECK(error_of([&] { s.apply_command(cmd(60)); }) == Errc::SessionClosed);
}

TEST_CASE("session orientation follows the absolute quaternion only when enabled") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  TeleopSession s(env);
  const Quat start = s.ee_target().rot;
  TeleopCommand c = cmd(1);
  c.orientation = Quat(Eigen::AngleAxisd(0.4, Vec3(1, 0, 0)));
  s.tick(c);
  CHECK(s.ee_target().rot.coeffs() == start.coeffs());
  c.seq = 2;
  const Quat tilted = start * Quat(Eigen::AngleAxisd(0.1, Vec3(0, 0, 1)));
  c.orientation = tilted;
  c.orientation_enabled = true;
  s.tick(c);
  CHECK(s.ee_target().rot.angularDistance(tilted) < 1e-12);
}

TEST_CASE("unreachable target is reverted with a warning") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  SessionOptions o;
  o.speed = 10.0;  // 0.2 m per tick
  TeleopSession s(env, o);
  std::uint64_t seq = 0;
  bool warned = false;
  for (int i = 0; i < 20 && !warned; ++i) {
    s.tick(cmd(++seq, {1, 0, 0}));
    warned = !s.take_warnings().empty();
  }
  CHECK(warned);
  // the kept target is still one the arm reached
  CHECK(s.ee_target().pos.x() < 2.0);
}

TEST_CASE("session rejects bad options") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  SessionOptions o;
  o.rate = 60;
  CHECK(error_of([&] { TeleopSession s(env, o); }) == Errc::InvalidArgument);
  o.rate = 0;
  CHECK(error_of([&] { TeleopSession s(env, o); }) == Errc::InvalidArgument);
  o.rate = 50;
  o.robot = "nobody";
  CHECK(error_of([&] { TeleopSession s(env, o); }) != Errc::Io);
}

TEST_CASE("command queue bounds and coalesces") {
  CommandQueue q(3);
  q.push(cmd(1, {1, 0, 0}));
  q.push(cmd(2, {0, 1, 0}, true));
  q.push(cmd(3, {0, 0, 1}));
  CHECK(error_of([&] { q.push(cmd(3)); }) == Errc::DuplicateOrStale);
  CHECK(error_of([&] { q.push(cmd(1)); }) == Errc::DuplicateOrStale);
  q.push(cmd(4, {-1, 0, 0}, true));
  q.push(cmd(5, {0, -1, 0}, true));
  CHECK(q.size() == 3);
  CHECK(q.coalesced() == 2);
  CHECK(q.last_seq() == 5);
  CHECK(q.pop()->seq == 1);
  CHECK(q.pop()->seq == 2);
  const auto last = q.pop();
  CHECK(last->seq == 5);
  CHECK(last->translate == std::array<int, 3>{0, -1, 0});
  CHECK(last->gripper_toggle == false);  // two toggles cancel
  CHECK_FALSE(q.pop().has_value());
  q.set_floor(10);
  CHECK(error_of([&] { q.push(cmd(9)); }) == Errc::DuplicateOrStale);
  CHECK_NOTHROW(q.push(cmd(11)));
}

TEST_CASE("keyboard mapping") {
  KeyboardMapper k;
  k.press(KeyboardMapper::Up);
  k.press(KeyboardMapper::E);
  auto c = k.next(0);
  CHECK(c.seq == 1);
  CHECK(c.translate == std::array<int, 3>{1, 0, 1});
  CHECK_FALSE(c.orientation_enabled);
  k.release_all();
  k.press(KeyboardMapper::Left);
  k.press(KeyboardMapper::D);
  c = k.next(20);
  CHECK(c.seq == 2);
  CHECK(c.translate == std::array<int, 3>{0, 1, -1});
  k.press(KeyboardMapper::Right);  // opposing keys cancel
  CHECK(k.next(40).translate[1] == 0);
  k.release_all();

  // yaw steps compose about the local z axis
  KeyboardMapper r(Quat::Identity(), 0.1);
  r.press(KeyboardMapper::Z);
  for (int i = 0; i < 5; ++i) c = r.next(0);
  CHECK(c.orientation_enabled);
  CHECK(c.orientation.angularDistance(Quat(Eigen::AngleAxisd(0.5, Vec3::UnitZ()))) < 1e-12);
  r.release_all();
  r.press(KeyboardMapper::X);
  for (int i = 0; i < 5; ++i) c = r.next(0);
  CHECK(c.orientation.angularDistance(Quat::Identity()) < 1e-12);

  KeyboardMapper g;
  g.press(KeyboardMapper::Space);
  CHECK(g.next(0).gripper_toggle);

  CHECK(KeyboardMapper::from_terminal("\x1b[A") == KeyboardMapper::Up);
  CHECK(KeyboardMapper::from_terminal("\x1b[D") == KeyboardMapper::Left);
  CHECK(KeyboardMapper::from_terminal("q") == KeyboardMapper::Q);
  CHECK(KeyboardMapper::from_terminal(" ") == KeyboardMapper::Space);
  CHECK_FALSE(KeyboardMapper::from_terminal("?").has_value());
}

TEST_CASE("teleop port default and override") {
  unsetenv("METASIM_TELEOP_PORT");
  CHECK(default_port() == 8571);
  setenv("METASIM_TELEOP_PORT", "9123", 1);
  CHECK(default_port() == 9123);
  setenv("METASIM_TELEOP_PORT", "notaport", 1);
  CHECK(default_port() == 8571);
  unsetenv("METASIM_TELEOP_PORT");
}

TEST_CASE("server serves the operator page and rejects other paths") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  TeleopServer srv(env, server_opts());
  srv.start();
  const auto page = http_get("127.0.0.1", srv.port(), "/");
  CHECK(page.find("/teleop") != std::string::npos);
  CHECK(page == builtin_index_page());
  CHECK(error_of([&] { http_get("127.0.0.1", srv.port(), "/nope"); }) == Errc::Io);

  const auto dir = std::filesystem::temp_directory_path() / "metasim_webroot";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "index.html") << "<p>custom</p>";
  }
  env::Env env2(backends::launch("kin", cfg));
  auto o = server_opts();
  o.web_root = dir;
  TeleopServer srv2(env2, o);
  srv2.start();
  CHECK(http_get("127.0.0.1", srv2.port(), "/") == "<p>custom</p>");
  srv.stop();
  srv2.stop();
}

TEST_CASE("server session records a trajectory that replays exactly") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  const auto rec = std::filesystem::temp_directory_path() / "metasim_teleop_test.rvt";
  std::filesystem::remove(rec);
  auto o = server_opts();
  o.record = rec;
  TeleopServer srv(env, o);
  srv.start();

  TeleopClient c;
  c.connect("127.0.0.1", srv.port());
  c.send("HELLO");
  const auto hello = c.receive_kind("SESSION", 2s);
  REQUIRE(hello);
  CHECK(hello->find(srv.token()) != std::string::npos);

  const std::size_t states = drive(c, 1, 100, 50.0);
  const auto t = srv.wait(5s);
  REQUIRE(t);
  const auto st = srv.stats();
  CHECK(st.received == 100);
  CHECK(st.applied == 100);
  CHECK(st.coalesced == 0);
  CHECK(st.stale == 0);
  CHECK(states == 100);
  CHECK(t->actions.size() == 100);
  CHECK(srv.status() == SessionStatus::Closed);
  const auto end_state = env.current_state();

  const auto loaded = state::read_trajectory_file(rec);
  CHECK(loaded == *t);
  env::Env fresh(backends::launch("kin", cfg));
  const auto rep = env::replay(fresh, loaded);
  CHECK(rep.final_state == end_state);
  CHECK(rep.max_pos_diff == 0.0);
  CHECK(rep.max_dof_diff == 0.0);
  c.close();
  srv.stop();
}

TEST_CASE("server rejects stale and malformed frames and requires HELLO") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  TeleopServer srv(env, server_opts());
  srv.start();
  TeleopClient c;
  c.connect("127.0.0.1", srv.port());
  c.send(encode_command(cmd(1)));
  auto e = c.receive_kind("ERR", 2s);
  REQUIRE(e);
  CHECK(e->rfind("ERR InvalidArgument", 0) == 0);

  c.send("HELLO");
  REQUIRE(c.receive_kind("SESSION", 2s));
  c.send(encode_command(cmd(5)));
  c.send(encode_command(cmd(5)));
  c.send(encode_command(cmd(4)));
  c.send("CMD 6 0 9 0 0 0 1 0 0 0 0");
  int stale = 0, malformed = 0;
  for (int i = 0; i < 3; ++i) {
    auto f = c.receive_kind("ERR", 2s);
    REQUIRE(f);
    stale += f->rfind("ERR DuplicateOrStale", 0) == 0;
    malformed += f->rfind("ERR MalformedFrame", 0) == 0;
  }
  CHECK(stale == 2);
  CHECK(malformed == 1);
  c.send(encode_command(cmd(6)));
  c.send("BYE");
  const auto bye = c.receive_kind("BYE", 3s);
  REQUIRE(bye);
  CHECK(*bye == "BYE 2");
  const auto st = srv.stats();
  CHECK(st.stale == 2);
  CHECK(st.malformed == 1);
  CHECK(st.applied == 2);
  srv.stop();
}

TEST_CASE("a session without commands records nothing") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  TeleopServer srv(env, server_opts());
  srv.start();
  TeleopClient c;
  c.connect("127.0.0.1", srv.port());
  c.send("HELLO");
  REQUIRE(c.receive_kind("SESSION", 2s));
  std::this_thread::sleep_for(100ms);
  c.send("BYE");
  const auto bye = c.receive_kind("BYE", 3s);
  REQUIRE(bye);
  CHECK(*bye == "BYE 0");
  const auto t = srv.wait(2s);
  REQUIRE(t);
  CHECK(t->actions.empty());
  CHECK(env.current_state() == env.initial_state());
}

TEST_CASE("identical command streams give identical trajectories") {
  const auto cfg = pick_place();
  std::vector<state::Trajectory> runs;
  for (int r = 0; r < 2; ++r) {
    env::Env env(backends::launch("kin", cfg));
    TeleopServer srv(env, server_opts());
    srv.start();
    TeleopClient c;
    c.connect("127.0.0.1", srv.port());
    c.send("HELLO");
    REQUIRE(c.receive_kind("SESSION", 2s));
    drive(c, 1, 60, 50.0, {1, 1, 0});
    auto t = srv.wait(5s);
    REQUIRE(t);
    runs.push_back(*t);
  }
  CHECK(runs[0].actions.size() == 60);
  CHECK(runs[0] == runs[1]);
}

TEST_CASE("a dropped client resumes with its token") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  TeleopServer srv(env, server_opts());
  srv.start();
  {
    TeleopClient c;
    c.connect("127.0.0.1", srv.port());
    c.send("HELLO");
    REQUIRE(c.receive_kind("SESSION", 2s));
    for (std::uint64_t i = 1; i <= 10; ++i) c.send(encode_command(cmd(i, {0, 1, 0})));
    for (int i = 0; i < 10; ++i) REQUIRE(c.receive_kind("STATE", 2s));
    c.close(true);
  }
  for (int i = 0; i < 100 && srv.status() != SessionStatus::Paused; ++i) std::this_thread::sleep_for(10ms);
  CHECK(srv.status() == SessionStatus::Paused);

  TeleopClient intruder;
  intruder.connect("127.0.0.1", srv.port());
  intruder.send("HELLO wrongtoken");
  auto e = intruder.receive_kind("ERR", 2s);
  REQUIRE(e);
  intruder.close();

  TeleopClient c;
  c.connect("127.0.0.1", srv.port());
  c.send("HELLO " + srv.token());
  const auto s = c.receive_kind("SESSION", 2s);
  REQUIRE(s);
  std::istringstream in(*s);
  std::string kw, tok;
  std::uint64_t last = 0;
  in >> kw >> tok >> last;
  CHECK(tok == srv.token());
  CHECK(last == 10);
  c.send(encode_command(cmd(11)));
  c.send("BYE");
  REQUIRE(c.receive_kind("BYE", 3s) == std::optional<std::string>("BYE 11"));
  srv.stop();
}

TEST_CASE("a burst faster than the tick rate is coalesced, not dropped silently") {
  const auto cfg = pick_place();
  env::Env env(backends::launch("kin", cfg));
  auto o = server_opts();
  o.session.rate = 10;
  TeleopServer srv(env, o);
  srv.start();
  TeleopClient c;
  c.connect("127.0.0.1", srv.port());
  c.send("HELLO");
  REQUIRE(c.receive_kind("SESSION", 2s));
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t i = 1; i <= 200; ++i) c.send(encode_command(cmd(i, {0, 0, i % 2 ? 1 : -1})));
  std::this_thread::sleep_until(t0 + 1s);
  // slots are 100 ms wide, so one second holds at most 11 applications
  const auto in_one_second = srv.stats().applied;
  CHECK(in_one_second <= 11);
  CHECK(in_one_second >= 8);
  c.send("BYE");
  REQUIRE(c.receive_kind("BYE", 5s));
  const auto st = srv.stats();
  CHECK(st.received == 200);
  CHECK(st.max_queue <= 10);
  CHECK(st.coalesced > 0);
  CHECK(st.applied + st.coalesced == 200);
  srv.stop();
}
