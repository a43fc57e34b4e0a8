#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "metasim/assets/formats.hpp"
#include "metasim/augment/augment.hpp"
#include "metasim/cli/cli.hpp"
#include "metasim/common/error.hpp"
#include "metasim/teleop/client.hpp"
#include "metasim/teleop/protocol.hpp"

using namespace metasim;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = METASIM_FIXTURES;

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "metasim_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::vector<fs::path> listing(const fs::path& dir) {
  std::vector<fs::path> v;
  for (const auto& e : fs::directory_iterator(dir)) v.push_back(e.path());
  std::sort(v.begin(), v.end());
  return v;
}

std::string scn(const std::string& name) { return (kFixtures / "scenarios" / (name + ".scn")).string(); }

}  // namespace

TEST_CASE("usage errors exit 2 with a synopsis") {
  auto r = invoke({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(r.err.find("usage: metasim") != std::string::npos);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"replay"}).code == 2);  // missing --scenario
  CHECK(invoke({"bench-split", "--scenario", scn("pick_place"), "--level", "x", "--out", "/tmp/x"}).code == 2);
}

TEST_CASE("help lists every subcommand") {
  auto r = invoke({"--help"});
  CHECK(r.code == 0);
  for (const char* s : {"convert", "replay", "collect", "augment", "bench-split", "retarget", "probe-conservation",
                        "teleop-serve"})
    CHECK_MESSAGE(r.out.find(s) != std::string::npos, s);
  auto sub = invoke({"collect", "--help"});
  CHECK(sub.code == 0);
  CHECK(sub.out.find("--renderer") != std::string::npos);
}

TEST_CASE("convert writes URDF that keeps the actuated DoF") {
  const auto out = scratch("arm9.urdf");
  const auto src = kFixtures / "mjcf" / "arm9.xml";
  auto r = invoke({"convert", "--from", "mjcf", "--to", "urdf", src.string(), out.string()});
  REQUIRE(r.code == 0);
  const auto mj = assets::parse_mjcf(bytes(src));
  const auto ur = assets::parse_urdf(bytes(out));
  CHECK(ur.dof() == mj.dof());
  CHECK(ur.dof() == 9);

  CHECK(invoke({"convert", "nope.xml", out.string()}).code == 1);
  CHECK(invoke({"convert", "--to", "usd", src.string(), out.string()}).code == 1);
  r = invoke({"convert", (kFixtures / "bad" / "internal_free.xml").string(), out.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("UnrepresentableInUrdf") != std::string::npos);
}

TEST_CASE("domain errors exit 1") {
  CHECK(invoke({"replay", "--scenario", "missing.scn", "x.rvt"}).code == 1);
  auto r = invoke({"--override", "sim.nonsense=1", "probe-conservation", "--scenario", scn("two_spheres")});
  CHECK(r.code == 1);
  CHECK(r.err.find("PathNotFound") != std::string::npos);
  // global options also work after the subcommand name
  r = invoke({"probe-conservation", "--scenario", scn("two_spheres"), "--override", "sim.nonsense=1", "--seed", "2"});
  CHECK(r.code == 1);
  CHECK(r.err.find("PathNotFound") != std::string::npos);
  // the probe wants zero gravity
  CHECK(invoke({"--override", "sim.gravity=[0,0,-9.81]", "probe-conservation", "--scenario", scn("two_spheres")}).code == 1);
}

TEST_CASE("probe-conservation reports drift and a CSV") {
  const auto csv = scratch("probe.csv");
  auto r = invoke({"probe-conservation", "--scenario", scn("two_spheres"), "--steps", "200", "--csv", csv.string()});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::map<std::string, double> v;
  std::string k;
  double x;
  while (in >> k >> x) v[k] = x;
  CHECK(v.at("momentum_rel_drift") < 1e-9);
  CHECK(v.at("energy_rel_drift") < 1e-9);
  CHECK(v.at("angular_momentum_rel_drift") < 1e-6);
  const auto text = bytes(csv);
  CHECK(std::count(text.begin(), text.end(), '\n') == 202);
}

TEST_CASE("collect keeps successful scripted demos through a hybrid env, reproducibly") {
  const auto a = scratch("collect_a");
  const auto b = scratch("collect_b");
  for (const auto& d : {a, b}) {
    auto r = invoke({"--seed", "5", "collect", "--scenario", scn("pick_place"), "--physics", "dyn", "--renderer", "kin",
                  "--n", "3", "--out", d.string(), "--frames"});
    REQUIRE(r.code == 0);
    CHECK(r.out == "kept 3 of 3\n");
  }
  const auto fa = listing(a), fb = listing(b);
  REQUIRE(fa.size() == 6);
  for (std::size_t i = 0; i < fa.size(); ++i) CHECK(bytes(fa[i]) == bytes(fb[i]));
  const auto t = state::read_trajectory_file(a / "demo_0000.rvt");
  CHECK(t.success == std::optional<bool>(true));
  CHECK(t.states.has_value());

  auto r = invoke({"replay", "--scenario", scn("pick_place"), "--backend", "dyn", (a / "demo_0000.rvt").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("success true") != std::string::npos);
  CHECK(r.out.find("max_pos_diff 0\n") != std::string::npos);
}

TEST_CASE("collect filters out a failing demo") {
  const auto src = scratch("collect_src");
  REQUIRE(invoke({"collect", "--scenario", scn("pick_place"), "--n", "1", "--out", src.string()}).code == 0);
  auto good = state::read_trajectory_file(src / "demo_0000.rvt");
  auto bad = good;
  bad.states.reset();
  bad.success.reset();
  // never close the gripper: the cube stays put
  for (auto& act : bad.actions) act.dof_targets.at("arm")(6) = 0.05;
  state::write_trajectory_file(src / "bad.rvt", bad);

  auto r = invoke({"replay", "--scenario", scn("pick_place"), (src / "bad.rvt").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("success false") != std::string::npos);

  const auto out = scratch("collect_filtered");
  r = invoke({"collect", "--scenario", scn("pick_place"), "--demo", (src / "bad.rvt").string(), "--demo",
           (src / "demo_0000.rvt").string(), "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == "kept 1 of 2\n");
  CHECK(r.err.find("bad.rvt") != std::string::npos);
  CHECK(listing(out).size() == 1);
  CHECK(state::read_trajectory_file(out / "demo_0000.rvt") == good);
  CHECK(invoke({"collect", "--scenario", scn("pick_place"), "--out", out.string()}).code == 1);
}

TEST_CASE("augment generates validated samples, byte-identical per seed") {
  const auto src = scratch("aug_src");
  REQUIRE(invoke({"collect", "--scenario", scn("pick_place"), "--n", "2", "--out", src.string()}).code == 0);
  std::vector<std::string> outs;
  for (const char* name : {"aug_a", "aug_b"}) {
    const auto out = scratch(name);
    outs.push_back(out.string());
    auto r = invoke({"--seed", "11", "augment", "--subtasks", scn("pick_place"), "--scenario", scn("pick_place"), "--demo",
                  (src / "demo_0000.rvt").string(), "--demo", (src / "demo_0001.rvt").string(), "--n", "8", "--out",
                  out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("accepted ", 0) == 0);
  }
  const auto fa = listing(outs[0]), fb = listing(outs[1]);
  CHECK(fa.size() >= 4);
  REQUIRE(fa.size() == fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) CHECK(bytes(fa[i]) == bytes(fb[i]));
  CHECK(invoke({"augment", "--scenario", scn("two_spheres"), "--demo", (src / "demo_0000.rvt").string(), "--n", "1",
             "--out", outs[0]})
            .code == 1);
}

TEST_CASE("bench-split reports the 90/10 partitions and writes scenes") {
  const auto a = scratch("bench_a");
  auto r = invoke({"--seed", "3", "bench-split", "--scenario", scn("pick_place"), "--level", "3", "--split", "test",
                "--count", "4", "--out", a.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("camera_poses train 53 test 6") != std::string::npos);
  CHECK(r.out.find("table_materials train 270 test 30") != std::string::npos);
  REQUIRE(listing(a).size() == 4);
  const auto cfg = config::load_scenario_file(a / "scene_0000.scn");
  CHECK(cfg.name == "pick_place");
  const auto b = scratch("bench_b");
  REQUIRE(invoke({"--seed", "3", "bench-split", "--scenario", scn("pick_place"), "--level", "3", "--split", "test",
               "--count", "4", "--out", b.string()})
              .code == 0);
  CHECK(bytes(a / "scene_0003.scn") == bytes(b / "scene_0003.scn"));
  CHECK(invoke({"bench-split", "--scenario", scn("pick_place"), "--level", "7", "--out", a.string()}).code == 1);
  CHECK(invoke({"bench-split", "--scenario", scn("pick_place"), "--split", "dev", "--out", a.string()}).code == 1);
}

TEST_CASE("retarget subcommand") {
  const auto cfg = config::load_scenario_file(scn("arm6_reach"));
  env::Env env(backends::launch("kin", cfg));
  env.reset();
  state::Trajectory t;
  t.scenario_name = cfg.name;
  t.init_state.envs.push_back(env.initial_state());
  const VecX q0 = env.initial_state().at("arm").dof_pos;
  for (int i = 1; i <= 20; ++i) {
    state::Action a;
    VecX q = q0;
    q(0) += 0.02 * i;
    q(1) += 0.01 * i;
    a.dof_targets["arm"] = q;
    t.actions.push_back(a);
  }
  const auto in = scratch("rt_in.rvt");
  const auto out = scratch("rt_out.rvt");
  state::write_trajectory_file(in, t);
  auto r = invoke({"retarget", "--src-scenario", scn("arm6_reach"), "--dst-scenario", scn("arm6_long_reach"), in.string(),
                out.string()});
  REQUIRE(r.code == 0);
  const auto got = state::read_trajectory_file(out);
  CHECK(got.scenario_name == "arm6_long_reach");
  CHECK(got.actions.size() == 20);
}

TEST_CASE("METASIM_BACKEND selects the default backend") {
  unsetenv("METASIM_BACKEND");
  CHECK(cli::default_backend() == "dyn");
  setenv("METASIM_BACKEND", "kin", 1);
  CHECK(cli::default_backend() == "kin");
  setenv("METASIM_BACKEND", "nosuch", 1);
  const auto src = scratch("be");
  auto r = invoke({"collect", "--scenario", scn("pick_place"), "--n", "1", "--out", src.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("WrongBackend") != std::string::npos);
  unsetenv("METASIM_BACKEND");
}

TEST_CASE("teleop-serve runs a session from the binary") {
  const auto rec = scratch("serve.rvt");
  const std::string cmd = std::string(METASIM_BIN) + " teleop-serve --scenario " + scn("pick_place") +
                          " --backend kin --port 0 --record " + rec.string() + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char line[512];
  REQUIRE(fgets(line, sizeof line, p));
  const std::string first = line;
  const auto colon = first.find(':', first.find("127.0.0.1"));
  const auto port = static_cast<unsigned short>(std::stoi(first.substr(colon + 1)));

  teleop::TeleopClient c;
  c.connect("127.0.0.1", port);
  CHECK(teleop::http_get("127.0.0.1", port, "/").find("<html") != std::string::npos);
  c.send("HELLO");
  REQUIRE(c.receive_kind("SESSION", std::chrono::seconds(2)));
  for (std::uint64_t i = 1; i <= 25; ++i) {
    teleop::TeleopCommand k;
    k.seq = i;
    k.translate = {0, 1, 0};
    c.send(teleop::encode_command(k));
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  c.send("BYE");
  CHECK(c.receive_kind("BYE", std::chrono::seconds(5)) == std::optional<std::string>("BYE 25"));
  c.close();
  std::string rest;
  while (fgets(line, sizeof line, p)) rest += line;
  CHECK(pclose(p) == 0);
  CHECK(rest.find("session closed: 25 actions") != std::string::npos);
  CHECK(state::read_trajectory_file(rec).actions.size() == 25);
}
