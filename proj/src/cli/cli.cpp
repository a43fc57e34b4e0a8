#include "metasim/cli/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "metasim/assets/formats.hpp"
#include "metasim/augment/augment.hpp"
#include "metasim/augment/randomize.hpp"
#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"
#include "metasim/retarget/retarget.hpp"
#include "metasim/teleop/server.hpp"

namespace metasim::cli {

namespace fs = std::filesystem;

std::string default_backend() {
  if (const char* v = std::getenv("METASIM_BACKEND"); v && *v) return v;
  return "dyn";
}

namespace {

constexpr const char* kSynopsis =
    "usage: metasim [--seed N] [--override path=value]... <subcommand> [options]\n"
    "subcommands: convert replay collect augment bench-split retarget probe-conservation teleop-serve\n"
    "run 'metasim <subcommand> --help' for details\n";

// RNG stream tag for scripted collection ("coll").
constexpr std::uint64_t kCollectStream = 0x636f6c6c;

std::atomic<bool> g_interrupted{false};

struct Globals {
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
};

config::ScenarioConfig load_scenario(const std::string& path, const Globals& g) {
  auto cfg = config::load_scenario_file(path);
  if (!g.overrides.empty()) cfg = config::apply_overrides(cfg, g.overrides);
  const auto violations = config::validate(cfg);
  if (!violations.empty()) {
    std::string msg = "scenario '" + path + "' is invalid:";
    for (const auto& v : violations) msg += "\n  " + v.path + ": " + v.message;
    throw Error(violations.front().code, msg);
  }
  return cfg;
}

std::string numbered(const std::string& prefix, std::size_t i, const std::string& ext, int width = 4) {
  std::ostringstream os;
  os << prefix << std::setw(width) << std::setfill('0') << i << ext;
  return os.str();
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(Errc::Io, "cannot create directory '" + dir + "': " + ec.message());
  return p;
}

std::unique_ptr<env::Env> make_env(const config::ScenarioConfig& cfg, const std::string& physics,
                                   const std::string& renderer = "") {
  auto ph = backends::launch(physics, cfg);
  std::unique_ptr<backends::Handler> rh;
  if (!renderer.empty()) rh = backends::launch(renderer, cfg);
  return std::make_unique<env::Env>(std::move(ph), std::move(rh));
}

const char* yes_no(bool b) { return b ? "true" : "false"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Io, "cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error(Errc::Io, "write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::PathNotFound, "cannot read '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// convert

struct ConvertArgs {
  std::string from, to = "urdf", in, out;
};

int do_convert(const ConvertArgs& a, std::ostream& out, std::ostream& err) {
  std::string from = a.from;
  if (from.empty()) from = fs::path(a.in).extension() == ".urdf" ? "urdf" : "mjcf";
  if (a.to != "urdf") throw Error(Errc::InvalidArgument, "only --to urdf is supported");
  const std::string text = read_text(a.in);
  std::vector<std::string> warnings;
  std::string urdf;
  if (from == "mjcf") {
    auto conv = assets::convert_mjcf_to_urdf(text);
    urdf = std::move(conv.urdf);
    warnings = std::move(conv.warnings);
  } else if (from == "urdf") {
    const auto asset = assets::parse_urdf(text);
    warnings = asset.warnings;
    urdf = assets::export_urdf(asset, &warnings);
  } else {
    throw Error(Errc::InvalidArgument, "unknown source format '" + from + "' (mjcf or urdf)");
  }
  write_text(a.out, urdf);
  for (const auto& w : warnings) err << "WARN: " << w << "\n";
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

// replay

struct ReplayArgs {
  std::string scenario, traj, backend = default_backend(), renderer;
};

int do_replay(const ReplayArgs& a, const Globals& g, std::ostream& out, std::ostream&) {
  const auto cfg = load_scenario(a.scenario, g);
  const auto traj = state::read_trajectory_file(a.traj);
  auto env = make_env(cfg, a.backend, a.renderer);
  const auto r = env::replay(*env, traj);
  out << "steps " << traj.actions.size() << "\n";
  out << "success " << yes_no(r.success) << "\n";
  if (traj.states) {
    out << "max_pos_diff " << format_double(r.max_pos_diff) << "\n";
    out << "max_dof_diff " << format_double(r.max_dof_diff) << "\n";
  }
  return kExitOk;
}

// collect

struct CollectArgs {
  std::string scenario, physics = default_backend(), renderer, out;
  std::vector<std::string> demos;
  std::size_t n = 0;
  bool frames = false;
};

int do_collect(const CollectArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  if (a.demos.empty() == (a.n == 0)) throw Error(Errc::InvalidArgument, "give either --demo files or --n");
  const auto cfg = load_scenario(a.scenario, g);
  const auto dir = prepare_dir(a.out);
  auto env = make_env(cfg, a.physics, a.renderer);

  std::size_t kept = 0, total = 0;
  auto consider = [&](state::Trajectory t, const std::string& label) {
    ++total;
    const auto r = env::replay(*env, t);
    if (!r.success) {
      err << "WARN: " << label << ": replay did not succeed, excluded\n";
      return;
    }
    t.states = r.states;
    t.success = true;
    const auto name = numbered("demo_", kept++, "");
    state::write_trajectory_file(dir / (name + ".rvt"), t);
    if (a.frames && !cfg.cameras.empty()) {
      backends::Handler& h = env->renderer() ? *env->renderer() : env->physics();
      backends::write_ppm(dir / (name + ".ppm"), h.render(cfg.cameras.front()));
    }
  };

  if (!a.demos.empty()) {
    for (const auto& path : a.demos) consider(state::read_trajectory_file(path), path);
  } else {
    for (std::size_t k = 0; k < a.n; ++k) {
      Rng rng(g.seed, {kCollectStream, k});
      const auto init = augment::sample_task_space(cfg, env->initial_state(), rng);
      state::Trajectory t;
      try {
        t = augment::scripted_pick_place(env->model(), init);
      } catch (const Error& e) {
        if (e.code() != Errc::IkUnreachable) throw;
        ++total;
        err << "WARN: scripted demo " << k << ": " << e.what() << ", skipped\n";
        continue;
      }
      consider(std::move(t), "scripted demo " + std::to_string(k));
    }
  }
  out << "kept " << kept << " of " << total << "\n";
  return kExitOk;
}

// augment

struct AugmentArgs {
  std::string scenario, subtasks, out, backend = default_backend();
  std::vector<std::string> demos;
  std::size_t n = 0;
  unsigned threads = 0;
  double max_joint_step = 0.05;
};

int do_augment(const AugmentArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  if (a.scenario.empty() && a.subtasks.empty()) throw Error(Errc::InvalidArgument, "give --scenario or --subtasks");
  auto cfg = load_scenario(a.scenario.empty() ? a.subtasks : a.scenario, g);
  if (!a.scenario.empty() && !a.subtasks.empty()) cfg.task.subtasks = load_scenario(a.subtasks, g).task.subtasks;
  if (cfg.task.subtasks.empty()) throw Error(Errc::InvalidArgument, "scenario '" + cfg.name + "' has no subtasks");
  const auto dir = prepare_dir(a.out);

  auto env = make_env(cfg, a.backend);
  std::vector<std::vector<augment::Segment>> sources;
  for (const auto& path : a.demos) sources.push_back(augment::segment_demo(state::read_trajectory_file(path), cfg.task.subtasks, *env));

  augment::DatasetOptions opts;
  opts.n = a.n;
  opts.seed = g.seed;
  opts.backend = a.backend;
  opts.threads = a.threads;
  opts.augment.max_joint_step = a.max_joint_step;
  const auto res = augment::generate_dataset(cfg, sources, opts);
  for (std::size_t i = 0; i < res.accepted.size(); ++i)
    state::write_trajectory_file(dir / numbered("aug_", res.accepted_indices[i], ".rvt", 5), res.accepted[i]);
  for (const auto& [reason, count] : res.rejections) err << "WARN: " << count << " samples rejected: " << reason << "\n";
  out << "accepted " << res.accepted.size() << " of " << res.requested << "\n";
  return kExitOk;
}

// bench-split

struct BenchArgs {
  std::string scenario, split = "train", out;
  int level = 0;
  std::size_t count = 1;
};

int do_bench(const BenchArgs& a, const Globals& g, std::ostream& out, std::ostream&) {
  const auto cfg = load_scenario(a.scenario, g);
  const auto split = augment::split_from_name(a.split);
  const auto dir = prepare_dir(a.out);
  augment::RandomizationSpec spec;
  spec.level = a.level;
  spec.seed = g.seed;
  const auto& pools = spec.pools;
  auto sizes = [&](const char* name, std::size_t n) {
    std::size_t test = 0;
    augment::split_order(n, g.seed, &test);
    out << name << " train " << n - test << " test " << test << "\n";
  };
  sizes("table_materials", pools.table_materials.size());
  sizes("wall_materials", pools.wall_materials.size());
  sizes("ground_materials", pools.ground_materials.size());
  sizes("camera_poses", pools.camera_poses.size());
  sizes("layouts", pools.layouts.size());
  for (std::size_t i = 0; i < a.count; ++i) {
    spec.draw = i;
    write_text(dir / numbered("scene_", i, ".scn"), config::serialize_scenario(augment::randomize_scene(cfg, spec, split)));
  }
  out << "wrote " << a.count << " " << augment::split_name(split) << " scenes at level " << a.level << "\n";
  return kExitOk;
}

// retarget

struct RetargetArgs {
  std::string src_scenario, dst_scenario, src_robot, dst_robot, in, out, validate_backend;
};

int do_retarget(const RetargetArgs& a, const Globals& g, std::ostream& out, std::ostream&) {
  const auto src_cfg = load_scenario(a.src_scenario, g);
  const auto dst_cfg = load_scenario(a.dst_scenario, g);
  const auto src_h = backends::launch("kin", src_cfg);
  const auto dst_h = backends::launch("kin", dst_cfg);
  const auto robot_of = [](const config::ScenarioConfig& c, const std::string& r) {
    if (!r.empty()) return r;
    if (c.robots.empty()) throw Error(Errc::InvalidArgument, "scenario '" + c.name + "' has no robot");
    return c.robots.front().name;
  };
  std::unique_ptr<env::Env> venv;
  if (!a.validate_backend.empty()) venv = make_env(dst_cfg, a.validate_backend);
  const auto res = retarget::retarget_trajectory(state::read_trajectory_file(a.in), src_h->model(),
                                                 robot_of(src_cfg, a.src_robot), dst_h->model(),
                                                 robot_of(dst_cfg, a.dst_robot), {}, venv.get());
  if (!res.accepted) throw Error(Errc::IkUnreachable, "retarget rejected: " + res.reason);
  state::write_trajectory_file(a.out, *res.trajectory);
  out << "wrote " << a.out << " (" << res.trajectory->actions.size() << " steps)\n";
  return kExitOk;
}

// probe-conservation

struct ProbeArgs {
  std::string scenario, csv;
  int steps = 1000;
};

int do_probe(const ProbeArgs& a, const Globals& g, std::ostream& out, std::ostream&) {
  const auto cfg = load_scenario(a.scenario, g);
  auto h = backends::launch("dyn", cfg);
  const auto samples = backends::conservation_probe(*h, a.steps);
  const auto& s0 = samples.front();
  auto rel = [](double d, double ref) { return ref > 0 ? d / ref : d; };
  double dp = 0, de = 0, dl = 0;
  for (const auto& s : samples) {
    dp = std::max(dp, rel((s.momentum - s0.momentum).norm(), s0.momentum.norm()));
    de = std::max(de, rel(std::abs(s.kinetic_energy - s0.kinetic_energy), s0.kinetic_energy));
    dl = std::max(dl, rel((s.angular_momentum - s0.angular_momentum).norm(), s0.angular_momentum.norm()));
  }
  if (!a.csv.empty()) {
    std::ostringstream os;
    os << "step,px,py,pz,lx,ly,lz,ke\n";
    for (const auto& s : samples) {
      os << s.step;
      for (double v : {s.momentum.x(), s.momentum.y(), s.momentum.z(), s.angular_momentum.x(), s.angular_momentum.y(),
                       s.angular_momentum.z(), s.kinetic_energy})
        os << ',' << format_double(v);
      os << '\n';
    }
    write_text(a.csv, os.str());
  }
  out << "steps " << a.steps << "\n";
  out << "momentum_rel_drift " << format_double(dp) << "\n";
  out << "energy_rel_drift " << format_double(de) << "\n";
  out << "angular_momentum_rel_drift " << format_double(dl) << "\n";
  return kExitOk;
}

// teleop-serve

struct TeleopArgs {
  std::string scenario, backend = default_backend(), record, address = "127.0.0.1", web_root;
  unsigned short port = teleop::default_port();
  double rate = 50.0, speed = 0.1;
};

int do_teleop(const TeleopArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto cfg = load_scenario(a.scenario, g);
  auto env = make_env(cfg, a.backend);
  teleop::ServerOptions o;
  o.address = a.address;
  o.port = a.port;
  o.web_root = a.web_root;
  if (!a.record.empty()) o.record = a.record;
  o.session.rate = a.rate;
  o.session.speed = a.speed;
  teleop::TeleopServer srv(*env, o);
  srv.start();
  out << "serving http://" << a.address << ":" << srv.port() << "/ (WebSocket /teleop), session " << srv.token()
      << std::endl;

  g_interrupted = false;
  auto prev = std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::optional<state::Trajectory> t;
  while (!(t = srv.wait(std::chrono::milliseconds(200)))) {
    if (g_interrupted) {
      err << "WARN: interrupted, closing the session\n";
      srv.stop();
      t = srv.wait();
    }
  }
  std::signal(SIGINT, prev);
  srv.stop();
  const auto st = srv.stats();
  out << "session closed: " << t->actions.size() << " actions, success " << yes_no(t->success.value_or(false))
      << ", stale " << st.stale << ", coalesced " << st.coalesced << "\n";
  if (!a.record.empty()) out << "recorded " << a.record << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator-agnostic robot environment toolkit", "metasim"};
  app.require_subcommand(1);
  Globals g;
  // accepted before or after the subcommand name
  auto add_globals = [&](CLI::App* a) {
    a->add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
    a->add_option("--override", g.overrides, "Scenario override dotted.path=value (repeatable)")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  };
  add_globals(&app);

  std::function<int()> action;

  ConvertArgs ca;
  auto* convert = app.add_subcommand("convert", "Convert an MJCF or URDF asset to URDF");
  convert->add_option("--from", ca.from, "Source format: mjcf or urdf (default from the extension)");
  convert->add_option("--to", ca.to, "Target format")->capture_default_str();
  convert->add_option("input", ca.in, "Source file")->required();
  convert->add_option("output", ca.out, "Destination file")->required();
  convert->callback([&] { action = [&] { return do_convert(ca, out, err); }; });

  ReplayArgs ra;
  auto* replay = app.add_subcommand("replay", "Replay a trajectory and report success and drift");
  replay->add_option("--scenario", ra.scenario, "Scenario file")->required();
  replay->add_option("--backend", ra.backend, "Physics backend (dyn, kin; METASIM_BACKEND)")->capture_default_str();
  replay->add_option("--renderer", ra.renderer, "Render backend for hybrid replay");
  replay->add_option("trajectory", ra.traj, "RVT1 file")->required();
  replay->callback([&] { action = [&] { return do_replay(ra, g, out, err); }; });

  CollectArgs co;
  auto* collect = app.add_subcommand("collect", "Record demonstrations, keeping only those that succeed");
  collect->add_option("--scenario", co.scenario, "Scenario file")->required();
  collect->add_option("--physics", co.physics, "Physics backend")->capture_default_str();
  collect->add_option("--renderer", co.renderer, "Render backend (hybrid simulation)");
  collect->add_option("--out", co.out, "Output directory")->required();
  collect->add_option("--demo", co.demos, "Demonstrations to re-record (repeatable)");
  collect->add_option("--n", co.n, "Number of scripted pick-and-place demos from seeded initial states");
  collect->add_flag("--frames", co.frames, "Also write the final camera frame of each kept demo (PPM)");
  collect->callback([&] { action = [&] { return do_collect(co, g, out, err); }; });

  AugmentArgs aa;
  auto* aug = app.add_subcommand("augment", "Generate object-centric augmented demonstrations");
  aug->add_option("--scenario", aa.scenario, "Scenario file");
  aug->add_option("--subtasks", aa.subtasks, "Scenario file whose task.subtasks define the segmentation");
  aug->add_option("--demo", aa.demos, "Source demonstrations (repeatable)")->required();
  aug->add_option("--n", aa.n, "Samples to request")->required();
  aug->add_option("--out", aa.out, "Output directory")->required();
  aug->add_option("--backend", aa.backend, "Validation backend")->capture_default_str();
  aug->add_option("--threads", aa.threads, "Worker threads (0 = all cores)");
  aug->add_option("--max-joint-step", aa.max_joint_step, "Bridge step cap, rad")->capture_default_str();
  aug->callback([&] { action = [&] { return do_augment(aa, g, out, err); }; });

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench-split", "Write randomized scenarios for one benchmark level and split");
  bench->add_option("--scenario", ba.scenario, "Scenario file")->required();
  bench->add_option("--level", ba.level, "Randomization level 0-3")->capture_default_str();
  bench->add_option("--split", ba.split, "train or test")->capture_default_str();
  bench->add_option("--count", ba.count, "Scenes to draw")->capture_default_str();
  bench->add_option("--out", ba.out, "Output directory")->required();
  bench->callback([&] { action = [&] { return do_bench(ba, g, out, err); }; });

  RetargetArgs rt;
  auto* ret = app.add_subcommand("retarget", "Retarget a trajectory onto another robot through its EE path");
  ret->add_option("--src-scenario", rt.src_scenario, "Scenario the trajectory was recorded in")->required();
  ret->add_option("--dst-scenario", rt.dst_scenario, "Scenario with the destination robot")->required();
  ret->add_option("--src-robot", rt.src_robot, "Source robot (default: first robot)");
  ret->add_option("--dst-robot", rt.dst_robot, "Destination robot (default: first robot)");
  ret->add_option("--validate", rt.validate_backend, "Require a successful replay on this backend");
  ret->add_option("input", rt.in, "Source RVT1 file")->required();
  ret->add_option("output", rt.out, "Destination RVT1 file")->required();
  ret->callback([&] { action = [&] { return do_retarget(rt, g, out, err); }; });

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe-conservation", "Track momentum and energy on a gravity-free dyn scenario");
  probe->add_option("--scenario", pa.scenario, "Scenario file")->required();
  probe->add_option("--steps", pa.steps, "Steps to run")->capture_default_str();
  probe->add_option("--csv", pa.csv, "Write per-step totals here");
  probe->callback([&] { action = [&] { return do_probe(pa, g, out, err); }; });

  TeleopArgs ta;
  auto* tele = app.add_subcommand("teleop-serve", "Serve a teleoperation session over WebSocket");
  tele->add_option("--scenario", ta.scenario, "Scenario file")->required();
  tele->add_option("--backend", ta.backend, "Physics backend")->capture_default_str();
  tele->add_option("--record", ta.record, "RVT1 file written when the session closes");
  tele->add_option("--port", ta.port, "Listen port (METASIM_TELEOP_PORT)")->capture_default_str();
  tele->add_option("--address", ta.address, "Listen address")->capture_default_str();
  tele->add_option("--web-root", ta.web_root, "Directory holding index.html for /");
  tele->add_option("--rate", ta.rate, "Control rate, Hz (at most 50)")->capture_default_str();
  tele->add_option("--speed", ta.speed, "EE speed, m/s")->capture_default_str();
  tele->callback([&] { action = [&] { return do_teleop(ta, g, out, err); }; });

  for (auto* sub : app.get_subcommands({})) add_globals(sub);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // subcommand --help arrives here too, from the subcommand's parser
    if (e.get_exit_code() == 0) {
      for (const auto* sub : app.get_subcommands()) out << sub->help();
      if (app.get_subcommands().empty()) out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n" << kSynopsis;
    return kExitUsage;
  }

  try {
    return action();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace metasim::cli
