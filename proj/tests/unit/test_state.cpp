#include <doctest.h>

#include <cstring>

#include <boost/crc.hpp>

#include "metasim/common/error.hpp"
#include "metasim/common/rng.hpp"
#include "metasim/state/state.hpp"
#include "metasim/state/trajectory.hpp"

using namespace metasim;
using namespace metasim::state;

namespace {

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

EntityState rigid(const Vec3& p) {
  EntityState s;
  s.pos = p;
  return s;
}

EntityState jointed(int n, double v) {
  EntityState s;
  s.dof_pos = VecX::Constant(n, v);
  s.dof_vel = VecX::Zero(n);
  s.dof_target = VecX::Constant(n, v);
  return s;
}

EnvState scene() {
  EnvState e;
  e["cube"] = rigid(Vec3(0.5, 0, 0.02));
  e["arm"] = jointed(3, 0.1);
  return e;
}

EntityState partial(FieldMask mask) {
  EntityState s;
  s.mask = mask;
  return s;
}

Trajectory random_trajectory(int steps, std::uint64_t seed) {
  Rng rng(seed);
  auto r = [&] { return rng.uniform(-1, 1); };
  Trajectory t;
  t.scenario_name = "pick_place";
  EnvState init = scene();
  init["cube"].rot = exp_map(Vec3(r(), r(), r()));
  t.init_state = single(init);
  t.states.emplace();
  for (int i = 0; i < steps; ++i) {
    Action a;
    a.dof_targets["arm"] = VecX::NullaryExpr(3, [&](Eigen::Index) { return r(); });
    t.actions.push_back(a);
    EnvState s = init;
    s["cube"].pos = Vec3(r(), r(), r());
    s["cube"].lin_vel = Vec3(r(), r(), std::ldexp(r(), -1060));  // subnormal
    s["arm"].dof_pos = a.dof_targets["arm"];
    t.states->push_back(single(s));
  }
  t.success = true;
  t.extras["source"] = "unit";
  return t;
}

}  // namespace

TEST_CASE("merge: empty partial is identity and base is untouched") {
  const SceneState base = single(scene());
  CHECK(merge_states(base, SceneState{}) == base);
  CHECK(merge_states(base, single({})) == base);
}

TEST_CASE("merge: field isolation") {
  const SceneState base = single(scene());
  EnvState p;
  p["cube"] = partial(kPos);
  p["cube"].pos = Vec3(0, 0, 1);
  const SceneState out = merge_states(base, single(p));
  CHECK(out.envs[0].at("cube").pos == Vec3(0, 0, 1));
  CHECK(out.envs[0].at("cube").rot.coeffs() == base.envs[0].at("cube").rot.coeffs());
  CHECK(out.envs[0].at("arm") == base.envs[0].at("arm"));
  CHECK(base.envs[0].at("cube").pos == Vec3(0.5, 0, 0.02));
}

TEST_CASE("merge: errors") {
  const SceneState base = single(scene());
  EnvState p;
  p["mug"] = partial(kPos);
  CHECK(error_of([&] { merge_states(base, single(p)); }) == Errc::UnknownEntity);
  EnvState q;
  q["arm"] = partial(kDofPos);
  q["arm"].dof_pos = VecX::Zero(2);
  CHECK(error_of([&] { merge_states(base, single(q)); }) == Errc::DofLengthMismatch);
  EnvState f;
  f["cube"] = partial(kDofPos);
  f["cube"].dof_pos = VecX::Zero(1);
  CHECK(error_of([&] { merge_states(base, single(f)); }) == Errc::DofLengthMismatch);
}

TEST_CASE("merge: single-env partial broadcasts, matching counts pair up") {
  SceneState base{{scene(), scene(), scene()}};
  EnvState p;
  p["cube"] = partial(kPos);
  p["cube"].pos = Vec3(1, 2, 3);
  for (const auto& env : merge_states(base, single(p)).envs) CHECK(env.at("cube").pos == Vec3(1, 2, 3));
  SceneState two{{p, p}};
  CHECK(error_of([&] { merge_states(base, two); }) == Errc::EntitySetMismatch);
}

TEST_CASE("merge: associative for disjoint partials, idempotent for repeats") {
  const SceneState base = single(scene());
  EnvState a, b;
  a["cube"] = partial(kPos);
  a["cube"].pos = Vec3(1, 1, 1);
  b["arm"] = partial(kDofPos);
  b["arm"].dof_pos = VecX::Constant(3, 0.7);
  EnvState ab = a;
  ab["arm"] = b["arm"];
  const auto x = merge_states(merge_states(base, single(a)), single(b));
  const auto y = merge_states(base, single(ab));
  CHECK(x == y);
  const auto once = merge_states(base, single(a));
  CHECK(merge_states(once, single(a)) == once);
}

TEST_CASE("query filters entities and fields") {
  const SceneState base = single(scene());
  const auto q = apply_query(base, {{"cube"}, kPos});
  REQUIRE(q.envs[0].size() == 1);
  CHECK(q.envs[0].at("cube").mask == kPos);
  CHECK(error_of([&] { apply_query(base, {{"mug"}, kPos}); }) == Errc::UnknownEntity);
}

TEST_CASE("diff: zero, double cover, translation, symmetry") {
  const SceneState a = single(scene());
  CHECK(diff_states(a, a).is_zero());
  SceneState b = a;
  b.envs[0]["cube"].rot = Quat(-1, 0, 0, 0);
  CHECK(diff_states(a, b).max_rot < 1e-7);
  b = a;
  b.envs[0]["cube"].pos.x() += 0.01;
  const auto d = diff_states(a, b);
  CHECK(d.max_pos == doctest::Approx(0.01));
  CHECK(d.entities.at("arm") == EntityDiff{});
  CHECK(diff_states(b, a).max_pos == d.max_pos);
  SceneState c = a;
  c.envs[0].erase("arm");
  CHECK(error_of([&] { diff_states(a, c); }) == Errc::EntitySetMismatch);
}

TEST_CASE("diff after merge is nonzero exactly on touched fields") {
  const SceneState base = single(scene());
  EnvState p;
  p["arm"] = partial(kDofPos);
  p["arm"].dof_pos = VecX::Constant(3, 0.4);
  const auto d = diff_states(base, merge_states(base, single(p)));
  CHECK(d.entities.at("arm").dof == doctest::Approx(0.3));
  CHECK(d.entities.at("cube") == EntityDiff{});
  CHECK(d.max_pos == 0.0);
}

TEST_CASE("RVT1 round-trips bit-exactly") {
  for (int steps : {0, 1, 100}) {
    CAPTURE(steps);
    const Trajectory t = random_trajectory(steps, 11 + steps);
    const Bytes bytes = serialize_trajectory(t);
    CHECK(std::memcmp(bytes.data(), "RVT1", 4) == 0);
    const Trajectory back = deserialize_trajectory(bytes);
    CHECK(back == t);
    CHECK(serialize_trajectory(back) == bytes);
  }
  Trajectory bare;
  bare.scenario_name = "empty";
  bare.init_state = single(scene());
  const Trajectory back = deserialize_trajectory(serialize_trajectory(bare));
  CHECK(back == bare);
  CHECK(!back.states);
  CHECK(!back.success);
}

TEST_CASE("RVT1 rejects corrupt input with typed errors") {
  const Bytes good = serialize_trajectory(random_trajectory(5, 3));
  Bytes b = good;
  b[0] = 'X';
  CHECK(error_of([&] { deserialize_trajectory(b); }) == Errc::BadMagic);
  b = good;
  b[4] = 2;  // major version
  CHECK(error_of([&] { deserialize_trajectory(b); }) == Errc::VersionMismatch);
  b = good;
  b[12] = 0xff;  // first section length
  b[13] = 0xff;
  CHECK(error_of([&] { deserialize_trajectory(b); }) == Errc::TruncatedStream);
  b = good;
  b[good.size() / 2] ^= 0x01;
  CHECK(error_of([&] { deserialize_trajectory(b); }) == Errc::ChecksumFailure);
  b = Bytes(good.begin(), good.begin() + static_cast<long>(good.size() - 7));
  CHECK(error_of([&] { deserialize_trajectory(b); }) == Errc::TruncatedStream);
  CHECK(error_of([&] { deserialize_trajectory(Bytes{}); }) == Errc::TruncatedStream);
}

TEST_CASE("RVT1 readers accept newer minor versions and skip unknown sections") {
  const Trajectory t = random_trajectory(2, 9);
  Bytes b = serialize_trajectory(t);
  b.resize(b.size() - 4);
  b[6] = 7;  // minor version
  const std::uint8_t extra[] = {'X', 'T', 'R', 'A', 3, 0, 0, 0, 0, 0, 0, 0, 1, 2, 3};
  b.insert(b.end(), std::begin(extra), std::end(extra));
  boost::crc_32_type crc;
  crc.process_bytes(b.data(), b.size());
  const std::uint32_t c = crc.checksum();
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(c >> (8 * i)));
  CHECK(deserialize_trajectory(b) == t);
}

TEST_CASE("trajectory files") {
  const auto path = std::filesystem::temp_directory_path() / "metasim_state_test.rvt";
  const Trajectory t = random_trajectory(10, 5);
  write_trajectory_file(path, t);
  CHECK(read_trajectory_file(path) == t);
  std::filesystem::remove(path);
  CHECK(error_of([&] { read_trajectory_file(path); }) == Errc::Io);
}
