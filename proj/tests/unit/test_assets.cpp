#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "metasim/assets/formats.hpp"
#include "metasim/backends/kinematics.hpp"
#include "metasim/common/error.hpp"

using namespace metasim;
using namespace metasim::assets;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = METASIM_FIXTURES;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<fs::path> corpus(const std::string& dir, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(kFixtures / dir))
    if (e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

bool has_warning(const CanonicalAsset& a, const std::string& needle) {
  for (const auto& w : a.warnings)
    if (w.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("single-link URDF") {
  const auto a = parse_urdf(slurp(kFixtures / "urdf/single_link.urdf"));
  CHECK(a.bodies.size() == 1);
  CHECK(a.joints.empty());
  CHECK(a.actuated_order.empty());
}

TEST_CASE("9-DoF arm URDF keeps fixed joints and orders actuated joints") {
  const auto a = parse_urdf(slurp(kFixtures / "urdf/arm9.urdf"));
  REQUIRE(a.actuated_order.size() == 9);
  CHECK(a.actuated_order.front() == "joint1");
  CHECK(a.actuated_order[7] == "finger_joint1");
  CHECK(a.find_joint("hand_mount") != nullptr);
  CHECK(a.find_joint("hand_mount")->kind == JointKind::Fixed);
}

TEST_CASE("URDF errors are typed") {
  CHECK(error_of([] { parse_urdf(slurp(kFixtures / "bad/missing_link.urdf")); }) == Errc::MissingLinkReference);
  CHECK(error_of([] { parse_urdf(slurp(kFixtures / "bad/cyclic.urdf")); }) == Errc::CyclicBodyGraph);
  CHECK(error_of([] { parse_urdf(slurp(kFixtures / "bad/multi_root.urdf")); }) == Errc::MultipleRoots);
  CHECK(error_of([] { parse_urdf(slurp(kFixtures / "bad/malformed.urdf")); }) == Errc::MalformedXml);
  CHECK(error_of([] { parse_urdf("<robot name='x'><link name='a'/><link name='a'/></robot>"); }) ==
        Errc::InvariantViolation);
}

TEST_CASE("URDF transmission and gazebo are skipped with warnings") {
  const auto a = parse_urdf(slurp(kFixtures / "urdf/transmission_gazebo.urdf"));
  CHECK(a.actuated_order.size() == 2);
  CHECK(has_warning(a, "transmission"));
  CHECK(has_warning(a, "gazebo"));
}

TEST_CASE("continuous joints become unbounded revolutes") {
  const auto a = parse_urdf(slurp(kFixtures / "urdf/wheel_continuous.urdf"));
  const Joint* j = a.find_joint("axle_left");
  REQUIRE(j);
  CHECK(j->kind == JointKind::Revolute);
  CHECK(std::isinf(j->upper));
  CHECK(std::isinf(j->lower));
}

TEST_CASE("full inertia tensors are diagonalized into a principal frame") {
  const auto a = parse_urdf(slurp(kFixtures / "urdf/full_inertia.urdf"));
  const Body* b = a.find_body("base_link");
  REQUIRE(b);
  // Oracle: rebuild the world-frame tensor from R diag R^T and compare to
  // the source rotated by the inertial origin rpy.
  Eigen::Matrix3d src;
  src << 0.05, 0.01, -0.004, 0.01, 0.04, 0.002, -0.004, 0.002, 0.03;
  const Eigen::Matrix3d R0 = quat_from_rpy(0.1, 0.2, 0.3).toRotationMatrix();
  const Eigen::Matrix3d expect = R0 * src * R0.transpose();
  const Eigen::Matrix3d R = b->inertial.frame.toRotationMatrix();
  const Eigen::Matrix3d got = R * b->inertial.diag_inertia.asDiagonal() * R.transpose();
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(b->inertial.diag_inertia.sum() == doctest::Approx(src.trace()));
}

TEST_CASE("prismatic axes are normalized") {
  const auto a = parse_urdf(slurp(kFixtures / "urdf/slider.urdf"));
  const Joint* j = a.find_joint("slide");
  REQUIRE(j);
  CHECK(std::abs(j->axis.norm() - 1.0) < 1e-12);
  CHECK(j->axis.x() == doctest::Approx(0.6));
}

TEST_CASE("MJCF free box") {
  const auto a = parse_mjcf(slurp(kFixtures / "mjcf/free_box.xml"));
  CHECK(a.bodies.size() == 1);
  REQUIRE(a.joints.size() == 1);
  CHECK(a.joints[0].kind == JointKind::Free);
  CHECK(a.actuated_order.empty());
}

TEST_CASE("MJCF nested3 matches the hand-traced tree") {
  const auto a = parse_mjcf(slurp(kFixtures / "mjcf/nested3.xml"));
  // base -> upper (shoulder, hinge y) -> lower (elbow, hinge y)
  REQUIRE(a.bodies.size() == 3);
  CHECK(a.root().name == "base");
  CHECK(a.find_body("upper")->parent == std::optional<std::string>("base"));
  CHECK(a.find_body("lower")->parent == std::optional<std::string>("upper"));
  CHECK(a.actuated_order == std::vector<std::string>{"shoulder", "elbow"});
  const Joint* sh = a.find_joint("shoulder");
  CHECK((sh->axis - Vec3::UnitY()).norm() < 1e-12);
  CHECK(sh->lower == doctest::Approx(-M_PI / 2));
  CHECK(sh->upper == doctest::Approx(M_PI / 2));
  CHECK((sh->origin.pos - Vec3(0, 0, 0.05)).norm() < 1e-12);
  CHECK((a.find_joint("elbow")->origin.pos - Vec3(0, 0, 0.3)).norm() < 1e-12);
  CHECK(a.root().pose_in_parent.pos.z() == doctest::Approx(0.1));
}

TEST_CASE("MJCF 9-DoF arm") {
  const auto a = parse_mjcf(slurp(kFixtures / "mjcf/arm9.xml"));
  REQUIRE(a.actuated_order.size() == 9);
  const Joint* f1 = a.find_joint("finger_joint1");
  REQUIRE(f1);
  CHECK(f1->kind == JointKind::Prismatic);  // from the childclass default
  CHECK(f1->upper == doctest::Approx(0.04));
}

TEST_CASE("MJCF default classes and childclass inheritance") {
  const auto a = parse_mjcf(slurp(kFixtures / "mjcf/defaults_classes.xml"));
  const Joint* rail = a.find_joint("rail");
  REQUIRE(rail);
  CHECK(rail->kind == JointKind::Prismatic);
  CHECK((rail->axis - Vec3::UnitX()).norm() < 1e-12);
  CHECK(rail->upper == doctest::Approx(0.2));
  const Joint* swivel = a.find_joint("swivel");
  REQUIRE(swivel);
  CHECK(swivel->kind == JointKind::Revolute);
  CHECK(swivel->upper == doctest::Approx(M_PI / 4));
  CHECK(has_warning(a, "zero mass"));
  CHECK(a.find_body("pointer")->geoms.at(0).shape == GeomShape::Sphere);
}

TEST_CASE("MJCF compiler degree and eulerseq") {
  const auto a = parse_mjcf(slurp(kFixtures / "mjcf/euler_degree.xml"));
  const Joint* tilt = a.find_joint("tilt");
  REQUIRE(tilt);
  CHECK(tilt->lower == doctest::Approx(-M_PI / 6));
  // eulerseq "zyx" (intrinsic): R = Rz(a) Ry(b) Rx(c)
  const Quat expect = Eigen::AngleAxisd(0.0, Vec3::UnitZ()) *
                      Eigen::AngleAxisd(45.0 * M_PI / 180, Vec3::UnitY()) *
                      Eigen::AngleAxisd(10.0 * M_PI / 180, Vec3::UnitX());
  CHECK(rotation_angle(tilt->origin.rot, expect) < 1e-9);
}

TEST_CASE("MJCF unsupported sections are recorded, not dropped silently") {
  const auto a = parse_mjcf(slurp(kFixtures / "mjcf/unsupported_features.xml"));
  CHECK(has_warning(a, "tendon"));
  CHECK(has_warning(a, "actuator"));
  CHECK(has_warning(a, "equality"));
  CHECK(a.actuated_order.size() == 1);
}

TEST_CASE("MJCF multi-joint body chains through an intermediate link") {
  const auto a = parse_mjcf(slurp(kFixtures / "mjcf/multi_joint.xml"));
  CHECK(a.actuated_order == std::vector<std::string>{"yaw", "pitch"});
  auto fk = backends::forward_kinematics(a, Pose::identity(), VecX::Zero(2));
  CHECK((fk.at("gimbal").pos - Vec3(0, 0, 0.22)).norm() < 1e-12);
  // geom centre stays at the body's MJCF origin (0,0,0.2)
  const Body* g = a.find_body("gimbal");
  CHECK((fk.at("gimbal").apply(g->geoms.at(0).pose_in_body.pos) - Vec3(0, 0, 0.2)).norm() < 1e-12);
}

TEST_CASE("MJCF joint pos offsets the pivot") {
  const auto a = parse_mjcf(slurp(kFixtures / "mjcf/joint_offset.xml"));
  VecX q(1);
  q << M_PI / 2;
  auto fk = backends::forward_kinematics(a, Pose::identity(), q);
  // Lever tip at MJCF body x = 0.5 rotates about (-0.1, 0, 1) by +90deg around y.
  const Body* lever = a.find_body("lever");
  const Pose frame = fk.at("lever");
  const Vec3 mjcf_tip(0.5, 0, 0);
  const Vec3 pivot(-0.1, 0, 1);
  const Vec3 expect = pivot + Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY()) * (Vec3(0.5, 0, 1) - pivot);
  const Pose geom_world = frame * lever->geoms.at(0).pose_in_body;
  CHECK((geom_world.apply(mjcf_tip - Vec3(0.2, 0, 0)) - expect).norm() < 1e-12);
}

TEST_CASE("MJCF errors are typed") {
  CHECK(error_of([] { parse_mjcf(slurp(kFixtures / "bad/ball_joint.xml")); }) == Errc::UnsupportedJointKind);
  CHECK(error_of([] { parse_mjcf(slurp(kFixtures / "bad/undefined_class.xml")); }) ==
        Errc::InconsistentDefaultClass);
  CHECK(error_of([] { parse_mjcf("<mujoco><worldbody><body></worldbody></mujoco>"); }) == Errc::MalformedXml);
}

TEST_CASE("export rejects an internal free joint") {
  const auto a = parse_mjcf(slurp(kFixtures / "bad/internal_free.xml"));
  CHECK(error_of([&] { export_urdf(a); }) == Errc::UnrepresentableInUrdf);
}

TEST_CASE("URDF corpus round-trips through export") {
  const auto files = corpus("urdf", ".urdf");
  CHECK(files.size() >= 10);
  for (const auto& f : files) {
    CAPTURE(f);
    const auto a = parse_urdf(slurp(f));
    const auto b = parse_urdf(export_urdf(a));
    std::string why;
    CHECK_MESSAGE(structurally_equal(a, b, 1e-9, &why), why);
    CHECK(a.actuated_order == b.actuated_order);
  }
}

TEST_CASE("MJCF corpus converts with DoF preserved and re-exports stably") {
  const auto files = corpus("mjcf", ".xml");
  CHECK(files.size() >= 10);
  for (const auto& f : files) {
    CAPTURE(f);
    const auto m = parse_mjcf(slurp(f));
    const auto conv = convert_mjcf_to_urdf(slurp(f));
    const auto u = parse_urdf(conv.urdf);
    CHECK(u.actuated_order.size() == m.actuated_order.size());
    const auto u2 = parse_urdf(export_urdf(u));
    std::string why;
    CHECK_MESSAGE(structurally_equal(u, u2, 1e-9, &why), why);
  }
}

TEST_CASE("MJCF and URDF versions of the same robot agree on FK") {
  for (const std::string name : {"planar2", "door", "arm6"}) {
    CAPTURE(name);
    const auto m = parse_mjcf(slurp(kFixtures / ("mjcf/" + name + ".xml")));
    const auto conv = parse_urdf(convert_mjcf_to_urdf(slurp(kFixtures / ("mjcf/" + name + ".xml"))).urdf);
    VecX q = VecX::LinSpaced(static_cast<int>(m.dof()), 0.1, 0.5);
    const auto a = backends::forward_kinematics(m, Pose::identity(), q);
    const auto b = backends::forward_kinematics(conv, Pose::identity(), q);
    for (const auto& [body, pose] : a) {
      REQUIRE(b.count(body));
      CHECK((pose.pos - b.at(body).pos).norm() < 1e-9);
      CHECK(rotation_angle(pose.rot, b.at(body).rot) < 1e-7);
    }
  }
}

TEST_CASE("mesh references resolve by the sibling rule") {
  auto a = parse_mjcf(slurp(kFixtures / "mjcf/mesh_cup.xml"));
  a.base_dir = kFixtures / "mjcf";
  const auto r = resolve_mesh_refs(a, {});
  std::map<std::string, std::string> by_body;
  for (const auto& b : r.bodies)
    for (const auto& g : b.geoms)
      if (g.shape == GeomShape::Mesh) by_body[b.name] = g.mesh_path;
  CHECK(fs::path(by_body.at("cup")).filename() == "cup.obj");
  CHECK(fs::path(by_body.at("lid")).filename() == "textured.obj");
  CHECK(!has_warning(r, "misaligned"));

  auto u = parse_urdf(slurp(kFixtures / "urdf/mesh_gripper.urdf"));
  u.base_dir = kFixtures / "urdf";
  const auto ru = resolve_mesh_refs(u, {});
  CHECK(has_warning(ru, "finger.msh"));
  for (const auto& b : ru.bodies)
    for (const auto& g : b.geoms)
      if (b.name == "finger" && g.shape == GeomShape::Mesh) CHECK(g.mesh_path == "../meshes/finger.msh");

  const fs::path abs = fs::absolute(kFixtures / "meshes/cup.obj");
  CanonicalAsset one;
  one.name = "abs";
  Body b;
  b.name = "b";
  Geom g;
  g.shape = GeomShape::Mesh;
  g.mesh_path = abs.string();
  b.geoms.push_back(g);
  one.bodies.push_back(b);
  const auto ra = resolve_mesh_refs(one, {});
  CHECK(ra.bodies[0].geoms[0].mesh_path == abs.string());
  CHECK(ra.warnings.empty());
}

TEST_CASE("search directories are tried in order") {
  CanonicalAsset one;
  one.name = "search";
  Body b;
  b.name = "b";
  Geom g;
  g.shape = GeomShape::Mesh;
  g.mesh_path = "lid.msh";
  b.geoms.push_back(g);
  one.bodies.push_back(b);
  const auto r = resolve_mesh_refs(one, {kFixtures / "urdf", kFixtures / "meshes/sub", kFixtures / "meshes"});
  CHECK(r.bodies[0].geoms[0].mesh_path == "textured.obj");
  CHECK(r.warnings.empty());
}

TEST_CASE("load_asset_file dispatches on extension and reports missing files") {
  const auto a = load_asset_file(kFixtures / "mjcf/planar2.xml");
  CHECK(a.dof() == 2);
  CHECK(a.base_dir == kFixtures / "mjcf");
  CHECK(error_of([] { load_asset_file(kFixtures / "urdf/nope.urdf"); }) == Errc::AssetNotFound);
}
