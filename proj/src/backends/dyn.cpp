#include <algorithm>
#include <cmath>
#include <tuple>

#include "metasim/common/error.hpp"
#include "metasim/common/numfmt.hpp"
#include "backends.hpp"
#include "world.hpp"

namespace metasim::backends {

namespace {

using Mat3 = Eigen::Matrix3d;

constexpr double kDefaultTau = 0.05;
constexpr double kContactSlop = 1e-6;
constexpr int kMaxEvents = 32;

struct Body {
  state::EntityState* s = nullptr;
  const EntityModel* m = nullptr;
  double inv_mass = 0.0;
  Mat3 inv_inertia = Mat3::Zero();  // world frame
  bool sphere = false;
  bool plane = false;
  bool box = false;
  double radius = 0.0;
};

struct Contact {
  int a = 0;
  int b = 0;
  Vec3 n = Vec3::UnitZ();  // from a towards b
  Vec3 point = Vec3::Zero();
  double gap = 0.0;        // negative when penetrating
  double target = 0.0;     // desired post-impulse normal velocity
  double accumulated = 0.0;
};

Mat3 world_inverse_inertia(const Quat& rot, const Vec3& diag) {
  if (diag.isZero()) return Mat3::Zero();
  const Mat3 r = rot.normalized().toRotationMatrix();
  return r * diag.cwiseInverse().asDiagonal() * r.transpose();
}

bool isotropic(const Vec3& d) { return d.x() == d.y() && d.y() == d.z(); }

class DynHandler final : public WorldHandler {
 public:
  DynHandler(const config::ScenarioConfig& cfg, std::size_t num_envs) : WorldHandler(cfg, num_envs) {
    tau_ = kDefaultTau;
    auto it = cfg.backend_extras.find("dyn");
    if (it != cfg.backend_extras.end()) {
      auto t = it->second.find("tau");
      if (t != it->second.end()) {
        const auto v = parse_double(t->second);
        if (!v || !(*v > 0.0)) throw Error(Errc::InvariantViolation, "backend_extras.dyn.tau must be > 0");
        tau_ = *v;
      }
    }
  }

  std::string backend_name() const override { return "dyn"; }

 protected:
  void substep(state::EnvState& env) override {
    const double h = dt();
    const auto& sim = model().config().sim;
    const state::EnvState before = env;

    track_targets(env, h);
    const auto carried = carry_grasped(before, env, h);

    std::vector<Body> bodies;
    for (const auto& m : model().entities()) {
      if (m.articulated()) continue;
      if (std::find(carried.begin(), carried.end(), m.name) != carried.end()) continue;
      Body b;
      b.s = &env.at(m.name);
      b.m = &m;
      b.sphere = m.shape == config::ObjectKind::Sphere;
      b.plane = m.shape == config::ObjectKind::Plane;
      b.box = m.shape == config::ObjectKind::Box;
      b.radius = b.sphere ? m.dims[0] : 0.0;
      if (m.dynamic()) {
        b.inv_mass = 1.0 / m.mass;
        b.inv_inertia = world_inverse_inertia(b.s->rot, m.inertia_diag);
      }
      bodies.push_back(b);
    }

    // Forces: gravity only.
    for (auto& b : bodies)
      if (b.inv_mass > 0.0) b.s->lin_vel += sim.gravity * h;

    const double rest_threshold = 2.0 * sim.gravity.norm() * h;

    // Velocity phase on resting / touching contacts.
    // Box corners are also taken a step ahead: a corner still `gap` away may
    // close at most that gap this substep (speculative contact).
    auto contacts = find_contacts(bodies, kContactSlop, h);
    for (auto& c : contacts) {
      if (c.gap > kContactSlop) {
        c.target = -c.gap / h;
        continue;
      }
      const double vn = normal_velocity(bodies, c);
      c.target = vn < -rest_threshold ? -restitution(bodies, c) * vn : 0.0;
    }
    for (int it = 0; it < sim.solver_iterations; ++it) {
      for (auto& c : contacts) {
        const double k = effective_mass_inverse(bodies, c);
        if (k <= 0.0) continue;
        const double vn = normal_velocity(bodies, c);
        const double j = (c.target - vn) / k;
        const double acc = std::max(c.accumulated + j, 0.0);
        apply_impulse(bodies, c, acc - c.accumulated);
        c.accumulated = acc;
      }
    }

    // Position phase: sphere pairs and sphere-plane pairs are advanced to
    // their time of impact so elastic events carry no penetration error.
    double remaining = h;
    for (int ev = 0; ev < kMaxEvents; ++ev) {
      Contact hit;
      const double t = earliest_impact(bodies, remaining, hit);
      if (t < 0.0) break;
      advance_linear(bodies, t);
      remaining -= t;
      const double vn = normal_velocity(bodies, hit);
      const double e = vn < -rest_threshold ? restitution(bodies, hit) : 0.0;
      const double k = effective_mass_inverse(bodies, hit);
      if (k > 0.0) apply_impulse(bodies, hit, (-e * vn - vn) / k);
    }
    advance_linear(bodies, remaining);
    for (auto& b : bodies) advance_rotation(b, h);

    // Remove residual penetration, split by inverse mass, once per pair at
    // its deepest point.
    auto overlaps = find_contacts(bodies, 0.0, 0.0);
    std::stable_sort(overlaps.begin(), overlaps.end(), [](const Contact& x, const Contact& y) {
      return std::tie(x.a, x.b, x.gap) < std::tie(y.a, y.b, y.gap);
    });
    for (std::size_t i = 0; i < overlaps.size(); ++i) {
      const Contact& c = overlaps[i];
      if (i > 0 && overlaps[i - 1].a == c.a && overlaps[i - 1].b == c.b) continue;
      if (c.gap >= -kContactSlop) continue;
      Body& A = bodies[c.a];
      Body& B = bodies[c.b];
      const double w = A.inv_mass + B.inv_mass;
      if (w <= 0.0) continue;
      const double depth = -c.gap;
      A.s->pos -= c.n * (depth * A.inv_mass / w);
      B.s->pos += c.n * (depth * B.inv_mass / w);
    }
  }

 private:
  void track_targets(state::EnvState& env, double h) const {
    const double alpha = -std::expm1(-h / tau_);
    for (const auto& m : model().entities()) {
      if (!m.articulated()) continue;
      auto& s = env.at(m.name);
      const VecX old = s.dof_pos;
      const VecX target = s.dof_target.cwiseMax(m.kin->lower_limits()).cwiseMin(m.kin->upper_limits());
      s.dof_pos = s.dof_pos + (target - s.dof_pos) * alpha;
      s.dof_vel = (s.dof_pos - old) / h;
    }
  }

  static double restitution(const std::vector<Body>& bodies, const Contact& c) {
    return std::min(bodies[c.a].m->restitution, bodies[c.b].m->restitution);
  }

  /// Lever arm from the body centre to the contact point. Spheres get none:
  /// their contact normals pass through the centre.
  static Vec3 arm(const Body& b, const Contact& c) {
    if (b.sphere || b.plane) return Vec3::Zero();
    return c.point - b.s->pos;
  }

  static Vec3 point_velocity(const Body& b, const Vec3& r) {
    if (b.inv_mass == 0.0) return Vec3::Zero();
    return b.s->lin_vel + b.s->ang_vel.cross(r);
  }

  static double normal_velocity(const std::vector<Body>& bodies, const Contact& c) {
    const Body& A = bodies[c.a];
    const Body& B = bodies[c.b];
    return (point_velocity(B, arm(B, c)) - point_velocity(A, arm(A, c))).dot(c.n);
  }

  static double effective_mass_inverse(const std::vector<Body>& bodies, const Contact& c) {
    double k = 0.0;
    for (const Body* b : {&bodies[c.a], &bodies[c.b]}) {
      if (b->inv_mass == 0.0) continue;
      k += b->inv_mass;
      const Vec3 r = arm(*b, c);
      if (!r.isZero()) {
        const Vec3 rn = r.cross(c.n);
        k += rn.dot(b->inv_inertia * rn);
      }
    }
    return k;
  }

  static void apply_impulse(std::vector<Body>& bodies, const Contact& c, double j) {
    if (j == 0.0) return;
    const Vec3 impulse = c.n * j;
    Body& A = bodies[c.a];
    Body& B = bodies[c.b];
    if (A.inv_mass > 0.0) {
      A.s->lin_vel -= impulse * A.inv_mass;
      const Vec3 r = arm(A, c);
      if (!r.isZero()) A.s->ang_vel -= A.inv_inertia * r.cross(impulse);
    }
    if (B.inv_mass > 0.0) {
      B.s->lin_vel += impulse * B.inv_mass;
      const Vec3 r = arm(B, c);
      if (!r.isZero()) B.s->ang_vel += B.inv_inertia * r.cross(impulse);
    }
  }

  static Vec3 plane_normal(const Body& p) { return p.s->rot.normalized() * Vec3::UnitZ(); }

  /// Contacts with gap <= slop. Pairs: sphere-sphere, sphere-plane, box-plane.
  /// Box corners that could reach the plane within `lookahead` seconds are
  /// included as well.
  static std::vector<Contact> find_contacts(const std::vector<Body>& bodies, double slop, double lookahead) {
    std::vector<Contact> out;
    for (int i = 0; i < static_cast<int>(bodies.size()); ++i) {
      for (int j = i + 1; j < static_cast<int>(bodies.size()); ++j) {
        const Body& A = bodies[i];
        const Body& B = bodies[j];
        if (A.inv_mass == 0.0 && B.inv_mass == 0.0) continue;
        if (A.sphere && B.sphere) {
          const Vec3 d = B.s->pos - A.s->pos;
          const double dist = d.norm();
          const double gap = dist - A.radius - B.radius;
          if (gap > slop || dist == 0.0) continue;
          Contact c{i, j, d / dist, A.s->pos + d / dist * A.radius, gap};
          out.push_back(c);
        } else if ((A.plane && (B.sphere || B.box)) || (B.plane && (A.sphere || A.box))) {
          const int pi = A.plane ? i : j;
          const int oi = A.plane ? j : i;
          const Body& P = bodies[pi];
          const Body& O = bodies[oi];
          const Vec3 n = plane_normal(P);
          if (O.sphere) {
            const double h = (O.s->pos - P.s->pos).dot(n);
            if (h < 0.0) continue;  // behind the plane
            const double gap = h - O.radius;
            if (gap > slop) continue;
            out.push_back({pi, oi, n, O.s->pos - n * O.radius, gap});
          } else {
            const Vec3 half = 0.5 * Vec3(O.m->dims[0], O.m->dims[1], O.m->dims[2]);
            const Pose pose(O.s->pos, O.s->rot.normalized());
            if ((O.s->pos - P.s->pos).dot(n) < 0.0) continue;
            const double margin =
                std::max(slop, lookahead * (O.s->lin_vel.norm() + O.s->ang_vel.norm() * half.norm()));
            for (int k = 0; k < 8; ++k) {
              const Vec3 corner(k & 1 ? half.x() : -half.x(), k & 2 ? half.y() : -half.y(),
                                k & 4 ? half.z() : -half.z());
              const Vec3 p = pose.apply(corner);
              const double gap = (p - P.s->pos).dot(n);
              if (gap > margin) continue;
              out.push_back({pi, oi, n, p, gap});
            }
          }
        }
      }
    }
    return out;
  }

  /// Earliest approaching sphere contact within [0, horizon] under linear
  /// motion; -1 if none.
  static double earliest_impact(const std::vector<Body>& bodies, double horizon, Contact& hit) {
    double best = -1.0;
    for (int i = 0; i < static_cast<int>(bodies.size()); ++i) {
      for (int j = i + 1; j < static_cast<int>(bodies.size()); ++j) {
        const Body& A = bodies[i];
        const Body& B = bodies[j];
        if (A.inv_mass == 0.0 && B.inv_mass == 0.0) continue;
        double t = -1.0;
        Contact c;
        if (A.sphere && B.sphere) {
          const Vec3 d = B.s->pos - A.s->pos;
          const Vec3 v = point_velocity(B, Vec3::Zero()) - point_velocity(A, Vec3::Zero());
          const double rr = A.radius + B.radius;
          const double dv = d.dot(v);
          if (dv >= 0.0) continue;  // separating
          const double vv = v.squaredNorm();
          const double cc = d.squaredNorm() - rr * rr;
          if (cc <= 0.0) {
            t = 0.0;
          } else {
            const double disc = dv * dv - vv * cc;
            if (disc < 0.0) continue;
            t = cc / (-dv + std::sqrt(disc));  // smaller root, cancellation-free
          }
          if (t > horizon) continue;
          const Vec3 dt = d + v * t;
          const double dist = dt.norm();
          if (dist == 0.0) continue;
          c = Contact{i, j, dt / dist, Vec3::Zero(), 0.0};
        } else if ((A.plane && B.sphere) || (B.plane && A.sphere)) {
          const int pi = A.plane ? i : j;
          const int oi = A.plane ? j : i;
          const Body& P = bodies[pi];
          const Body& O = bodies[oi];
          const Vec3 n = plane_normal(P);
          const double h = (O.s->pos - P.s->pos).dot(n);
          if (h < 0.0) continue;
          const double vn = point_velocity(O, Vec3::Zero()).dot(n);
          if (vn >= 0.0) continue;
          const double gap = h - O.radius;
          t = gap <= 0.0 ? 0.0 : gap / -vn;
          if (t > horizon) continue;
          c = Contact{pi, oi, n, Vec3::Zero(), 0.0};
        } else {
          continue;
        }
        if (best < 0.0 || t < best) {
          best = t;
          hit = c;
        }
      }
    }
    return best;
  }

  static void advance_linear(std::vector<Body>& bodies, double t) {
    if (t <= 0.0) return;
    for (auto& b : bodies)
      if (b.inv_mass > 0.0) b.s->pos += b.s->lin_vel * t;
  }

  /// Quaternion update with the world angular momentum held fixed, so a
  /// torque-free body keeps L exactly and only its spin axis precesses.
  static void advance_rotation(Body& b, double h) {
    if (b.inv_mass == 0.0) return;
    const Vec3& w = b.s->ang_vel;
    if (w.isZero()) return;
    const Vec3 diag = b.m->inertia_diag;
    const Vec3 L = isotropic(diag) ? Vec3::Zero() : Vec3(world_inverse_inertia(b.s->rot, diag).inverse() * w);
    Quat q = b.s->rot;
    const Quat wq(0.0, w.x(), w.y(), w.z());
    Quat dq = wq * q;
    q.coeffs() += 0.5 * h * dq.coeffs();
    b.s->rot = normalized_if_needed(q);
    if (!isotropic(diag)) b.s->ang_vel = world_inverse_inertia(b.s->rot, diag) * L;
  }

  double tau_ = kDefaultTau;
};

}  // namespace

std::unique_ptr<Handler> make_dyn_handler(const config::ScenarioConfig& cfg, std::size_t num_envs) {
  return std::make_unique<DynHandler>(cfg, num_envs);
}

}  // namespace metasim::backends
