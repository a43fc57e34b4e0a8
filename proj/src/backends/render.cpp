#include "metasim/backends/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "metasim/common/error.hpp"

namespace metasim::backends {

namespace {

constexpr double kNear = 1e-3;
constexpr double kUnboundedPlaneHalf = 20.0;
constexpr double kAmbient = 0.25;

using Vec2 = Eigen::Vector2d;

struct Item {
  enum class Kind { Disc, Polygon } kind = Kind::Polygon;
  std::vector<Vec2> pts;  // polygon vertices, or {center} for a disc
  double radius = 0.0;
  double depth = 0.0;
  Vec3 color = Vec3::Zero();
};

class Rasterizer {
 public:
  Rasterizer(const config::CameraConfig& cam, const config::ScenarioConfig& cfg) : cam_(cam) {
    if (!(cam.vertical_fov > 0.0 && cam.vertical_fov < 180.0) || cam.width < 1 || cam.height < 1 ||
        !is_finite(cam.pose.pos) || !is_finite(cam.pose.rot) || cam.pose.rot.norm() < 0.5)
      throw Error(Errc::DegenerateCamera, "camera '" + cam.name + "' has an invalid fov, size or pose");
    rot_inv_ = cam.pose.rot.normalized().conjugate();
    focal_ = 0.5 * cam.height / std::tan(0.5 * cam.vertical_fov * std::numbers::pi / 180.0);
    light_dir_ = Vec3::UnitZ();
    for (const auto& l : cfg.lights) {
      if (l.kind == config::LightKind::Distant) {
        const double p = l.polar * std::numbers::pi / 180.0, a = l.azimuth * std::numbers::pi / 180.0;
        light_dir_ = {std::sin(p) * std::cos(a), std::sin(p) * std::sin(a), std::cos(p)};
        intensity_ = l.intensity;
        break;
      }
      if (&l == &cfg.lights.front()) intensity_ = l.intensity;
    }
    const auto& bg = cfg.scene.wall.material.base_color;
    background_ = {bg[0], bg[1], bg[2]};
  }

  Vec3 to_camera(const Vec3& world) const { return rot_inv_ * (world - cam_.pose.pos); }

  Vec2 project(const Vec3& c) const {
    return {0.5 * cam_.width + focal_ * c.x() / c.z(), 0.5 * cam_.height + focal_ * c.y() / c.z()};
  }

  Vec3 shade(const Vec3& base, const Vec3& normal_world) const {
    const double lambert = std::max(0.0, normal_world.dot(light_dir_));
    const double s = kAmbient + (1.0 - kAmbient) * intensity_ * lambert;
    return (base * s).cwiseMin(1.0).cwiseMax(0.0);
  }

  void sphere(const Vec3& center, double radius, const Vec3& base) {
    const Vec3 c = to_camera(center);
    if (c.z() - radius <= kNear) return;
    const double dist = c.norm();
    Item it;
    it.kind = Item::Kind::Disc;
    it.pts = {project(c)};
    it.radius = focal_ * radius / std::sqrt(c.z() * c.z() - radius * radius);
    it.depth = dist - radius;
    it.color = shade(base, (cam_.pose.pos - center).normalized());
    items_.push_back(std::move(it));
  }

  /// Convex planar polygon in world coordinates with outward normal n.
  void polygon(const std::vector<Vec3>& world, const Vec3& n, const Vec3& base, bool two_sided) {
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : world) centroid += p;
    centroid /= static_cast<double>(world.size());
    Vec3 normal = n;
    if (normal.dot(cam_.pose.pos - centroid) <= 0.0) {
      if (!two_sided) return;
      normal = -normal;
    }
    std::vector<Vec3> cam;
    for (const auto& p : world) cam.push_back(to_camera(p));
    cam = clip_near(cam);
    if (cam.size() < 3) return;
    Item it;
    Vec3 mean = Vec3::Zero();
    for (const auto& p : cam) {
      it.pts.push_back(project(p));
      mean += p;
    }
    it.depth = (mean / static_cast<double>(cam.size())).norm();
    it.color = shade(base, normal);
    items_.push_back(std::move(it));
  }

  Image finish() {
    Image img;
    img.width = cam_.width;
    img.height = cam_.height;
    const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    img.rgb.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) put(img, i, background_);
    std::stable_sort(items_.begin(), items_.end(), [](const Item& a, const Item& b) { return a.depth > b.depth; });
    for (const auto& it : items_) {
      if (it.kind == Item::Kind::Disc) fill_disc(img, it);
      else fill_polygon(img, it);
    }
    return img;
  }

 private:
  static std::vector<Vec3> clip_near(const std::vector<Vec3>& in) {
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec3& a = in[i];
      const Vec3& b = in[(i + 1) % in.size()];
      const bool ina = a.z() >= kNear, inb = b.z() >= kNear;
      if (ina) out.push_back(a);
      if (ina != inb) {
        const double t = (kNear - a.z()) / (b.z() - a.z());
        out.push_back(a + t * (b - a));
      }
    }
    return out;
  }

  static std::uint8_t quantize(double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

  static void put(Image& img, std::size_t i, const Vec3& c) {
    img.rgb[3 * i] = quantize(c.x());
    img.rgb[3 * i + 1] = quantize(c.y());
    img.rgb[3 * i + 2] = quantize(c.z());
  }

  void fill_disc(Image& img, const Item& it) const {
    const Vec2 c = it.pts[0];
    const double r = it.radius;
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - r)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(c.x() + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - r)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(c.y() + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - c.x(), dy = y + 0.5 - c.y();
        if (dx * dx + dy * dy <= r * r) put(img, static_cast<std::size_t>(y) * img.width + x, it.color);
      }
    }
  }

  void fill_polygon(Image& img, const Item& it) const {
    double area = 0.0;
    Vec2 lo = it.pts[0], hi = it.pts[0];
    for (std::size_t i = 0; i < it.pts.size(); ++i) {
      const Vec2& a = it.pts[i];
      const Vec2& b = it.pts[(i + 1) % it.pts.size()];
      area += a.x() * b.y() - b.x() * a.y();
      lo = lo.cwiseMin(a);
      hi = hi.cwiseMax(a);
    }
    if (std::abs(area) < 1e-12) return;
    const double sign = area > 0.0 ? 1.0 : -1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::max(lo.x(), -1.0))));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::min(hi.x(), img.width + 1.0))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::max(lo.y(), -1.0))));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::min(hi.y(), img.height + 1.0))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p(x + 0.5, y + 0.5);
        bool inside = true;
        for (std::size_t i = 0; i < it.pts.size() && inside; ++i) {
          const Vec2& a = it.pts[i];
          const Vec2& b = it.pts[(i + 1) % it.pts.size()];
          const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
          inside = sign * cross >= 0.0;
        }
        if (inside) put(img, static_cast<std::size_t>(y) * img.width + x, it.color);
      }
    }
  }

  const config::CameraConfig& cam_;
  Quat rot_inv_;
  double focal_ = 1.0;
  Vec3 light_dir_;
  double intensity_ = 1.0;
  Vec3 background_;
  std::vector<Item> items_;
};

Vec3 color_of(const MaterialParams& m) { return {m.base_color[0], m.base_color[1], m.base_color[2]}; }

void draw_box(Rasterizer& r, const Pose& pose, const Vec3& full, const Vec3& color) {
  const Vec3 h = 0.5 * full;
  for (int axis = 0; axis < 3; ++axis) {
    for (int side = -1; side <= 1; side += 2) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      Vec3 n = Vec3::Zero();
      n[axis] = side;
      std::vector<Vec3> quad;
      const double su[4] = {-1, 1, 1, -1}, sv[4] = {-1, -1, 1, 1};
      for (int k = 0; k < 4; ++k) {
        Vec3 p = Vec3::Zero();
        p[axis] = side * h[axis];
        p[u] = su[k] * h[u];
        p[v] = sv[k] * h[v];
        quad.push_back(pose.apply(p));
      }
      r.polygon(quad, pose.rot * n, color, false);
    }
  }
}

void draw_plane(Rasterizer& r, const Pose& pose, const std::vector<double>& dims, const Vec3& color) {
  const double hx = dims.size() >= 2 && dims[0] > 0.0 ? dims[0] : kUnboundedPlaneHalf;
  const double hy = dims.size() >= 2 && dims[1] > 0.0 ? dims[1] : kUnboundedPlaneHalf;
  std::vector<Vec3> quad = {pose.apply({-hx, -hy, 0}), pose.apply({hx, -hy, 0}), pose.apply({hx, hy, 0}),
                            pose.apply({-hx, hy, 0})};
  r.polygon(quad, pose.rot * Vec3::UnitZ(), color, true);
}

}  // namespace

Image render_scene(const SceneModel& model, const state::EnvState& env, const config::CameraConfig& camera) {
  Rasterizer r(camera, model.config());
  for (const auto& e : model.entities()) {
    const auto& s = env.at(e.name);
    const Pose pose(s.pos, s.rot.normalized());
    if (!e.articulated()) {
      const Vec3 color = color_of(e.material);
      switch (e.shape) {
        case config::ObjectKind::Sphere: r.sphere(pose.pos, e.dims[0], color); break;
        case config::ObjectKind::Box: draw_box(r, pose, {e.dims[0], e.dims[1], e.dims[2]}, color); break;
        case config::ObjectKind::Plane: draw_plane(r, pose, e.dims, color); break;
        case config::ObjectKind::Articulated: break;
      }
      continue;
    }
    const auto& asset = e.kin->asset();
    const auto bodies = e.kin->body_poses(pose, s.dof_pos);
    for (std::size_t b = 0; b < asset.bodies.size(); ++b) {
      const auto& geoms = asset.bodies[b].geoms;
      const bool has_visual = std::any_of(geoms.begin(), geoms.end(),
                                          [](const assets::Geom& g) { return g.role == assets::GeomRole::Visual; });
      for (const auto& g : geoms) {
        if (has_visual && g.role != assets::GeomRole::Visual) continue;
        const Pose gp = bodies[b] * g.pose_in_body;
        const Vec3 color = color_of(g.material);
        if (g.shape == assets::GeomShape::Sphere && !g.dims.empty()) r.sphere(gp.pos, g.dims[0], color);
        else if (g.shape == assets::GeomShape::Box && g.dims.size() == 3) draw_box(r, gp, {g.dims[0], g.dims[1], g.dims[2]}, color);
        else if (g.shape == assets::GeomShape::Plane) draw_plane(r, gp, g.dims, color);
      }
    }
  }
  return r.finish();
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write '" + path.string() + "'");
  const std::string data = encode_ppm(image);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace metasim::backends
