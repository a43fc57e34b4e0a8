#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metasim/backends/scene_model.hpp"

namespace metasim::backends {

/// Row-major 8-bit RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::array<std::uint8_t, 3> pixel(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  bool operator==(const Image&) const = default;
};

/// Pinhole camera looking along its local +z with +x right and +y down.
/// Spheres are drawn as discs and boxes/planes as polygons, sorted far to
/// near, flat-shaded by the first distant light over a background taken
/// from the scene's wall colour. Throws DegenerateCamera.
Image render_scene(const SceneModel& model, const state::EnvState& env, const config::CameraConfig& camera);

std::string encode_ppm(const Image& image);
void write_ppm(const std::filesystem::path& path, const Image& image);

}  // namespace metasim::backends
