#pragma once

#include <array>

namespace metasim {

/// Surface appearance. Reflection scalars and colour channels live in [0, 1].
struct MaterialParams {
  double roughness = 0.5;
  double specular = 0.5;
  double metallic = 0.0;
  std::array<double, 3> base_color{0.7, 0.7, 0.7};

  bool operator==(const MaterialParams&) const = default;
};

}  // namespace metasim
