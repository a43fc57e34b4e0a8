#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "metasim/assets/asset.hpp"

namespace metasim::assets {

/// URDF 1.0. Fixed joints are kept; transmissions and gazebo extensions are
/// skipped with a warning; continuous joints become unbounded revolutes and
/// floating joints become free joints.
CanonicalAsset parse_urdf(std::string_view text);

/// MJCF subset: nested bodies, hinge/slide/free joints, sphere/box/plane/mesh
/// geoms, default classes, and the `angle`/`eulerseq` compiler options.
/// Everything else ends up in the warning list.
CanonicalAsset parse_mjcf(std::string_view text);

/// Throws UnrepresentableInUrdf for free joints below the root. A free joint
/// on the root is dropped (URDF roots float implicitly) with a warning.
std::string export_urdf(const CanonicalAsset& asset, std::vector<std::string>* warnings = nullptr);

struct Conversion {
  std::string urdf;
  std::vector<std::string> warnings;
};

Conversion convert_mjcf_to_urdf(std::string_view mjcf_text);

/// Resolves mesh references: a same-stem `.obj` beside the mesh wins, then a
/// `textured.obj` in that directory; otherwise the path is kept and a
/// texture-misalignment warning is appended. Directories are tried in order.
CanonicalAsset resolve_mesh_refs(const CanonicalAsset& asset,
                                 const std::vector<std::filesystem::path>& search_dirs);

}  // namespace metasim::assets
