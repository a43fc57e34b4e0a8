#include <filesystem>

#include "metasim/assets/formats.hpp"

namespace metasim::assets {

namespace fs = std::filesystem;

namespace {

bool is_file(const fs::path& p) {
  std::error_code ec;
  return fs::is_regular_file(p, ec);
}

/// Returns the rewritten reference, or nullopt when nothing in `dir` matches.
std::optional<std::string> resolve_in(const fs::path& ref, const fs::path& dir) {
  const fs::path full = ref.is_absolute() ? ref : dir / ref;
  if (ref.extension() == ".msh") {
    const fs::path same_stem = full.parent_path() / (full.stem().string() + ".obj");
    if (is_file(same_stem)) return fs::path(ref).replace_extension(".obj").generic_string();
    if (is_file(full.parent_path() / "textured.obj"))
      return (ref.parent_path() / "textured.obj").generic_string();
    return std::nullopt;
  }
  if (is_file(full)) return ref.generic_string();
  return std::nullopt;
}

}  // namespace

CanonicalAsset resolve_mesh_refs(const CanonicalAsset& asset, const std::vector<fs::path>& search_dirs) {
  CanonicalAsset out = asset;
  for (auto& body : out.bodies) {
    for (auto& geom : body.geoms) {
      if (geom.shape != GeomShape::Mesh) continue;
      const fs::path ref(geom.mesh_path);
      std::vector<fs::path> dirs;
      if (ref.is_absolute()) {
        dirs.push_back(ref.parent_path());
      } else {
        dirs = search_dirs;
        if (!asset.base_dir.empty()) dirs.push_back(asset.base_dir);
      }
      std::optional<std::string> resolved;
      for (const auto& dir : dirs) {
        resolved = resolve_in(ref, dir);
        if (resolved) break;
      }
      if (resolved) {
        geom.mesh_path = *resolved;
      } else if (ref.extension() == ".msh") {
        out.warnings.push_back("mesh '" + geom.mesh_path + "' on body '" + body.name +
                               "' has no sibling .obj; converted textures may be misaligned");
      } else {
        out.warnings.push_back("mesh '" + geom.mesh_path + "' on body '" + body.name +
                               "' not found in any search directory");
      }
    }
  }
  return out;
}

}  // namespace metasim::assets
