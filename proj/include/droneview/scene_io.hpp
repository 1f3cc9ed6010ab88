#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "droneview/drone_state.hpp"
#include "droneview/objectives.hpp"
#include "droneview/scene.hpp"

namespace droneview {

/// Everything a scene file describes: static planes, the arm, workspace bounds,
/// drone home pose and cost constants.
///
/// Schema (lengths in m, angles in rad; `extents` are half-extents):
///   planes:    [{center:[3], normal:[3], axis_u:[3], extents:[2]}]   (>= 1)
///   chain:     {base:[3], base_yaw?, links:[n], axes?:["x"|"y"|"z"], limits:[[min,max]], initial?:[n]}
///   workspace: {min:[3], max:[3]}
///   drone?:    {home:[x,y,z,yaw]}
///   constants?: ObjectiveParams overrides
struct SceneFile {
  std::vector<RectPlane> planes;
  KinematicChain chain;
  std::vector<double> initial_angles;
  Workspace workspace;
  DroneState drone_home;
  ObjectiveParams constants;

  /// Snapshot for a given arm configuration.
  SceneSnapshot snapshot(std::span<const double> angles, double timestamp = 0.0) const;
  SceneSnapshot initial_snapshot() const { return snapshot(initial_angles, 0.0); }
};

/// Parses and validates; throws SceneError listing every offending field path.
SceneFile parse_scene(const nlohmann::json& doc);
SceneFile load_scene(const std::filesystem::path& path);

nlohmann::json scene_to_json(const SceneFile& scene);
nlohmann::json params_to_json(const ObjectiveParams& params);
std::string dump_scene(const SceneFile& scene);
void save_scene(const SceneFile& scene, const std::filesystem::path& path);

/// Stable content hash of the serialized scene (hex), used to tag logs and
/// protocol messages.
std::string scene_digest(const SceneFile& scene);

}  // namespace droneview
