#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "droneview/local_planner.hpp"
#include "droneview/objectives.hpp"
#include "droneview/scene.hpp"
#include "droneview/scene_io.hpp"

namespace fixtures {

using droneview::RectPlane;
using droneview::SceneSnapshot;
using droneview::Vec3;

inline RectPlane floor_plane(double z = 0.0, double half = 5.0) {
  return RectPlane::make(Vec3(0, 0, z), Vec3::UnitZ(), Vec3::UnitX(), half, half);
}

/// Snapshot with the given planes and a polyline arm ending at `ee`.
inline SceneSnapshot snapshot(std::vector<RectPlane> planes, std::vector<Vec3> joints) {
  SceneSnapshot s;
  s.planes = std::move(planes);
  s.joint_positions = std::move(joints);
  s.ee.position = s.joint_positions.back();
  s.workspace = {Vec3(-10, -10, -10), Vec3(10, 10, 10)};
  return s;
}

/// Far-away floor and a short vertical arm ending at `ee`.
inline SceneSnapshot open_scene(const Vec3& ee) {
  return snapshot({floor_plane(ee.z() - 5.0)},
                  {ee - Vec3(0, 0, 0.6), ee - Vec3(0, 0, 0.3), ee});
}

/// Table at z = 0, wall at x = 1 facing -x, six-joint arm at the origin. The
/// arm reaches toward the wall and the workspace tops out at 1.25 m.
inline droneview::SceneFile wall_scene() {
  droneview::SceneFile f;
  f.planes = {RectPlane::make(Vec3(0.2, 0, 0), Vec3::UnitZ(), Vec3::UnitX(), 1.6, 1.6),
              RectPlane::make(Vec3(1.0, 0, 0.75), -Vec3::UnitX(), Vec3::UnitY(), 1.6, 0.75)};
  f.chain = droneview::KinematicChain::default_arm(Vec3(0.0, 0.0, 0.02));
  f.initial_angles = {0.0, 0.9, 1.2, 0.0, 0.8, 0.0};
  f.workspace = {Vec3(-1.2, -1.4, 0.02), Vec3(0.97, 1.4, 1.25)};
  f.drone_home = droneview::DroneState{-0.6, 0.0, 0.6, 0.0};
  return f;
}

/// Arm reaching toward a wall panel; the wall is the region of interest.
inline droneview::SceneFile panel_scene() {
  return droneview::load_scene(std::string(DRONEVIEW_SCENE_DIR) + "/panel_wall.json");
}

/// Drone parked at a local minimum of the view cost (global set without c9),
/// reached from `seed` by a full-workspace descent.
inline droneview::DroneState settled_drone(const droneview::CostModel& model, const droneview::DroneState& seed) {
  const auto& ws = model.scene().workspace;
  const auto f = [&](const droneview::DroneState& s) {
    const auto b = model.evaluate(s, s, droneview::TermSet::Global);
    return b.total - model.params().weights[8] * b.c[8];
  };
  droneview::SolverOptions opts;
  opts.max_iterations = 200;
  return droneview::solver_minimize(f, seed, {ws.max - ws.min, std::numbers::pi}, opts, &ws).x;
}

struct PlanningCase {
  droneview::SceneSnapshot scene;
  droneview::DroneState prev_cmd;
};

/// Random static scene for planner checks: floor, a wall at a random side, an
/// arm of 3-5 joints reaching toward the wall, and a drone 0.4-1.4 m from the
/// end effector with a yaw error of up to 0.6 rad.
inline PlanningCase random_planning_case(std::mt19937_64& rng) {
  using droneview::DroneState;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double wall_angle = std::numbers::pi * u(rng);
  const Vec3 wall_dir(std::cos(wall_angle), std::sin(wall_angle), 0.0);
  const double wall_dist = 0.9 + 0.3 * u(rng);
  std::vector<RectPlane> planes{
      floor_plane(0.0, 2.5),
      RectPlane::make(wall_dist * wall_dir + Vec3(0, 0, 0.8), -wall_dir, Vec3::UnitZ().cross(wall_dir), 1.5, 0.8)};
  const Vec3 ee = (wall_dist - 0.15 - 0.3 * std::abs(u(rng))) * wall_dir + Vec3(0.2 * u(rng), 0.2 * u(rng), 0.5 + 0.3 * u(rng));
  std::vector<Vec3> joints{Vec3(0, 0, 0.02), Vec3(0, 0, 0.35)};
  const int extra = 1 + static_cast<int>(2.5 * (u(rng) + 1.0) / 2.0);
  for (int k = 1; k <= extra; ++k) {
    const double t = static_cast<double>(k) / (extra + 1);
    joints.push_back((1 - t) * joints[1] + t * ee + Vec3(0, 0, 0.15 * std::sin(t * std::numbers::pi)));
  }
  joints.push_back(ee);
  PlanningCase c{snapshot(planes, joints), {}};
  c.scene.workspace = {Vec3(-2.5, -2.5, 0.05), Vec3(2.5, 2.5, 1.8)};
  const double az = wall_angle + std::numbers::pi + 1.2 * u(rng);
  const double r = 0.9 + 0.5 * u(rng);
  const Vec3 pos = ee + Vec3(r * std::cos(az), r * std::sin(az), 0.3 * u(rng));
  const Vec3 to_ee = ee - pos;
  c.prev_cmd = DroneState::from(Vec3(pos.x(), pos.y(), std::max(pos.z(), 0.2)),
                                std::atan2(to_ee.y(), to_ee.x()) + 0.6 * u(rng));
  return c;
}

}  // namespace fixtures
