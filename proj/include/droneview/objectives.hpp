#pragma once

#include <array>
#include <vector>

#include "droneview/drone_state.hpp"
#include "droneview/geometry.hpp"
#include "droneview/scene.hpp"

namespace droneview {

inline constexpr std::size_t kNumTerms = 9;

/// Constants of the cost function. Defaults reproduce the reference
/// configuration; every field is overridable from the scene file.
struct ObjectiveParams {
  std::array<double, kNumTerms> weights{50.0, 50.0, 10.0, 10.0, 5.0, 5000.0, 100.0, 1000.0, 1.0};
  double f_fov{2.0};
  double theta_ref{4.0 * std::numbers::pi / 3.0};
  double sigma{0.1};
  int order{3};
  double epsilon{0.1};
  double d_min{0.3};
  double camera_pitch{0.0};
  Vec3 drone_half_dims{0.1, 0.1, 0.05};
  double capsule_radius{0.05};
  Uncertainty uncertainty{Vec3(0.05, 0.05, 0.02)};
  /// c4 is zeroed when the end effector is farther than this from every plane.
  /// Non-positive disables the gate.
  double c4_gate_distance{0.0};
  bool collision_hull_follows_yaw{false};

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

enum class TermSet { Local, Global };

/// Terms 1..8 for Local, 1..7 and 9 for Global.
bool term_active(TermSet set, std::size_t index);

struct CostBreakdown {
  std::array<double, kNumTerms> c{};  // inactive terms stay 0
  double total{0.0};
};

/// exp(-(x^2 / (2 sigma^2))^order)
double higher_order_gaussian(double x, double sigma, int order);

/// Unit view direction: horizontal at the state's yaw, pitched down by `camera_pitch`.
Vec3 camera_direction(const DroneState& state, double camera_pitch);

double c1_environment_collision(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params);
double c2_manipulator_collision(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params);
double c3_visual_target(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params);
double c4_distance_to_target(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params);
double c5_perspective_angle(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params);
double c6_environment_occlusion(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params);
double c7_manipulator_occlusion(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params);
double c8_motion_limit(const DroneState& state, const DroneState& prev_cmd);
double c9_novelty(const DroneState& state, const DroneState& current_drone, const ObjectiveParams& params);

/// `reference` is the previous command for the local set and the current
/// drone state for the global set.
CostBreakdown total_cost(const DroneState& state, const SceneSnapshot& scene, const DroneState& reference,
                         const ObjectiveParams& params, TermSet set);

/// Cost evaluator bound to one snapshot. Precomputes the region of interest and
/// the manipulator chains so repeated evaluations only rebuild drone hulls.
class CostModel {
 public:
  CostModel(const SceneSnapshot& scene, const ObjectiveParams& params);

  CostBreakdown evaluate(const DroneState& state, const DroneState& reference, TermSet set) const;
  double total(const DroneState& state, const DroneState& reference, TermSet set) const {
    return evaluate(state, reference, set).total;
  }

  double c1(const DroneState& s) const;
  double c2(const DroneState& s) const;
  double c3(const DroneState& s) const;
  double c4(const DroneState& s) const;
  double c5(const DroneState& s) const;
  double c6(const DroneState& s) const;
  double c7(const DroneState& s) const;

  const RegionOfInterest& roi() const { return roi_; }
  const ObjectiveParams& params() const { return params_; }
  const SceneSnapshot& scene() const { return *scene_; }

 private:
  double gauss(double d) const;
  Cuboid collision_hull(const DroneState& s) const;

  const SceneSnapshot* scene_;
  ObjectiveParams params_;
  RegionOfInterest roi_;
  ManipulatorHulls arm_;
  bool has_occlusion_chain_{false};
  double gauss_cutoff_{0.0};
};

}  // namespace droneview
