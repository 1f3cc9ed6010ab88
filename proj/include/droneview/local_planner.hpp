#pragma once

#include <functional>

#include "droneview/drone_state.hpp"
#include "droneview/objectives.hpp"
#include "droneview/scene.hpp"

namespace droneview {

/// Half-widths of the per-call search region around the starting pose.
struct SearchBox {
  Vec3 dpos{Vec3::Constant(0.01)};
  double dyaw{0.1};

  bool valid() const { return (dpos.array() > 0.0).all() && dyaw > 0.0; }
};

struct SolverOptions {
  int max_iterations{25};
  double pos_step{1e-4};  // central-difference step, m
  double yaw_step{1e-3};  // central-difference step, rad
  double min_step{1e-9};  // stop once a step shrinks below this (box-normalized units)
};

struct SolverResult {
  DroneState x;
  double f{0.0};
  int iterations{0};
  int evaluations{0};
};

using CostFn = std::function<double(const DroneState&)>;

/// Box-constrained minimisation from x0. Positions are confined to
/// x0 ± box.dpos (intersected with `workspace` when given), yaw to
/// x0.yaw ± box.dyaw on the circle. Uses projected descent with
/// central-difference gradients, a diagonal curvature estimate from the same
/// samples, and backtracking. Never returns a point worse than x0.
SolverResult solver_minimize(const CostFn& f, const DroneState& x0, const SearchBox& box,
                             const SolverOptions& options = {}, const Workspace* workspace = nullptr);

struct PlanResult {
  DroneState cmd;
  CostBreakdown breakdown;
};

/// One local planning tick: minimise the local term set around the previous
/// command within the box and the workspace.
PlanResult plan_step(const DroneState& prev_cmd, const SceneSnapshot& scene, const ObjectiveParams& params,
                     const SearchBox& box = {}, const SolverOptions& options = {});

/// Same as plan_step with a prebuilt cost model for the snapshot.
PlanResult plan_step(const DroneState& prev_cmd, const CostModel& model, const SearchBox& box = {},
                     const SolverOptions& options = {});

}  // namespace droneview
