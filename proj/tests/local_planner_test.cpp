#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "droneview/local_planner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace droneview;

namespace {

constexpr double kPi = std::numbers::pi;

double yaw_diff(double a, double b) { return std::abs(wrap_angle(a - b)); }

bool inside_box(const DroneState& cmd, const DroneState& prev, const SearchBox& box) {
  return std::abs(cmd.x - prev.x) <= box.dpos.x() + 1e-12 && std::abs(cmd.y - prev.y) <= box.dpos.y() + 1e-12 &&
         std::abs(cmd.z - prev.z) <= box.dpos.z() + 1e-12 && yaw_diff(cmd.yaw, prev.yaw) <= box.dyaw + 1e-12;
}

// Exhaustive minimum over the box at 1 mm / 0.01 rad (21^4 points).
double grid_minimum(const CostModel& model, const DroneState& prev, DroneState* argmin = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = -10; i <= 10; ++i)
    for (int j = -10; j <= 10; ++j)
      for (int k = -10; k <= 10; ++k) {
        const Vec3 p(prev.x + 1e-3 * i, prev.y + 1e-3 * j, prev.z + 1e-3 * k);
        if (!model.scene().workspace.contains(p)) continue;
        for (int m = -10; m <= 10; ++m) {
          const DroneState s = DroneState::from(p, prev.yaw + 0.01 * m);
          const double v = model.total(s, prev, TermSet::Local);
          if (v < best) {
            best = v;
            if (argmin) *argmin = s;
          }
        }
      }
  return best;
}

}  // namespace

TEST(SolverMinimize, BowlInsideBoxFindsCenter) {
  const DroneState x0{1.0, 2.0, 0.5, 0.3};
  const DroneState c{1.004, 1.997, 0.502, 0.25};
  const auto f = [&](const DroneState& s) {
    return std::pow(s.x - c.x, 2) + std::pow(s.y - c.y, 2) + std::pow(s.z - c.z, 2) +
           std::pow(wrap_angle(s.yaw - c.yaw), 2);
  };
  const auto r = solver_minimize(f, x0, {});
  EXPECT_LT((r.x.position() - c.position()).norm(), 1e-4);
  EXPECT_LT(yaw_diff(r.x.yaw, c.yaw), 1e-4);
}

TEST(SolverMinimize, BowlOutsideBoxProjectsToBoundary) {
  const DroneState x0{0.0, 0.0, 0.0, 0.0};
  const DroneState c{0.05, -0.003, -0.2, -0.5};
  const auto f = [&](const DroneState& s) {
    return std::pow(s.x - c.x, 2) + 2 * std::pow(s.y - c.y, 2) + std::pow(s.z - c.z, 2) + std::pow(s.yaw - c.yaw, 2);
  };
  const auto r = solver_minimize(f, x0, {});
  EXPECT_NEAR(r.x.x, 0.01, 1e-9);
  EXPECT_NEAR(r.x.y, -0.003, 1e-4);
  EXPECT_NEAR(r.x.z, -0.01, 1e-9);
  EXPECT_NEAR(r.x.yaw, -0.1, 1e-9);
}

TEST(SolverMinimize, ConstantReturnsStart) {
  const DroneState x0{0.3, -0.2, 0.9, 2.5};
  const auto r = solver_minimize([](const DroneState&) { return 4.2; }, x0, {});
  EXPECT_EQ(r.x, x0);
  EXPECT_EQ(r.f, 4.2);
}

TEST(SolverMinimize, YawBoxWrapsAcrossPi) {
  const DroneState x0{0, 0, 0, kPi - 0.02};
  const auto f = [](const DroneState& s) { return std::pow(wrap_angle(s.yaw - (-kPi + 0.03)), 2); };
  const auto r = solver_minimize(f, x0, {});
  EXPECT_NEAR(yaw_diff(r.x.yaw, -kPi + 0.03), 0.0, 1e-4);
  EXPECT_GT(r.x.yaw, -kPi);
  EXPECT_LE(r.x.yaw, kPi);
}

TEST(SolverMinimize, WorkspaceClipsBox) {
  const Workspace ws{Vec3(-1, -1, 0), Vec3(1, 1, 0.995)};
  const auto f = [](const DroneState& s) { return -s.z; };
  const auto r = solver_minimize(f, {0, 0, 0.99, 0}, {}, {}, &ws);
  EXPECT_NEAR(r.x.z, 0.995, 1e-12);
}

TEST(SolverMinimize, RejectsDegenerateBox) {
  SearchBox b;
  b.dyaw = 0;
  EXPECT_THROW(solver_minimize([](const DroneState&) { return 0.0; }, {}, b), std::invalid_argument);
}

TEST(PlanStep, BoxFeasibilityAndMonotoneDescent) {
  std::mt19937_64 rng(101);
  const ObjectiveParams params;
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = fixtures::random_planning_case(rng);
    const CostModel model(c.scene, params);
    const auto r = plan_step(c.prev_cmd, model);
    EXPECT_TRUE(inside_box(r.cmd, c.prev_cmd, {}));
    EXPECT_TRUE(c.scene.workspace.contains(r.cmd.position()));
    EXPECT_LE(r.breakdown.total, model.total(c.prev_cmd, c.prev_cmd, TermSet::Local) + 1e-9);
    EXPECT_GT(r.cmd.yaw, -kPi);
    EXPECT_LE(r.cmd.yaw, kPi);
  }
}

TEST(PlanStep, Deterministic) {
  std::mt19937_64 rng(102);
  const auto c = fixtures::random_planning_case(rng);
  const ObjectiveParams params;
  const auto a = plan_step(c.prev_cmd, c.scene, params);
  const auto b = plan_step(c.prev_cmd, c.scene, params);
  EXPECT_EQ(a.cmd, b.cmd);
  EXPECT_EQ(a.breakdown.total, b.breakdown.total);
}

TEST(PlanStep, StationaryAtInteriorMinimum) {
  // Table 0.5 m below the EE: the c4/c5 optimum is a ring 1.3 m from the EE.
  const auto scene = fixtures::snapshot({fixtures::floor_plane(0.5)}, {{0.4, 0, 0.5}, {0.3, 0, 0.8}, {0, 0, 1}});
  const ObjectiveParams params;
  DroneState cmd{-1.0, 0.1, 1.3, 0.2};
  for (int i = 0; i < 400; ++i) cmd = plan_step(cmd, scene, params).cmd;
  const auto next = plan_step(cmd, scene, params).cmd;
  EXPECT_LT((next.position() - cmd.position()).norm(), 1e-6);
  EXPECT_LT(yaw_diff(next.yaw, cmd.yaw), 1e-5);
}

TEST(PlanStep, SidewaysTargetShiftRecentres) {
  const ObjectiveParams params;
  const DroneState prev{-0.9, 0.0, 1.0, 0.0};
  const auto scene = fixtures::open_scene(Vec3(0.0, 0.5, 1.0));
  const CostModel model(scene, params);
  const auto r = plan_step(prev, model);
  EXPECT_LT(model.c3(r.cmd), model.c3(prev));
  EXPECT_GT(r.cmd.yaw, prev.yaw);
  const double grid = grid_minimum(model, prev);
  EXPECT_LE(r.breakdown.total, grid + 0.05 * std::abs(grid));
}

TEST(PlanStep, PlaneAheadDoesNotRaiseCollisionCost) {
  const ObjectiveParams params;
  const DroneState prev{-0.9, 0.0, 1.0, 0.0};
  const double front = prev.x + params.drone_half_dims.x() + params.uncertainty.dp.x() + 0.05;
  // Top edge at z = 0.97 sits just under the viewing hull (z >= 0.98), so the
  // plane faces the drone body without occluding the end effector.
  auto scene = fixtures::open_scene(Vec3(0.0, 0.0, 1.0));
  scene.planes.push_back(RectPlane::make(Vec3(front, 0, 0.82), -Vec3::UnitX(), Vec3::UnitY(), 0.3, 0.15));
  ASSERT_NEAR(convex_distance(build_drone_collision_hull(prev.position(), 0, params.drone_half_dims,
                                                         params.uncertainty),
                              scene.planes.back()),
              0.05, 1e-12);
  const CostModel model(scene, params);
  const auto r = plan_step(prev, model);
  EXPECT_LE(model.c1(r.cmd), model.c1(prev));
  const double grid = grid_minimum(model, prev);
  EXPECT_LE(r.breakdown.total, grid + 0.05 * std::abs(grid));
}

TEST(PlanStep, WithinFivePercentOfGridOnRandomScenes) {
  std::mt19937_64 rng(103);
  const ObjectiveParams params;
  for (int trial = 0; trial < 8; ++trial) {
    const auto c = fixtures::random_planning_case(rng);
    const CostModel model(c.scene, params);
    const auto r = plan_step(c.prev_cmd, model);
    const double grid = grid_minimum(model, c.prev_cmd);
    EXPECT_LE(r.breakdown.total, grid + 0.05 * std::abs(grid)) << "trial " << trial;
  }
}
