#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "droneview/drone_state.hpp"
#include "droneview/geometry.hpp"
#include "droneview/scene.hpp"

namespace droneview {

enum class DroneMode { Grounded, Tracking, Relocating, Frozen };

const char* to_string(DroneMode mode);

enum class RelocationPhase { Ascend, Translate, Descend };

const char* to_string(RelocationPhase phase);

/// Waypoints 0, 1, 2 close the ascend, translate and descend phases.
struct RelocationPlan {
  std::vector<DroneState> waypoints;
  RelocationPhase phase{RelocationPhase::Ascend};

  std::size_t index() const { return static_cast<std::size_t>(phase); }
  const DroneState& active() const { return waypoints.at(index()); }
};

struct DroneDynamics {
  double kp{2.0};              // 1/s
  double kd{0.5};
  double velocity_lag{0.25};   // s, first-order lag on the velocity setpoint
  double v_max{0.5};           // m/s
  double yaw_rate_max{1.0};    // rad/s
};

/// Positional disturbance: an Ornstein-Uhlenbeck offset per axis with
/// stationary std `std_fraction * bound`, clipped to +-bound.
struct DisturbanceParams {
  Vec3 bound{Vec3::Zero()};
  double correlation_time{0.5};  // s
  double std_fraction{0.6};

  void validate() const;
};

/// `nominal` is the noise-free PD state; `true_state` adds the clipped
/// disturbance to its position. Velocities belong to the nominal state.
struct SimDrone {
  DroneState nominal;
  DroneState true_state;
  DroneState commanded;
  Vec3 velocity{Vec3::Zero()};
  double yaw_rate{0.0};
  Vec3 disturbance_state{Vec3::Zero()};  // unclipped OU process
  DroneMode mode{DroneMode::Grounded};
  bool manipulator_frozen{false};
  RelocationPlan plan;  // meaningful while Relocating

  /// Grounded drone resting at `pose`, commanded to stay there.
  static SimDrone at_rest(const DroneState& pose);
};

/// One explicit step of length dt. Grounded drones do not move. The velocity
/// setpoint is clamp(kp * error - kd * velocity) in norm, followed through the
/// lag; yaw follows the same law on the wrapped yaw error.
SimDrone step_dynamics(const SimDrone& drone, double dt, const DisturbanceParams& disturbance,
                       std::mt19937_64& rng, const DroneDynamics& dynamics = {});

struct TrackingSample {
  double t{0.0};
  DroneState commanded;
  DroneState actual;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSettlingWindow = 2.0;  // s
inline constexpr std::size_t kMinCharacterizationSamples = 100;

/// Flies an airborne drone, starting at rest on command(0), along a commanded
/// trajectory and records one sample per step of length dt.
std::vector<TrackingSample> record_tracking(const std::function<DroneState(double)>& command, double duration,
                                            const DisturbanceParams& disturbance, std::uint64_t seed,
                                            double dt = 0.01, const DroneDynamics& dynamics = {});

/// Per-axis max |actual - commanded| over samples at least kSettlingWindow
/// after the first one. Throws InsufficientDataError with fewer than
/// kMinCharacterizationSamples remaining.
Uncertainty characterize_uncertainty(const std::vector<TrackingSample>& log);

/// Ascend to max_height, translate at max_height, descend onto the target.
/// Yaw changes only during the translate leg. Throws std::invalid_argument
/// when max_height is below either endpoint.
RelocationPlan plan_relocation(const DroneState& current, const DroneState& target, double max_height);

/// Workspace ceiling minus the drone half-height, raised to cover both endpoints.
double relocation_height(const Workspace& workspace, const Vec3& drone_half_dims, const DroneState& current,
                         const DroneState& target);

enum class ModeEventKind { Takeoff, Land, Relocate, PlanComplete, Hold, Resume };

const char* to_string(ModeEventKind kind);

struct ModeEvent {
  ModeEventKind kind;
  RelocationPlan plan;  // Relocate only
};

class InvalidTransitionError : public std::logic_error {
 public:
  InvalidTransitionError(DroneMode from, ModeEventKind event);
  DroneMode from() const { return from_; }
  ModeEventKind event() const { return event_; }

 private:
  DroneMode from_;
  ModeEventKind event_;
};

/// Grounded -takeoff-> Tracking -relocate-> Relocating -plan_complete-> Tracking;
/// Tracking/Relocating -hold-> Frozen -resume-> Tracking; any airborne mode
/// -land-> Grounded. Relocating raises the manipulator freeze; leaving it
/// clears the freeze. Hold aborts a relocation and keeps the current command.
SimDrone advance_mode(const SimDrone& drone, const ModeEvent& event);

/// Relocating only: feeds the active waypoint as the command and advances the
/// phase once the nominal position is within kArrivalThreshold of it. Returns
/// true when the last waypoint has been reached.
inline constexpr double kArrivalThreshold = 0.05;  // m
bool update_relocation(SimDrone& drone);

}  // namespace droneview
