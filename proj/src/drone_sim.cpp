#include "droneview/drone_sim.hpp"

#include <algorithm>
#include <cmath>

namespace droneview {

const char* to_string(DroneMode mode) {
  switch (mode) {
    case DroneMode::Grounded: return "Grounded";
    case DroneMode::Tracking: return "Tracking";
    case DroneMode::Relocating: return "Relocating";
    case DroneMode::Frozen: return "Frozen";
  }
  return "?";
}

const char* to_string(RelocationPhase phase) {
  switch (phase) {
    case RelocationPhase::Ascend: return "ascend";
    case RelocationPhase::Translate: return "translate";
    case RelocationPhase::Descend: return "descend";
  }
  return "?";
}

const char* to_string(ModeEventKind kind) {
  switch (kind) {
    case ModeEventKind::Takeoff: return "takeoff";
    case ModeEventKind::Land: return "land";
    case ModeEventKind::Relocate: return "relocate";
    case ModeEventKind::PlanComplete: return "plan_complete";
    case ModeEventKind::Hold: return "hold";
    case ModeEventKind::Resume: return "resume";
  }
  return "?";
}

void DisturbanceParams::validate() const {
  if (!(bound.array() >= 0.0).all()) throw std::invalid_argument("disturbance bound: must be >= 0");
  if (!(correlation_time > 0.0)) throw std::invalid_argument("disturbance correlation_time: must be > 0");
  if (!(std_fraction >= 0.0)) throw std::invalid_argument("disturbance std_fraction: must be >= 0");
}

SimDrone SimDrone::at_rest(const DroneState& pose) {
  SimDrone d;
  d.nominal = d.true_state = d.commanded = pose;
  return d;
}

SimDrone step_dynamics(const SimDrone& drone, double dt, const DisturbanceParams& disturbance,
                       std::mt19937_64& rng, const DroneDynamics& dyn) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt: must be > 0");
  disturbance.validate();
  SimDrone d = drone;
  if (d.mode == DroneMode::Grounded) {
    d.velocity.setZero();
    d.yaw_rate = 0.0;
    d.disturbance_state.setZero();
    d.true_state = d.nominal;
    return d;
  }
  const double alpha = std::min(1.0, dt / dyn.velocity_lag);

  Vec3 v_set = dyn.kp * (d.commanded.position() - d.nominal.position()) - dyn.kd * d.velocity;
  if (v_set.norm() > dyn.v_max) v_set *= dyn.v_max / v_set.norm();
  d.velocity += alpha * (v_set - d.velocity);
  const Vec3 p = d.nominal.position() + dt * d.velocity;

  const double w_set = std::clamp(dyn.kp * wrap_angle(d.commanded.yaw - d.nominal.yaw) - dyn.kd * d.yaw_rate,
                                  -dyn.yaw_rate_max, dyn.yaw_rate_max);
  d.yaw_rate += alpha * (w_set - d.yaw_rate);
  d.nominal = DroneState::from(p, d.nominal.yaw + dt * d.yaw_rate);

  // Exact OU update; the clip acts on the output only, so the process keeps
  // its stationary law.
  const double a = std::exp(-dt / disturbance.correlation_time);
  const double s = std::sqrt(1.0 - a * a);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 offset;
  for (int i = 0; i < 3; ++i) {
    const double sd = disturbance.std_fraction * disturbance.bound[i];
    d.disturbance_state[i] = a * d.disturbance_state[i] + s * sd * normal(rng);
    offset[i] = std::clamp(d.disturbance_state[i], -disturbance.bound[i], disturbance.bound[i]);
  }
  d.true_state = DroneState::from(p + offset, d.nominal.yaw);
  return d;
}

std::vector<TrackingSample> record_tracking(const std::function<DroneState(double)>& command, double duration,
                                            const DisturbanceParams& disturbance, std::uint64_t seed, double dt,
                                            const DroneDynamics& dynamics) {
  if (!(duration > 0.0) || !(dt > 0.0)) throw std::invalid_argument("duration and dt: must be > 0");
  std::mt19937_64 rng(seed);
  SimDrone d = SimDrone::at_rest(command(0.0));
  d.mode = DroneMode::Tracking;
  const auto n = static_cast<std::int64_t>(std::llround(duration / dt));
  std::vector<TrackingSample> log;
  log.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) * dt;
    d.commanded = command(t);
    d = step_dynamics(d, dt, disturbance, rng, dynamics);
    log.push_back({t, d.commanded, d.true_state});
  }
  return log;
}

Uncertainty characterize_uncertainty(const std::vector<TrackingSample>& log) {
  Uncertainty u;
  if (log.empty()) throw InsufficientDataError("tracking log is empty");
  const double t0 = log.front().t;
  std::size_t used = 0;
  for (const auto& s : log) {
    if (s.t - t0 < kSettlingWindow) continue;
    u.dp = u.dp.cwiseMax((s.actual.position() - s.commanded.position()).cwiseAbs());
    ++used;
  }
  if (used < kMinCharacterizationSamples) {
    throw InsufficientDataError("need " + std::to_string(kMinCharacterizationSamples) +
                                " samples after the settling window, got " + std::to_string(used));
  }
  return u;
}

RelocationPlan plan_relocation(const DroneState& current, const DroneState& target, double max_height) {
  if (max_height < current.z || max_height < target.z) {
    throw std::invalid_argument("max_height is below an endpoint");
  }
  RelocationPlan plan;
  plan.waypoints = {DroneState{current.x, current.y, max_height, current.yaw},
                    DroneState{target.x, target.y, max_height, target.yaw}, target};
  return plan;
}

double relocation_height(const Workspace& workspace, const Vec3& drone_half_dims, const DroneState& current,
                         const DroneState& target) {
  return std::max({workspace.max.z() - drone_half_dims.z(), current.z, target.z});
}

InvalidTransitionError::InvalidTransitionError(DroneMode from, ModeEventKind event)
    : std::logic_error(std::string(to_string(event)) + " is not allowed while " + to_string(from)),
      from_(from),
      event_(event) {}

SimDrone advance_mode(const SimDrone& drone, const ModeEvent& event) {
  SimDrone d = drone;
  const auto reject = [&] { throw InvalidTransitionError(drone.mode, event.kind); };
  const bool airborne = drone.mode != DroneMode::Grounded;
  switch (event.kind) {
    case ModeEventKind::Takeoff:
      if (drone.mode != DroneMode::Grounded) reject();
      d.mode = DroneMode::Tracking;
      break;
    case ModeEventKind::Land:
      if (!airborne) reject();
      d.mode = DroneMode::Grounded;
      d.manipulator_frozen = false;
      d.plan = {};
      d.velocity.setZero();
      d.yaw_rate = 0.0;
      d.commanded = d.nominal;
      break;
    case ModeEventKind::Relocate:
      if (drone.mode != DroneMode::Tracking) reject();
      if (event.plan.waypoints.size() != 3) throw std::invalid_argument("relocation plan needs 3 waypoints");
      d.mode = DroneMode::Relocating;
      d.manipulator_frozen = true;
      d.plan = event.plan;
      d.plan.phase = RelocationPhase::Ascend;
      d.commanded = d.plan.active();
      break;
    case ModeEventKind::PlanComplete:
      if (drone.mode != DroneMode::Relocating) reject();
      d.mode = DroneMode::Tracking;
      d.manipulator_frozen = false;
      d.plan = {};
      break;
    case ModeEventKind::Hold:
      if (drone.mode != DroneMode::Tracking && drone.mode != DroneMode::Relocating) reject();
      d.mode = DroneMode::Frozen;
      d.manipulator_frozen = false;
      d.plan = {};
      d.commanded = d.nominal;
      break;
    case ModeEventKind::Resume:
      if (drone.mode != DroneMode::Frozen) reject();
      d.mode = DroneMode::Tracking;
      break;
  }
  return d;
}

bool update_relocation(SimDrone& drone) {
  if (drone.mode != DroneMode::Relocating) throw std::logic_error("update_relocation outside Relocating");
  while ((drone.nominal.position() - drone.plan.active().position()).norm() < kArrivalThreshold) {
    if (drone.plan.phase == RelocationPhase::Descend) return true;
    drone.plan.phase = static_cast<RelocationPhase>(drone.plan.index() + 1);
  }
  drone.commanded = drone.plan.active();
  return false;
}

}  // namespace droneview
