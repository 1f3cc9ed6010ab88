#pragma once

#include <cstdint>
#include <filesystem>
#include <future>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "droneview/drone_sim.hpp"
#include "droneview/global_planner.hpp"
#include "droneview/local_planner.hpp"
#include "droneview/scene_io.hpp"

namespace droneview {

enum class CommandKind { Toggle, Relocate, Takeoff, Land, JogEe, SetFrame, Hold, Resume };

const char* to_string(CommandKind kind);
std::optional<CommandKind> command_kind_from(const std::string& name);

/// Frame in which jog_ee deltas are expressed: the world, the arm base (rotated
/// by the base yaw), or the drone camera heading (x forward, z up).
enum class JogFrame { World, Base, Camera };

const char* to_string(JogFrame frame);
std::optional<JogFrame> jog_frame_from(const std::string& name);

struct Command {
  CommandKind kind{CommandKind::Toggle};
  Vec3 delta{Vec3::Zero()};          // JogEe
  std::optional<JogFrame> frame;     // JogEe (overrides the session frame), SetFrame
};

/// Parses {"kind": ..., "delta"?: [3], "frame"?: ...}; throws std::invalid_argument.
Command parse_command(const nlohmann::json& j);
nlohmann::json command_to_json(const Command& c);

struct CommandResult {
  bool accepted{false};
  std::string reason;       // set when rejected
  nlohmann::json result;    // command-specific details when accepted
};

struct EeWaypoint {
  double t{0.0};
  Vec3 position{Vec3::Zero()};
};

struct ScriptEvent {
  double t{0.0};
  Command command;
};

/// Timed EE targets (linearly interpolated, held after the last) and operator
/// commands. Times are nondecreasing.
struct EpisodeScript {
  double duration{0.0};
  std::vector<EeWaypoint> ee_waypoints;
  std::vector<ScriptEvent> events;

  void validate() const;
};

/// {"duration": s, "ee_waypoints": [{"t", "position"}], "events": [{"t", "kind", ...}]}
EpisodeScript parse_script(const nlohmann::json& j);
EpisodeScript load_script(const std::filesystem::path& path);

struct SessionConfig {
  SceneFile scene;
  ObjectiveParams params;  // normally scene.constants
  DisturbanceParams disturbance{Vec3(0.05, 0.05, 0.02)};
  DroneDynamics dynamics;
  double local_hz{100.0};
  double global_hz{5.0};
  std::uint64_t seed{0};
  StoreConfig store;
  SolverOptions global_solver{200};
  IkOptions ik{.max_iterations = 5};
  bool log_ticks{true};

  /// Config with the scene's own constants.
  static SessionConfig for_scene(SceneFile scene);
  void validate() const;
};

inline constexpr double kOcclusionDepth = 0.01;  // m

/// Line-of-sight occlusion of the end effector from a camera position: the
/// deepest penetration of the zero-uncertainty viewing hull into any plane or
/// the arm occlusion chain. `source` names the worst offender.
struct ViewCheck {
  double depth{0.0};
  std::string source;
  bool occluded() const { return depth > kOcclusionDepth; }
};
ViewCheck check_view(const Vec3& camera, const SceneSnapshot& scene, double capsule_radius);

/// Intersection of the un-inflated drone body with planes or the arm
/// collision chain.
struct CollisionCheck {
  bool colliding{false};
  double depth{0.0};
  std::string source;
};
CollisionCheck check_collision(const DroneState& true_state, const SceneSnapshot& scene,
                               const ObjectiveParams& params);

struct SessionSummary {
  std::int64_t ticks{0};
  std::int64_t global_ticks{0};
  std::int64_t tracking_ticks{0};
  std::int64_t occluded_ticks{0};
  std::int64_t collisions{0};
  double occlusion_fraction{0.0};  // occluded / tracking ticks
  double mean_cost{0.0};           // local total cost over tracking ticks
  double max_ik_residual{0.0};

  nlohmann::json to_json() const;
};

/// Read-only view for the UI feed.
struct SessionView {
  double t{0.0};
  DroneState true_state;
  DroneState commanded;
  DroneMode mode{DroneMode::Grounded};
  std::optional<RelocationPhase> phase;
  Vec3 ee{Vec3::Zero()};
  std::vector<CandidateViewpoint> candidates;
  std::optional<std::size_t> highlighted;
  JogFrame frame{JogFrame::Base};
  CostBreakdown cost;
};

/// Simulated-clock session. Each step() is one local tick: operator events due
/// at this time, EE motion through IK (skipped while the manipulator is
/// frozen), drone planning per mode, dynamics, occlusion and collision
/// bookkeeping, and the global worker cadence. The global refinement launched
/// on one global tick is folded into the store on the next, so logs do not
/// depend on thread timing.
class Session {
 public:
  /// `log` receives newline-delimited event records; may be null.
  Session(SessionConfig config, std::ostream* log);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Attaches a script; its events fire on the first tick at or after their
  /// time and its waypoints drive the EE target.
  void set_script(EpisodeScript script);

  void step();
  CommandResult handle_command(const Command& cmd);

  /// Simulated time of the last completed tick, s.
  double time() const;
  std::int64_t tick() const { return tick_; }
  SessionView view() const;
  const SessionSummary& summary() const { return summary_; }
  const SessionConfig& config() const { return config_; }
  const SceneSnapshot& snapshot() const { return snapshot_; }

 private:
  void emit(const char* kind, nlohmann::ordered_json payload);
  void set_mode(const SimDrone& next, const char* reason);
  void apply_store(CandidateStore next);
  std::optional<std::size_t> highlighted_index() const;
  Vec3 ee_target(double t) const;

  SessionConfig config_;
  std::ostream* log_;
  std::int64_t tick_{0};
  std::vector<double> angles_;
  SceneSnapshot snapshot_;
  SimDrone drone_;
  CostBreakdown last_cost_;
  CandidateStore store_;
  std::optional<std::uint64_t> highlighted_cluster_;
  JogFrame frame_{JogFrame::Base};
  Vec3 initial_ee_{Vec3::Zero()};
  Vec3 jog_offset_{Vec3::Zero()};
  double ik_residual_{0.0};
  std::optional<EpisodeScript> script_;
  std::size_t next_event_{0};
  std::mt19937_64 dynamics_rng_;
  std::mt19937_64 global_rng_;
  std::future<CandidateViewpoint> pending_;
  bool occluded_{false};
  bool colliding_{false};
  double cost_sum_{0.0};
  SessionSummary summary_;
};

struct EpisodeResult {
  SessionSummary summary;
  std::string scene_digest;
};

/// Runs `script` to its duration from a grounded start. Deterministic for a
/// fixed config and seed.
EpisodeResult run_episode(const SessionConfig& config, const EpisodeScript& script, std::ostream* log);

}  // namespace droneview
