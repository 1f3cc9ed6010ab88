#include "droneview/session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace droneview {
namespace {

using ojson = nlohmann::ordered_json;

// Log values are rounded to 1 um / 1 urad so records stay short and readable.
double r6(double v) { return std::round(v * 1e6) / 1e6; }

ojson vec_json(const Vec3& v) { return ojson::array({r6(v.x()), r6(v.y()), r6(v.z())}); }

ojson state_json(const DroneState& s) { return ojson::array({r6(s.x), r6(s.y), r6(s.z), r6(s.yaw)}); }

ojson candidate_json(const CandidateViewpoint& c) {
  return ojson{{"cluster_id", c.cluster_id},
               {"state", state_json(c.state)},
               {"cost", r6(c.cost)},
               {"created_at", r6(c.created_at)}};
}

Vec3 vec3_from(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3 || !std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_number(); })) {
    throw std::invalid_argument(what + ": expected an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Matrix3d yaw_rotation(double yaw) { return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(); }

bool same_store(const CandidateStore& a, const CandidateStore& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a.candidates[i], &y = b.candidates[i];
    if (x.cluster_id != y.cluster_id || x.cost != y.cost || !(x.state == y.state) || x.created_at != y.created_at) {
      return false;
    }
  }
  return true;
}

}  // namespace

const char* to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::Toggle: return "toggle";
    case CommandKind::Relocate: return "relocate";
    case CommandKind::Takeoff: return "takeoff";
    case CommandKind::Land: return "land";
    case CommandKind::JogEe: return "jog_ee";
    case CommandKind::SetFrame: return "set_frame";
    case CommandKind::Hold: return "hold";
    case CommandKind::Resume: return "resume";
  }
  return "?";
}

std::optional<CommandKind> command_kind_from(const std::string& name) {
  for (auto k : {CommandKind::Toggle, CommandKind::Relocate, CommandKind::Takeoff, CommandKind::Land,
                 CommandKind::JogEe, CommandKind::SetFrame, CommandKind::Hold, CommandKind::Resume}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

const char* to_string(JogFrame frame) {
  switch (frame) {
    case JogFrame::World: return "world";
    case JogFrame::Base: return "base";
    case JogFrame::Camera: return "camera";
  }
  return "?";
}

std::optional<JogFrame> jog_frame_from(const std::string& name) {
  for (auto f : {JogFrame::World, JogFrame::Base, JogFrame::Camera}) {
    if (name == to_string(f)) return f;
  }
  return std::nullopt;
}

Command parse_command(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("command: expected an object");
  if (!j.contains("kind") || !j["kind"].is_string()) throw std::invalid_argument("kind: missing or not a string");
  const auto kind = command_kind_from(j["kind"].get<std::string>());
  if (!kind) throw std::invalid_argument("kind: unknown command '" + j["kind"].get<std::string>() + "'");
  Command c;
  c.kind = *kind;
  if (j.contains("frame")) {
    if (!j["frame"].is_string()) throw std::invalid_argument("frame: expected a string");
    c.frame = jog_frame_from(j["frame"].get<std::string>());
    if (!c.frame) throw std::invalid_argument("frame: unknown frame '" + j["frame"].get<std::string>() + "'");
  }
  if (c.kind == CommandKind::JogEe) {
    if (!j.contains("delta")) throw std::invalid_argument("delta: required for jog_ee");
    c.delta = vec3_from(j["delta"], "delta");
  }
  if (c.kind == CommandKind::SetFrame && !c.frame) throw std::invalid_argument("frame: required for set_frame");
  return c;
}

nlohmann::json command_to_json(const Command& c) {
  nlohmann::json j{{"kind", to_string(c.kind)}};
  if (c.kind == CommandKind::JogEe) j["delta"] = {c.delta.x(), c.delta.y(), c.delta.z()};
  if (c.frame) j["frame"] = to_string(*c.frame);
  return j;
}

void EpisodeScript::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) throw std::invalid_argument("duration: must be > 0");
  for (std::size_t i = 0; i < ee_waypoints.size(); ++i) {
    const auto& w = ee_waypoints[i];
    if (!(w.t >= 0.0) || (i > 0 && w.t < ee_waypoints[i - 1].t)) {
      throw std::invalid_argument("ee_waypoints[" + std::to_string(i) + "].t: must be >= 0 and nondecreasing");
    }
    if (!w.position.allFinite()) throw std::invalid_argument("ee_waypoints[" + std::to_string(i) + "].position: not finite");
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!(events[i].t >= 0.0) || (i > 0 && events[i].t < events[i - 1].t)) {
      throw std::invalid_argument("events[" + std::to_string(i) + "].t: must be >= 0 and nondecreasing");
    }
  }
}

EpisodeScript parse_script(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("script: expected an object");
  EpisodeScript s;
  if (!j.contains("duration") || !j["duration"].is_number()) throw std::invalid_argument("duration: required number");
  s.duration = j["duration"].get<double>();
  for (const auto& [key, _] : j.items()) {
    if (key != "duration" && key != "ee_waypoints" && key != "events") {
      throw std::invalid_argument(key + ": unknown key");
    }
  }
  if (j.contains("ee_waypoints")) {
    const auto& arr = j["ee_waypoints"];
    if (!arr.is_array()) throw std::invalid_argument("ee_waypoints: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "ee_waypoints[" + std::to_string(i) + "]";
      if (!arr[i].is_object() || !arr[i].contains("t") || !arr[i]["t"].is_number()) {
        throw std::invalid_argument(where + ".t: required number");
      }
      if (!arr[i].contains("position")) throw std::invalid_argument(where + ".position: required");
      s.ee_waypoints.push_back({arr[i]["t"].get<double>(), vec3_from(arr[i]["position"], where + ".position")});
    }
  }
  if (j.contains("events")) {
    const auto& arr = j["events"];
    if (!arr.is_array()) throw std::invalid_argument("events: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "events[" + std::to_string(i) + "]";
      if (!arr[i].is_object() || !arr[i].contains("t") || !arr[i]["t"].is_number()) {
        throw std::invalid_argument(where + ".t: required number");
      }
      nlohmann::json cmd = arr[i];
      cmd.erase("t");
      try {
        s.events.push_back({arr[i]["t"].get<double>(), parse_command(cmd)});
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(where + "." + e.what());
      }
    }
  }
  s.validate();
  return s;
}

EpisodeScript load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open script " + path.string());
  try {
    return parse_script(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

SessionConfig SessionConfig::for_scene(SceneFile scene) {
  SessionConfig c;
  c.params = scene.constants;
  c.scene = std::move(scene);
  return c;
}

void SessionConfig::validate() const {
  if (!(local_hz > 0.0) || !(global_hz > 0.0)) throw std::invalid_argument("rates: must be > 0");
  if (local_hz < global_hz) throw std::invalid_argument("rates: local rate must be >= global rate");
  if (store.capacity == 0) throw std::invalid_argument("store capacity: must be >= 1");
  params.validate();
  disturbance.validate();
}

ViewCheck check_view(const Vec3& camera, const SceneSnapshot& scene, double capsule_radius) {
  ViewCheck v;
  if ((camera - scene.ee.position).norm() < 1e-12) return v;
  const ConvexHull hull = build_viewing_hull(camera, Uncertainty{}, scene.ee.position);
  for (std::size_t i = 0; i < scene.planes.size(); ++i) {
    const double depth = -convex_distance(hull, scene.planes[i]);
    if (depth > v.depth) v = {depth, "plane " + std::to_string(i)};
  }
  if (scene.joint_positions.size() >= 3) {
    const auto arm = build_manipulator_hulls(scene.joint_positions, capsule_radius);
    const double depth = -convex_distance(hull, arm.occlusion);
    if (depth > v.depth) v = {depth, "arm"};
  }
  return v;
}

CollisionCheck check_collision(const DroneState& s, const SceneSnapshot& scene, const ObjectiveParams& params) {
  CollisionCheck c;
  const Cuboid body = build_drone_collision_hull(s.position(), s.yaw, params.drone_half_dims, Uncertainty{},
                                                 params.collision_hull_follows_yaw);
  const auto consider = [&](double d, std::string source) {
    if (d < 0.0 && -d > c.depth) c = {true, -d, std::move(source)};
  };
  for (std::size_t i = 0; i < scene.planes.size(); ++i) consider(convex_distance(body, scene.planes[i]), "plane " + std::to_string(i));
  if (scene.joint_positions.size() >= 2) {
    CapsuleChain chain;
    chain.joints = scene.joint_positions;
    chain.radius = params.capsule_radius;
    consider(convex_distance(body, chain), "arm");
  }
  return c;
}

nlohmann::json SessionSummary::to_json() const {
  return nlohmann::json{{"ticks", ticks},
                        {"global_ticks", global_ticks},
                        {"tracking_ticks", tracking_ticks},
                        {"occluded_ticks", occluded_ticks},
                        {"occlusion_fraction", occlusion_fraction},
                        {"collisions", collisions},
                        {"mean_cost", mean_cost},
                        {"max_ik_residual", max_ik_residual}};
}

Session::Session(SessionConfig config, std::ostream* log)
    : config_(std::move(config)),
      log_(log),
      dynamics_rng_(config_.seed),
      global_rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  store_.config = config_.store;
  angles_ = config_.scene.initial_angles;
  snapshot_ = config_.scene.snapshot(angles_, 0.0);
  initial_ee_ = snapshot_.ee.position;
  drone_ = SimDrone::at_rest(config_.scene.drone_home);
}

Session::~Session() {
  if (pending_.valid()) pending_.wait();
}

void Session::set_script(EpisodeScript script) {
  script.validate();
  script_ = std::move(script);
  next_event_ = 0;
}

double Session::time() const { return static_cast<double>(tick_) / config_.local_hz; }

void Session::emit(const char* kind, ojson payload) {
  if (!log_) return;
  // Millisecond timestamps, printed as seconds.
  const double t = std::round(time() * 1000.0) / 1000.0;
  const ojson rec{{"t", t}, {"kind", kind}, {"payload", std::move(payload)}};
  *log_ << rec.dump() << '\n';
}

std::optional<std::size_t> Session::highlighted_index() const {
  if (!highlighted_cluster_) return std::nullopt;
  for (std::size_t i = 0; i < store_.size(); ++i) {
    if (store_.candidates[i].cluster_id == *highlighted_cluster_) return i;
  }
  return std::nullopt;
}

void Session::apply_store(CandidateStore next) {
  if (same_store(store_, next)) {
    store_ = std::move(next);
    return;
  }
  store_ = std::move(next);
  if (highlighted_cluster_ && !store_.find(*highlighted_cluster_)) highlighted_cluster_.reset();
  ojson list = ojson::array();
  for (const auto& c : store_.candidates) list.push_back(candidate_json(c));
  const auto idx = highlighted_index();
  emit("candidate_update", {{"candidates", std::move(list)},
                            {"highlighted", idx ? ojson(*idx) : ojson(nullptr)},
                            {"highlighted_cluster", highlighted_cluster_ ? ojson(*highlighted_cluster_) : ojson(nullptr)}});
}

void Session::set_mode(const SimDrone& next, const char* reason) {
  const DroneMode from = drone_.mode;
  drone_ = next;
  if (from == drone_.mode) return;
  ojson payload{{"from", to_string(from)}, {"to", to_string(drone_.mode)}, {"event", reason},
                {"manipulator_frozen", drone_.manipulator_frozen}};
  if (drone_.mode == DroneMode::Relocating) {
    ojson wps = ojson::array();
    for (const auto& w : drone_.plan.waypoints) wps.push_back(state_json(w));
    payload["waypoints"] = std::move(wps);
  }
  emit("mode_change", std::move(payload));
  if (drone_.mode != DroneMode::Tracking && occluded_) {
    occluded_ = false;
    emit("occlusion_stop", {{"reason", "left tracking"}});
  }
}

Vec3 Session::ee_target(double t) const {
  Vec3 base = initial_ee_;
  if (script_ && !script_->ee_waypoints.empty()) {
    const auto& w = script_->ee_waypoints;
    double t0 = 0.0;
    Vec3 p0 = initial_ee_;
    base = w.back().position;
    for (const auto& wp : w) {
      if (t < wp.t) {
        const double span = wp.t - t0;
        const double a = span > 0.0 ? (t - t0) / span : 1.0;
        base = p0 + std::clamp(a, 0.0, 1.0) * (wp.position - p0);
        break;
      }
      t0 = wp.t;
      p0 = wp.position;
    }
  }
  return base + jog_offset_;
}

CommandResult Session::handle_command(const Command& cmd) {
  CommandResult r;
  const auto reject = [&](std::string reason) {
    r.accepted = false;
    r.reason = std::move(reason);
  };
  const auto mode_event = [&](ModeEventKind kind, RelocationPlan plan = {}) -> bool {
    try {
      set_mode(advance_mode(drone_, {kind, std::move(plan)}), to_string(kind));
      return true;
    } catch (const InvalidTransitionError& e) {
      reject(e.what());
      return false;
    }
  };
  r.accepted = true;
  r.result = nlohmann::json::object();
  switch (cmd.kind) {
    case CommandKind::Toggle: {
      if (store_.empty()) {
        reject("no candidates");
        break;
      }
      const auto [idx, cand] = toggle(store_, highlighted_index());
      highlighted_cluster_ = cand.cluster_id;
      r.result = {{"index", idx}, {"cluster_id", cand.cluster_id}};
      break;
    }
    case CommandKind::Relocate: {
      if (drone_.mode != DroneMode::Tracking) {
        reject(InvalidTransitionError(drone_.mode, ModeEventKind::Relocate).what());
        break;
      }
      const auto idx = highlighted_index();
      if (!idx) {
        reject("no highlighted candidate");
        break;
      }
      const DroneState target = store_.candidates[*idx].state;
      const DroneState from = drone_.nominal;
      const double h = relocation_height(snapshot_.workspace, config_.params.drone_half_dims, from, target);
      if (mode_event(ModeEventKind::Relocate, plan_relocation(from, target, h))) {
        r.result = {{"cluster_id", *highlighted_cluster_}, {"max_height", h}};
      }
      break;
    }
    case CommandKind::Takeoff: mode_event(ModeEventKind::Takeoff); break;
    case CommandKind::Land: mode_event(ModeEventKind::Land); break;
    case CommandKind::Hold: mode_event(ModeEventKind::Hold); break;
    case CommandKind::Resume: mode_event(ModeEventKind::Resume); break;
    case CommandKind::SetFrame:
      if (!cmd.frame) {
        reject("frame required");
        break;
      }
      frame_ = *cmd.frame;
      r.result = {{"frame", to_string(frame_)}};
      break;
    case CommandKind::JogEe: {
      if (drone_.manipulator_frozen) {
        reject("manipulator frozen during relocation");
        break;
      }
      const JogFrame f = cmd.frame.value_or(frame_);
      Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
      if (f == JogFrame::Base) R = yaw_rotation(config_.scene.chain.base_yaw);
      if (f == JogFrame::Camera) R = yaw_rotation(drone_.true_state.yaw);
      jog_offset_ += R * cmd.delta;
      const Vec3 target = ee_target(time());
      IkOptions full = config_.ik;
      full.max_iterations = 200;
      const auto ik = solve_ik(config_.scene.chain, target, angles_, full);
      r.result = {{"target", {r6(target.x()), r6(target.y()), r6(target.z())}},
                  {"frame", to_string(f)},
                  {"residual", r6(ik.residual)}};
      break;
    }
  }
  ojson payload{{"command", command_to_json(cmd)}, {"accepted", r.accepted}};
  if (r.accepted) {
    payload["result"] = r.result;
  } else {
    payload["reason"] = r.reason;
  }
  emit("command", std::move(payload));
  return r;
}

void Session::step() {
  ++tick_;
  const double t = time();
  const double dt = 1.0 / config_.local_hz;

  if (script_) {
    while (next_event_ < script_->events.size() && script_->events[next_event_].t <= t + 1e-9) {
      handle_command(script_->events[next_event_++].command);
    }
  }

  if (!drone_.manipulator_frozen) {
    const auto ik = solve_ik(config_.scene.chain, ee_target(t), angles_, config_.ik);
    angles_ = ik.angles;
    ik_residual_ = ik.residual;
    summary_.max_ik_residual = std::max(summary_.max_ik_residual, ik.residual);
  }
  snapshot_ = config_.scene.snapshot(angles_, t);

  switch (drone_.mode) {
    case DroneMode::Tracking: {
      const auto plan = plan_step(drone_.commanded, snapshot_, config_.params);
      drone_.commanded = plan.cmd;
      last_cost_ = plan.breakdown;
      break;
    }
    case DroneMode::Relocating:
      if (update_relocation(drone_)) set_mode(advance_mode(drone_, {ModeEventKind::PlanComplete, {}}), "plan_complete");
      break;
    case DroneMode::Grounded:
    case DroneMode::Frozen: break;
  }
  drone_ = step_dynamics(drone_, dt, config_.disturbance, dynamics_rng_, config_.dynamics);

  ++summary_.ticks;
  bool view_blocked = false;
  if (drone_.mode == DroneMode::Tracking) {
    ++summary_.tracking_ticks;
    cost_sum_ += last_cost_.total;
    const auto v = check_view(drone_.true_state.position(), snapshot_, config_.params.capsule_radius);
    view_blocked = v.occluded();
    if (view_blocked) ++summary_.occluded_ticks;
    if (view_blocked != occluded_) {
      occluded_ = view_blocked;
      emit(occluded_ ? "occlusion_start" : "occlusion_stop", {{"depth", r6(v.depth)}, {"source", v.source}});
    }
  }
  if (drone_.mode != DroneMode::Grounded) {
    const auto c = check_collision(drone_.true_state, snapshot_, config_.params);
    if (c.colliding && !colliding_) {
      ++summary_.collisions;
      emit("collision", {{"depth", r6(c.depth)}, {"source", c.source}, {"position", vec_json(drone_.true_state.position())}});
    }
    colliding_ = c.colliding;
  } else {
    colliding_ = false;
  }
  summary_.occlusion_fraction =
      summary_.tracking_ticks ? static_cast<double>(summary_.occluded_ticks) / summary_.tracking_ticks : 0.0;
  summary_.mean_cost = summary_.tracking_ticks ? cost_sum_ / summary_.tracking_ticks : 0.0;

  // Global cadence: tick n is a global tick when floor(n * g / l) advances.
  const auto global_count = [&](std::int64_t n) {
    return static_cast<std::int64_t>(std::floor(static_cast<double>(n) * config_.global_hz / config_.local_hz + 1e-9));
  };
  const bool global_tick = global_count(tick_) > global_count(tick_ - 1);
  if (global_tick) {
    ++summary_.global_ticks;
    CandidateStore next = expire_store(store_, t);
    if (pending_.valid()) next = update_store(std::move(next), pending_.get(), t);
    apply_store(std::move(next));
    pending_ = std::async(std::launch::async, [this, scene = snapshot_, current = drone_.true_state, t] {
      const DroneState seed = sample_seed(scene.workspace, global_rng_);
      return refine_candidate(seed, scene, current, config_.params, t, config_.global_solver);
    });
  }

  if (config_.log_ticks) {
    ojson payload{{"mode", to_string(drone_.mode)},
                  {"true", state_json(drone_.true_state)},
                  {"cmd", state_json(drone_.commanded)},
                  {"ee", vec_json(snapshot_.ee.position)},
                  {"cost", r6(drone_.mode == DroneMode::Tracking ? last_cost_.total : 0.0)},
                  {"occluded", view_blocked},
                  {"global", global_tick}};
    if (drone_.mode == DroneMode::Relocating) payload["phase"] = to_string(drone_.plan.phase);
    emit("tick", std::move(payload));
  }
}

SessionView Session::view() const {
  SessionView v;
  v.t = time();
  v.true_state = drone_.true_state;
  v.commanded = drone_.commanded;
  v.mode = drone_.mode;
  if (drone_.mode == DroneMode::Relocating) v.phase = drone_.plan.phase;
  v.ee = snapshot_.ee.position;
  v.candidates = store_.candidates;
  v.highlighted = highlighted_index();
  v.frame = frame_;
  v.cost = last_cost_;
  return v;
}

EpisodeResult run_episode(const SessionConfig& config, const EpisodeScript& script, std::ostream* log) {
  Session s(config, log);
  s.set_script(script);
  const auto total = static_cast<std::int64_t>(std::llround(script.duration * config.local_hz));
  while (s.tick() < total) s.step();
  return {s.summary(), scene_digest(config.scene)};
}

}  // namespace droneview
