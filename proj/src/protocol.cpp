#include "droneview/protocol.hpp"

#include <cmath>
#include <stdexcept>

namespace droneview {

namespace {

using json = nlohmann::json;

double r6(double v) { return std::round(v * 1e6) / 1e6; }
json vec_json(const Vec3& v) { return json::array({r6(v.x()), r6(v.y()), r6(v.z())}); }
json state_json(const DroneState& s) { return json::array({r6(s.x), r6(s.y), r6(s.z), r6(s.yaw)}); }

json header(const char* type) { return json{{"v", kProtocolVersion}, {"type", type}}; }

}  // namespace

json scene_message(const SceneFile& scene) {
  json m = header("scene");
  m["digest"] = scene_digest(scene);
  m["scene"] = scene_to_json(scene);
  return m;
}

json snapshot_message(const SessionView& view, const SceneSnapshot& snapshot, const std::string& planes_digest) {
  json m = header("snapshot");
  m["t"] = std::round(view.t * 1000.0) / 1000.0;
  m["mode"] = to_string(view.mode);
  m["phase"] = view.phase ? json(to_string(*view.phase)) : json(nullptr);
  m["drone"] = {{"true", state_json(view.true_state)}, {"commanded", state_json(view.commanded)}};
  const auto& q = snapshot.ee.orientation;
  m["ee"] = {{"position", vec_json(view.ee)}, {"orientation", json::array({r6(q.w()), r6(q.x()), r6(q.y()), r6(q.z())})}};
  json joints = json::array();
  for (const auto& p : snapshot.joint_positions) joints.push_back(vec_json(p));
  m["joints"] = std::move(joints);
  m["planes_digest"] = planes_digest;
  json candidates = json::array();
  for (const auto& c : view.candidates) {
    candidates.push_back({{"cluster_id", c.cluster_id}, {"state", state_json(c.state)}, {"cost", r6(c.cost)}});
  }
  m["candidates"] = std::move(candidates);
  m["highlighted"] = view.highlighted ? json(*view.highlighted) : json(nullptr);
  m["frame"] = to_string(view.frame);
  json terms = json::array();
  for (double c : view.cost.c) terms.push_back(r6(c));
  m["cost"] = {{"terms", std::move(terms)}, {"total", r6(view.cost.total)}};
  return m;
}

json ack_message(const json& id, const CommandResult& result) {
  json m = header("ack");
  m["id"] = id;
  m["accepted"] = result.accepted;
  if (result.accepted) {
    m["result"] = result.result.is_null() ? json::object() : result.result;
  } else {
    m["reason"] = result.reason;
  }
  return m;
}

json error_message(const std::string& reason, const json& id) {
  json m = header("error");
  m["id"] = id;
  m["reason"] = reason;
  return m;
}

json handle_client_message(Session& session, const std::string& text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    return error_message(std::string("malformed JSON: ") + e.what());
  }
  if (!msg.is_object()) return error_message("message must be an object");
  const json id = msg.value("id", json(nullptr));
  const auto v = msg.find("v");
  if (v == msg.end() || !v->is_number_integer()) return error_message("missing schema version v", id);
  if (v->get<int>() != kProtocolVersion) {
    return error_message("unsupported schema version " + v->dump() + ", expected " + std::to_string(kProtocolVersion), id);
  }
  const auto type = msg.find("type");
  if (type == msg.end() || !type->is_string()) return error_message("missing message type", id);
  if (*type != "command") return error_message("unknown message type " + type->dump(), id);
  const auto cmd = msg.find("command");
  if (cmd == msg.end()) return error_message("command message without command", id);
  Command c;
  try {
    c = parse_command(*cmd);
  } catch (const std::invalid_argument& e) {
    return error_message(e.what(), id);
  }
  return ack_message(id, session.handle_command(c));
}

SnapshotThrottle::SnapshotThrottle(double max_hz) {
  if (!(max_hz > 0.0)) throw std::invalid_argument("snapshot rate: must be > 0");
  period_ = 1.0 / max_hz;
}

bool SnapshotThrottle::due(double t) {
  // Tolerance keeps an exact 20 Hz cadence on a 100 Hz clock from slipping a tick.
  if (last_ && t - *last_ < period_ - 1e-9) return false;
  last_ = t;
  return true;
}

}  // namespace droneview
