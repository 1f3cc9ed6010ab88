#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "droneview/session.hpp"

namespace droneview {

/// Wire protocol between the session server and UI clients. Every message is a
/// JSON object carrying `v` (schema version) and `type`.
///
/// server -> client:
///   {"v":1, "type":"scene",    "digest", "scene"}                       on connect
///   {"v":1, "type":"snapshot", "t", "mode", "phase", "drone":{"true","commanded"},
///    "ee":{"position","orientation"}, "joints", "planes_digest", "candidates",
///    "highlighted", "frame", "cost":{"terms","total"}}                   <= 20 Hz
///   {"v":1, "type":"ack",      "id", "accepted", "result" | "reason"}
///   {"v":1, "type":"error",    "id", "reason"}
/// client -> server:
///   {"v":1, "type":"command",  "id"?, "command":{"kind", ...}}
inline constexpr int kProtocolVersion = 1;
inline constexpr double kMaxSnapshotHz = 20.0;

nlohmann::json scene_message(const SceneFile& scene);
nlohmann::json snapshot_message(const SessionView& view, const SceneSnapshot& snapshot,
                                const std::string& planes_digest);
nlohmann::json ack_message(const nlohmann::json& id, const CommandResult& result);
nlohmann::json error_message(const std::string& reason, const nlohmann::json& id = nullptr);

/// Decodes one client frame and applies it to the session. Returns the reply
/// for that client: an ack, or an error for malformed or unsupported input.
nlohmann::json handle_client_message(Session& session, const std::string& text);

/// Rate limiter on the simulated clock.
class SnapshotThrottle {
 public:
  explicit SnapshotThrottle(double max_hz = kMaxSnapshotHz);
  /// True when a snapshot may be sent at time t; records the send.
  bool due(double t);

 private:
  double period_;
  std::optional<double> last_;
};

}  // namespace droneview
