#include "droneview/scene_io.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

namespace droneview {
namespace {

using nlohmann::json;

class Reader {
 public:
  std::vector<std::string> issues;

  void fail(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

  std::optional<double> number(const json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      fail(path, "must be finite");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::vector<double>> numbers(const json& j, const std::string& path, std::size_t n = 0) {
    if (!j.is_array() || (n != 0 && j.size() != n)) {
      fail(path, n ? "expected an array of " + std::to_string(n) + " numbers" : "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto v = number(j[i], path + "[" + std::to_string(i) + "]");
      if (!v) ok = false;
      out.push_back(v.value_or(0.0));
    }
    return ok ? std::optional(out) : std::nullopt;
  }

  std::optional<Vec3> vec3(const json& j, const std::string& path) {
    auto v = numbers(j, path, 3);
    if (!v) return std::nullopt;
    return Vec3((*v)[0], (*v)[1], (*v)[2]);
  }

  const json* field(const json& obj, const char* key, const std::string& path, bool required = true) {
    if (obj.contains(key)) return &obj.at(key);
    if (required) fail(path.empty() ? key : path + "." + key, "missing");
    return nullptr;
  }

  bool object(const json& j, const std::string& path) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    return true;
  }

  void unknown_keys(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    for (const auto& [k, _] : obj.items()) {
      bool found = false;
      for (const char* kk : known) found = found || k == kk;
      if (!found) fail(path.empty() ? k : path + "." + k, "unknown key");
    }
  }
};

JointAxis axis_from(const std::string& s, bool& ok) {
  ok = true;
  if (s == "x") return JointAxis::X;
  if (s == "y") return JointAxis::Y;
  if (s == "z") return JointAxis::Z;
  ok = false;
  return JointAxis::Z;
}

const char* axis_name(JointAxis a) {
  switch (a) {
    case JointAxis::X: return "x";
    case JointAxis::Y: return "y";
    case JointAxis::Z: return "z";
  }
  return "z";
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void parse_constants(Reader& r, const json& c, ObjectiveParams& p) {
  if (!r.object(c, "constants")) return;
  r.unknown_keys(c, "constants",
                 {"weights", "f_fov", "theta_ref", "sigma", "P", "epsilon", "d_min", "camera_pitch",
                  "drone_half_dims", "capsule_radius", "uncertainty", "c4_gate_distance",
                  "collision_hull_follows_yaw"});
  if (auto* w = r.field(c, "weights", "constants", false)) {
    if (auto v = r.numbers(*w, "constants.weights", kNumTerms)) {
      for (std::size_t i = 0; i < kNumTerms; ++i) {
        if ((*v)[i] < 0.0) r.fail("constants.weights[" + std::to_string(i) + "]", "must be >= 0");
        p.weights[i] = (*v)[i];
      }
    }
  }
  auto scalar = [&](const char* key, double& dst, auto check, const char* msg) {
    if (auto* j = r.field(c, key, "constants", false)) {
      const std::string path = std::string("constants.") + key;
      if (auto v = r.number(*j, path)) {
        if (!check(*v)) r.fail(path, msg);
        dst = *v;
      }
    }
  };
  auto any = [](double) { return true; };
  auto positive = [](double v) { return v > 0.0; };
  auto nonneg = [](double v) { return v >= 0.0; };
  scalar("f_fov", p.f_fov, nonneg, "must be >= 0");
  scalar("theta_ref", p.theta_ref, any, "");
  scalar("sigma", p.sigma, positive, "must be > 0");
  scalar("epsilon", p.epsilon, positive, "must be > 0");
  scalar("d_min", p.d_min, nonneg, "must be >= 0");
  scalar("camera_pitch", p.camera_pitch, any, "");
  scalar("capsule_radius", p.capsule_radius, positive, "must be > 0");
  scalar("c4_gate_distance", p.c4_gate_distance, any, "");
  if (auto* j = r.field(c, "P", "constants", false)) {
    if (!j->is_number_integer() || j->get<long long>() < 1) {
      r.fail("constants.P", "must be an integer >= 1");
    } else {
      p.order = static_cast<int>(j->get<long long>());
    }
  }
  if (auto* j = r.field(c, "drone_half_dims", "constants", false)) {
    if (auto v = r.vec3(*j, "constants.drone_half_dims")) {
      if (!(v->array() > 0.0).all()) r.fail("constants.drone_half_dims", "must be > 0");
      p.drone_half_dims = *v;
    }
  }
  if (auto* j = r.field(c, "uncertainty", "constants", false)) {
    if (auto v = r.vec3(*j, "constants.uncertainty")) {
      if (!(v->array() >= 0.0).all()) r.fail("constants.uncertainty", "must be >= 0");
      p.uncertainty.dp = *v;
    }
  }
  if (auto* j = r.field(c, "collision_hull_follows_yaw", "constants", false)) {
    if (!j->is_boolean()) {
      r.fail("constants.collision_hull_follows_yaw", "expected a boolean");
    } else {
      p.collision_hull_follows_yaw = j->get<bool>();
    }
  }
}

void parse_planes(Reader& r, const json& arr, std::vector<RectPlane>& planes) {
  if (!arr.is_array() || arr.empty()) {
    r.fail("planes", "expected a non-empty array");
    return;
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "planes[" + std::to_string(i) + "]";
    const json& pj = arr[i];
    if (!r.object(pj, path)) continue;
    r.unknown_keys(pj, path, {"center", "normal", "axis_u", "extents"});
    std::optional<Vec3> center, normal, axis_u;
    std::optional<std::vector<double>> ext;
    if (auto* j = r.field(pj, "center", path)) center = r.vec3(*j, path + ".center");
    if (auto* j = r.field(pj, "normal", path)) normal = r.vec3(*j, path + ".normal");
    if (auto* j = r.field(pj, "axis_u", path)) axis_u = r.vec3(*j, path + ".axis_u");
    if (auto* j = r.field(pj, "extents", path)) ext = r.numbers(*j, path + ".extents", 2);
    bool ok = center && normal && axis_u && ext;
    if (normal && normal->norm() < 1e-9) {
      r.fail(path + ".normal", "must be non-zero");
      ok = false;
    }
    if (ext && ((*ext)[0] <= 0.0 || (*ext)[1] <= 0.0)) {
      r.fail(path + ".extents", "must be > 0");
      ok = false;
    }
    if (ok && axis_u->cross(normal->normalized()).norm() < 1e-9) {
      r.fail(path + ".axis_u", "must not be parallel to the normal");
      ok = false;
    }
    if (ok) planes.push_back(RectPlane::make(*center, *normal, *axis_u, (*ext)[0], (*ext)[1]));
  }
}

void parse_chain(Reader& r, const json& cj, KinematicChain& chain, std::vector<double>& initial) {
  if (!r.object(cj, "chain")) return;
  r.unknown_keys(cj, "chain", {"base", "base_yaw", "links", "axes", "limits", "initial"});
  if (auto* j = r.field(cj, "base", "chain")) {
    if (auto v = r.vec3(*j, "chain.base")) chain.base = *v;
  }
  if (auto* j = r.field(cj, "base_yaw", "chain", false)) {
    if (auto v = r.number(*j, "chain.base_yaw")) chain.base_yaw = *v;
  }
  std::size_t n = 0;
  if (auto* j = r.field(cj, "links", "chain")) {
    if (auto v = r.numbers(*j, "chain.links")) {
      if (v->empty()) r.fail("chain.links", "at least one link required");
      for (std::size_t i = 0; i < v->size(); ++i) {
        if ((*v)[i] <= 0.0) r.fail("chain.links[" + std::to_string(i) + "]", "must be > 0");
      }
      chain.link_lengths = *v;
      n = v->size();
    }
  }
  if (auto* j = r.field(cj, "axes", "chain", false)) {
    if (!j->is_array() || j->size() != n) {
      r.fail("chain.axes", "expected one of \"x\"/\"y\"/\"z\" per link");
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        bool ok = (*j)[i].is_string();
        const JointAxis a = ok ? axis_from((*j)[i].get<std::string>(), ok) : JointAxis::Z;
        if (!ok) r.fail("chain.axes[" + std::to_string(i) + "]", "expected \"x\", \"y\" or \"z\"");
        chain.axes.push_back(a);
      }
    }
  } else {
    static constexpr JointAxis pattern[] = {JointAxis::Z, JointAxis::Y, JointAxis::Y,
                                            JointAxis::Z, JointAxis::Y, JointAxis::Z};
    for (std::size_t i = 0; i < n; ++i) chain.axes.push_back(pattern[i % 6]);
  }
  if (auto* j = r.field(cj, "limits", "chain")) {
    if (!j->is_array() || j->size() != n) {
      r.fail("chain.limits", "expected one [min, max] pair per link");
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const std::string path = "chain.limits[" + std::to_string(i) + "]";
        if (auto v = r.numbers((*j)[i], path, 2)) {
          if (!((*v)[0] < (*v)[1])) r.fail(path, "min must be < max");
          chain.joint_limits.push_back({(*v)[0], (*v)[1]});
        }
      }
    }
  }
  if (auto* j = r.field(cj, "initial", "chain", false)) {
    if (auto v = r.numbers(*j, "chain.initial", n)) initial = *v;
  }
  if (initial.empty() && chain.joint_limits.size() == n) {
    for (const auto& lim : chain.joint_limits) initial.push_back(std::clamp(0.0, lim.min, lim.max));
  }
}

}  // namespace

SceneSnapshot SceneFile::snapshot(std::span<const double> angles, double timestamp) const {
  const ChainPose pose = forward_pose(chain, angles);
  SceneSnapshot s;
  s.planes = planes;
  s.joint_positions = pose.joint_positions;
  s.ee.position = pose.joint_positions.back();
  s.ee.orientation = pose.ee_orientation;
  s.workspace = workspace;
  s.timestamp = timestamp;
  return s;
}

SceneFile parse_scene(const nlohmann::json& doc) {
  Reader r;
  SceneFile out;
  if (!doc.is_object()) throw SceneError("document: expected a JSON object");
  r.unknown_keys(doc, "", {"planes", "chain", "workspace", "drone", "constants"});

  if (auto* j = r.field(doc, "planes", "")) parse_planes(r, *j, out.planes);
  if (auto* j = r.field(doc, "chain", "")) parse_chain(r, *j, out.chain, out.initial_angles);

  bool have_ws = false;
  if (auto* j = r.field(doc, "workspace", "")) {
    if (r.object(*j, "workspace")) {
      r.unknown_keys(*j, "workspace", {"min", "max"});
      std::optional<Vec3> lo, hi;
      if (auto* m = r.field(*j, "min", "workspace")) lo = r.vec3(*m, "workspace.min");
      if (auto* m = r.field(*j, "max", "workspace")) hi = r.vec3(*m, "workspace.max");
      if (lo && hi) {
        out.workspace = {*lo, *hi};
        if (!out.workspace.valid()) {
          r.fail("workspace", "min must be < max on every axis");
        } else {
          have_ws = true;
        }
      }
    }
  }

  out.drone_home = DroneState::from(out.workspace.center(), 0.0);
  bool have_home = false;
  if (auto* j = r.field(doc, "drone", "", false)) {
    if (r.object(*j, "drone")) {
      r.unknown_keys(*j, "drone", {"home"});
      if (auto* h = r.field(*j, "home", "drone")) {
        if (auto v = r.numbers(*h, "drone.home", 4)) {
          out.drone_home = DroneState{(*v)[0], (*v)[1], (*v)[2], wrap_angle((*v)[3])};
          have_home = true;
        }
      }
    }
  }

  if (auto* j = r.field(doc, "constants", "", false)) parse_constants(r, *j, out.constants);

  if (r.issues.empty()) {
    if (have_home && have_ws && !out.workspace.contains(out.drone_home.position())) {
      r.fail("drone.home", "outside workspace");
    }
    try {
      out.chain.validate();
      const auto snap = out.initial_snapshot();
      if (have_ws) {
        for (std::size_t i = 0; i < snap.joint_positions.size(); ++i) {
          if (!out.workspace.contains(snap.joint_positions[i])) {
            r.fail("chain.initial", "joint " + std::to_string(i) + " lies outside the workspace");
          }
        }
      }
    } catch (const SceneError& e) {
      for (const auto& i : e.issues()) r.fail("chain.initial", i);
    }
  }
  if (!r.issues.empty()) throw SceneError(std::move(r.issues));
  return out;
}

SceneFile load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SceneError(path.string() + ": cannot open");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw SceneError(path.string() + ": " + e.what());
  }
  return parse_scene(doc);
}

nlohmann::json params_to_json(const ObjectiveParams& p) {
  json c;
  c["weights"] = p.weights;
  c["f_fov"] = p.f_fov;
  c["theta_ref"] = p.theta_ref;
  c["sigma"] = p.sigma;
  c["P"] = p.order;
  c["epsilon"] = p.epsilon;
  c["d_min"] = p.d_min;
  c["camera_pitch"] = p.camera_pitch;
  c["drone_half_dims"] = vec_json(p.drone_half_dims);
  c["capsule_radius"] = p.capsule_radius;
  c["uncertainty"] = vec_json(p.uncertainty.dp);
  c["c4_gate_distance"] = p.c4_gate_distance;
  c["collision_hull_follows_yaw"] = p.collision_hull_follows_yaw;
  return c;
}

nlohmann::json scene_to_json(const SceneFile& s) {
  json doc;
  json planes = json::array();
  for (const auto& p : s.planes) {
    planes.push_back({{"center", vec_json(p.center)},
                      {"normal", vec_json(p.normal)},
                      {"axis_u", vec_json(p.axis_u)},
                      {"extents", {p.half_extent_u, p.half_extent_v}}});
  }
  doc["planes"] = planes;
  json axes = json::array();
  for (auto a : s.chain.axes) axes.push_back(axis_name(a));
  json limits = json::array();
  for (const auto& l : s.chain.joint_limits) limits.push_back({l.min, l.max});
  doc["chain"] = {{"base", vec_json(s.chain.base)}, {"base_yaw", s.chain.base_yaw},
                  {"links", s.chain.link_lengths},  {"axes", axes},
                  {"limits", limits},               {"initial", s.initial_angles}};
  doc["workspace"] = {{"min", vec_json(s.workspace.min)}, {"max", vec_json(s.workspace.max)}};
  doc["drone"] = {{"home", {s.drone_home.x, s.drone_home.y, s.drone_home.z, s.drone_home.yaw}}};
  doc["constants"] = params_to_json(s.constants);
  return doc;
}

std::string dump_scene(const SceneFile& scene) { return scene_to_json(scene).dump(2) + "\n"; }

void save_scene(const SceneFile& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SceneError(path.string() + ": cannot write");
  out << dump_scene(scene);
}

std::string scene_digest(const SceneFile& scene) {
  const std::string text = scene_to_json(scene).dump();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace droneview
