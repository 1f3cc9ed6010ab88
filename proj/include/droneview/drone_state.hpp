#pragma once

#include <cmath>
#include <numbers>

#include "droneview/geometry.hpp"

namespace droneview {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

/// Drone pose used as the optimisation variable: position (m) and yaw (rad).
struct DroneState {
  double x{0.0};
  double y{0.0};
  double z{0.0};
  double yaw{0.0};

  Vec3 position() const { return {x, y, z}; }

  static DroneState from(const Vec3& p, double yaw) { return {p.x(), p.y(), p.z(), wrap_angle(yaw)}; }

  friend bool operator==(const DroneState&, const DroneState&) = default;
};

}  // namespace droneview
