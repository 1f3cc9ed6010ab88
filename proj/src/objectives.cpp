#include "droneview/objectives.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace droneview {
namespace {

constexpr double kPi = std::numbers::pi;

// exp(-x) underflows to exactly 0 in double precision beyond this.
constexpr double kExpUnderflow = 746.0;

// Angle between the camera axis and the ray to the end effector; a drone sitting
// on the end effector counts as looking maximally away.
double theta_alpha(const Vec3& cam_dir, const Vec3& drone, const Vec3& ee) {
  const Vec3 to_ee = ee - drone;
  if (to_ee.norm() < 1e-12) return kPi;
  return angle_between(cam_dir, to_ee);
}

double theta_beta(const Vec3& drone, const Vec3& ee, const Vec3& closest, const Vec3& plane_normal) {
  const Vec3 to_drone = drone - ee;
  if (to_drone.norm() < 1e-12) return kPi;
  Vec3 to_plane = closest - ee;
  if (to_plane.norm() < 1e-12) to_plane = -plane_normal;
  return angle_between(to_plane, to_drone);
}

double reflected_angle_cost(double theta, double theta_ref) {
  const double a = theta - theta_ref;
  const double b = theta - (2.0 * kPi - theta_ref);
  return std::min(a * a, b * b);
}

double neg_sq(double d) { return d < 0.0 ? d * d : 0.0; }

}  // namespace

void ObjectiveParams::validate() const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw std::invalid_argument("weights[" + std::to_string(i) + "]: must be >= 0");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma: must be > 0");
  if (order < 1) throw std::invalid_argument("P: must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon: must be > 0");
  if (!(d_min >= 0.0)) throw std::invalid_argument("d_min: must be >= 0");
  if (!(f_fov >= 0.0)) throw std::invalid_argument("f_fov: must be >= 0");
  if (!std::isfinite(theta_ref)) throw std::invalid_argument("theta_ref: must be finite");
  if (!std::isfinite(camera_pitch)) throw std::invalid_argument("camera_pitch: must be finite");
  if (!(drone_half_dims.array() > 0.0).all()) throw std::invalid_argument("drone_half_dims: must be > 0");
  if (!(capsule_radius > 0.0)) throw std::invalid_argument("capsule_radius: must be > 0");
  if (!uncertainty.valid()) throw std::invalid_argument("uncertainty: must be >= 0");
}

bool term_active(TermSet set, std::size_t index) {
  if (index >= kNumTerms) return false;
  if (set == TermSet::Local) return index != 8;
  return index != 7;
}

double higher_order_gaussian(double x, double sigma, int order) {
  const double base = x * x / (2.0 * sigma * sigma);
  return std::exp(-std::pow(base, order));
}

Vec3 camera_direction(const DroneState& state, double camera_pitch) {
  const double c = std::cos(camera_pitch);
  return {c * std::cos(state.yaw), c * std::sin(state.yaw), -std::sin(camera_pitch)};
}

CostModel::CostModel(const SceneSnapshot& scene, const ObjectiveParams& params)
    : scene_(&scene), params_(params) {
  params_.validate();
  roi_ = region_of_interest(scene.ee.position, scene.planes);
  if (scene.joint_positions.size() >= 3) {
    arm_ = build_manipulator_hulls(scene.joint_positions, params_.capsule_radius);
    has_occlusion_chain_ = true;
  } else if (scene.joint_positions.size() == 2) {
    arm_.collision.joints = scene.joint_positions;
    arm_.collision.radius = params_.capsule_radius;
  }
  gauss_cutoff_ = params_.sigma * std::sqrt(2.0 * std::pow(kExpUnderflow, 1.0 / params_.order));
}

double CostModel::gauss(double d) const {
  return higher_order_gaussian(std::max(d, 0.0), params_.sigma, params_.order);
}

Cuboid CostModel::collision_hull(const DroneState& s) const {
  return build_drone_collision_hull(s.position(), s.yaw, params_.drone_half_dims, params_.uncertainty,
                                    params_.collision_hull_follows_yaw);
}

double CostModel::c1(const DroneState& s) const {
  const Cuboid hull = collision_hull(s);
  double sum = 0.0;
  for (const auto& plane : scene_->planes) sum += gauss(convex_distance_bounded(hull, plane, gauss_cutoff_));
  return sum;
}

double CostModel::c2(const DroneState& s) const {
  if (!arm_.collision.valid()) return 0.0;
  const Cuboid hull = collision_hull(s);
  return gauss(convex_distance_bounded(hull, arm_.collision, gauss_cutoff_));
}

double CostModel::c3(const DroneState& s) const {
  const double a = theta_alpha(camera_direction(s, params_.camera_pitch), s.position(), scene_->ee.position);
  return a * a;
}

double CostModel::c4(const DroneState& s) const {
  if (params_.c4_gate_distance > 0.0 && roi_.distance > params_.c4_gate_distance) return 0.0;
  const double r = (s.position() - scene_->ee.position).norm() - params_.f_fov * roi_.distance - params_.d_min;
  return r * r;
}

double CostModel::c5(const DroneState& s) const {
  const double b = theta_beta(s.position(), scene_->ee.position, roi_.closest_point,
                              scene_->planes[roi_.plane_index].normal);
  return reflected_angle_cost(b, params_.theta_ref);
}

double CostModel::c6(const DroneState& s) const {
  if ((s.position() - scene_->ee.position).norm() < 1e-12) return 0.0;
  const ConvexHull vh = build_viewing_hull(s.position(), params_.uncertainty, scene_->ee.position);
  double sum = 0.0;
  for (const auto& plane : scene_->planes) sum += neg_sq(convex_distance_bounded(vh, plane, 0.0));
  return sum;
}

double CostModel::c7(const DroneState& s) const {
  if (!has_occlusion_chain_ || (s.position() - scene_->ee.position).norm() < 1e-12) return 0.0;
  const ConvexHull vh = build_viewing_hull(s.position(), params_.uncertainty, scene_->ee.position);
  return neg_sq(convex_distance_bounded(vh, arm_.occlusion, 0.0));
}

CostBreakdown CostModel::evaluate(const DroneState& state, const DroneState& reference, TermSet set) const {
  CostBreakdown out;
  auto& c = out.c;
  c[0] = c1(state);
  c[1] = c2(state);
  c[2] = c3(state);
  c[3] = c4(state);
  c[4] = c5(state);
  // c6 and c7 share one viewing hull.
  if ((state.position() - scene_->ee.position).norm() >= 1e-12) {
    const ConvexHull vh = build_viewing_hull(state.position(), params_.uncertainty, scene_->ee.position);
    double occ = 0.0;
    for (const auto& plane : scene_->planes) occ += neg_sq(convex_distance_bounded(vh, plane, 0.0));
    c[5] = occ;
    if (has_occlusion_chain_) c[6] = neg_sq(convex_distance_bounded(vh, arm_.occlusion, 0.0));
  }
  if (set == TermSet::Local) {
    c[7] = c8_motion_limit(state, reference);
  } else {
    c[8] = c9_novelty(state, reference, params_);
  }
  for (std::size_t i = 0; i < kNumTerms; ++i) out.total += params_.weights[i] * c[i];
  return out;
}

double c1_environment_collision(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params) {
  return CostModel(scene, params).c1(state);
}
double c2_manipulator_collision(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params) {
  return CostModel(scene, params).c2(state);
}
double c3_visual_target(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params) {
  return CostModel(scene, params).c3(state);
}
double c4_distance_to_target(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params) {
  return CostModel(scene, params).c4(state);
}
double c5_perspective_angle(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params) {
  return CostModel(scene, params).c5(state);
}
double c6_environment_occlusion(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params) {
  return CostModel(scene, params).c6(state);
}
double c7_manipulator_occlusion(const DroneState& state, const SceneSnapshot& scene, const ObjectiveParams& params) {
  return CostModel(scene, params).c7(state);
}

double c8_motion_limit(const DroneState& state, const DroneState& prev_cmd) {
  return std::pow((state.position() - prev_cmd.position()).norm(), 6);
}

double c9_novelty(const DroneState& state, const DroneState& current_drone, const ObjectiveParams& params) {
  return 1.0 / (params.epsilon + (state.position() - current_drone.position()).norm());
}

CostBreakdown total_cost(const DroneState& state, const SceneSnapshot& scene, const DroneState& reference,
                         const ObjectiveParams& params, TermSet set) {
  return CostModel(scene, params).evaluate(state, reference, set);
}

}  // namespace droneview
