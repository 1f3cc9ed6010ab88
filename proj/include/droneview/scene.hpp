#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "droneview/geometry.hpp"

namespace droneview {

/// Validation failure of a scene or chain; `issues` lists one message per
/// offending field.
class SceneError : public std::runtime_error {
 public:
  explicit SceneError(std::vector<std::string> issues);
  explicit SceneError(const std::string& issue) : SceneError(std::vector<std::string>{issue}) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

struct Workspace {
  Vec3 min{Vec3::Constant(-1.0)};
  Vec3 max{Vec3::Constant(1.0)};

  bool valid() const { return (max.array() > min.array()).all(); }
  bool contains(const Vec3& p, double tol = 1e-9) const {
    return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
  }
  Vec3 clamp(const Vec3& p) const { return p.cwiseMax(min).cwiseMin(max); }
  Vec3 center() const { return 0.5 * (min + max); }
};

struct EePose {
  Vec3 position{Vec3::Zero()};
  Eigen::Quaterniond orientation{Eigen::Quaterniond::Identity()};
};

/// Immutable world state for one planning tick.
struct SceneSnapshot {
  std::vector<RectPlane> planes;
  std::vector<Vec3> joint_positions;
  EePose ee;
  Workspace workspace;
  double timestamp{0.0};

  /// Throws SceneError when an invariant is violated.
  void validate() const;
};

enum class JointAxis { X, Y, Z };

struct JointLimit {
  double min{-3.0};
  double max{3.0};
};

/// Serial chain of revolute joints. Joint i rotates about its local axis and
/// is followed by a link of length link_lengths[i] along the local +z axis, so
/// the zero configuration points straight up from the base.
struct KinematicChain {
  Vec3 base{Vec3::Zero()};
  double base_yaw{0.0};
  std::vector<double> link_lengths;
  std::vector<JointAxis> axes;
  std::vector<JointLimit> joint_limits;

  std::size_t dof() const { return link_lengths.size(); }
  double reach() const;
  void validate() const;

  /// Six-joint arm used by the bundled scenes.
  static KinematicChain default_arm(const Vec3& base, double base_yaw = 0.0);
};

struct ChainPose {
  std::vector<Vec3> joint_positions;  // base first, end effector last
  Eigen::Quaterniond ee_orientation{Eigen::Quaterniond::Identity()};
};

/// Joint positions for the given angles. Throws SceneError on a count
/// mismatch or a limit violation.
std::vector<Vec3> forward_kinematics(const KinematicChain& chain, std::span<const double> angles);
ChainPose forward_pose(const KinematicChain& chain, std::span<const double> angles);

struct IkOptions {
  double damping{0.05};            // damping at a fully singular configuration
  double singular_threshold{0.05};  // smallest singular value below which damping applies
  double max_step{0.05};            // rad per call, per joint
  double max_task_step{0.1};        // m of end-effector error chased per iteration
  int max_iterations{50};
  double tolerance{1e-5};
  double limit_margin{0.1};  // rad; joints this close to a limit are slowed down
};

struct IkResult {
  std::vector<double> angles;
  double residual{0.0};
  int iterations{0};
  bool converged{false};
};

/// Damped least-squares position IK with singularity-adaptive damping and a
/// joint-limit penalty. The result always respects the joint limits and stays
/// within `max_step` of the seed; unreachable targets give the best effort
/// together with its residual.
IkResult solve_ik(const KinematicChain& chain, const Vec3& target, std::span<const double> seed,
                  const IkOptions& options = {});

struct RegionOfInterest {
  std::size_t plane_index{0};
  Vec3 closest_point{Vec3::Zero()};
  double distance{0.0};
};

/// Nearest plane to the end effector (ties go to the lower index).
RegionOfInterest region_of_interest(const Vec3& ee_pos, std::span<const RectPlane> planes);

struct PlaneExtractionParams {
  double inlier_tol{0.02};
  std::size_t min_inliers{200};
  std::size_t max_planes{8};
  int iterations{400};
  std::uint64_t seed{0};
};

/// Sequential RANSAC plane extraction with a least-squares refit and a PCA
/// bounding rectangle per plane. Throws SceneError when no plane has enough
/// support.
std::vector<RectPlane> extract_planes(std::span<const Vec3> cloud, const PlaneExtractionParams& params);

}  // namespace droneview
