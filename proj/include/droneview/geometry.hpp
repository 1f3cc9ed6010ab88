#pragma once

#include <array>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace droneview {

using Vec3 = Eigen::Vector3d;

/// Thrown for malformed geometric input (zero vectors, coincident points, bad extents).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Distances below this magnitude count as touching contact.
inline constexpr double kContactTolerance = 1e-6;

/// Bounded planar rectangle. The normal is taken to face the free side of the
/// surface (the workspace interior).
struct RectPlane {
  Vec3 center{Vec3::Zero()};
  Vec3 normal{Vec3::UnitZ()};
  Vec3 axis_u{Vec3::UnitX()};
  Vec3 axis_v{Vec3::UnitY()};
  double half_extent_u{0.5};
  double half_extent_v{0.5};

  /// Builds a rectangle from a normal and one in-plane axis; both are
  /// normalized and axis_u is re-orthogonalized against the normal.
  static RectPlane make(const Vec3& center, const Vec3& normal, const Vec3& axis_u,
                        double half_u, double half_v);

  bool valid() const;
  std::array<Vec3, 4> corners() const;
  double offset() const { return normal.dot(center); }
};

/// Box with a yaw rotation about +z.
struct Cuboid {
  Vec3 center{Vec3::Zero()};
  Vec3 half_dims{Vec3::Constant(0.5)};
  double yaw{0.0};

  bool valid() const;
  std::array<Vec3, 8> corners() const;
};

/// Convex hull given by its vertex set. Interior or duplicate points are
/// tolerated; the hull may be flat, a segment, or a single point.
struct ConvexHull {
  std::vector<Vec3> vertices;

  /// Affine dimension of the vertex set (0..3) at the given tolerance.
  int dimension(double tol = 1e-9) const;
};

/// Union of capsules along a polyline.
struct CapsuleChain {
  std::vector<Vec3> joints;
  double radius{0.05};

  bool valid() const { return joints.size() >= 2 && radius > 0.0; }
};

/// Per-axis maximum deviation of the drone position.
struct Uncertainty {
  Vec3 dp{Vec3::Zero()};

  bool valid() const { return (dp.array() >= 0.0).all(); }
};

struct PlaneDistance {
  double distance{0.0};
  Vec3 closest_point{Vec3::Zero()};
};

/// Closest point on the rectangle. The distance is signed by the side of the
/// plane when the orthogonal projection falls inside the rectangle, otherwise
/// it is the unsigned distance to the rectangle boundary.
PlaneDistance point_plane_distance(const Vec3& p, const RectPlane& plane);

using ShapeRef = std::variant<const ConvexHull*, const Cuboid*, const CapsuleChain*,
                              const RectPlane*>;

/// Signed distance between two convex shapes (a capsule chain is treated as the
/// union of its capsules). Positive values are separation distances, negative
/// values are penetration depths (minimal translation that separates).
double convex_distance(ShapeRef a, ShapeRef b);

/// Same as convex_distance, but the query may stop early once the shapes are
/// provably farther apart than `cutoff`; in that case a lower bound that is
/// itself greater than `cutoff` is returned.
double convex_distance_bounded(ShapeRef a, ShapeRef b, double cutoff);

template <typename A, typename B>
double convex_distance(const A& a, const B& b) {
  return convex_distance(ShapeRef{&a}, ShapeRef{&b});
}

template <typename A, typename B>
double convex_distance_bounded(const A& a, const B& b, double cutoff) {
  return convex_distance_bounded(ShapeRef{&a}, ShapeRef{&b}, cutoff);
}

/// Drone collision cuboid: the bare body inflated by the pose uncertainty.
/// The cuboid stays axis-aligned unless `follow_yaw` is set.
Cuboid build_drone_collision_hull(const Vec3& position, double yaw, const Vec3& drone_half_dims,
                                  const Uncertainty& u, bool follow_yaw = false);

/// Hull spanned by the uncertainty box around the camera and the end effector.
ConvexHull build_viewing_hull(const Vec3& camera_pos, const Uncertainty& u, const Vec3& ee_pos);

struct ManipulatorHulls {
  CapsuleChain collision;
  CapsuleChain occlusion;
};

/// Collision chain over all points; occlusion chain drops the final
/// (end-effector) point.
ManipulatorHulls build_manipulator_hulls(std::span<const Vec3> joint_positions, double radius);

/// Unsigned angle in [0, pi].
double angle_between(const Vec3& v1, const Vec3& v2);

}  // namespace droneview
