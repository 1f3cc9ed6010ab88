#include "droneview/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace droneview {

namespace {

// Support-mapped convex piece. Vertices live either in `storage` or in an
// external hull; `frame` holds the box axes (columns) or the quad
// (u, v, normal) axes.
struct Convex {
  enum class Kind { Box, Quad, Hull, Segment };

  Kind kind{Kind::Hull};
  std::array<Vec3, 8> storage{};
  const Vec3* external{nullptr};
  std::size_t count{0};
  Eigen::Matrix3d frame{Eigen::Matrix3d::Identity()};
  Vec3 center{Vec3::Zero()};
  double bound_radius{0.0};

  std::span<const Vec3> verts() const {
    return {external != nullptr ? external : storage.data(), count};
  }

  Vec3 support(const Vec3& d) const {
    const auto verts = this->verts();
    std::size_t best = 0;
    double best_dot = verts[0].dot(d);
    for (std::size_t i = 1; i < verts.size(); ++i) {
      const double s = verts[i].dot(d);
      if (s > best_dot) {
        best_dot = s;
        best = i;
      }
    }
    return verts[best];
  }

  double support_value(const Vec3& d) const {
    const auto verts = this->verts();
    double best = verts[0].dot(d);
    for (std::size_t i = 1; i < verts.size(); ++i) best = std::max(best, verts[i].dot(d));
    return best;
  }

  void finish_bounds() {
    const auto verts = this->verts();
    center.setZero();
    for (const auto& v : verts) center += v;
    center /= static_cast<double>(verts.size());
    bound_radius = 0.0;
    for (const auto& v : verts) bound_radius = std::max(bound_radius, (v - center).norm());
  }
};

Convex make_convex(const Cuboid& c) {
  Convex out;
  out.kind = Convex::Kind::Box;
  out.storage = c.corners();
  out.count = 8;
  out.frame = Eigen::AngleAxisd(c.yaw, Vec3::UnitZ()).toRotationMatrix();
  out.finish_bounds();
  return out;
}

Convex make_convex(const RectPlane& p) {
  Convex out;
  out.kind = Convex::Kind::Quad;
  const auto corners = p.corners();
  std::copy(corners.begin(), corners.end(), out.storage.begin());
  out.count = 4;
  out.frame.col(0) = p.axis_u;
  out.frame.col(1) = p.axis_v;
  out.frame.col(2) = p.normal;
  out.finish_bounds();
  return out;
}

Convex make_convex(const ConvexHull& h) {
  if (h.vertices.empty()) throw GeometryError("convex hull has no vertices");
  Convex out;
  out.kind = Convex::Kind::Hull;
  out.external = h.vertices.data();
  out.count = h.vertices.size();
  out.finish_bounds();
  return out;
}

Convex make_segment(const Vec3& a, const Vec3& b) {
  Convex out;
  out.kind = Convex::Kind::Segment;
  out.storage[0] = a;
  out.storage[1] = b;
  out.count = 2;
  out.finish_bounds();
  return out;
}

void push_unique_direction(std::vector<Vec3>& dirs, const Vec3& d) {
  const double n = d.norm();
  if (n < 1e-12) return;
  const Vec3 u = d / n;
  for (const auto& e : dirs) {
    if (std::abs(e.dot(u)) > 1.0 - 1e-12) return;
  }
  dirs.push_back(u);
}

double vertex_scale(std::span<const Vec3> verts) {
  double s = 0.0;
  for (const auto& v : verts) s = std::max(s, (v - verts[0]).norm());
  return std::max(s, 1e-12);
}

// Facet normals and edge directions. Supersets are fine: every extra
// direction only yields an upper bound in the penetration minimisation.
void features(const Convex& c, std::vector<Vec3>& faces, std::vector<Vec3>& edges) {
  switch (c.kind) {
    case Convex::Kind::Box:
      for (int i = 0; i < 3; ++i) {
        faces.push_back(c.frame.col(i));
        edges.push_back(c.frame.col(i));
      }
      return;
    case Convex::Kind::Quad:
      faces.push_back(c.frame.col(2));
      edges.push_back(c.frame.col(0));
      edges.push_back(c.frame.col(1));
      return;
    case Convex::Kind::Segment:
      push_unique_direction(edges, c.storage[1] - c.storage[0]);
      return;
    case Convex::Kind::Hull:
      break;
  }

  const auto v = c.verts();
  const std::size_t n = v.size();
  const double scale = vertex_scale(v);
  const double tol = 1e-9 * scale;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) push_unique_direction(edges, v[j] - v[i]);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        Vec3 normal = (v[j] - v[i]).cross(v[k] - v[i]);
        const double len = normal.norm();
        if (len < tol * scale) continue;
        normal /= len;
        bool above = false;
        bool below = false;
        for (std::size_t m = 0; m < n && !(above && below); ++m) {
          const double s = normal.dot(v[m] - v[i]);
          if (s > tol) above = true;
          if (s < -tol) below = true;
        }
        if (!(above && below)) push_unique_direction(faces, normal);
      }
    }
  }
}

// Closest point to the origin on the convex hull of up to four points.
// Enumerates every sub-simplex, keeps the affine projections that fall in the
// relative interior, and returns the one of minimum norm.
struct SimplexResult {
  Vec3 v;
  unsigned mask;
  bool contains_origin;
};

SimplexResult closest_on_simplex(const std::array<Vec3, 4>& p, int count) {
  SimplexResult best{p[0], 1u, false};
  double best_norm = std::numeric_limits<double>::infinity();
  const unsigned full = (1u << count) - 1u;
  for (unsigned mask = 1; mask <= full; ++mask) {
    std::array<int, 4> idx{};
    int m = 0;
    for (int i = 0; i < count; ++i)
      if (mask & (1u << i)) idx[m++] = i;

    const Vec3& q0 = p[idx[0]];
    Vec3 point;
    std::array<double, 4> lambda{};
    if (m == 1) {
      point = q0;
      lambda[0] = 1.0;
    } else if (m == 2) {
      const Vec3 d = p[idx[1]] - q0;
      const double dd = d.squaredNorm();
      if (dd < 1e-30) continue;
      const double mu = -q0.dot(d) / dd;
      lambda = {1.0 - mu, mu, 0.0, 0.0};
      point = q0 + mu * d;
    } else if (m == 3) {
      const Vec3 d1 = p[idx[1]] - q0;
      const Vec3 d2 = p[idx[2]] - q0;
      const double a = d1.dot(d1), b = d1.dot(d2), c = d2.dot(d2);
      const double det = a * c - b * b;
      if (det <= 1e-14 * a * c || det <= 1e-40) continue;
      const double r1 = -q0.dot(d1), r2 = -q0.dot(d2);
      const double mu1 = (r1 * c - r2 * b) / det;
      const double mu2 = (a * r2 - b * r1) / det;
      lambda = {1.0 - mu1 - mu2, mu1, mu2, 0.0};
      point = q0 + mu1 * d1 + mu2 * d2;
    } else {
      Eigen::Matrix3d d;
      d.col(0) = p[idx[1]] - q0;
      d.col(1) = p[idx[2]] - q0;
      d.col(2) = p[idx[3]] - q0;
      const double det = d.determinant();
      const double scale = d.col(0).norm() * d.col(1).norm() * d.col(2).norm();
      if (std::abs(det) <= 1e-12 * scale || scale == 0.0) continue;
      const Vec3 mu = d.inverse() * (-q0);
      lambda = {1.0 - mu.sum(), mu[0], mu[1], mu[2]};
      point = Vec3::Zero();
    }

    bool inside = true;
    for (int i = 0; i < m; ++i)
      if (!(lambda[i] > 0.0)) inside = false;
    if (!inside) continue;

    if (m == 4) return {Vec3::Zero(), mask, true};
    const double nrm = point.squaredNorm();
    if (nrm < best_norm) {
      best_norm = nrm;
      best = {point, mask, false};
    }
  }
  return best;
}

struct GjkResult {
  double distance;
  bool intersecting;
};

// Distance between two convex pieces via GJK on the Minkowski difference a - b.
GjkResult gjk(const Convex& a, const Convex& b, double cutoff) {
  const Vec3 init = a.center - b.center;
  const Vec3 d0 = init.squaredNorm() > 0.0 ? Vec3(-init) : Vec3(Vec3::UnitX());
  std::array<Vec3, 4> simplex{};
  simplex[0] = a.support(d0) - b.support(-d0);
  int count = 1;
  Vec3 v = simplex[0];

  for (int iter = 0; iter < 96; ++iter) {
    const double vv = v.squaredNorm();
    if (vv < 1e-24) return {0.0, true};
    const Vec3 w = a.support(-v) - b.support(v);
    const double vw = v.dot(w);
    if (vw > 0.0 && cutoff < std::numeric_limits<double>::infinity()) {
      const double separation = vw / std::sqrt(vv);
      if (separation > cutoff) return {separation, false};
    }
    if (vv - vw <= 1e-13 * vv) break;
    bool duplicate = false;
    for (int i = 0; i < count; ++i)
      if ((simplex[i] - w).squaredNorm() < 1e-28) duplicate = true;
    if (duplicate) break;
    simplex[count++] = w;
    const SimplexResult r = closest_on_simplex(simplex, count);
    if (r.contains_origin) return {0.0, true};
    std::array<Vec3, 4> reduced{};
    int m = 0;
    for (int i = 0; i < count; ++i)
      if (r.mask & (1u << i)) reduced[m++] = simplex[i];
    simplex = reduced;
    count = m;
    if (r.v.squaredNorm() >= vv) break;  // no progress; numerical floor
    v = r.v;
  }
  const double dist = v.norm();
  if (dist < 1e-12) return {0.0, true};
  return {dist, false};
}

// Penetration depth for overlapping pieces: the minimum over candidate
// separating axes of the Minkowski-difference support value. For polytopes
// the candidates (facet normals of either piece and edge-edge cross products)
// contain every facet normal of the difference, so the minimum is exact.
double penetration_depth(const Convex& a, const Convex& b) {
  std::vector<Vec3> fa, ea, fb, eb;
  features(a, fa, ea);
  features(b, fb, eb);
  std::vector<Vec3> axes;
  axes.reserve(fa.size() + fb.size() + ea.size() * eb.size());
  for (const auto& f : fa) axes.push_back(f);
  for (const auto& f : fb) axes.push_back(f);
  for (const auto& x : ea)
    for (const auto& y : eb) {
      const Vec3 c = x.cross(y);
      const double n = c.norm();
      if (n > 1e-9) axes.push_back(c / n);
    }
  if (axes.empty()) return 0.0;
  double depth = std::numeric_limits<double>::infinity();
  for (const auto& n : axes) {
    const double plus = a.support_value(n) + b.support_value(-n);
    const double minus = a.support_value(-n) + b.support_value(n);
    depth = std::min({depth, plus, minus});
  }
  return std::max(depth, 0.0);
}

double piece_distance(const Convex& a, const Convex& b, double cutoff) {
  const double sphere_gap = (a.center - b.center).norm() - a.bound_radius - b.bound_radius;
  if (sphere_gap > cutoff) return sphere_gap;
  const GjkResult g = gjk(a, b, cutoff);
  if (!g.intersecting) return g.distance;
  return -penetration_depth(a, b);
}

// A shape decomposed into convex pieces with a common inflation radius.
struct Pieces {
  std::vector<Convex> parts;
  double radius{0.0};
};

Pieces decompose(ShapeRef s) {
  Pieces out;
  std::visit(
      [&](auto* shape) {
        using T = std::decay_t<decltype(*shape)>;
        if constexpr (std::is_same_v<T, CapsuleChain>) {
          if (!shape->valid()) throw GeometryError("capsule chain needs >= 2 joints and radius > 0");
          out.radius = shape->radius;
          for (std::size_t i = 0; i + 1 < shape->joints.size(); ++i)
            out.parts.push_back(make_segment(shape->joints[i], shape->joints[i + 1]));
        } else {
          out.parts.push_back(make_convex(*shape));
        }
      },
      s);
  return out;
}

double distance_impl(ShapeRef a, ShapeRef b, double cutoff) {
  const Pieces pa = decompose(a);
  const Pieces pb = decompose(b);
  const double inflate = pa.radius + pb.radius;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : pa.parts)
    for (const auto& y : pb.parts) {
      const double piece_cutoff = std::min(best, cutoff) + inflate;
      best = std::min(best, piece_distance(x, y, piece_cutoff) - inflate);
    }
  return best;
}

}  // namespace

RectPlane RectPlane::make(const Vec3& center, const Vec3& normal, const Vec3& axis_u,
                          double half_u, double half_v) {
  if (normal.norm() < 1e-12) throw GeometryError("plane normal is zero");
  RectPlane p;
  p.center = center;
  // Already-canonical input is kept bit-for-bit so serialization round-trips.
  auto unit = [](const Vec3& v) { return std::abs(v.norm() - 1.0) <= 1e-15 ? v : v.normalized(); };
  p.normal = unit(normal);
  const double along = p.normal.dot(axis_u);
  const Vec3 u = std::abs(along) <= 1e-15 ? axis_u : Vec3(axis_u - p.normal * along);
  if (u.norm() < 1e-9) throw GeometryError("plane axis_u is parallel to the normal");
  p.axis_u = unit(u);
  p.axis_v = p.normal.cross(p.axis_u);
  p.half_extent_u = half_u;
  p.half_extent_v = half_v;
  if (!(half_u > 0.0) || !(half_v > 0.0)) throw GeometryError("plane extents must be > 0");
  return p;
}

bool RectPlane::valid() const {
  const double tol = 1e-9;
  return std::abs(normal.norm() - 1.0) < tol && std::abs(axis_u.norm() - 1.0) < tol &&
         std::abs(axis_v.norm() - 1.0) < tol && std::abs(normal.dot(axis_u)) < tol &&
         std::abs(normal.dot(axis_v)) < tol && std::abs(axis_u.dot(axis_v)) < tol &&
         half_extent_u > 0.0 && half_extent_v > 0.0;
}

std::array<Vec3, 4> RectPlane::corners() const {
  const Vec3 du = axis_u * half_extent_u;
  const Vec3 dv = axis_v * half_extent_v;
  return {center + du + dv, center - du + dv, center - du - dv, center + du - dv};
}

bool Cuboid::valid() const { return (half_dims.array() > 0.0).all(); }

std::array<Vec3, 8> Cuboid::corners() const {
  const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  std::array<Vec3, 8> out;
  int i = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        out[i++] = center + r * Vec3(sx * half_dims.x(), sy * half_dims.y(), sz * half_dims.z());
  return out;
}

int ConvexHull::dimension(double tol) const {
  if (vertices.empty()) return -1;
  Eigen::MatrixXd d(3, static_cast<Eigen::Index>(vertices.size()));
  for (std::size_t i = 0; i < vertices.size(); ++i)
    d.col(static_cast<Eigen::Index>(i)) = vertices[i] - vertices[0];
  if (d.norm() < tol) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  const auto s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tol * std::max(1.0, s[0])) ++rank;
  return rank;
}

PlaneDistance point_plane_distance(const Vec3& p, const RectPlane& plane) {
  const Vec3 rel = p - plane.center;
  const double u = rel.dot(plane.axis_u);
  const double v = rel.dot(plane.axis_v);
  const double h = rel.dot(plane.normal);
  const double cu = std::clamp(u, -plane.half_extent_u, plane.half_extent_u);
  const double cv = std::clamp(v, -plane.half_extent_v, plane.half_extent_v);
  PlaneDistance out;
  out.closest_point = plane.center + cu * plane.axis_u + cv * plane.axis_v;
  if (cu == u && cv == v) {
    out.distance = h;
  } else {
    out.distance = (p - out.closest_point).norm();
  }
  return out;
}

double convex_distance(ShapeRef a, ShapeRef b) {
  return distance_impl(a, b, std::numeric_limits<double>::infinity());
}

double convex_distance_bounded(ShapeRef a, ShapeRef b, double cutoff) {
  return distance_impl(a, b, cutoff);
}

Cuboid build_drone_collision_hull(const Vec3& position, double yaw, const Vec3& drone_half_dims,
                                  const Uncertainty& u, bool follow_yaw) {
  if (!(drone_half_dims.array() > 0.0).all()) throw GeometryError("drone half dims must be > 0");
  if (!u.valid()) throw GeometryError("uncertainty must be componentwise >= 0");
  Cuboid c;
  c.center = position;
  c.half_dims = drone_half_dims + u.dp;
  c.yaw = follow_yaw ? yaw : 0.0;
  return c;
}

ConvexHull build_viewing_hull(const Vec3& camera_pos, const Uncertainty& u, const Vec3& ee_pos) {
  if ((camera_pos - ee_pos).norm() < 1e-12)
    throw GeometryError("viewing hull is degenerate: camera coincides with end effector");
  if (!u.valid()) throw GeometryError("uncertainty must be componentwise >= 0");
  ConvexHull hull;
  hull.vertices.reserve(9);
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) {
        const Vec3 corner = camera_pos + Vec3(sx * u.dp.x(), sy * u.dp.y(), sz * u.dp.z());
        const bool dup = std::any_of(hull.vertices.begin(), hull.vertices.end(),
                                     [&](const Vec3& q) { return (q - corner).norm() < 1e-15; });
        if (!dup) hull.vertices.push_back(corner);
      }
  const Vec3 rel = (ee_pos - camera_pos).cwiseAbs();
  const bool inside_box = (rel.array() <= u.dp.array()).all();
  if (!inside_box) hull.vertices.push_back(ee_pos);
  return hull;
}

ManipulatorHulls build_manipulator_hulls(std::span<const Vec3> joint_positions, double radius) {
  if (joint_positions.size() < 3)
    throw GeometryError("manipulator hulls need at least 3 joint positions");
  if (!(radius > 0.0)) throw GeometryError("capsule radius must be > 0");
  ManipulatorHulls out;
  out.collision.joints.assign(joint_positions.begin(), joint_positions.end());
  out.collision.radius = radius;
  out.occlusion.joints.assign(joint_positions.begin(), joint_positions.end() - 1);
  out.occlusion.radius = radius;
  return out;
}

double angle_between(const Vec3& v1, const Vec3& v2) {
  const double n1 = v1.norm();
  const double n2 = v2.norm();
  if (n1 < 1e-15 || n2 < 1e-15) throw GeometryError("angle_between: zero-length vector");
  const double c = std::clamp(v1.dot(v2) / (n1 * n2), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace droneview
