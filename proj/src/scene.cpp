#include "droneview/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace droneview {
namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::ostringstream os;
  os << "invalid scene";
  for (const auto& i : issues) os << "; " << i;
  return os.str();
}

Vec3 unit_axis(JointAxis a) {
  switch (a) {
    case JointAxis::X: return Vec3::UnitX();
    case JointAxis::Y: return Vec3::UnitY();
    case JointAxis::Z: return Vec3::UnitZ();
  }
  return Vec3::UnitZ();
}

struct ChainFrames {
  std::vector<Vec3> joints;      // base first, EE last
  std::vector<Vec3> world_axes;  // rotation axis of joint i in world frame
  Eigen::Matrix3d ee_rotation;
};

ChainFrames chain_frames(const KinematicChain& chain, std::span<const double> angles) {
  ChainFrames f;
  const std::size_t n = chain.dof();
  f.joints.reserve(n + 1);
  f.world_axes.reserve(n);
  Eigen::Matrix3d r = Eigen::AngleAxisd(chain.base_yaw, Vec3::UnitZ()).toRotationMatrix();
  Vec3 p = chain.base;
  f.joints.push_back(p);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 local = unit_axis(chain.axes[i]);
    f.world_axes.push_back(r * local);
    r = r * Eigen::AngleAxisd(angles[i], local).toRotationMatrix();
    p = p + r * Vec3(0.0, 0.0, chain.link_lengths[i]);
    f.joints.push_back(p);
  }
  f.ee_rotation = r;
  return f;
}

void check_angles(const KinematicChain& chain, std::span<const double> angles) {
  if (angles.size() != chain.dof()) {
    throw SceneError("angles: expected " + std::to_string(chain.dof()) + " values, got " +
                     std::to_string(angles.size()));
  }
  std::vector<std::string> issues;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const auto& lim = chain.joint_limits[i];
    if (!std::isfinite(angles[i]) || angles[i] < lim.min - 1e-12 || angles[i] > lim.max + 1e-12) {
      issues.push_back("angles[" + std::to_string(i) + "]: outside joint limits");
    }
  }
  if (!issues.empty()) throw SceneError(std::move(issues));
}

}  // namespace

SceneError::SceneError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

void SceneSnapshot::validate() const {
  std::vector<std::string> issues;
  if (planes.empty()) issues.emplace_back("planes: at least one plane required");
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (!planes[i].valid()) issues.push_back("planes[" + std::to_string(i) + "]: invalid rectangle");
  }
  if (!workspace.valid()) issues.emplace_back("workspace: min must be < max on every axis");
  if (joint_positions.empty()) {
    issues.emplace_back("joint_positions: empty");
  } else {
    if ((joint_positions.back() - ee.position).norm() > 1e-9) {
      issues.emplace_back("ee: position differs from last joint position");
    }
    for (std::size_t i = 0; i < joint_positions.size(); ++i) {
      if (!workspace.contains(joint_positions[i], 1e-9)) {
        issues.push_back("joint_positions[" + std::to_string(i) + "]: outside workspace");
      }
    }
  }
  if (!issues.empty()) throw SceneError(std::move(issues));
}

double KinematicChain::reach() const {
  return std::accumulate(link_lengths.begin(), link_lengths.end(), 0.0);
}

void KinematicChain::validate() const {
  std::vector<std::string> issues;
  if (link_lengths.empty()) issues.emplace_back("chain.links: at least one link required");
  if (axes.size() != link_lengths.size()) issues.emplace_back("chain.axes: count must match chain.links");
  if (joint_limits.size() != link_lengths.size()) {
    issues.emplace_back("chain.limits: count must match chain.links");
  }
  for (std::size_t i = 0; i < link_lengths.size(); ++i) {
    if (!(link_lengths[i] > 0.0)) issues.push_back("chain.links[" + std::to_string(i) + "]: must be > 0");
  }
  for (std::size_t i = 0; i < joint_limits.size(); ++i) {
    if (!(joint_limits[i].min < joint_limits[i].max)) {
      issues.push_back("chain.limits[" + std::to_string(i) + "]: min must be < max");
    }
  }
  if (!base.allFinite() || !std::isfinite(base_yaw)) issues.emplace_back("chain.base: must be finite");
  if (!issues.empty()) throw SceneError(std::move(issues));
}

KinematicChain KinematicChain::default_arm(const Vec3& base, double base_yaw) {
  KinematicChain c;
  c.base = base;
  c.base_yaw = base_yaw;
  c.link_lengths = {0.3, 0.4, 0.35, 0.05, 0.05, 0.15};
  c.axes = {JointAxis::Z, JointAxis::Y, JointAxis::Y, JointAxis::Z, JointAxis::Y, JointAxis::Z};
  c.joint_limits = {{-2.9, 2.9}, {-1.8, 1.8}, {-2.6, 2.6}, {-2.9, 2.9}, {-2.0, 2.0}, {-2.9, 2.9}};
  return c;
}

std::vector<Vec3> forward_kinematics(const KinematicChain& chain, std::span<const double> angles) {
  check_angles(chain, angles);
  return chain_frames(chain, angles).joints;
}

ChainPose forward_pose(const KinematicChain& chain, std::span<const double> angles) {
  check_angles(chain, angles);
  auto f = chain_frames(chain, angles);
  ChainPose out;
  out.joint_positions = std::move(f.joints);
  out.ee_orientation = Eigen::Quaterniond(f.ee_rotation).normalized();
  return out;
}

IkResult solve_ik(const KinematicChain& chain, const Vec3& target, std::span<const double> seed,
                  const IkOptions& options) {
  check_angles(chain, seed);
  const std::size_t n = chain.dof();
  const auto nn = static_cast<Eigen::Index>(n);
  std::vector<double> q(seed.begin(), seed.end());
  Eigen::VectorXd lo(nn), hi(nn);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    lo[k] = std::max(chain.joint_limits[i].min, seed[i] - options.max_step);
    hi[k] = std::min(chain.joint_limits[i].max, seed[i] + options.max_step);
  }

  auto frames = chain_frames(chain, q);
  Vec3 err = target - frames.joints.back();
  int it = 0;
  for (; it < options.max_iterations && err.norm() >= options.tolerance; ++it) {
    Eigen::MatrixXd jac(3, nn);
    const Vec3& ee = frames.joints.back();
    for (std::size_t i = 0; i < n; ++i) {
      jac.col(static_cast<Eigen::Index>(i)) = frames.world_axes[i].cross(ee - frames.joints[i]);
    }
    // Large errors are chased in bounded task-space increments.
    const double err_norm = err.norm();
    const Vec3 e = err_norm > options.max_task_step ? Vec3(err * (options.max_task_step / err_norm)) : err;

    // Weighted damped least squares. Joints inside the limit margin are
    // slowed, joints pinned at the per-call box are frozen.
    Eigen::VectorXd w = Eigen::VectorXd::Ones(nn);
    Eigen::VectorXd dq = Eigen::VectorXd::Zero(nn);
    for (int pass = 0; pass < 3; ++pass) {
      const Eigen::MatrixXd jw = jac * w.cwiseSqrt().asDiagonal();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(jw);
      const double smin = svd.singularValues()(svd.singularValues().size() - 1);
      // Damping fades in only near singular configurations.
      const double ratio = std::min(smin / options.singular_threshold, 1.0);
      const double lambda2 = options.damping * options.damping * (1.0 - ratio * ratio);
      const Eigen::Matrix3d a = jw * jw.transpose() + lambda2 * Eigen::Matrix3d::Identity();
      dq = w.asDiagonal() * (jac.transpose() * a.ldlt().solve(e));
      bool changed = false;
      for (Eigen::Index k = 0; k < nn; ++k) {
        const auto& lim = chain.joint_limits[static_cast<std::size_t>(k)];
        const double qk = q[static_cast<std::size_t>(k)];
        const bool pinned = (dq[k] > 0.0 && qk >= hi[k]) || (dq[k] < 0.0 && qk <= lo[k]);
        double wk = 1.0;
        if (pinned) {
          wk = 0.0;
        } else {
          const double room = dq[k] > 0.0 ? lim.max - qk : qk - lim.min;
          if (room < options.limit_margin) wk = std::max(room / options.limit_margin, 1e-3);
        }
        if (wk < w[k]) {
          w[k] = wk;
          changed = true;
        }
      }
      if (!changed) break;
    }
    // Uniform scaling keeps the step direction (a descent direction).
    double scale = 1.0;
    for (Eigen::Index k = 0; k < nn; ++k) {
      const double qk = q[static_cast<std::size_t>(k)];
      if (dq[k] > 0.0) scale = std::min(scale, (hi[k] - qk) / dq[k]);
      if (dq[k] < 0.0) scale = std::min(scale, (lo[k] - qk) / dq[k]);
    }
    scale = std::max(scale, 0.0);

    bool improved = false;
    for (int halving = 0; halving < 8 && scale > 0.0; ++halving, scale *= 0.5) {
      std::vector<double> trial(q);
      for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        trial[i] = std::clamp(q[i] + scale * dq[k], lo[k], hi[k]);
      }
      auto trial_frames = chain_frames(chain, trial);
      const Vec3 trial_err = target - trial_frames.joints.back();
      if (trial_err.norm() < err_norm) {
        q = std::move(trial);
        frames = std::move(trial_frames);
        err = trial_err;
        improved = true;
        break;
      }
    }
    if (!improved || err_norm - err.norm() < 1e-12) {
      ++it;
      break;
    }
  }

  IkResult result;
  result.angles = std::move(q);
  result.residual = err.norm();
  result.iterations = it;
  result.converged = result.residual < options.tolerance;
  return result;
}

RegionOfInterest region_of_interest(const Vec3& ee_pos, std::span<const RectPlane> planes) {
  if (planes.empty()) throw SceneError("planes: at least one plane required");
  RegionOfInterest best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const auto pd = point_plane_distance(ee_pos, planes[i]);
    const double d = std::abs(pd.distance);
    if (d < best.distance) {
      best.plane_index = i;
      best.closest_point = pd.closest_point;
      best.distance = d;
    }
  }
  return best;
}

namespace {

struct PlaneFit {
  Vec3 centroid;
  Vec3 normal;
  Eigen::Matrix3d basis;  // eigenvectors, ascending eigenvalues
};

PlaneFit fit_plane(std::span<const Vec3> cloud, const std::vector<std::size_t>& idx) {
  Vec3 c = Vec3::Zero();
  for (auto i : idx) c += cloud[i];
  c /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (auto i : idx) {
    const Vec3 d = cloud[i] - c;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  return {c, es.eigenvectors().col(0), es.eigenvectors()};
}

std::vector<std::size_t> inliers_of(std::span<const Vec3> cloud, const std::vector<std::size_t>& pool,
                                    const Vec3& p0, const Vec3& n, double tol) {
  std::vector<std::size_t> out;
  for (auto i : pool) {
    if (std::abs(n.dot(cloud[i] - p0)) < tol) out.push_back(i);
  }
  return out;
}

struct Rect2 {
  Eigen::Vector2d axis;  // unit direction of the first side
  Eigen::Vector2d lo, hi;  // extents along (axis, perp(axis))
};

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Rotating-calipers minimum-area rectangle over the convex hull (monotone chain).
Rect2 min_area_rect(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 1 ? k - 1 : k);

  auto box_for = [&](const Eigen::Vector2d& axis) {
    const Eigen::Vector2d perp(-axis.y(), axis.x());
    Rect2 r{axis, Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity()),
            Eigen::Vector2d::Constant(-std::numeric_limits<double>::infinity())};
    for (const auto& p : hull) {
      const Eigen::Vector2d c(p.dot(axis), p.dot(perp));
      r.lo = r.lo.cwiseMin(c);
      r.hi = r.hi.cwiseMax(c);
    }
    return r;
  };
  Rect2 best = box_for(Eigen::Vector2d::UnitX());
  double best_area = (best.hi - best.lo).prod();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Eigen::Vector2d e = hull[(i + 1) % hull.size()] - hull[i];
    if (e.norm() < 1e-12) continue;
    const Rect2 r = box_for(e.normalized());
    const double area = (r.hi - r.lo).prod();
    if (area < best_area - 1e-12) {
      best = r;
      best_area = area;
    }
  }
  return best;
}

}  // namespace

std::vector<RectPlane> extract_planes(std::span<const Vec3> cloud, const PlaneExtractionParams& params) {
  if (params.min_inliers < 3) throw SceneError("min_inliers: must be >= 3");
  if (!(params.inlier_tol > 0.0)) throw SceneError("inlier_tol: must be > 0");
  if (cloud.size() < params.min_inliers) throw SceneError("cloud: fewer points than min_inliers");

  Vec3 cloud_centroid = Vec3::Zero();
  for (const auto& p : cloud) cloud_centroid += p;
  cloud_centroid /= static_cast<double>(cloud.size());

  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> remaining(cloud.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<RectPlane> planes;

  while (planes.size() < params.max_planes && remaining.size() >= params.min_inliers) {
    std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
    std::size_t best_count = 0;
    Vec3 best_p0 = Vec3::Zero();
    Vec3 best_n = Vec3::UnitZ();
    for (int it = 0; it < params.iterations; ++it) {
      const Vec3& a = cloud[remaining[pick(rng)]];
      const Vec3& b = cloud[remaining[pick(rng)]];
      const Vec3& c = cloud[remaining[pick(rng)]];
      Vec3 n = (b - a).cross(c - a);
      const double len = n.norm();
      if (len < 1e-12) continue;
      n /= len;
      std::size_t count = 0;
      for (auto i : remaining) count += std::abs(n.dot(cloud[i] - a)) < params.inlier_tol ? 1 : 0;
      if (count > best_count) {
        best_count = count;
        best_p0 = a;
        best_n = n;
      }
    }
    if (best_count < params.min_inliers) break;

    auto inliers = inliers_of(cloud, remaining, best_p0, best_n, params.inlier_tol);
    PlaneFit fit = fit_plane(cloud, inliers);
    auto refined = inliers_of(cloud, remaining, fit.centroid, fit.normal, params.inlier_tol);
    if (refined.size() >= params.min_inliers) {
      inliers = std::move(refined);
      fit = fit_plane(cloud, inliers);
    }

    // Principal axes give the in-plane frame; the rectangle is the
    // minimum-area box of the projected inliers within that frame.
    std::vector<Eigen::Vector2d> flat;
    flat.reserve(inliers.size());
    for (auto i : inliers) {
      const Vec3 d = cloud[i] - fit.centroid;
      flat.emplace_back(d.dot(fit.basis.col(2)), d.dot(fit.basis.col(1)));
    }
    const Rect2 box = min_area_rect(flat);
    const Vec3 u = box.axis.x() * fit.basis.col(2) + box.axis.y() * fit.basis.col(1);
    const Vec3 v = -box.axis.y() * fit.basis.col(2) + box.axis.x() * fit.basis.col(1);
    double umin = box.lo.x(), umax = box.hi.x(), vmin = box.lo.y(), vmax = box.hi.y();

    std::vector<std::size_t> rest;
    rest.reserve(remaining.size() - inliers.size());
    std::set_difference(remaining.begin(), remaining.end(), inliers.begin(), inliers.end(),
                        std::back_inserter(rest));
    remaining = std::move(rest);

    const double hu = 0.5 * (umax - umin);
    const double hv = 0.5 * (vmax - vmin);
    if (hu <= 1e-9 || hv <= 1e-9) continue;  // collinear support, not a surface

    Vec3 normal = fit.normal;
    const double side = normal.dot(cloud_centroid - fit.centroid);
    if (std::abs(side) > 1e-9) {
      if (side < 0.0) normal = -normal;
    } else {
      // Single plane through the centroid: make the dominant component positive.
      Eigen::Index k = 0;
      normal.cwiseAbs().maxCoeff(&k);
      if (normal[k] < 0.0) normal = -normal;
    }
    const Vec3 center = fit.centroid + 0.5 * (umax + umin) * u + 0.5 * (vmax + vmin) * v;
    planes.push_back(RectPlane::make(center, normal, u, hu, hv));
  }

  if (planes.empty()) throw SceneError("cloud: no plane found with >= min_inliers points");
  return planes;
}

}  // namespace droneview
