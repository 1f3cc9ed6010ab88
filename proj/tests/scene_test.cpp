#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/SVD>

#include "droneview/scene.hpp"
#include "droneview/scene_io.hpp"
#include "fixtures.hpp"

using namespace droneview;

namespace {

constexpr double kPi = std::numbers::pi;

KinematicChain planar_chain(std::vector<double> links, double limit = 3.0) {
  KinematicChain c;
  c.link_lengths = links;
  c.axes.assign(links.size(), JointAxis::Y);
  c.joint_limits.assign(links.size(), {-limit, limit});
  return c;
}

std::vector<double> random_angles(const KinematicChain& c, std::mt19937_64& rng, double shrink = 1.0) {
  std::vector<double> q;
  for (const auto& l : c.joint_limits) {
    const double mid = 0.5 * (l.min + l.max);
    const double half = 0.5 * (l.max - l.min) * shrink;
    q.push_back(std::uniform_real_distribution<double>(mid - half, mid + half)(rng));
  }
  return q;
}

// Repeated per-tick calls, the way the session drives the arm.
IkResult ik_until_settled(const KinematicChain& c, const Vec3& target, std::vector<double> q, int calls) {
  IkResult r;
  for (int i = 0; i < calls; ++i) {
    r = solve_ik(c, target, q);
    q = r.angles;
    if (r.converged) break;
  }
  return r;
}

}  // namespace

TEST(ForwardKinematics, ZeroConfigurationStacksLinksAlongZ) {
  const auto arm = KinematicChain::default_arm(Vec3(1, 2, 3));
  const std::vector<double> q(arm.dof(), 0.0);
  const auto joints = forward_kinematics(arm, q);
  ASSERT_EQ(joints.size(), arm.dof() + 1);
  EXPECT_TRUE(joints.front().isApprox(Vec3(1, 2, 3)));
  EXPECT_NEAR((joints.back() - Vec3(1, 2, 3 + arm.reach())).norm(), 0.0, 1e-12);
}

TEST(ForwardKinematics, QuarterTurnAboutY) {
  const auto c = planar_chain({1.0});
  const std::vector<double> q{kPi / 2};
  const auto joints = forward_kinematics(c, q);
  EXPECT_NEAR((joints.back() - Vec3(1, 0, 0)).norm(), 0.0, 1e-12);
}

TEST(ForwardKinematics, BaseYawRotatesChain) {
  auto c = planar_chain({1.0});
  c.base_yaw = kPi / 2;
  const std::vector<double> q{kPi / 2};
  EXPECT_NEAR((forward_kinematics(c, q).back() - Vec3(0, 1, 0)).norm(), 0.0, 1e-12);
}

TEST(ForwardKinematics, RejectsLimitViolationAndWrongCount) {
  const auto c = planar_chain({1.0, 1.0}, 1.0);
  EXPECT_THROW(forward_kinematics(c, std::vector<double>{1.5, 0.0}), SceneError);
  EXPECT_THROW(forward_kinematics(c, std::vector<double>{0.0}), SceneError);
}

TEST(ForwardKinematics, LipschitzInEachAngle) {
  const auto arm = KinematicChain::default_arm(Vec3::Zero());
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto q = random_angles(arm, rng, 0.9);
    const Vec3 ee = forward_kinematics(arm, q).back();
    for (std::size_t i = 0; i < q.size(); ++i) {
      auto p = q;
      p[i] += 1e-6;
      EXPECT_LT((forward_kinematics(arm, p).back() - ee).norm(), 1e-5 * arm.reach());
    }
  }
}

TEST(ForwardKinematics, PoseOrientationMatchesLastLink) {
  const auto c = planar_chain({0.5, 0.5});
  const std::vector<double> q{0.3, 0.4};
  const auto pose = forward_pose(c, q);
  const Vec3 last = (pose.joint_positions[2] - pose.joint_positions[1]).normalized();
  EXPECT_NEAR((pose.ee_orientation * Vec3::UnitZ() - last).norm(), 0.0, 1e-12);
}

TEST(InverseKinematics, FixedPointReturnsSeed) {
  const auto arm = KinematicChain::default_arm(Vec3::Zero());
  const std::vector<double> seed{0.2, 0.5, 0.9, -0.3, 0.6, 0.1};
  const auto r = solve_ik(arm, forward_kinematics(arm, seed).back(), seed);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.angles, seed);
}

namespace {

// Smallest singular value of a finite-difference position Jacobian.
double min_singular_value(const KinematicChain& c, const std::vector<double>& q) {
  const Vec3 ee = forward_kinematics(c, q).back();
  Eigen::MatrixXd jac(3, static_cast<Eigen::Index>(q.size()));
  for (std::size_t i = 0; i < q.size(); ++i) {
    auto p = q;
    p[i] += 1e-7;
    jac.col(static_cast<Eigen::Index>(i)) = (forward_kinematics(c, p).back() - ee) / 1e-7;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  return svd.singularValues()(2);
}

}  // namespace

TEST(InverseKinematics, MillimetreOffsetConvergesQuickly) {
  const auto arm = KinematicChain::default_arm(Vec3::Zero());
  std::mt19937_64 rng(11);
  IkOptions five;
  five.max_iterations = 5;
  int checked = 0;
  while (checked < 50) {
    const auto seed = random_angles(arm, rng, 0.7);
    if (min_singular_value(arm, seed) < 0.05) continue;  // well-conditioned seeds only
    ++checked;
    const Vec3 ee = forward_kinematics(arm, seed).back();
    const Vec3 dir = Vec3::Random().normalized();
    const auto r = solve_ik(arm, ee + 1e-3 * dir, seed, five);
    EXPECT_LE(r.iterations, 5);
    EXPECT_LT(r.residual, 1e-4);
  }
}

TEST(InverseKinematics, NearSingularSeedStillReducesResidual) {
  const auto arm = KinematicChain::default_arm(Vec3::Zero());
  const std::vector<double> seed{0.899, -0.370, 0.082, 0.882, -0.027, 0.901};
  ASSERT_LT(min_singular_value(arm, seed), 0.02);
  const Vec3 target = forward_kinematics(arm, seed).back() + Vec3(1e-3, -2e-3, 1e-3).normalized() * 1e-3;
  const auto r = solve_ik(arm, target, seed);
  EXPECT_LT(r.residual, 1e-4);
}

TEST(InverseKinematics, UnreachableTargetReportsDistanceMinusReach) {
  const auto c = planar_chain({0.4, 0.3, 0.2});
  const Vec3 target(2.0, 0.0, 0.5);
  const auto r = ik_until_settled(c, target, {0.3, 0.4, 0.2}, 400);
  EXPECT_FALSE(r.converged);
  EXPECT_NEAR(r.residual, target.norm() - c.reach(), 1e-3);
}

TEST(InverseKinematics, RespectsLimitsAndStepClamp) {
  const auto arm = KinematicChain::default_arm(Vec3::Zero());
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto seed = random_angles(arm, rng);
    const Vec3 target = Vec3::Random() * 1.2;
    const auto r = solve_ik(arm, target, seed);
    for (std::size_t i = 0; i < seed.size(); ++i) {
      EXPECT_GE(r.angles[i], arm.joint_limits[i].min);
      EXPECT_LE(r.angles[i], arm.joint_limits[i].max);
      EXPECT_LE(std::abs(r.angles[i] - seed[i]), 0.05 + 1e-12);
    }
    EXPECT_NEAR(r.residual, (forward_kinematics(arm, r.angles).back() - target).norm(), 1e-12);
  }
}

TEST(InverseKinematics, RandomReachableTargetsResidualBelowMillimetre) {
  const auto arm = KinematicChain::default_arm(Vec3::Zero());
  std::mt19937_64 rng(21);
  const std::vector<double> home{0.0, 0.6, 1.0, 0.0, 0.6, 0.0};
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto goal = random_angles(arm, rng, 0.6);
    const Vec3 target = forward_kinematics(arm, goal).back();
    const auto r = ik_until_settled(arm, target, home, 400);
    solved += r.residual < 1e-3 ? 1 : 0;
  }
  EXPECT_EQ(solved, 100);
}

TEST(RegionOfInterest, SinglePlane) {
  const std::vector<RectPlane> planes{fixtures::floor_plane()};
  const auto roi = region_of_interest(Vec3(0.3, 0.2, 0.7), planes);
  EXPECT_EQ(roi.plane_index, 0u);
  EXPECT_NEAR(roi.distance, 0.7, 1e-12);
  EXPECT_TRUE(roi.closest_point.isApprox(Vec3(0.3, 0.2, 0.0)));
}

TEST(RegionOfInterest, TieGoesToLowerIndex) {
  const std::vector<RectPlane> planes{
      RectPlane::make(Vec3(0, 0, 0), Vec3::UnitZ(), Vec3::UnitX(), 2, 2),
      RectPlane::make(Vec3(0, 0, 1), -Vec3::UnitZ(), Vec3::UnitX(), 2, 2)};
  const auto roi = region_of_interest(Vec3(0, 0, 0.5), planes);
  EXPECT_EQ(roi.plane_index, 0u);
  EXPECT_NEAR(roi.distance, 0.5, 1e-12);
}

TEST(RegionOfInterest, PicksNearestOfThree) {
  const std::vector<RectPlane> planes{
      RectPlane::make(Vec3(0, 0, -0.5), Vec3::UnitZ(), Vec3::UnitX(), 2, 2),
      RectPlane::make(Vec3(0.2, 0, 0), -Vec3::UnitX(), Vec3::UnitY(), 2, 2),
      RectPlane::make(Vec3(0, 0.9, 0), -Vec3::UnitY(), Vec3::UnitX(), 2, 2)};
  const auto roi = region_of_interest(Vec3::Zero(), planes);
  EXPECT_EQ(roi.plane_index, 1u);
  EXPECT_NEAR(roi.distance, 0.2, 1e-12);
}

TEST(RegionOfInterest, ArgminProperty) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RectPlane> planes;
    for (int k = 0; k < 4; ++k) {
      Vec3 n(u(rng), u(rng), u(rng));
      if (n.norm() < 0.1) n = Vec3::UnitZ();
      planes.push_back(RectPlane::make(Vec3(u(rng), u(rng), u(rng)), n, n.unitOrthogonal(),
                                       0.1 + std::abs(u(rng)), 0.1 + std::abs(u(rng))));
    }
    const Vec3 ee(u(rng), u(rng), u(rng));
    const auto roi = region_of_interest(ee, planes);
    EXPECT_GE(roi.distance, 0.0);
    for (const auto& p : planes) EXPECT_LE(roi.distance, std::abs(point_plane_distance(ee, p).distance) + 1e-15);
  }
}

namespace {

std::vector<Vec3> sample_rect(const Vec3& origin, const Vec3& du, const Vec3& dv, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.push_back(origin + u(rng) * du + u(rng) * dv);
  return pts;
}

}  // namespace

TEST(ExtractPlanes, NoiselessFloorSquare) {
  std::mt19937_64 rng(1);
  const auto cloud = sample_rect(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 10000, rng);
  const auto planes = extract_planes(cloud, {});
  ASSERT_EQ(planes.size(), 1u);
  EXPECT_NEAR(std::abs(planes[0].normal.z()), 1.0, 1e-9);
  EXPECT_NEAR(planes[0].half_extent_u, 0.5, 2e-3);
  EXPECT_NEAR(planes[0].half_extent_v, 0.5, 2e-3);
  EXPECT_NEAR((planes[0].center - Vec3(0.5, 0.5, 0.0)).norm(), 0.0, 2e-3);
}

TEST(ExtractPlanes, TwoOrthogonalPlanes) {
  std::mt19937_64 rng(2);
  auto cloud = sample_rect(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 5000, rng);
  const auto wall = sample_rect(Vec3(1.2, 0, 0.1), Vec3::UnitY(), Vec3::UnitZ(), 5000, rng);
  cloud.insert(cloud.end(), wall.begin(), wall.end());
  const auto planes = extract_planes(cloud, {});
  ASSERT_EQ(planes.size(), 2u);
  EXPECT_NEAR(planes[0].normal.dot(planes[1].normal), 0.0, 1e-9);
  // Both normals face the cloud interior.
  for (const auto& p : planes) {
    if (std::abs(p.normal.z()) > 0.9) EXPECT_GT(p.normal.z(), 0.0);
    else EXPECT_LT(p.normal.x(), 0.0);
  }
}

TEST(ExtractPlanes, ThreeSeparatedPlanesRecoverExactCount) {
  std::mt19937_64 rng(4);
  auto cloud = sample_rect(Vec3::Zero(), 2 * Vec3::UnitX(), 2 * Vec3::UnitY(), 6000, rng);
  const auto a = sample_rect(Vec3(2.3, 0, 0.2), 2 * Vec3::UnitY(), Vec3::UnitZ(), 3000, rng);
  const auto b = sample_rect(Vec3(0, 2.3, 0.2), 2 * Vec3::UnitX(), Vec3::UnitZ(), 3000, rng);
  cloud.insert(cloud.end(), a.begin(), a.end());
  cloud.insert(cloud.end(), b.begin(), b.end());
  EXPECT_EQ(extract_planes(cloud, {}).size(), 3u);
}

TEST(ExtractPlanes, NoisyPlaneMatchesLeastSquaresFit) {
  std::mt19937_64 rng(6);
  const Vec3 n_true = Vec3(0.1, -0.2, 1.0).normalized();
  const Vec3 c_true(0.5, 0.5, 0.3);
  const Vec3 du = n_true.unitOrthogonal();
  const Vec3 dv = n_true.cross(du);
  std::normal_distribution<double> noise(0.0, 0.005);
  auto cloud = sample_rect(c_true - 0.5 * du - 0.5 * dv, du, dv, 10000, rng);
  for (auto& p : cloud) p += noise(rng) * n_true;

  // Independent oracle: z = a x + b y + c by normal equations on every point.
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Vec3 atb = Vec3::Zero();
  for (const auto& p : cloud) {
    const Vec3 row(p.x(), p.y(), 1.0);
    ata += row * row.transpose();
    atb += row * p.z();
  }
  const Vec3 abc = ata.ldlt().solve(atb);
  const Vec3 n_ls = Vec3(-abc.x(), -abc.y(), 1.0).normalized();

  const auto planes = extract_planes(cloud, {});
  ASSERT_EQ(planes.size(), 1u);
  const Vec3 n = planes[0].normal * (planes[0].normal.dot(n_true) < 0 ? -1.0 : 1.0);
  const double angle_truth = std::acos(std::min(1.0, n.dot(n_true)));
  const double angle_ls = std::acos(std::min(1.0, n.dot(n_ls)));
  EXPECT_LT(angle_truth, 2.0 * kPi / 180.0);
  EXPECT_LT(angle_ls, 0.5 * kPi / 180.0);
  EXPECT_LT(std::abs(n.dot(planes[0].center) - n_true.dot(c_true)), 0.01);
}

TEST(ExtractPlanes, DeterministicUnderSeed) {
  std::mt19937_64 rng(9);
  auto cloud = sample_rect(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 3000, rng);
  const auto wall = sample_rect(Vec3(1.2, 0, 0.1), Vec3::UnitY(), Vec3::UnitZ(), 3000, rng);
  cloud.insert(cloud.end(), wall.begin(), wall.end());
  PlaneExtractionParams p;
  p.seed = 77;
  const auto a = extract_planes(cloud, p);
  const auto b = extract_planes(cloud, p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].center, b[i].center);
    EXPECT_EQ(a[i].normal, b[i].normal);
    EXPECT_EQ(a[i].half_extent_u, b[i].half_extent_u);
  }
}

TEST(ExtractPlanes, ErrorsWithoutSupport) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3> blob;
  for (int i = 0; i < 1000; ++i) blob.emplace_back(u(rng), u(rng), u(rng));
  EXPECT_THROW(extract_planes(blob, {}), SceneError);
  EXPECT_THROW(extract_planes(std::vector<Vec3>(10, Vec3::Zero()), {}), SceneError);
}

namespace {

nlohmann::json minimal_scene_json() {
  return nlohmann::json::parse(R"({
    "planes": [{"center": [0, 0, 0], "normal": [0, 0, 1], "axis_u": [1, 0, 0], "extents": [1, 1]}],
    "chain": {"base": [0, 0, 0], "links": [0.3, 0.3, 0.2], "limits": [[-3, 3], [-2, 2], [-2, 2]]},
    "workspace": {"min": [-1, -1, 0], "max": [1, 1, 1.5]}
  })");
}

bool has_issue(const SceneError& e, const std::string& prefix) {
  for (const auto& i : e.issues()) {
    if (i.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

std::string issues_of(const nlohmann::json& doc) {
  try {
    parse_scene(doc);
  } catch (const SceneError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(SceneFile, MinimalFileLoads) {
  const auto s = parse_scene(minimal_scene_json());
  EXPECT_EQ(s.planes.size(), 1u);
  EXPECT_EQ(s.chain.dof(), 3u);
  EXPECT_EQ(s.initial_angles, std::vector<double>(3, 0.0));
  EXPECT_EQ(s.constants.weights, ObjectiveParams{}.weights);
  const auto snap = s.initial_snapshot();
  EXPECT_NO_THROW(snap.validate());
  EXPECT_NEAR(snap.ee.position.z(), 0.8, 1e-12);
}

TEST(SceneFile, ZeroExtentRejectedWithFieldName) {
  auto doc = minimal_scene_json();
  doc["planes"][0]["extents"] = {1.0, 0.0};
  try {
    parse_scene(doc);
    FAIL() << "expected SceneError";
  } catch (const SceneError& e) {
    EXPECT_TRUE(has_issue(e, "planes[0].extents")) << e.what();
  }
}

TEST(SceneFile, CollectsEveryFieldIssue) {
  auto doc = minimal_scene_json();
  doc["chain"]["links"] = {0.3, -0.1, 0.2};
  doc["workspace"]["max"] = {1, 1};
  doc["constants"] = {{"sigma", 0.0}, {"bogus", 1}};
  try {
    parse_scene(doc);
    FAIL() << "expected SceneError";
  } catch (const SceneError& e) {
    EXPECT_TRUE(has_issue(e, "chain.links[1]")) << e.what();
    EXPECT_TRUE(has_issue(e, "workspace.max")) << e.what();
    EXPECT_TRUE(has_issue(e, "constants.sigma")) << e.what();
    EXPECT_TRUE(has_issue(e, "constants.bogus")) << e.what();
  }
}

TEST(SceneFile, MissingKeysAndBadValues) {
  auto doc = minimal_scene_json();
  doc.erase("planes");
  EXPECT_NE(issues_of(doc).find("planes: missing"), std::string::npos);
  doc = minimal_scene_json();
  doc["chain"]["limits"][1] = {2, -2};
  EXPECT_NE(issues_of(doc).find("chain.limits[1]"), std::string::npos);
  doc = minimal_scene_json();
  doc["chain"]["axes"] = {"x", "q", "z"};
  EXPECT_NE(issues_of(doc).find("chain.axes[1]"), std::string::npos);
  doc = minimal_scene_json();
  doc["workspace"]["max"] = {1, 1, 0.5};  // arm sticks out of the top
  EXPECT_NE(issues_of(doc).find("chain.initial"), std::string::npos);
  doc = minimal_scene_json();
  doc["drone"] = {{"home", {5, 0, 0.5, 0}}};
  EXPECT_NE(issues_of(doc).find("drone.home"), std::string::npos);
}

TEST(SceneFile, ConstantsOverrideDefaults) {
  auto doc = minimal_scene_json();
  doc["constants"] = {{"d_min", 0.5}, {"P", 2}, {"uncertainty", {0.1, 0.1, 0.05}}};
  const auto s = parse_scene(doc);
  EXPECT_EQ(s.constants.d_min, 0.5);
  EXPECT_EQ(s.constants.order, 2);
  EXPECT_EQ(s.constants.uncertainty.dp, Vec3(0.1, 0.1, 0.05));
  EXPECT_EQ(s.constants.sigma, 0.1);
}

TEST(SceneFile, SaveLoadRoundTripsIdentically) {
  const auto dir = std::filesystem::temp_directory_path() / "droneview_scene_test";
  std::filesystem::create_directories(dir);
  auto scene = fixtures::wall_scene();
  scene.planes.push_back(RectPlane::make(Vec3(0.1, 0.2, 0.3), Vec3(1, 2, 3), Vec3(0, 1, 0), 0.3, 0.7));
  scene.constants.d_min = 0.35;
  save_scene(scene, dir / "a.json");
  const auto loaded = load_scene(dir / "a.json");
  save_scene(loaded, dir / "b.json");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_EQ(scene_digest(scene), scene_digest(loaded));
  std::filesystem::remove_all(dir);
}

TEST(SceneFile, UnreadableOrMalformedFile) {
  EXPECT_THROW(load_scene("/nonexistent/scene.json"), SceneError);
  const auto path = std::filesystem::temp_directory_path() / "droneview_bad.json";
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_scene(path), SceneError);
  std::filesystem::remove(path);
}

TEST(SceneSnapshot, ValidateChecksInvariants) {
  auto s = fixtures::open_scene(Vec3(0, 0, 1));
  EXPECT_NO_THROW(s.validate());
  s.ee.position += Vec3(0.1, 0, 0);
  EXPECT_THROW(s.validate(), SceneError);
  s = fixtures::open_scene(Vec3(0, 0, 1));
  s.planes.clear();
  EXPECT_THROW(s.validate(), SceneError);
  s = fixtures::open_scene(Vec3(0, 0, 1));
  s.workspace.max = Vec3(0.5, 0.5, 0.5);
  EXPECT_THROW(s.validate(), SceneError);
}

TEST(SceneSnapshot, WallFixtureIsValid) {
  const auto f = fixtures::wall_scene();
  const auto snap = f.initial_snapshot();
  EXPECT_NO_THROW(snap.validate());
  EXPECT_NO_THROW(parse_scene(scene_to_json(f)));
}
