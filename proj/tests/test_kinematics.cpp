#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "softgrasp/kinematics.hpp"
#include "softgrasp/presets.hpp"
#include "softgrasp/urdf.hpp"

using namespace softgrasp;

namespace {

JointAngles random_angles(const HandModel& m, std::mt19937_64& rng) {
  JointAngles a;
  for (const auto& j : m.joints()) {
    if (j.kind != JointKind::Revolute) continue;
    a.values[j.name] = std::uniform_real_distribution<double>(j.limits.lower, j.limits.upper)(rng);
  }
  return a;
}

RigidTransform random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  return RigidTransform(Vec3(u(rng), u(rng), u(rng)), Quat(u(rng), u(rng), u(rng), u(rng)).normalized());
}

HandModel one_joint_z() {
  return parse_urdf(R"(<robot name="r"><link name="a"/><link name="b"/>
    <joint name="j" type="revolute"><parent link="a"/><child link="b"/><axis xyz="0 0 1"/>
    <limit lower="-3" upper="3"/></joint></robot>)");
}

}  // namespace

TEST(ForwardKinematics, QuarterTurn) {
  const HandModel m = one_joint_z();
  const PoseMap p = forward_kinematics(m, {{{"j", std::numbers::pi / 2}}}, {});
  EXPECT_LE((p.at("b") * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 1e-15);
  EXPECT_EQ(p.poses.size(), 2u);
}

TEST(ForwardKinematics, ZeroAnglesComposeOrigins) {
  const HandModel m = presets::default_hand();
  JointAngles zero;
  for (const auto& n : m.revolute_joint_names()) zero.values[n] = 0.0;
  const PoseMap p = forward_kinematics(m, zero, {});
  for (const auto& j : m.joints()) {
    EXPECT_TRUE(approx_equal(p.at(j.child), p.at(j.parent) * j.origin, 1e-15)) << j.name;
  }
}

TEST(ForwardKinematics, RootEqualsBaseExactly) {
  std::mt19937_64 rng(5);
  const HandModel m = presets::default_hand();
  const RigidTransform base = random_pose(rng);
  const PoseMap p = forward_kinematics(m, random_angles(m, rng), base);
  EXPECT_EQ(p.at("palm").translation, base.translation);
  EXPECT_EQ(p.at("palm").rotation.coeffs(), base.rotation.coeffs());
}

TEST(ForwardKinematics, MatchesMatrixOracleOnRandomChains) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const oracle::Chain c = oracle::random_chain(rng, 8, trial % 2 == 0);
    const HandModel m = parse_urdf(c.urdf());
    const JointAngles q = random_angles(m, rng);
    const RigidTransform base = random_pose(rng);
    const PoseMap p = forward_kinematics(m, q, base);
    const auto ref = c.poses(q.values, base.matrix());
    for (int l = 0; l < c.links; ++l) {
      EXPECT_LE((p.at("l" + std::to_string(l)).matrix() - ref[l]).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(ForwardKinematics, MissingAngleThrows) {
  try {
    forward_kinematics(one_joint_z(), {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingAngle);
  }
}

TEST(ForwardKinematics, BaseEquivariance) {
  std::mt19937_64 rng(7);
  const HandModel m = presets::default_hand();
  for (int i = 0; i < 50; ++i) {
    const JointAngles q = random_angles(m, rng);
    const RigidTransform base = random_pose(rng), t = random_pose(rng);
    const PoseMap a = forward_kinematics(m, q, t * base);
    const PoseMap b = forward_kinematics(m, q, base);
    for (const auto& [link, pose] : a.poses) {
      EXPECT_TRUE(approx_equal(pose, t * b.at(link), 1e-9)) << link;
      EXPECT_NEAR(pose.rotation.norm(), 1.0, 1e-9);
    }
  }
}

TEST(ForwardKinematics, OffPathJointsDoNotMatter) {
  std::mt19937_64 rng(8);
  const HandModel m = presets::default_hand();
  const JointAngles q = random_angles(m, rng);
  JointAngles moved = q;
  for (auto& [name, v] : moved.values) {
    if (name.rfind("index", 0) != 0) v += 0.3;
  }
  const PoseMap a = forward_kinematics(m, q, {});
  const PoseMap b = forward_kinematics(m, moved, {});
  for (const char* link : {"index_proximal", "index_middle", "index_distal"}) {
    EXPECT_TRUE(approx_equal(a.at(link), b.at(link), 0.0)) << link;
  }
  EXPECT_FALSE(approx_equal(a.at("thumb_distal"), b.at("thumb_distal"), 1e-6));
}

TEST(PatchWorldPoints, IdentityTranslationAndRotation) {
  const HandModel m = presets::default_hand_with_patches();
  const ContactPatch& p = *m.find_patch("index_tip");
  PoseMap poses;
  poses.poses[p.owner] = RigidTransform::identity();
  EXPECT_EQ(patch_world_points(m, poses, p), p.points);
  poses.poses[p.owner] = RigidTransform::from_translation(Vec3(0.1, -0.2, 0.3));
  const auto shifted = patch_world_points(m, poses, p);
  for (std::size_t i = 0; i < p.points.size(); ++i) EXPECT_EQ(shifted[i], p.points[i] + Vec3(0.1, -0.2, 0.3));
  const RigidTransform t = RigidTransform::from_xyz_rpy(Vec3(0.01, 0.02, 0.03), Vec3(0.3, 1.0, -2.0));
  poses.poses[p.owner] = t;
  const auto rotated = patch_world_points(m, poses, p);
  const Eigen::Matrix4d mt = oracle::translation(0.01, 0.02, 0.03) * oracle::rpy(0.3, 1.0, -2.0);
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    const Eigen::Vector4d ref = mt * p.points[i].homogeneous();
    EXPECT_LE((rotated[i] - ref.head<3>()).norm(), 1e-15);
  }
  ContactPatch ghost = p;
  ghost.owner = "ghost";
  EXPECT_THROW(patch_world_points(m, poses, ghost), Error);
}

TEST(PointJacobian, UnitLeverAndZeroLever) {
  const HandModel m = one_joint_z();
  const PointJacobian j = point_jacobian(m, {{{"j", 0.0}}}, {}, "b", Vec3(1, 0, 0));
  ASSERT_EQ(j.columns.cols(), 1);
  EXPECT_LE((j.columns.col(0) - Vec3(0, 1, 0)).norm(), 1e-15);
  EXPECT_EQ(point_jacobian(m, {{{"j", 0.7}}}, {}, "b", Vec3::Zero()).columns.col(0), Vec3::Zero());
  EXPECT_THROW(point_jacobian(m, {{{"j", 0.0}}}, {}, "nope", Vec3::Zero()), Error);
}

TEST(PointJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  const HandModel m = presets::default_hand_with_patches();
  for (int trial = 0; trial < 100; ++trial) {
    const JointAngles q = random_angles(m, rng);
    const RigidTransform base = random_pose(rng);
    for (const auto& [id, patch] : m.patches()) {
      const Vec3& local = patch.points.back();
      const PointJacobian jac = point_jacobian(m, q, base, patch.owner, local);
      for (Eigen::Index c = 0; c < jac.columns.cols(); ++c) {
        JointAngles qp = q, qm = q;
        qp.values[jac.joints[c]] += 1e-6;
        qm.values[jac.joints[c]] -= 1e-6;
        const Vec3 fd = (forward_kinematics(m, qp, base).at(patch.owner) * local -
                         forward_kinematics(m, qm, base).at(patch.owner) * local) /
                        2e-6;
        const double scale = std::max(1e-8, fd.cwiseAbs().maxCoeff());
        EXPECT_LE((jac.columns.col(c) - fd).cwiseAbs().maxCoeff() / scale, 1e-5) << id << " " << jac.joints[c];
      }
    }
  }
}

TEST(PointJacobian, OffPathJointsOmitted) {
  const HandModel m = presets::default_hand();
  JointAngles q;
  for (const auto& n : m.revolute_joint_names()) q.values[n] = 0.2;
  const PointJacobian j = point_jacobian(m, q, {}, "index_distal", Vec3(0, 0.01, 0));
  EXPECT_EQ(j.joints, (std::vector<std::string>{"index_j1", "index_j2", "index_j3"}));
}
