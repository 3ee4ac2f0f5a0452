/******************************************************************************
 * Copyright 2026 The planarc Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#include <gtest/gtest.h>

#include "planarc/geometry.hpp"
#include "planarc/random.hpp"
#include "test_util.hpp"

namespace planarc {
namespace {

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const Point2 x = project({0, 0, 5}, {100, 50, 50}, Pose::identity());
  EXPECT_NEAR(x.x(), 50, 1e-12);
  EXPECT_NEAR(x.y(), 50, 1e-12);
}

TEST(Project, DirectPinhole) {
  const Point2 x = project({1, 2, 5}, {100, 0, 0}, Pose::identity());
  EXPECT_NEAR(x.x(), 20, 1e-12);
  EXPECT_NEAR(x.y(), 40, 1e-12);
}

TEST(Project, TranslatedCamera) {
  Pose p;
  p.translation = {0, 0, 1};
  const Point2 x = project({1, 0, 4}, {100, 0, 0}, p);
  EXPECT_NEAR(x.x(), 20, 1e-12);
  EXPECT_NEAR(x.y(), 0, 1e-12);
}

TEST(Project, BehindCameraThrows) {
  try {
    project({0, 0, -1}, {100, 0, 0}, Pose::identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveDepth);
  }
  EXPECT_THROW(project({1, 1, 0}, {100, 0, 0}, Pose::identity()), Error);
}

TEST(Project, UnprojectRoundTrip) {
  Rng rng(3);
  const Intrinsics k{480, 320, 240};
  for (int i = 0; i < 200; ++i) {
    const Pose pose = testing_util::random_pose(rng);
    const Point3 xc(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 10));
    const Point3 x = pose.inverse().apply(xc);
    const Point2 px = project(x, k, pose);
    const Point3 back = unproject(px, pose.apply(x).z(), k, pose);
    EXPECT_LT((back - x).norm(), 1e-9);
  }
}

TEST(ComposePoses, IdentityAndInverse) {
  Rng rng(5);
  const Pose p = testing_util::random_pose(rng);
  const Pose a = compose_poses(Pose::identity(), p);
  EXPECT_LT((a.rotation - p.rotation).norm(), 1e-15);
  EXPECT_LT((a.translation - p.translation).norm(), 1e-15);
  const Pose id = compose_poses(p, p.inverse());
  EXPECT_LT((id.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(id.translation.norm(), 1e-12);
}

TEST(ComposePoses, MatchesSequentialApplication) {
  Rng rng(11);
  const Pose ab = testing_util::random_pose(rng);
  const Pose bc = testing_util::random_pose(rng);
  const Pose ac = compose_poses(ab, bc);
  for (int i = 0; i < 100; ++i) {
    const Point3 x(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    EXPECT_LT((ac.apply(x) - ab.apply(bc.apply(x))).norm(), 1e-10);
  }
}

TEST(ComposePoses, Associative) {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const Pose a = testing_util::random_pose(rng), b = testing_util::random_pose(rng),
               c = testing_util::random_pose(rng);
    const Pose l = compose_poses(compose_poses(a, b), c);
    const Pose r = compose_poses(a, compose_poses(b, c));
    EXPECT_LT((l.rotation - r.rotation).norm(), 1e-10);
    EXPECT_LT((l.translation - r.translation).norm(), 1e-10);
  }
}

TEST(So3, ExpLogRoundTrip) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Point3 w(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Mat3 r = so3_exp(w);
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    EXPECT_LT((so3_log(r) - w).norm(), 1e-9);
  }
}

TEST(FacePlane, AxisAlignedSquare) {
  const std::vector<Point3> pts{{0, 0, 2}, {1, 0, 2}, {1, 1, 2}, {0, 1, 2}};
  const Plane p = face_plane(pts);
  EXPECT_LT((p.normal - Point3(0, 0, -1)).norm(), 1e-12);
  EXPECT_NEAR(p.offset, -2.0, 1e-12);
}

TEST(FacePlane, ExactCoplanarPointsHaveZeroResidual) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Point3 n = Point3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
    const Point3 e1 = n.unitOrthogonal(), e2 = n.cross(e1);
    const Point3 o(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(3, 6));
    std::vector<Point3> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(o + rng.uniform(-1, 1) * e1 + rng.uniform(-1, 1) * e2);
    const Plane p = face_plane(pts);
    for (const auto& x : pts) EXPECT_LT(std::abs(p.signed_distance(x)), 1e-12);
    EXPECT_NEAR(p.normal.norm(), 1.0, 1e-12);
  }
}

// Independent oracle: SVD of the centered point matrix.
Point3 svd_normal(const std::vector<Point3>& pts) {
  Point3 c = Point3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::MatrixXd m(3, pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[i] - c;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU);
  return svd.matrixU().col(2);
}

TEST(FacePlane, NoisyPointsAgreeWithSvdOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Point3 n = Point3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
    const Point3 e1 = n.unitOrthogonal(), e2 = n.cross(e1);
    const Point3 o(0, 0, 5);
    std::vector<Point3> pts;
    for (int i = 0; i < 12; ++i) {
      Point3 x = o + rng.uniform(-1, 1) * e1 + rng.uniform(-1, 1) * e2;
      x += 1e-3 * Point3(rng.normal(), rng.normal(), rng.normal());
      pts.push_back(x);
    }
    const Plane p = face_plane(pts);
    EXPECT_LT(axis_angle_deg(p.normal, svd_normal(pts)), 1e-6);
    EXPECT_LT(axis_angle_deg(p.normal, n), 0.5);
    // oriented toward the origin camera
    EXPECT_GT(p.normal.dot(-o), 0.0);
  }
}

TEST(FacePlane, ResidualIsLocallyOptimal) {
  Rng rng(4);
  std::vector<Point3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), 3 + 0.05 * rng.normal());
  const Plane best = face_plane(pts);
  auto residual = [&](const Point3& n) {
    Point3 c = Point3::Zero();
    for (const auto& p : pts) c += p;
    c /= 8.0;
    double s = 0;
    for (const auto& p : pts) s += std::pow(n.dot(p - c), 2);
    return s;
  };
  const double r0 = residual(best.normal);
  for (int i = 0; i < 1000; ++i) {
    const Point3 n = Point3(rng.normal(), rng.normal(), rng.normal()).normalized();
    EXPECT_LE(r0, residual(n) + 1e-15);
  }
}

TEST(FacePlane, CollinearPointsAreDegenerate) {
  const std::vector<Point3> pts{{0, 0, 1}, {1, 1, 1}, {2, 2, 1}, {3, 3, 1}};
  try {
    face_plane(pts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateFace);
  }
}

}  // namespace
}  // namespace planarc
