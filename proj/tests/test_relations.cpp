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

#include <numbers>

#include "planarc/relations.hpp"
#include "planarc/random.hpp"
#include "planarc/synth.hpp"
#include "test_util.hpp"

namespace planarc {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Point3 tilt(const Point3& n, double angle, Rng& rng) {
  Point3 axis = n.cross(Point3(rng.normal(), rng.normal(), rng.normal())).normalized();
  return so3_exp(axis * angle) * n;
}

FacePlane face(int id, const Point3& n, const Point3& c = Point3::Zero(), double area = 1.0) {
  return {id, n.normalized(), c, area};
}

std::vector<FacePlane> cube_faces(const Pose& motion = Pose::identity()) {
  const PolyModel m = make_box_model();
  std::vector<FacePlane> out;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    std::vector<Point3> pts;
    for (int v : m.faces[f]) pts.push_back(motion.apply(m.vertices[static_cast<std::size_t>(v)]));
    Point3 c = Point3::Zero();
    for (const auto& p : pts) c += p;
    out.push_back({static_cast<int>(f), face_plane(pts).normal, c / 4.0, polygon_area(pts)});
  }
  return out;
}

// spherical k-means with antipodal identification, seeded at the given centers
std::vector<Point3> kmeans_oracle(const std::vector<Point3>& xs, std::vector<Point3> centers) {
  for (int it = 0; it < 50; ++it) {
    std::vector<Point3> sums(centers.size(), Point3::Zero());
    for (const auto& x : xs) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < centers.size(); ++c)
        if (std::abs(x.dot(centers[c])) > std::abs(x.dot(centers[best]))) best = c;
      sums[best] += x.dot(centers[best]) < 0 ? -x : x;
    }
    for (std::size_t c = 0; c < centers.size(); ++c) centers[c] = sums[c].normalized();
  }
  return centers;
}

TEST(MeanShift, IdenticalNormalsOneCluster) {
  const std::vector<Point3> ns(5, Point3(0, 0.6, 0.8));
  const auto r = mean_shift_normals(ns, 1e-3);
  ASSERT_EQ(r.modes.size(), 1u);
  EXPECT_LT((r.modes[0] - ns[0]).norm(), 1e-12);
}

TEST(MeanShift, AntipodalNormalsShareCluster) {
  const std::vector<Point3> ns{Point3(0, 0, 1), Point3(0, 0, -1)};
  const auto r = mean_shift_normals(ns, 1e-3);
  EXPECT_EQ(r.modes.size(), 1u);
  EXPECT_EQ(r.assignment[0], r.assignment[1]);
}

TEST(MeanShift, ThreeAxisGroupsMatchKMeans) {
  Rng rng(2);
  std::vector<Point3> ns;
  const std::vector<Point3> axes{Point3::UnitX(), Point3::UnitY(), Point3::UnitZ()};
  for (const auto& a : axes)
    for (int i = 0; i < 6; ++i) ns.push_back((i % 2 ? -1.0 : 1.0) * tilt(a, 0.01, rng));
  const auto r = mean_shift_normals(ns, 0.05);
  ASSERT_EQ(r.modes.size(), 3u);
  const auto km = kmeans_oracle(ns, axes);
  for (const auto& m : r.modes) {
    double best = 180.0, best_km = 180.0;
    for (const auto& a : axes) best = std::min(best, axis_angle_deg(m, a));
    for (const auto& k : km) best_km = std::min(best_km, axis_angle_deg(m, k));
    EXPECT_LT(best, 0.5);
    EXPECT_LT(best_km, 0.05);
  }
  for (std::size_t i = 0; i < ns.size(); ++i) EXPECT_EQ(r.assignment[i], r.assignment[i - i % 6]);
}

TEST(MeanShift, ModesAreFixedPoints) {
  Rng rng(5);
  std::vector<Point3> ns;
  for (int i = 0; i < 40; ++i) ns.push_back(tilt(i % 2 ? Point3::UnitX() : Point3(0, 0.6, 0.8), rng.uniform(0, 0.02), rng));
  const double bw = 0.05;
  const auto r = mean_shift_normals(ns, bw);
  for (const auto& m : r.modes) {
    Point3 s = Point3::Zero();
    for (const auto& n : ns)
      if (std::min((m - n).norm(), (m + n).norm()) <= bw) s += n.dot(m) < 0 ? -n : n;
    EXPECT_LT(std::min((s.normalized() - m).norm(), (s.normalized() + m).norm()), bw / 100.0);
  }
}

TEST(DetectParallel, CubeGivesThreePairs) {
  const auto groups = detect_parallel(cube_faces());
  ASSERT_EQ(groups.size(), 3u);
  for (const auto& g : groups) EXPECT_EQ(g.faces.size(), 2u);
}

TEST(DetectParallel, TenDegreeThreshold) {
  const Point3 z = Point3::UnitZ();
  const Point3 r9 = so3_exp(Point3(9 * kDeg, 0, 0)) * z, r11 = so3_exp(Point3(11 * kDeg, 0, 0)) * z;
  EXPECT_EQ(detect_parallel(std::vector<FacePlane>{face(0, z), face(1, r9)}).size(), 1u);
  EXPECT_EQ(detect_parallel(std::vector<FacePlane>{face(0, z), face(1, r11)}).size(), 2u);
  const auto single = detect_parallel(std::vector<FacePlane>{face(4, z)});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].faces, std::vector<int>{4});
}

TEST(DetectParallel, GroupsRespectPairwiseThreshold) {
  // a fan of normals 4 degrees apart must not chain into one group
  std::vector<FacePlane> fs;
  for (int i = 0; i < 8; ++i) fs.push_back(face(i, so3_exp(Point3(4.0 * i * kDeg, 0, 0)) * Point3::UnitZ()));
  for (const auto& g : detect_parallel(fs))
    for (int a : g.faces)
      for (int b : g.faces)
        EXPECT_LE(axis_angle_deg(fs[static_cast<std::size_t>(a)].normal, fs[static_cast<std::size_t>(b)].normal), 10.0 + 1e-9);
}

TEST(DetectParallel, WeightedNormalFollowsArea) {
  const Point3 a = Point3::UnitZ(), b = so3_exp(Point3(6 * kDeg, 0, 0)) * Point3::UnitZ();
  const auto g = detect_parallel(std::vector<FacePlane>{face(0, a, {}, 3.0), face(1, -b, {}, 1.0)});
  ASSERT_EQ(g.size(), 1u);
  const Point3 expect = (3.0 * a + 1.0 * b).normalized();
  EXPECT_LT(axis_angle_deg(g[0].normal, expect), 1e-9);
  EXPECT_DOUBLE_EQ(g[0].weight, 4.0);
}

TEST(DetectOrthogonal, Examples) {
  EXPECT_EQ(detect_orthogonal(detect_parallel(cube_faces())).size(), 3u);
  const Point3 z = Point3::UnitZ();
  std::vector<ParallelGroup> gs(2);
  gs[0].id = 0;
  gs[0].normal = z;
  gs[1].id = 1;
  gs[1].normal = so3_exp(Point3(85 * kDeg, 0, 0)) * z;
  EXPECT_EQ(detect_orthogonal(gs).size(), 1u);
  gs[1].normal = so3_exp(Point3(70 * kDeg, 0, 0)) * z;
  EXPECT_TRUE(detect_orthogonal(gs).empty());
}

TEST(DetectCoplanar, Examples) {
  ParallelGroup g;
  g.faces = {0, 1};
  g.normal = Point3::UnitZ();
  const std::vector<FacePlane> side{face(0, g.normal, {0, 0, 1}), face(1, g.normal, {2, 0, 1})};
  EXPECT_EQ(detect_coplanar(g, side).size(), 1u);
  const std::vector<FacePlane> stacked{face(0, g.normal, {0, 0, 1}), face(1, g.normal, {0, 0, 2})};
  EXPECT_TRUE(detect_coplanar(g, stacked).empty());
  const std::vector<FacePlane> near{face(0, g.normal, {0, 0, 1}), face(1, g.normal, {1, 0, 1.01})};
  EXPECT_EQ(detect_coplanar(g, near).size(), 1u);
}

TEST(DetectCoplanar, TransitiveClosure) {
  ParallelGroup g;
  g.faces = {0, 1, 2, 3};
  g.normal = Point3::UnitZ();
  // 0-1 and 1-2 pass the center-line test; 0-2 alone would not
  const std::vector<FacePlane> fs{face(0, g.normal, {0, 0, 0}), face(1, g.normal, {1, 0, 0.15}),
                                  face(2, g.normal, {1, 1, 0.3}), face(3, g.normal, {0, 0, 5})};
  const auto sets = detect_coplanar(g, fs);
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0], (std::vector<int>{0, 1, 2}));
}

TEST(DetectRelations, NoiseFreeCubeExactly) {
  const RelationSet rs = detect_relations(cube_faces());
  int par = 0, orth = 0, cop = 0;
  for (const auto& c : rs.constraints) {
    par += c.kind == RelationKind::kParallel;
    orth += c.kind == RelationKind::kOrthogonal;
    cop += c.kind == RelationKind::kCoplanar;
    EXPECT_EQ(c.source, RelationSource::kDetected);
    EXPECT_TRUE(c.active());
  }
  EXPECT_EQ(par, 3);
  EXPECT_EQ(orth, 3);
  EXPECT_EQ(cop, 0);
}

TEST(DetectRelations, InvariantToRigidMotionAndFlips) {
  const RelationSet base = detect_relations(cube_faces());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto fs = cube_faces(testing_util::random_pose(rng));
    for (auto& f : fs)
      if (rng.uniform() < 0.5) f.normal = -f.normal;
    const RelationSet moved = detect_relations(fs);
    ASSERT_EQ(moved.constraints.size(), base.constraints.size());
    for (std::size_t i = 0; i < base.constraints.size(); ++i) EXPECT_EQ(moved.constraints[i], base.constraints[i]);
    for (std::size_t i = 0; i < base.groups.size(); ++i) EXPECT_EQ(moved.groups[i].faces, base.groups[i].faces);
  }
}

TEST(UserRelation, AddsAndRejects) {
  RelationSet rs = detect_relations(cube_faces());
  const std::size_t n = rs.constraints.size();
  EXPECT_THROW(add_user_relation(rs, RelationKind::kParallel, {0, 1}, 6), Error);  // detected already
  EXPECT_THROW(add_user_relation(rs, RelationKind::kOrthogonal, {0, 1}, 6), Error);  // same group
  EXPECT_THROW(add_user_relation(rs, RelationKind::kCoplanar, {2, 2}, 6), Error);
  EXPECT_THROW(add_user_relation(rs, RelationKind::kCoplanar, {2, 9}, 6), Error);
  const auto& c = add_user_relation(rs, RelationKind::kCoplanar, {3, 2}, 6);
  EXPECT_EQ(c.members, (std::vector<int>{2, 3}));
  EXPECT_EQ(c.source, RelationSource::kUser);
  EXPECT_EQ(rs.constraints.size(), n + 1);
  EXPECT_THROW(add_user_relation(rs, RelationKind::kCoplanar, {2, 3}, 6), Error);
}

TEST(UserRelation, OrthogonalWithoutDetectionMakesSingletonGroups) {
  RelationSet rs;
  const auto& c = add_user_relation(rs, RelationKind::kOrthogonal, {4, 1}, 6);
  ASSERT_EQ(rs.groups.size(), 2u);
  EXPECT_EQ(rs.groups[static_cast<std::size_t>(c.members[0])].faces.size(), 1u);
  EXPECT_NE(c.members[0], c.members[1]);
}

}  // namespace
}  // namespace planarc
