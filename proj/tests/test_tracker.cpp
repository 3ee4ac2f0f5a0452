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

#include <algorithm>

#include "planarc/synth.hpp"
#include "planarc/tracker.hpp"

namespace planarc {
namespace {

// Textured quad on textured background, translated by `shift` px.
Frame quad_frame(const std::vector<Point2>& quad, const Point2& shift, int w = 200, int h = 200,
                 int occlude_node = -1) {
  PolyModel m;
  for (const auto& q : quad) m.vertices.emplace_back(q.x() + shift.x(), q.y() + shift.y(), 0);
  m.faces = {{0, 1, 2, 3}};
  m.base_intensity = {170};
  // orthographic-like setup: camera far away looking down -z with huge focal
  Pose p;
  p.rotation = Mat3::Identity();
  p.translation = Point3(0, 0, 1000);
  Intrinsics k{1000, 0, 0};
  // the face normal must point toward the camera at z = -1000
  std::reverse(m.faces[0].begin(), m.faces[0].end());
  Frame f = render_frame(m, k, p, w, h, 4, 9);
  if (occlude_node >= 0) {
    const Point2 c = quad[static_cast<std::size_t>(occlude_node)] + shift;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((Point2(x, y) - c).norm() <= 9) f.at(x, y) = 30;
  }
  return f;
}

PlaneGraph quad_graph(const std::vector<Point2>& quad) {
  PlaneGraph g;
  for (const auto& q : quad) g.add_node(q);
  for (int i = 0; i < 4; ++i) g.add_edge(i, (i + 1) % 4);
  g.faces = extract_faces(g);
  return g;
}

const std::vector<Point2> kQuad{{60, 55}, {150, 62}, {142, 148}, {52, 140}};

TEST(TrackCorner, ZeroMotion) {
  const PlaneGraph g = quad_graph(kQuad);
  const Pyramid p = build_pyramid(quad_frame(kQuad, {0, 0}), 3);
  TrackerConfig cfg;
  for (NodeId n = 0; n < 4; ++n) {
    const CornerTrack t = track_corner(g, g.positions(), n, p, p, cfg);
    EXPECT_LT((t.position - kQuad[static_cast<std::size_t>(n)]).norm(), 0.2) << n;
    EXPECT_GT(t.confidence, 1.0);
  }
}

TEST(TrackCorner, TranslatingSquare) {
  const PlaneGraph g = quad_graph(kQuad);
  TrackerConfig cfg;
  for (int k = 1; k <= 5; ++k) {
    const Point2 from(3.0 * (k - 1), 0.5 * (k - 1));
    const Point2 to(3.0 * k, 0.5 * k);
    const Pyramid prev = build_pyramid(quad_frame(kQuad, from), 3);
    const Pyramid next = build_pyramid(quad_frame(kQuad, to), 3);
    std::map<NodeId, Point2> state;
    for (NodeId n = 0; n < 4; ++n) state[n] = kQuad[static_cast<std::size_t>(n)] + from;
    for (NodeId n = 0; n < 4; ++n) {
      const Point2 p = track_corner(g, state, n, prev, next, cfg).position;
      EXPECT_LT((p - kQuad[static_cast<std::size_t>(n)] - to).norm(), 0.5) << k << "/" << n;
    }
  }
}

TEST(TrackCorner, ChainedDriftStaysBounded) {
  const PlaneGraph g = quad_graph(kQuad);
  TrackerConfig cfg;
  auto state = g.positions();
  Pyramid prev = build_pyramid(quad_frame(kQuad, {0, 0}), 3);
  for (int k = 1; k <= 5; ++k) {
    const Point2 shift(3.0 * k, 0.5 * k);
    const Pyramid next = build_pyramid(quad_frame(kQuad, shift), 3);
    std::map<NodeId, Point2> moved;
    for (NodeId n = 0; n < 4; ++n) moved[n] = track_corner(g, state, n, prev, next, cfg).position;
    for (NodeId n = 0; n < 4; ++n)
      EXPECT_LT((moved[n] - kQuad[static_cast<std::size_t>(n)] - shift).norm(), 1.5) << k << "/" << n;
    state = moved;
    prev = next;
  }
}

TEST(TrackCorner, OccludedCornerIsLostOrWeak) {
  const PlaneGraph g = quad_graph(kQuad);
  TrackerConfig cfg;
  const Pyramid a = build_pyramid(quad_frame(kQuad, {0, 0}), 3);
  const Pyramid b = build_pyramid(quad_frame(kQuad, {3, 1}), 3);
  const Pyramid occluded = build_pyramid(quad_frame(kQuad, {3, 1}, 200, 200, 0), 3);
  const double clean = track_corner(g, g.positions(), 0, a, b, cfg).confidence;
  try {
    const CornerTrack t = track_corner(g, g.positions(), 0, a, occluded, cfg);
    EXPECT_LT(t.confidence, clean);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCornerLost);
  }
}

TEST(TrackCorner, PositionIsWeightedLeastSquaresOptimum) {
  const PlaneGraph g = quad_graph(kQuad);
  TrackerConfig cfg;
  const Pyramid a = build_pyramid(quad_frame(kQuad, {0, 0}), 3);
  const Pyramid b = build_pyramid(quad_frame(kQuad, {2, 1}), 3);
  for (NodeId n = 0; n < 4; ++n) {
    const CornerTrack t = track_corner(g, g.positions(), n, a, b, cfg);
    auto cost = [&](const Point2& p) {
      double s = 0;
      for (std::size_t i = 0; i < t.lines.size(); ++i)
        s += t.line_weights[i] * std::pow(t.lines[i].normal.dot(p) - t.lines[i].offset, 2);
      return s;
    };
    const double c0 = cost(t.position);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) EXPECT_LE(c0, cost(t.position + Point2(dx, dy)) + 1e-9);
  }
}

TEST(TrackCorner, DeterministicUnderSeed) {
  const PlaneGraph g = quad_graph(kQuad);
  TrackerConfig cfg;
  cfg.seed = 99;
  const Pyramid a = build_pyramid(quad_frame(kQuad, {0, 0}), 3);
  const Pyramid b = build_pyramid(quad_frame(kQuad, {2, 2}), 3);
  const CornerTrack t1 = track_corner(g, g.positions(), 2, a, b, cfg);
  const CornerTrack t2 = track_corner(g, g.positions(), 2, a, b, cfg);
  EXPECT_EQ(t1.position, t2.position);
  EXPECT_EQ(t1.confidence, t2.confidence);
}

TEST(TrackFrame, StaticSequenceStaysPut) {
  const PlaneGraph g = quad_graph(kQuad);
  TrackerConfig cfg;
  const Pyramid p = build_pyramid(quad_frame(kQuad, {0, 0}), 3);
  TrackSequence seq;
  for (const auto& [id, n] : g.nodes) seq.ensure(0)[id] = {n.position, 1.0, Provenance::kNewlyAdded};
  for (int k = 0; k < 10; ++k) {
    const auto report = track_frame(g, seq, k, p, p, cfg);
    EXPECT_TRUE(report.lost.empty());
  }
  for (int k = 1; k <= 10; ++k)
    for (const auto& [id, tp] : seq.frame(k)) {
      EXPECT_LT((tp.position - g.nodes.at(id).position).norm(), 0.3);
      EXPECT_EQ(tp.provenance, Provenance::kTracked);
    }
}

TEST(TrackFrame, SingleEdgeCornerRejectedAtValidation) {
  PlaneGraph g = quad_graph(kQuad);
  g.add_node({20, 20});
  g.add_edge(0, 4);
  EXPECT_THROW(validate_annotation(g), Error);
}

TEST(TrackFrame, ParallelMatchesSequential) {
  const PlaneGraph g = quad_graph(kQuad);
  const Pyramid a = build_pyramid(quad_frame(kQuad, {0, 0}), 3);
  const Pyramid b = build_pyramid(quad_frame(kQuad, {2, 3}), 3);
  TrackSequence s1, s2;
  for (const auto& [id, n] : g.nodes) s1.ensure(0)[id] = {n.position, 1.0, Provenance::kNewlyAdded};
  s2 = s1;
  TrackerConfig cfg;
  track_frame(g, s1, 0, a, b, cfg);
  cfg.threads = 3;
  track_frame(g, s2, 0, a, b, cfg);
  EXPECT_EQ(s1, s2);
}

}  // namespace
}  // namespace planarc
