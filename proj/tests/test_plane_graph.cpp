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

#include <functional>
#include <set>

#include "planarc/plane_graph.hpp"
#include "planarc/random.hpp"

namespace planarc {
namespace {

PlaneGraph square() {
  PlaneGraph g;
  g.add_node({0, 0});
  g.add_node({10, 0});
  g.add_node({10, 10});
  g.add_node({0, 10});
  for (int i = 0; i < 4; ++i) g.add_edge(i, (i + 1) % 4);
  return g;
}

// Oracle: all simple cycles whose polygon has no node and no foreign edge
// midpoint strictly inside.
bool inside_polygon(const Point2& p, const std::vector<Point2>& poly) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      in = !in;
  }
  return in;
}

std::set<std::set<NodeId>> oracle_faces(const PlaneGraph& g) {
  std::set<std::set<NodeId>> cycles;
  std::vector<NodeId> path;
  std::function<void(NodeId, NodeId)> dfs = [&](NodeId start, NodeId u) {
    for (NodeId v : g.neighbors(u)) {
      if (v == start && path.size() >= 3) {
        std::vector<Point2> poly;
        for (NodeId id : path) poly.push_back(g.nodes.at(id).position);
        std::set<NodeId> members(path.begin(), path.end());
        bool empty = true;
        for (const auto& [id, n] : g.nodes)
          if (!members.contains(id) && inside_polygon(n.position, poly)) empty = false;
        for (const auto& [a, b] : g.edges) {
          const bool on_cycle = members.contains(a) && members.contains(b) &&
                                [&] {
                                  for (std::size_t i = 0; i < path.size(); ++i)
                                    if (std::minmax(path[i], path[(i + 1) % path.size()]) == std::minmax(a, b))
                                      return true;
                                  return false;
                                }();
          if (on_cycle) continue;
          const Point2 mid = 0.5 * (g.nodes.at(a).position + g.nodes.at(b).position);
          if (inside_polygon(mid, poly)) empty = false;
        }
        if (empty) cycles.insert(members);
        continue;
      }
      if (v <= start || std::find(path.begin(), path.end(), v) != path.end()) continue;
      path.push_back(v);
      dfs(start, v);
      path.pop_back();
    }
  };
  for (const auto& [id, _] : g.nodes) {
    path = {id};
    dfs(id, id);
  }
  return cycles;
}

std::set<std::set<NodeId>> as_sets(const std::vector<Face>& faces) {
  std::set<std::set<NodeId>> out;
  for (const auto& f : faces) out.insert(std::set<NodeId>(f.begin(), f.end()));
  return out;
}

TEST(ExtractFaces, Square) {
  const auto faces = extract_faces(square());
  ASSERT_EQ(faces.size(), 1u);
  EXPECT_EQ(faces[0].size(), 4u);
}

TEST(ExtractFaces, TwoSquaresSharingAnEdge) {
  PlaneGraph g = square();
  g.add_node({20, 0});
  g.add_node({20, 10});
  g.add_edge(1, 4);
  g.add_edge(4, 5);
  g.add_edge(5, 2);
  ASSERT_EQ(g.edges.size(), 7u);
  const auto faces = extract_faces(g);
  EXPECT_EQ(faces.size(), 2u);
  EXPECT_EQ(as_sets(faces), oracle_faces(g));
}

TEST(ExtractFaces, TreeHasNoFaces) {
  PlaneGraph g;
  for (int i = 0; i < 5; ++i) g.add_node({i * 10.0, (i % 2) * 7.0});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(1, 3);
  g.add_edge(3, 4);
  EXPECT_TRUE(extract_faces(g).empty());
}

TEST(ExtractFaces, FacesArePositivelyOrientedSimpleCycles) {
  PlaneGraph g = square();
  g.add_node({5, 5});
  for (int i = 0; i < 4; ++i) g.add_edge(4, i);
  const auto pos = g.positions();
  const auto faces = extract_faces(g);
  ASSERT_EQ(faces.size(), 4u);
  for (const auto& f : faces) {
    EXPECT_EQ(std::set<NodeId>(f.begin(), f.end()).size(), f.size());
    EXPECT_GT(detail::signed_area(f, pos), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_TRUE(g.has_edge(f[i], f[(i + 1) % f.size()]));
  }
}

TEST(ExtractFaces, CrossingEdgesAreRejected) {
  PlaneGraph g = square();
  g.add_edge(0, 2);
  g.add_edge(1, 3);
  try {
    extract_faces(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPlanarEmbedding);
  }
}

TEST(ExtractFaces, NodeOnEdgeInteriorIsRejected) {
  PlaneGraph g = square();
  g.add_node({5, 0});
  g.add_node({5, 5});
  g.add_edge(4, 5);
  g.add_edge(5, 2);
  EXPECT_THROW(extract_faces(g), Error);
}

TEST(ExtractFaces, PendantEdgesAndBridgesAreIgnored) {
  PlaneGraph g = square();
  g.add_node({30, 0});
  g.add_node({40, 0});
  g.add_node({40, 10});
  g.add_node({15, 20});  // pendant
  g.add_edge(1, 4);      // bridge
  g.add_edge(4, 5);
  g.add_edge(5, 6);
  g.add_edge(6, 4);
  g.add_edge(2, 7);
  const auto faces = extract_faces(g);
  EXPECT_EQ(faces.size(), 2u);
  EXPECT_EQ(as_sets(faces), oracle_faces(g));
}

// Grid of nx x ny cells with jittered nodes.
PlaneGraph grid(int nx, int ny, Rng& rng) {
  PlaneGraph g;
  for (int y = 0; y <= ny; ++y)
    for (int x = 0; x <= nx; ++x) g.add_node({x * 10.0 + rng.uniform(-2, 2), y * 10.0 + rng.uniform(-2, 2)});
  auto id = [&](int x, int y) { return y * (nx + 1) + x; };
  for (int y = 0; y <= ny; ++y)
    for (int x = 0; x <= nx; ++x) {
      if (x < nx) g.add_edge(id(x, y), id(x + 1, y));
      if (y < ny) g.add_edge(id(x, y), id(x, y + 1));
    }
  return g;
}

TEST(ExtractFaces, EdgeIncidenceOnGrids) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int nx = 1 + static_cast<int>(rng.index(3)), ny = 1 + static_cast<int>(rng.index(3));
    const PlaneGraph g = grid(nx, ny, rng);
    const auto faces = extract_faces(g);
    ASSERT_EQ(faces.size(), static_cast<std::size_t>(nx * ny));
    EXPECT_EQ(as_sets(faces), oracle_faces(g));
    std::map<std::pair<NodeId, NodeId>, int> uses;
    for (const auto& f : faces)
      for (std::size_t i = 0; i < f.size(); ++i) ++uses[std::minmax(f[i], f[(i + 1) % f.size()])];
    for (const auto& [a, b] : g.edges) {
      const auto pa = g.nodes.at(a).position;
      (void)pa;
      const bool boundary = [&] {
        // boundary edges run along the outer rows/columns of the grid
        const int xa = a % (nx + 1), ya = a / (nx + 1), xb = b % (nx + 1), yb = b / (nx + 1);
        return (ya == yb && (ya == 0 || ya == ny)) || (xa == xb && (xa == 0 || xa == nx));
      }();
      EXPECT_EQ(uses[std::make_pair(a, b)], boundary ? 1 : 2);
    }
  }
}

TEST(ValidateAnnotation, CornerWithOneEdgeIsRejected) {
  PlaneGraph g = square();
  g.add_node({20, 20});
  g.add_edge(2, 4);
  try {
    validate_annotation(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidAnnotation);
    EXPECT_EQ(e.entity(), "4");
  }
  EXPECT_NO_THROW(validate_annotation(square()));
}

TEST(PlaneGraph, DuplicateEdgeRejected) {
  PlaneGraph g = square();
  EXPECT_THROW(g.add_edge(1, 0), Error);
  EXPECT_THROW(g.add_edge(0, 9), Error);
}

}  // namespace
}  // namespace planarc
