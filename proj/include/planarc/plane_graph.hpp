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
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/geometry.hpp"

namespace planarc {

using NodeId = std::int32_t;
using Face = std::vector<NodeId>;

struct GraphNode {
  Point2 position = Point2::Zero();  // in the frame the node was annotated
  int frame = 0;

  bool operator==(const GraphNode&) const = default;
};

/// Annotated point/segment graph. Edges are stored with the smaller id first.
class PlaneGraph {
 public:
  std::map<NodeId, GraphNode> nodes;
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<Face> faces;

  NodeId add_node(const Point2& p, int frame = 0) {
    const NodeId id = nodes.empty() ? 0 : nodes.rbegin()->first + 1;
    nodes[id] = {p, frame};
    return id;
  }

  void add_edge(NodeId a, NodeId b) {
    if (!nodes.contains(a) || !nodes.contains(b))
      throw Error(ErrorCode::kInvalidAnnotation, "edge references unknown node",
                  std::to_string(nodes.contains(a) ? b : a));
    if (a == b) throw Error(ErrorCode::kInvalidAnnotation, "self loop", std::to_string(a));
    const auto e = std::minmax(a, b);
    if (has_edge(e.first, e.second))
      throw Error(ErrorCode::kInvalidAnnotation, "duplicate edge",
                  std::to_string(e.first) + "-" + std::to_string(e.second));
    edges.emplace_back(e.first, e.second);
  }

  bool has_edge(NodeId a, NodeId b) const {
    const auto e = std::minmax(a, b);
    return std::find(edges.begin(), edges.end(), std::pair<NodeId, NodeId>(e.first, e.second)) !=
           edges.end();
  }

  std::vector<NodeId> neighbors(NodeId id) const {
    std::vector<NodeId> out;
    for (const auto& [a, b] : edges) {
      if (a == id) out.push_back(b);
      if (b == id) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t degree(NodeId id) const { return neighbors(id).size(); }

  std::map<NodeId, Point2> positions() const {
    std::map<NodeId, Point2> out;
    for (const auto& [id, n] : nodes) out[id] = n.position;
    return out;
  }

  bool operator==(const PlaneGraph&) const = default;
};

namespace detail {

inline double cross2(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

// True if segments share a point other than a common endpoint node.
inline bool segments_conflict(const Point2& p1, const Point2& p2, const Point2& q1,
                              const Point2& q2, bool share_endpoint) {
  const Point2 r = p2 - p1;
  const Point2 s = q2 - q1;
  const double scale = std::max(r.norm(), s.norm());
  const double eps = 1e-9 * std::max(1.0, scale * scale);
  const double denom = cross2(r, s);
  if (std::abs(denom) <= eps) {
    // parallel: conflict only when collinear and overlapping beyond a point
    if (std::abs(cross2(q1 - p1, r)) > eps) return false;
    const double rr = r.squaredNorm();
    const double t0 = (q1 - p1).dot(r) / rr;
    const double t1 = (q2 - p1).dot(r) / rr;
    const double lo = std::max(0.0, std::min(t0, t1));
    const double hi = std::min(1.0, std::max(t0, t1));
    return share_endpoint ? hi - lo > 1e-9 : hi - lo >= -1e-12;
  }
  const double t = cross2(q1 - p1, s) / denom;
  const double u = cross2(q1 - p1, r) / denom;
  const double tol = 1e-12;
  if (t < -tol || t > 1 + tol || u < -tol || u > 1 + tol) return false;
  if (share_endpoint) return false;  // the only common point is the shared node
  return true;
}

inline double signed_area(const Face& face, const std::map<NodeId, Point2>& pos) {
  double a = 0.0;
  for (std::size_t i = 0; i < face.size(); ++i) {
    a += cross2(pos.at(face[i]), pos.at(face[(i + 1) % face.size()]));
  }
  return 0.5 * a;
}

// Bridges via iterative-free recursive low-link; graphs here are small.
inline void find_bridges(NodeId u, NodeId parent, const std::map<NodeId, std::vector<NodeId>>& adj,
                         std::map<NodeId, int>& tin, std::map<NodeId, int>& low, int& timer,
                         std::set<std::pair<NodeId, NodeId>>& bridges) {
  tin[u] = low[u] = timer++;
  for (NodeId v : adj.at(u)) {
    if (v == parent) continue;
    if (tin.contains(v)) {
      low[u] = std::min(low[u], tin[v]);
    } else {
      find_bridges(v, u, adj, tin, low, timer, bridges);
      low[u] = std::min(low[u], low[v]);
      if (low[v] > tin[u]) bridges.insert(std::minmax(u, v));
    }
  }
}

}  // namespace detail

/// Throws NonPlanarEmbedding if any two edges meet away from a shared node.
inline void check_planar_embedding(const PlaneGraph& g, const std::map<NodeId, Point2>& pos) {
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    for (std::size_t j = i + 1; j < g.edges.size(); ++j) {
      const auto [a, b] = g.edges[i];
      const auto [c, d] = g.edges[j];
      const bool share = a == c || a == d || b == c || b == d;
      if (detail::segments_conflict(pos.at(a), pos.at(b), pos.at(c), pos.at(d), share)) {
        throw Error(ErrorCode::kNonPlanarEmbedding, "edges cross away from a node",
                    std::to_string(a) + "-" + std::to_string(b) + "/" + std::to_string(c) + "-" +
                        std::to_string(d));
      }
    }
    // a node lying on the interior of an edge is also a crossing
    const auto [a, b] = g.edges[i];
    for (const auto& [id, p] : pos) {
      if (id == a || id == b) continue;
      if (!g.nodes.contains(id)) continue;
      const Point2 r = pos.at(b) - pos.at(a);
      const double t = (p - pos.at(a)).dot(r) / r.squaredNorm();
      if (t <= 0.0 || t >= 1.0) continue;
      if ((pos.at(a) + t * r - p).norm() < 1e-9 * std::max(1.0, r.norm()))
        throw Error(ErrorCode::kNonPlanarEmbedding, "node lies on an edge", std::to_string(id));
    }
  }
}

/// Interior faces of the planar embedding given by `pos`.
///
/// Faces are traced by always taking the smallest clockwise turn; each face is
/// a simple cycle with positive signed area in pixel coordinates, rotated so
/// its smallest id comes first. The unbounded face is dropped, as are edges
/// that lie on no cycle.
inline std::vector<Face> extract_faces(const PlaneGraph& g, const std::map<NodeId, Point2>& pos) {
  for (const auto& [a, b] : g.edges) {
    if (!pos.contains(a) || !pos.contains(b))
      throw Error(ErrorCode::kInvalidAnnotation, "edge endpoint has no position",
                  std::to_string(pos.contains(a) ? b : a));
  }
  check_planar_embedding(g, pos);

  std::map<NodeId, std::vector<NodeId>> adj;
  for (const auto& [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::set<std::pair<NodeId, NodeId>> bridges;
  {
    std::map<NodeId, int> tin, low;
    int timer = 0;
    for (const auto& [u, _] : adj)
      if (!tin.contains(u)) detail::find_bridges(u, -1, adj, tin, low, timer, bridges);
  }
  adj.clear();
  for (const auto& [a, b] : g.edges) {
    if (bridges.contains({a, b})) continue;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& [u, nbrs] : adj) {
    const Point2 pu = pos.at(u);
    std::sort(nbrs.begin(), nbrs.end(), [&](NodeId x, NodeId y) {
      const Point2 dx = pos.at(x) - pu, dy = pos.at(y) - pu;
      return std::atan2(dx.y(), dx.x()) < std::atan2(dy.y(), dy.x());
    });
  }

  std::set<std::pair<NodeId, NodeId>> used;
  std::vector<Face> faces;
  for (const auto& [start, nbrs] : adj) {
    for (NodeId first : nbrs) {
      if (used.contains({start, first})) continue;
      Face walk;
      NodeId u = start, v = first;
      while (!used.contains({u, v})) {
        used.insert({u, v});
        walk.push_back(u);
        const auto& around = adj.at(v);
        const auto it = std::find(around.begin(), around.end(), u);
        // neighbor immediately clockwise of the way back
        const std::size_t idx = static_cast<std::size_t>(it - around.begin());
        const NodeId w = around[(idx + around.size() - 1) % around.size()];
        u = v;
        v = w;
      }
      std::set<NodeId> distinct(walk.begin(), walk.end());
      if (walk.size() < 3 || distinct.size() != walk.size()) continue;
      if (detail::signed_area(walk, pos) <= 1e-12) continue;
      std::rotate(walk.begin(), std::min_element(walk.begin(), walk.end()), walk.end());
      faces.push_back(std::move(walk));
    }
  }
  std::sort(faces.begin(), faces.end());
  return faces;
}

inline std::vector<Face> extract_faces(const PlaneGraph& g) { return extract_faces(g, g.positions()); }

/// Annotation checks that must hold before tracking: edges valid, every
/// corner has at least two incident edges, embedding planar.
inline void validate_annotation(const PlaneGraph& g) {
  if (g.nodes.empty()) throw Error(ErrorCode::kNoAnnotations, "graph has no nodes");
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& [a, b] : g.edges) {
    if (!g.nodes.contains(a) || !g.nodes.contains(b))
      throw Error(ErrorCode::kInvalidAnnotation, "edge references unknown node",
                  std::to_string(g.nodes.contains(a) ? b : a));
    if (a == b) throw Error(ErrorCode::kInvalidAnnotation, "self loop", std::to_string(a));
    if (!seen.insert(std::minmax(a, b)).second)
      throw Error(ErrorCode::kInvalidAnnotation, "duplicate edge",
                  std::to_string(a) + "-" + std::to_string(b));
  }
  for (const auto& [id, _] : g.nodes) {
    if (g.degree(id) < 2)
      throw Error(ErrorCode::kInvalidAnnotation, "corner has fewer than two incident edges",
                  std::to_string(id));
  }
}

}  // namespace planarc
