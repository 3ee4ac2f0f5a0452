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
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/geometry.hpp"
#include "planarc/plane_graph.hpp"

namespace planarc {

enum class RelationKind { kParallel, kOrthogonal, kCoplanar };
enum class RelationSource { kDetected, kUser };
enum class RelationStatus { kActive, kReleased };

inline std::string_view to_string(RelationKind k) {
  switch (k) {
    case RelationKind::kParallel: return "parallel";
    case RelationKind::kOrthogonal: return "orthogonal";
    case RelationKind::kCoplanar: return "coplanar";
  }
  return "?";
}
inline std::string_view to_string(RelationSource s) { return s == RelationSource::kUser ? "user" : "detected"; }
inline std::string_view to_string(RelationStatus s) { return s == RelationStatus::kActive ? "active" : "released"; }

inline RelationKind relation_kind_from_string(std::string_view s) {
  if (s == "parallel") return RelationKind::kParallel;
  if (s == "orthogonal") return RelationKind::kOrthogonal;
  if (s == "coplanar") return RelationKind::kCoplanar;
  throw Error(ErrorCode::kInvalidArgument, "unknown relation kind", std::string(s));
}
inline RelationSource relation_source_from_string(std::string_view s) {
  if (s == "user") return RelationSource::kUser;
  if (s == "detected") return RelationSource::kDetected;
  throw Error(ErrorCode::kInvalidArgument, "unknown relation source", std::string(s));
}
inline RelationStatus relation_status_from_string(std::string_view s) {
  if (s == "active") return RelationStatus::kActive;
  if (s == "released") return RelationStatus::kReleased;
  throw Error(ErrorCode::kInvalidArgument, "unknown relation status", std::string(s));
}

/// Members are face ids for parallel and coplanar relations and parallel
/// group ids for orthogonal ones.
struct RelationConstraint {
  RelationKind kind = RelationKind::kParallel;
  std::vector<int> members;
  RelationSource source = RelationSource::kDetected;
  RelationStatus status = RelationStatus::kActive;

  bool active() const { return status == RelationStatus::kActive; }
  bool operator==(const RelationConstraint&) const = default;
};

struct FacePlane {
  int face = 0;
  Point3 normal = Point3::UnitZ();
  Point3 centroid = Point3::Zero();
  double area = 1.0;
};

struct ParallelGroup {
  int id = 0;
  std::vector<int> faces;  // face ids, ascending
  Point3 normal = Point3::UnitZ();
  double weight = 0.0;  // summed area

  bool operator==(const ParallelGroup&) const = default;
};

struct RelationSet {
  std::vector<ParallelGroup> groups;
  std::vector<RelationConstraint> constraints;

  bool operator==(const RelationSet&) const = default;

  const ParallelGroup* group_of_face(int face) const {
    for (const auto& g : groups)
      if (std::find(g.faces.begin(), g.faces.end(), face) != g.faces.end()) return &g;
    return nullptr;
  }
};

struct RelationConfig {
  double bandwidth = 1e-3;      // mean-shift kernel radius, chord length on the unit sphere
  double parallel_deg = 10.0;   // max pairwise angle within a parallel group
  double orthogonal_tol_deg = 10.0;
  double coplanar_tol_deg = 10.0;
};

/// Area-weighted mean of the normals with signs aligned to the first one.
inline Point3 weighted_normal(std::span<const Point3> normals, std::span<const double> weights) {
  if (normals.empty()) throw Error(ErrorCode::kInvalidArgument, "no normals to average");
  Point3 s = Point3::Zero();
  for (std::size_t i = 0; i < normals.size(); ++i)
    s += weights[i] * (normals[i].dot(normals[0]) < 0 ? -normals[i] : normals[i]);
  if (!(s.norm() > 0)) return normals[0].normalized();
  return s.normalized();
}

struct MeanShiftResult {
  std::vector<int> assignment;  // cluster per input normal
  std::vector<Point3> modes;
};

/// Flat-kernel mean shift on the sphere with n and -n identified. Every input
/// seeds a trajectory; converged modes closer than the bandwidth share a
/// cluster. Clusters are numbered by first appearance.
inline MeanShiftResult mean_shift_normals(std::span<const Point3> normals, double bandwidth,
                                          int max_iterations = 100) {
  if (!(bandwidth > 0)) throw Error(ErrorCode::kInvalidArgument, "bandwidth must be positive");
  auto dist = [](const Point3& a, const Point3& b) { return std::min((a - b).norm(), (a + b).norm()); };
  std::vector<Point3> converged;
  for (const auto& seed : normals) {
    Point3 m = seed.normalized();
    for (int it = 0; it < max_iterations; ++it) {
      Point3 s = Point3::Zero();
      for (const auto& n : normals)
        if (dist(m, n) <= bandwidth) s += n.dot(m) < 0 ? -n : n;
      const Point3 next = s.norm() > 0 ? Point3(s.normalized()) : m;
      const double shift = dist(next, m);
      m = next;
      if (shift < bandwidth / 100.0) break;
    }
    converged.push_back(m);
  }
  MeanShiftResult out;
  for (const auto& m : converged) {
    int found = -1;
    for (std::size_t c = 0; c < out.modes.size(); ++c)
      if (dist(out.modes[c], m) < bandwidth) {
        found = static_cast<int>(c);
        break;
      }
    if (found < 0) {
      found = static_cast<int>(out.modes.size());
      out.modes.push_back(m);
    }
    out.assignment.push_back(found);
  }
  return out;
}

/// Angle in degrees between two lines through the origin (|dot| based).
inline double line_angle_deg(const Point3& a, const Point3& b) { return axis_angle_deg(a, b); }

/// Parallel groups: mean-shift clusters merged by complete linkage while
/// every pairwise normal angle stays within the threshold. Groups (including
/// singletons) are ordered by their smallest face id and numbered from 0.
inline std::vector<ParallelGroup> detect_parallel(std::span<const FacePlane> faces, const RelationConfig& cfg = {}) {
  std::vector<Point3> normals;
  for (const auto& f : faces) normals.push_back(f.normal.normalized());
  const auto ms = mean_shift_normals(normals, cfg.bandwidth);
  std::vector<std::vector<std::size_t>> clusters(ms.modes.size());
  for (std::size_t i = 0; i < faces.size(); ++i) clusters[static_cast<std::size_t>(ms.assignment[i])].push_back(i);

  auto linkage = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double worst = 0.0;
    for (std::size_t i : a)
      for (std::size_t j : b) worst = std::max(worst, line_angle_deg(normals[i], normals[j]));
    return worst;
  };
  // clusters from mean shift must themselves satisfy the threshold; split any that do not
  std::vector<std::vector<std::size_t>> work;
  for (auto& c : clusters) {
    if (linkage(c, c) <= cfg.parallel_deg) {
      work.push_back(c);
    } else {
      for (std::size_t i : c) work.push_back({i});
    }
  }
  while (work.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < work.size(); ++a)
      for (std::size_t b = a + 1; b < work.size(); ++b) {
        const double l = linkage(work[a], work[b]);
        if (l < best) {
          best = l;
          ba = a;
          bb = b;
        }
      }
    if (best > cfg.parallel_deg) break;
    work[ba].insert(work[ba].end(), work[bb].begin(), work[bb].end());
    work.erase(work.begin() + static_cast<std::ptrdiff_t>(bb));
  }

  std::vector<ParallelGroup> out;
  for (auto& c : work) {
    std::sort(c.begin(), c.end(), [&](std::size_t a, std::size_t b) { return faces[a].face < faces[b].face; });
    ParallelGroup g;
    std::vector<Point3> ns;
    std::vector<double> ws;
    for (std::size_t i : c) {
      g.faces.push_back(faces[i].face);
      ns.push_back(normals[i]);
      ws.push_back(faces[i].area);
      g.weight += faces[i].area;
    }
    g.normal = weighted_normal(ns, ws);
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(), [](const ParallelGroup& a, const ParallelGroup& b) { return a.faces < b.faces; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

/// Group pairs whose weighted normals are 90 degrees apart within tolerance.
inline std::vector<std::pair<int, int>> detect_orthogonal(std::span<const ParallelGroup> groups,
                                                          const RelationConfig& cfg = {}) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t a = 0; a < groups.size(); ++a)
    for (std::size_t b = a + 1; b < groups.size(); ++b)
      if (line_angle_deg(groups[a].normal, groups[b].normal) >= 90.0 - cfg.orthogonal_tol_deg)
        out.emplace_back(groups[a].id, groups[b].id);
  return out;
}

/// Coplanar subgroups (two or more faces) of one parallel group: transitive
/// closure of pairs whose center line is near-orthogonal to the group normal.
inline std::vector<std::vector<int>> detect_coplanar(const ParallelGroup& group, std::span<const FacePlane> faces,
                                                     const RelationConfig& cfg = {}) {
  std::vector<const FacePlane*> members;
  for (int id : group.faces)
    for (const auto& f : faces)
      if (f.face == id) members.push_back(&f);
  std::vector<std::size_t> parent(members.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  const double max_cos = std::cos((90.0 - cfg.coplanar_tol_deg) * std::numbers::pi / 180.0);
  for (std::size_t a = 0; a < members.size(); ++a)
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      const Point3 d = members[b]->centroid - members[a]->centroid;
      const bool together = d.norm() == 0.0 || std::abs(d.normalized().dot(group.normal)) <= max_cos + 1e-12;
      if (together) parent[find(a)] = find(b);
    }
  std::map<std::size_t, std::vector<int>> sets;
  for (std::size_t i = 0; i < members.size(); ++i) sets[find(i)].push_back(members[i]->face);
  std::vector<std::vector<int>> out;
  for (auto& [_, s] : sets)
    if (s.size() >= 2) {
      std::sort(s.begin(), s.end());
      out.push_back(s);
    }
  std::sort(out.begin(), out.end());
  return out;
}

/// Full detection: parallel groups, then orthogonal group pairs and coplanar
/// subgroups. Parallel relations are emitted for groups of two or more faces.
inline RelationSet detect_relations(std::span<const FacePlane> faces, const RelationConfig& cfg = {}) {
  RelationSet out;
  out.groups = detect_parallel(faces, cfg);
  for (const auto& g : out.groups)
    if (g.faces.size() >= 2) out.constraints.push_back({RelationKind::kParallel, g.faces, RelationSource::kDetected});
  for (const auto& [a, b] : detect_orthogonal(out.groups, cfg))
    out.constraints.push_back({RelationKind::kOrthogonal, {a, b}, RelationSource::kDetected});
  for (const auto& g : out.groups)
    for (auto& s : detect_coplanar(g, faces, cfg))
      out.constraints.push_back({RelationKind::kCoplanar, std::move(s), RelationSource::kDetected});
  return out;
}

/// Polygon area of a planar 3D face (Newell normal magnitude / 2).
inline double polygon_area(std::span<const Point3> pts) {
  Point3 n = Point3::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) n += pts[i].cross(pts[(i + 1) % pts.size()]);
  return 0.5 * n.norm();
}

/// Plane, centroid and area of every face whose corners are all known.
inline std::vector<FacePlane> face_planes(std::span<const Face> faces, const std::map<NodeId, Point3>& points) {
  std::vector<FacePlane> out;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    std::vector<Point3> pts;
    for (NodeId id : faces[f]) {
      const auto it = points.find(id);
      if (it == points.end()) break;
      pts.push_back(it->second);
    }
    if (pts.size() != faces[f].size() || pts.size() < 3) continue;
    const Plane p = face_plane(pts);
    Point3 c = Point3::Zero();
    for (const auto& x : pts) c += x;
    out.push_back({static_cast<int>(f), p.normal, c / static_cast<double>(pts.size()), polygon_area(pts)});
  }
  return out;
}

/// Adds a user relation over faces. Orthogonal relations are mapped onto the
/// parallel groups holding the two faces. Throws InvalidAnnotation for
/// malformed or duplicate relations.
inline const RelationConstraint& add_user_relation(RelationSet& set, RelationKind kind, std::vector<int> faces,
                                                   int face_count) {
  std::sort(faces.begin(), faces.end());
  if (std::adjacent_find(faces.begin(), faces.end()) != faces.end())
    throw Error(ErrorCode::kInvalidAnnotation, "relation members repeat");
  for (int f : faces)
    if (f < 0 || f >= face_count) throw Error(ErrorCode::kInvalidAnnotation, "unknown face", std::to_string(f));
  RelationConstraint c{kind, {}, RelationSource::kUser};
  if (kind == RelationKind::kOrthogonal) {
    if (faces.size() != 2) throw Error(ErrorCode::kInvalidAnnotation, "orthogonality relates exactly two faces");
    // faces without a group become singleton groups
    for (int f : faces)
      if (!set.group_of_face(f)) {
        ParallelGroup g;
        g.id = static_cast<int>(set.groups.size());
        g.faces = {f};
        set.groups.push_back(g);
      }
    const int a = set.group_of_face(faces[0])->id, b = set.group_of_face(faces[1])->id;
    if (a == b) throw Error(ErrorCode::kInvalidAnnotation, "faces share a parallel group");
    c.members = {std::min(a, b), std::max(a, b)};
  } else {
    if (faces.size() < 2) throw Error(ErrorCode::kInvalidAnnotation, "relation needs two or more faces");
    c.members = faces;
  }
  for (const auto& e : set.constraints)
    if (e.kind == c.kind && e.members == c.members && e.active())
      throw Error(ErrorCode::kInvalidAnnotation, "relation already present");
  set.constraints.push_back(std::move(c));
  return set.constraints.back();
}

}  // namespace planarc
