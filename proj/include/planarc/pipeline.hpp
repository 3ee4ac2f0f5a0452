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
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <cstdio>
#include <string>
#include <vector>

#include "planarc/backtrace.hpp"
#include "planarc/bundle.hpp"
#include "planarc/config.hpp"
#include "planarc/export.hpp"
#include "planarc/image_io.hpp"
#include "planarc/pyramid_cache.hpp"
#include "planarc/relations.hpp"
#include "planarc/session.hpp"
#include "planarc/sfm.hpp"
#include "planarc/synth.hpp"
#include "planarc/tracker.hpp"

namespace planarc {

/// Frame in which the annotation graph was drawn.
inline int annotation_frame(const PlaneGraph& g) {
  int f = 0;
  bool first = true;
  for (const auto& [_, n] : g.nodes) {
    f = first ? n.frame : std::min(f, n.frame);
    first = false;
  }
  return f;
}

/// Node positions used to check the embedding: annotation positions,
/// replaced by tracked ones in the latest frame a node was added.
inline std::map<NodeId, Point2> embedding_positions(const Session& s) {
  auto pos = s.graph.positions();
  int latest = annotation_frame(s.graph);
  for (const auto& [_, n] : s.graph.nodes) latest = std::max(latest, n.frame);
  if (s.tracks.has_frame(latest))
    for (const auto& [id, tp] : s.tracks.frame(latest))
      if (pos.contains(id)) pos[id] = tp.position;
  return pos;
}

/// Validates the graph and recomputes its faces.
inline void refresh_faces(Session& s) {
  validate_annotation(s.graph);
  const auto pos = embedding_positions(s);
  check_planar_embedding(s.graph, pos);
  s.graph.faces = extract_faces(s.graph, pos);
}

inline std::vector<Frame> load_session_frames(const Session& s, const std::filesystem::path& session_path) {
  auto frames = load_frames(frames_directory(s, session_path));
  if (s.source.count > 0 && static_cast<int>(frames.size()) != s.source.count)
    throw Error(ErrorCode::kCorruptFile,
                "session expects " + std::to_string(s.source.count) + " frames, found " + std::to_string(frames.size()),
                s.source.directory);
  return frames;
}

inline PyramidCache open_frames(const Session& s, const std::filesystem::path& session_path, int levels = 3) {
  return PyramidCache(load_session_frames(s, session_path), levels);
}

struct TrackStageReport {
  int from = 0;
  int to = 0;
  int tracked = 0;  // corner-steps
  int lost = 0;
  int flagged = 0;
  std::vector<NodeId> lost_nodes;
};

/// Tracks every annotated corner from `from` to `to` (inclusive frames).
inline TrackStageReport run_track(Session& s, PyramidCache& frames, const PipelineConfig& cfg,
                                  std::optional<int> from = {}, std::optional<int> to = {}) {
  if (s.graph.nodes.empty()) throw Error(ErrorCode::kNoAnnotations, "session has no annotated corners");
  refresh_faces(s);
  const int a = annotation_frame(s.graph);
  if (s.tracks.empty() || !s.tracks.has_frame(a)) {
    s.tracks = TrackSequence{};
    FrameTrack& f0 = s.tracks.ensure(a);
    for (const auto& [id, n] : s.graph.nodes)
      if (n.frame == a) f0[id] = {n.position, 1.0, Provenance::kNewlyAdded};
  }
  TrackStageReport r;
  r.from = from.value_or(a);
  r.to = to.value_or(frames.frame_count() - 1);
  if (r.from < s.tracks.first_frame || !s.tracks.has_frame(r.from))
    throw Error(ErrorCode::kInvalidArgument, "tracking must start at a populated frame", std::to_string(r.from));
  if (r.to >= frames.frame_count() || r.to < r.from)
    throw Error(ErrorCode::kInvalidArgument, "tracking range out of bounds", std::to_string(r.to));
  std::set<NodeId> lost;
  for (int k = r.from; k < r.to; ++k) {
    const auto src = frames.get(k);
    const auto dst = frames.get(k + 1);
    const FrameTrackReport fr = track_frame(s.graph, s.tracks, k, *src, *dst, cfg.tracker);
    r.tracked += static_cast<int>(fr.tracked.size());
    r.lost += static_cast<int>(fr.lost.size());
    r.flagged += static_cast<int>(fr.flagged.size());
    lost.insert(fr.lost.begin(), fr.lost.end());
  }
  r.lost_nodes.assign(lost.begin(), lost.end());
  return r;
}

inline CorrectionReport run_correct(Session& s, PyramidCache& frames, const PipelineConfig& cfg, NodeId node, int i,
                                    int j, const Point2& point) {
  if (!s.graph.nodes.contains(node)) throw Error(ErrorCode::kInvalidArgument, "unknown node", std::to_string(node));
  return apply_correction(s.graph, s.tracks, node, i, j, point, frames, cfg.backtrace);
}

/// Adds a corner revealed in `frame`, connected to existing nodes.
inline NodeId run_add_point(Session& s, int frame, const Point2& p, const std::vector<NodeId>& edges) {
  if (edges.size() < 2) throw Error(ErrorCode::kInvalidAnnotation, "a corner needs at least two incident edges");
  if (!s.tracks.has_frame(frame))
    throw Error(ErrorCode::kInvalidArgument, "frame has no tracked positions", std::to_string(frame));
  if (s.source.width > 0 && !Frame(s.source.width, s.source.height).contains(p))
    throw Error(ErrorCode::kInvalidAnnotation, "point outside the frame");
  Session next = s;
  const NodeId id = next.graph.add_node(p, frame);
  for (NodeId e : edges) {
    if (!next.tracks.at(frame, e))
      throw Error(ErrorCode::kInvalidAnnotation, "neighbor has no position in the frame", std::to_string(e));
    next.graph.add_edge(id, e);
  }
  next.tracks.frame(frame)[id] = {p, 1.0, Provenance::kNewlyAdded};
  refresh_faces(next);
  s = std::move(next);
  return id;
}

/// Faces of the graph whose corners all have 3D points, with fitted planes.
inline SceneModel build_scene_model(const PlaneGraph& g, const std::map<NodeId, Point3>& points) {
  SceneModel m;
  m.points = points;
  for (std::size_t f = 0; f < g.faces.size(); ++f) {
    std::vector<Point3> pts;
    bool complete = true;
    for (NodeId id : g.faces[f]) {
      const auto it = points.find(id);
      if (it == points.end()) {
        complete = false;
        break;
      }
      pts.push_back(it->second);
    }
    if (!complete) continue;
    SceneFace sf;
    sf.nodes = g.faces[f];
    sf.graph_face = static_cast<int>(f);
    try {
      sf.plane = face_plane(pts);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerateFace) continue;
      throw;
    }
    for (const auto& x : pts) sf.planarity_residual = std::max(sf.planarity_residual, std::abs(sf.plane.signed_distance(x)));
    sf.area = polygon_area(pts);
    m.faces.push_back(std::move(sf));
  }
  return m;
}

inline void refresh_model_faces(SceneModel& m, const PlaneGraph& g) {
  SceneModel fresh = build_scene_model(g, m.points);
  m.faces = std::move(fresh.faces);
}

inline std::vector<Face> model_faces(const SceneModel& m) {
  std::vector<Face> out;
  for (const auto& f : m.faces) out.push_back(f.nodes);
  return out;
}

inline BAProblem make_bundle_problem(const Session& s) {
  if (!s.model || !s.trajectory || !s.intrinsics) throw Error(ErrorCode::kEmptyModel, "no reconstruction; run reconstruct first");
  BAProblem p;
  p.intrinsics = *s.intrinsics;
  p.poses = s.trajectory->poses;
  p.points = s.model->points;
  for (int f = 0; f < s.trajectory->size(); ++f) {
    const int k = s.trajectory->first_frame + f;
    if (!s.tracks.has_frame(k)) continue;
    for (const auto& [id, tp] : s.tracks.frame(k))
      if (p.points.contains(id) && detail::usable(tp)) p.observations.push_back({f, id, tp.position});
  }
  p.faces = model_faces(*s.model);
  p.relations = s.relations;
  return p;
}

struct ReconstructStageReport {
  double focal = 0.0;
  bool searched = false;
  std::vector<int> keyframes;
  int points = 0;
  int excluded = 0;
  int faces = 0;
  double sfm_rms = 0.0;  // before the baseline bundle solve
  double rms = 0.0;
  int bundle_iterations = 0;
};

inline ReconstructStageReport run_reconstruct(Session& s, const PipelineConfig& cfg) {
  if (s.tracks.empty()) throw Error(ErrorCode::kInvalidArgument, "session has no tracks; run track first");
  if (s.graph.faces.empty()) refresh_faces(s);
  ReconstructStageReport r;
  Reconstruction rec;
  if (cfg.focal || s.intrinsics) {
    Intrinsics k = s.intrinsics.value_or(Intrinsics{0.0, 0.5 * s.source.width, 0.5 * s.source.height});
    if (cfg.focal) k = {*cfg.focal, 0.5 * s.source.width, 0.5 * s.source.height};
    rec = reconstruct(s.tracks, k, cfg.sfm);
  } else {
    const double side = s.source.width;
    if (!(side > 0)) throw Error(ErrorCode::kInvalidArgument, "frame size unknown; cannot search focal length");
    const auto grid = focal_grid(cfg.focal_min_factor * side, cfg.focal_max_factor * side, cfg.focal_steps);
    rec = focal_search(s.tracks, grid, s.source.width, s.source.height, cfg.sfm).best;
    r.searched = true;
  }
  s.intrinsics = rec.intrinsics;
  s.trajectory = rec.trajectory;
  SceneModel m = build_scene_model(s.graph, rec.points);
  m.rms_reprojection = rec.observations > 0 ? std::sqrt(rec.total_sq_error / rec.observations) : 0.0;
  s.model = std::move(m);
  s.relations = RelationSet{};
  r.sfm_rms = s.model->rms_reprojection;
  const BAProblem p = make_bundle_problem(s);
  if (!p.observations.empty()) {
    const BAResult base = solve_lm(p, cfg.bundle);
    s.trajectory->poses = base.poses;
    s.model->points = base.points;
    refresh_model_faces(*s.model, s.graph);
    s.model->rms_reprojection =
        std::sqrt(base.report.final_terms.reprojection / (2.0 * static_cast<double>(p.observations.size())));
    r.bundle_iterations = base.report.iterations;
  }
  r.focal = rec.intrinsics.f;
  r.keyframes = rec.keyframes;
  r.points = static_cast<int>(rec.points.size());
  r.excluded = static_cast<int>(rec.excluded.size());
  r.faces = static_cast<int>(s.model->faces.size());
  r.rms = s.model->rms_reprojection;
  return r;
}

struct RelationStageReport {
  int groups = 0;
  int parallel = 0;
  int orthogonal = 0;
  int coplanar = 0;
  int user = 0;
};

inline RelationStageReport summarize(const RelationSet& set) {
  RelationStageReport r;
  r.groups = static_cast<int>(set.groups.size());
  for (const auto& c : set.constraints) {
    if (c.source == RelationSource::kUser) ++r.user;
    if (c.kind == RelationKind::kParallel) ++r.parallel;
    if (c.kind == RelationKind::kOrthogonal) ++r.orthogonal;
    if (c.kind == RelationKind::kCoplanar) ++r.coplanar;
  }
  return r;
}

/// Replaces detected relations; user relations are carried over by face.
inline RelationStageReport run_detect_relations(Session& s, const PipelineConfig& cfg) {
  if (!s.model) throw Error(ErrorCode::kEmptyModel, "no reconstruction; run reconstruct first");
  const auto faces = model_faces(*s.model);
  RelationSet next = detect_relations(face_planes(faces, s.model->points), cfg.relations);
  for (const auto& c : s.relations.constraints) {
    if (c.source != RelationSource::kUser) continue;
    std::vector<int> members = c.members;
    if (c.kind == RelationKind::kOrthogonal)
      for (int& m : members) m = s.relations.groups.at(static_cast<std::size_t>(m)).faces.front();
    try {
      add_user_relation(next, c.kind, members, static_cast<int>(faces.size()));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInvalidAnnotation) throw;
    }
  }
  s.relations = std::move(next);
  return summarize(s.relations);
}

inline const RelationConstraint& run_add_user_relation(Session& s, RelationKind kind, const std::vector<int>& faces) {
  if (!s.model) throw Error(ErrorCode::kEmptyModel, "no reconstruction; run reconstruct first");
  return add_user_relation(s.relations, kind, faces, static_cast<int>(s.model->faces.size()));
}

struct OptimizeStageReport {
  BAReport bundle;
  double rms = 0.0;
  double max_planarity = 0.0;
  int released = 0;
  int active = 0;
};

inline OptimizeStageReport run_optimize(Session& s, const PipelineConfig& cfg) {
  const BAProblem p = make_bundle_problem(s);
  BAResult res = cfg.use_relations
                     ? optimize_with_release(p, cfg.bundle)
                     : solve_lm(p, cfg.bundle, std::vector<bool>(p.relations.constraints.size(), false));
  OptimizeStageReport r;
  r.bundle = res.report;
  s.trajectory->poses = res.poses;
  s.model->points = res.points;
  refresh_model_faces(*s.model, s.graph);
  s.model->optimized = true;
  r.rms = p.observations.empty() ? 0.0
                                 : std::sqrt(res.report.final_terms.reprojection / (2.0 * static_cast<double>(p.observations.size())));
  s.model->rms_reprojection = r.rms;
  if (cfg.use_relations) s.relations = res.relations;
  for (const auto& f : s.model->faces) r.max_planarity = std::max(r.max_planarity, f.planarity_residual);
  r.released = static_cast<int>(res.report.released.size());
  for (const auto& c : s.relations.constraints) r.active += c.active() ? 1 : 0;
  return r;
}

inline void run_export(const Session& s, const std::filesystem::path& obj) {
  if (!s.model) throw Error(ErrorCode::kEmptyModel, "no reconstruction to export");
  export_model(*s.model, s.relations, obj);
}

/// Scene diameter: largest distance between two model points.
inline double scene_diameter(const std::map<NodeId, Point3>& pts) {
  double d = 0.0;
  for (auto a = pts.begin(); a != pts.end(); ++a)
    for (auto b = std::next(a); b != pts.end(); ++b) d = std::max(d, (a->second - b->second).norm());
  return d;
}

/// Writes a synthetic sequence: PNG frames under `dir/frames`, an
/// annotation-only session at `dir/session` and the ground truth at
/// `dir/truth.json` (a full session with exact tracks, poses and points).
inline SynthResult write_synthetic_session(const SynthSpec& spec, const std::filesystem::path& dir) {
  SynthSpec s = spec;
  s.render = true;
  SynthResult r = synth_scene(s);
  std::filesystem::create_directories(dir / "frames");
  for (std::size_t k = 0; k < r.frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.png", k);
    write_png(r.frames[k], dir / "frames" / name);
  }
  Session session;
  session.source = {"frames", static_cast<int>(r.frames.size()), s.width, s.height};
  session.graph = r.truth.graph;
  session.intrinsics = r.truth.intrinsics;
  save_session(session, dir / "session");

  Session truth = session;
  truth.tracks = r.truth.tracks;
  Trajectory traj;
  for (const auto& p : r.truth.poses) traj.poses.push_back(compose_poses(p, r.truth.poses.front().inverse()));
  truth.trajectory = traj;
  std::map<NodeId, Point3> pts;
  for (const auto& [id, x] : r.truth.points) pts[id] = r.truth.poses.front().apply(x);
  truth.model = build_scene_model(truth.graph, pts);
  save_session(truth, dir / "truth.json");
  return r;
}

}  // namespace planarc
