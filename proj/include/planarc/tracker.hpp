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
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/flow.hpp"
#include "planarc/geometry.hpp"
#include "planarc/line_fit.hpp"
#include "planarc/parallel.hpp"
#include "planarc/plane_graph.hpp"
#include "planarc/random.hpp"

namespace planarc {

enum class Provenance { kTracked, kUserCorrected, kBacktraced, kNewlyAdded };

constexpr std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kTracked: return "tracked";
    case Provenance::kUserCorrected: return "user-corrected";
    case Provenance::kBacktraced: return "backtraced";
    case Provenance::kNewlyAdded: return "newly-added";
  }
  return "tracked";
}

inline Provenance provenance_from_string(std::string_view s) {
  if (s == "tracked") return Provenance::kTracked;
  if (s == "user-corrected") return Provenance::kUserCorrected;
  if (s == "backtraced") return Provenance::kBacktraced;
  if (s == "newly-added") return Provenance::kNewlyAdded;
  throw Error(ErrorCode::kCorruptFile, "unknown provenance", std::string(s));
}

struct TrackPoint {
  Point2 position = Point2::Zero();
  double confidence = 0.0;
  Provenance provenance = Provenance::kTracked;

  bool operator==(const TrackPoint&) const = default;
};

using FrameTrack = std::map<NodeId, TrackPoint>;

/// Per-frame corner positions over a contiguous frame range starting at the
/// annotation frame.
class TrackSequence {
 public:
  int first_frame = 0;
  std::vector<FrameTrack> frames;
  // flow score of each corner's first tracked step, used as its lost reference
  std::map<NodeId, double> reference_confidence;

  bool empty() const { return frames.empty(); }
  int last_frame() const { return first_frame + static_cast<int>(frames.size()) - 1; }
  bool has_frame(int k) const { return k >= first_frame && k <= last_frame(); }

  FrameTrack& frame(int k) {
    if (!has_frame(k)) throw Error(ErrorCode::kInvalidArgument, "frame not in track", std::to_string(k));
    return frames[static_cast<std::size_t>(k - first_frame)];
  }
  const FrameTrack& frame(int k) const {
    if (!has_frame(k)) throw Error(ErrorCode::kInvalidArgument, "frame not in track", std::to_string(k));
    return frames[static_cast<std::size_t>(k - first_frame)];
  }

  /// Extends the range so that frame k exists.
  FrameTrack& ensure(int k) {
    if (frames.empty()) first_frame = k;
    if (k < first_frame) throw Error(ErrorCode::kInvalidArgument, "frame before track start", std::to_string(k));
    while (last_frame() < k) frames.emplace_back();
    return frame(k);
  }

  std::optional<TrackPoint> at(int k, NodeId n) const {
    if (!has_frame(k)) return std::nullopt;
    const auto& f = frame(k);
    const auto it = f.find(n);
    if (it == f.end()) return std::nullopt;
    return it->second;
  }

  std::map<NodeId, Point2> positions(int k) const {
    std::map<NodeId, Point2> out;
    for (const auto& [id, tp] : frame(k)) out[id] = tp.position;
    return out;
  }

  bool operator==(const TrackSequence&) const = default;
};

struct TrackerConfig {
  double spacing = 3.0;     // px between segment samples
  int ransac_iters = 100;
  double inlier_tol = 1.5;  // px
  double lost_fraction = 0.1;
  // candidates scoring within this fraction of the best are tied; the one
  // nearest the current estimate wins. 0 selects the plain argmax.
  double candidate_tie_tolerance = 0.1;
  bool robust_refit = true;  // Tukey IRLS on each segment's consensus set

  std::uint64_t seed = 0;
  int threads = 1;
  FlowConfig flow;
};

struct CornerTrack {
  Point2 position = Point2::Zero();
  double confidence = 0.0;
  int candidate = -1;  // winning offset index in row-major 3x3 order
  std::vector<Line2> lines;  // refit segment lines behind `position`
  std::vector<double> line_weights;
};

/// Structure-guided propagation of a single corner hypothesis: samples the
/// segments from `corner` to each neighbor, flow-tracks the samples, refits
/// each segment's line robustly and intersects the lines. The score is the
/// summed flow confidence of all inlier samples.
///
/// `sample_counts` fixes the samples per neighbor segment; when empty the
/// spacing rule is applied to the actual segment lengths.
inline CornerTrack trace_corner(const Point2& corner, std::span<const Point2> neighbors,
                                const Pyramid& src, const Pyramid& dst, const TrackerConfig& cfg,
                                Rng& rng, std::span<const int> sample_counts = {}) {
  if (neighbors.size() < 2)
    throw Error(ErrorCode::kInvalidArgument, "structure tracking needs two or more segments");
  std::vector<Line2> lines;
  std::vector<double> line_weights;
  double score = 0.0;
  for (std::size_t s = 0; s < neighbors.size(); ++s) {
    const Point2& m = neighbors[s];
    const SampledSegment seg = sample_counts.empty()
                                   ? sample_segment(corner, m, cfg.spacing)
                                   : sample_segment_n(corner, m, sample_counts[s]);
    const auto flow = track_points(src, dst, seg.samples, cfg.flow);
    std::vector<Point2> moved;
    std::vector<double> w;
    moved.reserve(flow.size());
    w.reserve(flow.size());
    for (const auto& r : flow) {
      moved.push_back(r.position);
      w.push_back(r.confidence);
    }
    const LineFit fit = fit_line_weighted_ransac(moved, w, cfg.ransac_iters, cfg.inlier_tol, rng);
    lines.push_back(cfg.robust_refit ? refine_line_tukey(moved, w, fit.inliers, fit.line) : fit.line);
    line_weights.push_back(fit.inlier_weight);
    score += fit.inlier_weight;
  }
  CornerTrack out;
  out.position = intersect_lines(lines, line_weights);
  out.confidence = score;
  out.lines = std::move(lines);
  out.line_weights = std::move(line_weights);
  return out;
}

/// Tracks one corner from `src` into `dst` using the 3x3 candidate window
/// around its current position. Among candidates whose score is within the
/// tie tolerance of the best, the one closest to the window center wins,
/// then the higher score, then row-major order.
inline CornerTrack track_corner(const PlaneGraph& graph, const std::map<NodeId, Point2>& frame_state,
                                NodeId node, const Pyramid& src, const Pyramid& dst,
                                const TrackerConfig& cfg) {
  const auto here = frame_state.find(node);
  if (here == frame_state.end())
    throw Error(ErrorCode::kInvalidArgument, "corner has no position in the source frame",
                std::to_string(node));
  if (graph.degree(node) < 2)
    throw Error(ErrorCode::kInvalidAnnotation, "corner has fewer than two incident edges",
                std::to_string(node));
  std::vector<Point2> nbrs;
  for (NodeId m : graph.neighbors(node)) {
    const auto it = frame_state.find(m);
    if (it != frame_state.end()) nbrs.push_back(it->second);
  }
  if (nbrs.size() < 2)
    throw Error(ErrorCode::kCornerLost, "fewer than two neighbor corners are tracked",
                std::to_string(node));
  const Point2 c = here->second;
  // every candidate uses the sample counts of the nominal corner so that
  // summed scores are comparable across the window
  std::vector<int> counts;
  for (const auto& m : nbrs) counts.push_back(segment_sample_count((m - c).norm(), cfg.spacing));

  std::vector<CornerTrack> ok;
  int idx = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx, ++idx) {
      Rng rng(mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(node)),
                       static_cast<std::uint64_t>(src.frame_index) * 16 + idx));
      try {
        CornerTrack t = trace_corner(c + Point2(dx, dy), nbrs, src, dst, cfg, rng, counts);
        t.candidate = idx;
        ok.push_back(std::move(t));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoConsensus && e.code() != ErrorCode::kNearParallel &&
            e.code() != ErrorCode::kInsufficientSupport && e.code() != ErrorCode::kDegenerateSegment)
          throw;
      }
    }
  if (ok.empty())
    throw Error(ErrorCode::kCornerLost, "no candidate produced a consistent corner", std::to_string(node));
  double top = 0.0;
  for (const auto& t : ok) top = std::max(top, t.confidence);
  const double floor = top * (1.0 - std::clamp(cfg.candidate_tie_tolerance, 0.0, 1.0));
  auto ring = [](int i) { return std::abs(i % 3 - 1) + std::abs(i / 3 - 1); };
  const CornerTrack* best = nullptr;
  for (const auto& t : ok) {
    if (t.confidence < floor) continue;
    if (best == nullptr || ring(t.candidate) < ring(best->candidate) ||
        (ring(t.candidate) == ring(best->candidate) && t.confidence > best->confidence))
      best = &t;
  }
  return *best;
}

struct FrameTrackReport {
  int frame = 0;  // destination frame
  std::vector<NodeId> tracked;
  std::vector<NodeId> lost;     // CornerLost; position carried over with confidence 0
  std::vector<NodeId> flagged;  // confidence below the lost fraction of the reference
};

/// Tracks every corner present in frame k into frame k+1.
///
/// Corners are tracked independently (optionally in parallel) and written by
/// a single writer afterwards. Entries already in frame k+1 that came from
/// the user are kept. Corners whose graph neighborhood is not yet populated
/// fall back to plain point flow.
inline FrameTrackReport track_frame(const PlaneGraph& graph, TrackSequence& seq, int k,
                                    const Pyramid& src, const Pyramid& dst, const TrackerConfig& cfg,
                                    std::span<const NodeId> only = {}) {
  if (!seq.has_frame(k)) throw Error(ErrorCode::kInvalidArgument, "frame not populated", std::to_string(k));
  const auto state = seq.positions(k);
  std::vector<NodeId> ids;
  for (const auto& [id, _] : state) {
    if (!graph.nodes.contains(id)) continue;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    ids.push_back(id);
  }

  struct Outcome {
    CornerTrack track;
    bool lost = false;
  };
  std::vector<Outcome> results(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t i) {
    const NodeId id = ids[i];
    std::size_t present = 0;
    for (NodeId m : graph.neighbors(id)) present += state.contains(m) ? 1 : 0;
    try {
      if (present >= 2) {
        results[i].track = track_corner(graph, state, id, src, dst, cfg);
      } else {
        const FlowResult r = track_point(src, dst, state.at(id), cfg.flow);
        if (r.lost()) throw Error(ErrorCode::kCornerLost, "point flow lost", std::to_string(id));
        results[i].track = {r.position, r.confidence, 4, {}, {}};
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kCornerLost) throw;
      results[i].lost = true;
      results[i].track = {state.at(id), 0.0, -1, {}, {}};
    }
  });

  FrameTrackReport report;
  report.frame = k + 1;
  FrameTrack& next = seq.ensure(k + 1);
  const FrameTrack& cur = seq.frame(k);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const NodeId id = ids[i];
    const auto existing = next.find(id);
    if (existing != next.end() && (existing->second.provenance == Provenance::kUserCorrected ||
                                   existing->second.provenance == Provenance::kNewlyAdded))
      continue;
    const Outcome& o = results[i];
    next[id] = {o.track.position, o.track.confidence, Provenance::kTracked};
    if (o.lost) {
      report.lost.push_back(id);
      continue;
    }
    report.tracked.push_back(id);
    const Provenance from = cur.at(id).provenance;
    if (!seq.reference_confidence.contains(id) || from == Provenance::kNewlyAdded ||
        from == Provenance::kUserCorrected)
      seq.reference_confidence[id] = o.track.confidence;
    if (o.track.confidence < cfg.lost_fraction * seq.reference_confidence[id]) report.flagged.push_back(id);
  }
  return report;
}

}  // namespace planarc
