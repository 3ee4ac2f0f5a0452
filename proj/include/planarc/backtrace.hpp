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
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/flow.hpp"
#include "planarc/geometry.hpp"
#include "planarc/parallel.hpp"
#include "planarc/plane_graph.hpp"
#include "planarc/pyramid_cache.hpp"
#include "planarc/random.hpp"
#include "planarc/tracker.hpp"

namespace planarc {

inline constexpr double kLostLinkWeight = 1e12;

struct BacktraceConfig {
  bool max_schedule = false;  // read the window schedule as max{2(k-i)+3, cap}
  int window_cap = 15;
  int endpoint_window = 3;
  TrackerConfig tracker;
};

/// Per-side window size at frame k of a back-trace starting at frame i.
inline int window_size(int k, int i, bool max_schedule = false, int cap = 15) {
  if (k < i) throw Error(ErrorCode::kInvalidArgument, "window frame precedes the trace start", std::to_string(k));
  const int grown = 2 * (k - i) + 3;
  return max_schedule ? std::max(grown, cap) : std::min(grown, cap);
}

/// Weight of the link from a candidate whose trace landed at `traced` with
/// confidence `f` to candidate `q` of the next layer.
inline double link_weight(const Point2& traced, const Point2& q, double f) {
  if (!(f > 0.0)) return kLostLinkWeight;
  return (q - traced).squaredNorm() / f;
}

struct Layer {
  int frame = 0;
  Point2 center = Point2::Zero();
  int size = 1;  // per side
  std::vector<Point2> candidates;
  // trace of each candidate into the next layer's frame
  std::vector<Point2> traced;
  std::vector<double> confidence;
};

/// Candidates per layer plus the dense link weights between consecutive
/// layers; links[k](a, b) joins candidate a of layer k to candidate b of k+1.
struct LayeredGraph {
  std::vector<Layer> layers;
  std::vector<Eigen::MatrixXd> links;
  std::size_t source = 0;  // pinned candidate in the first layer
  std::size_t target = 0;  // pinned candidate in the last layer
};

struct PathResult {
  std::vector<std::size_t> indices;  // one candidate per layer
  std::vector<Point2> points;
  double cost = 0.0;
  std::size_t relaxations = 0;
};

/// Square grid of size x size candidates centered on `c`, in row-major order.
inline std::vector<Point2> window_candidates(const Point2& c, int size) {
  const int h = size / 2;
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(size * size));
  for (int dy = -h; dy <= h; ++dy)
    for (int dx = -h; dx <= h; ++dx) out.emplace_back(c.x() + dx, c.y() + dy);
  return out;
}

/// Layer-by-layer relaxation from the pinned source to the pinned target.
/// Ties keep the earliest predecessor in scan order.
inline PathResult shortest_path(const LayeredGraph& g) {
  const std::size_t n = g.layers.size();
  if (n < 2 || g.links.size() + 1 != n) throw Error(ErrorCode::kInvalidArgument, "layered graph needs two or more layers");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dist(n);
  std::vector<std::vector<std::size_t>> pred(n);
  dist[0].assign(g.links[0].rows(), inf);
  if (g.source >= dist[0].size()) throw Error(ErrorCode::kInvalidArgument, "source outside first layer");
  dist[0][g.source] = 0.0;
  PathResult out;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Eigen::MatrixXd& w = g.links[k];
    if (static_cast<std::size_t>(w.rows()) != dist[k].size() ||
        (k + 1 < g.links.size() && w.cols() != g.links[k + 1].rows()))
      throw Error(ErrorCode::kInvalidArgument, "link matrix shape mismatch", std::to_string(k));
    dist[k + 1].assign(static_cast<std::size_t>(w.cols()), inf);
    pred[k + 1].assign(static_cast<std::size_t>(w.cols()), 0);
    for (Eigen::Index a = 0; a < w.rows(); ++a) {
      const double da = dist[k][static_cast<std::size_t>(a)];
      if (da == inf) continue;
      for (Eigen::Index b = 0; b < w.cols(); ++b) {
        ++out.relaxations;
        const double cand = da + w(a, b);
        if (cand < dist[k + 1][static_cast<std::size_t>(b)]) {
          dist[k + 1][static_cast<std::size_t>(b)] = cand;
          pred[k + 1][static_cast<std::size_t>(b)] = static_cast<std::size_t>(a);
        }
      }
    }
  }
  if (g.target >= dist[n - 1].size()) throw Error(ErrorCode::kInvalidArgument, "target outside last layer");
  if (dist[n - 1][g.target] == inf) throw Error(ErrorCode::kNoPath, "target unreachable");
  out.cost = dist[n - 1][g.target];
  out.indices.assign(n, 0);
  out.indices[n - 1] = g.target;
  for (std::size_t k = n - 1; k > 0; --k) out.indices[k - 1] = pred[k][out.indices[k]];
  for (std::size_t k = 0; k < n; ++k) {
    const auto& cands = g.layers[k].candidates;
    out.points.push_back(out.indices[k] < cands.size() ? cands[out.indices[k]] : Point2::Zero());
  }
  return out;
}

/// Confidence-weighted mean of the traced points; zero-confidence traces are
/// ignored.
inline Point2 weighted_center(std::span<const Point2> traced, std::span<const double> confidence) {
  double sw = 0.0;
  Point2 c = Point2::Zero();
  for (std::size_t k = 0; k < traced.size(); ++k)
    if (confidence[k] > 0.0) {
      sw += confidence[k];
      c += confidence[k] * traced[k];
    }
  if (!(sw > 0.0)) throw Error(ErrorCode::kAllCandidatesLost, "every candidate trace was lost");
  return c / sw;
}

/// Traces every candidate of `layer` into frame layer.frame + 1 with the
/// structure-guided propagation, using the neighbor corners' positions from
/// `seq`. Fills layer.traced / layer.confidence and returns the
/// confidence-weighted mean of the traced points.
inline Point2 propagate_window(Layer& layer, const PlaneGraph& graph, const TrackSequence& seq, NodeId node,
                               const Pyramid& src, const Pyramid& dst, const TrackerConfig& cfg) {
  const auto state = seq.positions(layer.frame);
  std::vector<Point2> nbrs;
  for (NodeId m : graph.neighbors(node)) {
    const auto it = state.find(m);
    if (it != state.end()) nbrs.push_back(it->second);
  }
  std::vector<int> counts;
  for (const auto& m : nbrs) counts.push_back(segment_sample_count((m - layer.center).norm(), cfg.spacing));

  const std::size_t n = layer.candidates.size();
  layer.traced.assign(n, Point2::Zero());
  layer.confidence.assign(n, 0.0);
  parallel_for(n, cfg.threads, [&](std::size_t c) {
    const Point2& p = layer.candidates[c];
    layer.traced[c] = p;
    try {
      if (nbrs.size() >= 2) {
        Rng rng(mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(node)),
                         static_cast<std::uint64_t>(layer.frame) * 1024 + c));
        const CornerTrack t = trace_corner(p, nbrs, src, dst, cfg, rng, counts);
        layer.traced[c] = t.position;
        layer.confidence[c] = t.confidence;
      } else {
        const FlowResult r = track_point(src, dst, p, cfg.flow);
        layer.traced[c] = r.position;
        layer.confidence[c] = r.confidence;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoConsensus && e.code() != ErrorCode::kNearParallel &&
          e.code() != ErrorCode::kInsufficientSupport && e.code() != ErrorCode::kDegenerateSegment)
        throw;
    }
  });
  try {
    return weighted_center(layer.traced, layer.confidence);
  } catch (const Error&) {
    throw Error(ErrorCode::kAllCandidatesLost, "every candidate trace was lost", std::to_string(layer.frame));
  }
}

inline Eigen::MatrixXd layer_links(const Layer& from, const Layer& to) {
  Eigen::MatrixXd w(static_cast<Eigen::Index>(from.candidates.size()),
                    static_cast<Eigen::Index>(to.candidates.size()));
  for (std::size_t a = 0; a < from.candidates.size(); ++a)
    for (std::size_t b = 0; b < to.candidates.size(); ++b)
      w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          link_weight(from.traced[a], to.candidates[b], from.confidence[a]);
  return w;
}

/// Builds the layered graph for `node` between trusted frame i and the
/// corrected position at frame j.
inline LayeredGraph build_layered_graph(const PlaneGraph& graph, const TrackSequence& seq, NodeId node, int i,
                                        int j, const Point2& corrected, PyramidCache& pyramids,
                                        const BacktraceConfig& cfg) {
  if (i >= j) throw Error(ErrorCode::kInvalidArgument, "back-trace needs i < j");
  const auto start = seq.at(i, node);
  if (!start) throw Error(ErrorCode::kInvalidArgument, "corner has no position in frame i", std::to_string(node));
  LayeredGraph g;
  Layer first;
  first.frame = i;
  first.center = start->position;
  first.size = cfg.endpoint_window;
  first.candidates = window_candidates(first.center, first.size);
  g.source = first.candidates.size() / 2;
  g.layers.push_back(std::move(first));
  for (int k = i; k < j; ++k) {
    Layer& cur = g.layers.back();
    const auto src = pyramids.get(k);
    const auto dst = pyramids.get(k + 1);
    const Point2 next_center = propagate_window(cur, graph, seq, node, *src, *dst, cfg.tracker);
    Layer next;
    next.frame = k + 1;
    if (k + 1 == j) {
      next.center = corrected;
      next.size = cfg.endpoint_window;
    } else {
      next.center = next_center;
      next.size = window_size(k + 1, i, cfg.max_schedule, cfg.window_cap);
    }
    next.candidates = window_candidates(next.center, next.size);
    g.links.push_back(layer_links(g.layers.back(), next));
    g.layers.push_back(std::move(next));
  }
  g.target = g.layers.back().candidates.size() / 2;
  return g;
}

struct CorrectionReport {
  PathResult path;
  std::vector<int> retracked;  // frames after j whose position was re-tracked
};

/// Replaces the corner's positions in frames i+1..j with the back-traced
/// path ending at the user correction, then re-tracks it forward past j.
inline CorrectionReport apply_correction(const PlaneGraph& graph, TrackSequence& seq, NodeId node, int i, int j,
                                         const Point2& corrected, PyramidCache& pyramids,
                                         const BacktraceConfig& cfg = {}) {
  if (i >= j) throw Error(ErrorCode::kInvalidArgument, "correction frame must follow the trusted frame");
  if (!seq.has_frame(i) || !seq.at(i, node))
    throw Error(ErrorCode::kInvalidArgument, "corner has no position in the trusted frame", std::to_string(node));
  if (j >= pyramids.frame_count()) throw Error(ErrorCode::kInvalidArgument, "frame out of range", std::to_string(j));
  if (!pyramids.frame(j).contains(corrected))
    throw Error(ErrorCode::kInvalidAnnotation, "corrected point outside the frame", std::to_string(node));
  seq.ensure(j);

  CorrectionReport report;
  LayeredGraph g;
  try {
    g = build_layered_graph(graph, seq, node, i, j, corrected, pyramids, cfg);
    report.path = shortest_path(g);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kAllCandidatesLost) throw Error(ErrorCode::kNoPath, e.what(), std::to_string(node));
    throw;
  }
  for (int k = i + 1; k < j; ++k) {
    const std::size_t layer = static_cast<std::size_t>(k - i);
    const double conf = g.layers[layer - 1].confidence[report.path.indices[layer - 1]];
    seq.frame(k)[node] = {report.path.points[layer], conf, Provenance::kBacktraced};
  }
  seq.frame(j)[node] = {corrected, 0.0, Provenance::kUserCorrected};

  const NodeId only[] = {node};
  for (int k = j; k < seq.last_frame(); ++k) {
    const auto next = seq.at(k + 1, node);
    if (next && next->provenance == Provenance::kUserCorrected) break;
    const auto src = pyramids.get(k);
    const auto dst = pyramids.get(k + 1);
    track_frame(graph, seq, k, *src, *dst, cfg.tracker, only);
    report.retracked.push_back(k + 1);
  }
  return report;
}

}  // namespace planarc
