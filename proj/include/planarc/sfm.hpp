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
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "planarc/error.hpp"
#include "planarc/geometry.hpp"
#include "planarc/parallel.hpp"
#include "planarc/tracker.hpp"

namespace planarc {

struct SfmConfig {
  int keyframe_stride = 5;
  double min_parallax_deg = 0.05;  // below this ray spread a node is not triangulated
  double rank_tol = 1e-10;
  int threads = 1;
};

/// Per-frame world-to-camera poses; frame first_frame is the world.
struct Trajectory {
  int first_frame = 0;
  std::vector<Pose> poses;

  const Pose& at(int k) const { return poses.at(static_cast<std::size_t>(k - first_frame)); }
  int size() const { return static_cast<int>(poses.size()); }

  bool operator==(const Trajectory&) const = default;
};

struct Reconstruction {
  Intrinsics intrinsics;
  Trajectory trajectory;
  std::vector<int> keyframes;
  std::map<NodeId, Point3> points;
  std::map<NodeId, double> residuals;  // RMS reprojection px per node
  std::vector<NodeId> excluded;        // not triangulated
  double total_sq_error = 0.0;         // px^2 over all used observations
  int observations = 0;
};

namespace detail {

// isotropic normalization: centroid to the origin, mean distance sqrt(2)
inline Mat3 hartley(std::span<const Point2> pts) {
  Point2 c = Point2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const auto& p : pts) d += (p - c).norm();
  d /= static_cast<double>(pts.size());
  const double s = d > 0.0 ? std::sqrt(2.0) / d : 1.0;
  Mat3 t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

inline bool usable(const TrackPoint& tp) {
  return !(tp.provenance == Provenance::kTracked && tp.confidence <= 0.0);
}

}  // namespace detail

/// Essential matrix from correspondences x2^T E x1 = 0 where X2 = R X1 + t.
inline Mat3 eight_point(std::span<const Point2> x1, std::span<const Point2> x2, const Intrinsics& k,
                        double rank_tol = 1e-10) {
  if (x1.size() != x2.size()) throw Error(ErrorCode::kInvalidArgument, "correspondence lists differ in length");
  if (x1.size() < 8) throw Error(ErrorCode::kDegenerateConfiguration, "eight-point needs eight correspondences");
  std::vector<Point2> n1, n2;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    n1.push_back(k.normalize(x1[i]));
    n2.push_back(k.normalize(x2[i]));
  }
  const Mat3 t1 = detail::hartley(n1), t2 = detail::hartley(n2);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n1.size()), 9);
  for (std::size_t i = 0; i < n1.size(); ++i) {
    const Point3 p = t1 * n1[i].homogeneous();
    const Point3 q = t2 * n2[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(i);
    for (int u = 0; u < 3; ++u)
      for (int v = 0; v < 3; ++v) a(r, 3 * u + v) = q(u) * p(v);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(7) / sv(0) < rank_tol)
    throw Error(ErrorCode::kDegenerateConfiguration, "design matrix has rank below eight");
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Mat3 en;
  en << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  const Mat3 raw = t2.transpose() * en * t1;
  Eigen::JacobiSVD<Mat3> s2(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return s2.matrixU() * Eigen::Vector3d(1, 1, 0).asDiagonal() * s2.matrixV().transpose();
}

/// Linear two-view triangulation in the first camera's frame for X2 = R X1 + t,
/// from normalized image coordinates.
inline Point3 triangulate_two_view(const Point2& n1, const Point2& n2, const Pose& rel) {
  Eigen::Matrix<double, 4, 4> a;
  Eigen::Matrix<double, 3, 4> p1 = Eigen::Matrix<double, 3, 4>::Zero();
  p1.leftCols<3>().setIdentity();
  Eigen::Matrix<double, 3, 4> p2;
  p2.leftCols<3>() = rel.rotation;
  p2.col(3) = rel.translation;
  a.row(0) = n1.x() * p1.row(2) - p1.row(0);
  a.row(1) = n1.y() * p1.row(2) - p1.row(1);
  a.row(2) = n2.x() * p2.row(2) - p2.row(0);
  a.row(3) = n2.y() * p2.row(2) - p2.row(1);
  for (int r = 0; r < 4; ++r) a.row(r).normalize();
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  return x.head<3>() / x(3);
}

/// Relative pose (unit translation) of camera 2 w.r.t. camera 1 chosen among
/// the four decompositions of E by cheirality.
inline Pose decompose_essential(const Mat3& e, std::span<const Point2> x1, std::span<const Point2> x2,
                                const Intrinsics& k) {
  if (x1.empty() || x1.size() != x2.size())
    throw Error(ErrorCode::kInvalidArgument, "decomposition needs matching correspondences");
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 rs[2] = {u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Point3 tu = u.col(2).normalized();
  std::vector<Point2> n1, n2;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    n1.push_back(k.normalize(x1[i]));
    n2.push_back(k.normalize(x2[i]));
  }
  Pose best;
  int best_count = -1;
  int ties = 0;
  for (const Mat3& r : rs)
    for (double sign : {1.0, -1.0}) {
      const Pose cand{r, sign * tu};
      int count = 0;
      for (std::size_t i = 0; i < n1.size(); ++i) {
        const Point3 p = triangulate_two_view(n1[i], n2[i], cand);
        if (!p.allFinite()) continue;
        const Point3 q = cand.apply(p);
        if (p.z() > 0 && q.z() > 0) ++count;
      }
      if (count > best_count) {
        best = cand;
        best_count = count;
        ties = 1;
      } else if (count == best_count) {
        ++ties;
      }
    }
  if (2 * best_count <= static_cast<int>(n1.size()) || ties > 1)
    throw Error(ErrorCode::kCheiralityAmbiguous, "no decomposition places a strict majority in front");
  return best;
}

/// World poses by left-composition of consecutive relatives; relative k is
/// scaled by scales[k] when given.
inline std::vector<Pose> chain_poses(std::span<const Pose> relatives, std::span<const double> scales = {}) {
  std::vector<Pose> out{Pose::identity()};
  for (std::size_t k = 0; k < relatives.size(); ++k) {
    Pose rel = relatives[k];
    if (!scales.empty()) rel.translation *= scales[k];
    out.push_back(compose_poses(rel, out.back()));
  }
  return out;
}

/// Multi-view linear triangulation from pixel observations.
inline Point3 triangulate_dlt(std::span<const Point2> px, std::span<const Pose> poses, const Intrinsics& k) {
  Eigen::MatrixXd a(2 * static_cast<Eigen::Index>(px.size()), 4);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const Point2 n = k.normalize(px[i]);
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = poses[i].rotation;
    p.col(3) = poses[i].translation;
    const auto r = 2 * static_cast<Eigen::Index>(i);
    a.row(r) = (n.x() * p.row(2) - p.row(0)).normalized();
    a.row(r + 1) = (n.y() * p.row(2) - p.row(1)).normalized();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  return x.head<3>() / x(3);
}

struct Triangulation {
  std::map<NodeId, Point3> points;
  std::map<NodeId, double> residuals;
  std::vector<NodeId> excluded;
  double total_sq_error = 0.0;
  int observations = 0;
};

/// Triangulates every node observed in two or more frames with a pose.
/// Nodes whose rays spread less than the parallax threshold, or that land
/// behind an observing camera, are excluded and reported.
inline Triangulation triangulate(const TrackSequence& tracks, const Trajectory& traj, const Intrinsics& k,
                                 double min_parallax_deg = 0.05) {
  std::map<NodeId, std::pair<std::vector<Point2>, std::vector<Pose>>> obs;
  for (int f = traj.first_frame; f < traj.first_frame + traj.size(); ++f) {
    if (!tracks.has_frame(f)) continue;
    for (const auto& [id, tp] : tracks.frame(f)) {
      if (!detail::usable(tp)) continue;
      obs[id].first.push_back(tp.position);
      obs[id].second.push_back(traj.at(f));
    }
  }
  Triangulation out;
  const double min_angle = min_parallax_deg * std::numbers::pi / 180.0;
  for (const auto& [id, o] : obs) {
    const auto& [px, poses] = o;
    double spread = 0.0;
    std::vector<Point3> rays;
    for (std::size_t i = 0; i < px.size(); ++i)
      rays.push_back(poses[i].rotation.transpose() * k.normalize(px[i]).homogeneous().normalized());
    for (std::size_t i = 0; i < rays.size(); ++i)
      for (std::size_t j = i + 1; j < rays.size(); ++j)
        spread = std::max(spread, std::acos(std::clamp(rays[i].dot(rays[j]), -1.0, 1.0)));
    if (px.size() < 2 || spread < min_angle) {
      out.excluded.push_back(id);
      continue;
    }
    const Point3 x = triangulate_dlt(px, poses, k);
    double ss = 0.0;
    bool ok = x.allFinite();
    for (std::size_t i = 0; ok && i < px.size(); ++i) {
      const Point3 c = poses[i].apply(x);
      if (c.z() <= 0.0) {
        ok = false;
        break;
      }
      ss += (k.denormalize(c.hnormalized()) - px[i]).squaredNorm();
    }
    if (!ok) {
      out.excluded.push_back(id);
      continue;
    }
    out.points[id] = x;
    out.residuals[id] = std::sqrt(ss / static_cast<double>(px.size()));
    out.total_sq_error += ss;
    out.observations += static_cast<int>(px.size());
  }
  return out;
}

/// Camera pose from 3D-2D correspondences: normalized linear resection
/// followed by Gauss-Newton on the reprojection error.
inline Pose resect(std::span<const Point3> xs, std::span<const Point2> px, const Intrinsics& k, double rank_tol = 1e-10) {
  if (xs.size() < 6 || xs.size() != px.size())
    throw Error(ErrorCode::kDegenerateConfiguration, "resection needs six correspondences");
  Point3 c = Point3::Zero();
  for (const auto& x : xs) c += x;
  c /= static_cast<double>(xs.size());
  double d = 0.0;
  for (const auto& x : xs) d += (x - c).norm();
  d /= static_cast<double>(xs.size());
  const double s = d > 0.0 ? std::sqrt(3.0) / d : 1.0;
  Eigen::MatrixXd a(2 * static_cast<Eigen::Index>(xs.size()), 12);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Eigen::Vector4d xh = (s * (xs[i] - c)).homogeneous();
    const Point2 n = k.normalize(px[i]);
    const auto r = 2 * static_cast<Eigen::Index>(i);
    a.row(r) << xh.transpose(), Eigen::RowVector4d::Zero(), -n.x() * xh.transpose();
    a.row(r + 1) << Eigen::RowVector4d::Zero(), xh.transpose(), -n.y() * xh.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(10) / sv(0) < rank_tol)
    throw Error(ErrorCode::kDegenerateConfiguration, "resection system has rank below eleven");
  const Eigen::VectorXd v = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> p;
  p << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8), v(9), v(10), v(11);
  // undo the point normalization: X' = s (X - c)
  Eigen::Matrix4d tn = Eigen::Matrix4d::Identity();
  tn.topLeftCorner<3, 3>() *= s;
  tn.topRightCorner<3, 1>() = -s * c;
  p = p * tn;
  int front = 0;
  for (const auto& x : xs) front += (p * x.homogeneous()).z() > 0 ? 1 : -1;
  if (front < 0) p = -p;
  Eigen::JacobiSVD<Mat3> rs(p.leftCols<3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Pose pose;
  pose.rotation = rs.matrixU() * rs.matrixV().transpose();
  if (pose.rotation.determinant() < 0)
    throw Error(ErrorCode::kDegenerateConfiguration, "resection produced a reflection");
  pose.translation = p.col(3) / rs.singularValues().mean();

  for (int it = 0; it < 20; ++it) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Point3 q = pose.apply(xs[i]);
      if (q.z() <= 0.0) continue;
      const Point2 e = q.hnormalized() - k.normalize(px[i]);
      Eigen::Matrix<double, 2, 3> dp;
      dp << 1 / q.z(), 0, -q.x() / (q.z() * q.z()), 0, 1 / q.z(), -q.y() / (q.z() * q.z());
      Eigen::Matrix<double, 3, 6> dq;
      dq.leftCols<3>() = -skew(pose.rotation * xs[i]);
      dq.rightCols<3>().setIdentity();
      const Eigen::Matrix<double, 2, 6> j = dp * dq;
      h += j.transpose() * j;
      g += j.transpose() * e;
    }
    const Eigen::Matrix<double, 6, 1> step = -h.ldlt().solve(g);
    if (!step.allFinite()) break;
    pose.rotation = so3_exp(step.head<3>()) * pose.rotation;
    pose.translation += step.tail<3>();
    if (step.norm() < 1e-12) break;
  }
  return pose;
}

/// Keyframes 0, s, 2s, ... over [first, last], always including last.
inline std::vector<int> keyframe_indices(int first, int last, int stride) {
  if (stride < 1) throw Error(ErrorCode::kInvalidArgument, "keyframe stride must be positive");
  std::vector<int> out;
  for (int k = first; k <= last; k += stride) out.push_back(k);
  if (out.back() != last) out.push_back(last);
  return out;
}

namespace detail {

struct PairData {
  std::vector<NodeId> ids;
  std::vector<Point2> x1, x2;
};

inline PairData pair_data(const TrackSequence& t, int a, int b) {
  PairData d;
  for (const auto& [id, tp] : t.frame(a)) {
    const auto other = t.at(b, id);
    if (!other || !usable(tp) || !usable(*other)) continue;
    d.ids.push_back(id);
    d.x1.push_back(tp.position);
    d.x2.push_back(other->position);
  }
  return d;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

inline Pose interpolate_pose(const Pose& a, const Pose& b, double s) {
  const Eigen::Quaterniond qa(a.rotation), qb(b.rotation);
  Pose p;
  p.rotation = qa.slerp(s, qb).toRotationMatrix();
  const Point3 c = (1 - s) * a.center() + s * b.center();
  p.translation = -p.rotation * c;
  return p;
}

}  // namespace detail

/// Scale of each keyframe pair's unit translation so that the structure
/// shared with the previous pair has the same median depth in the shared
/// keyframe. The first pair keeps unit scale.
inline std::vector<double> propagate_scale(const TrackSequence& t, std::span<const int> keyframes,
                                           std::span<const Pose> relatives, const Intrinsics& k) {
  std::vector<double> scales(relatives.size(), 1.0);
  for (std::size_t p = 1; p < relatives.size(); ++p) {
    const int a = keyframes[p - 1], b = keyframes[p], c = keyframes[p + 1];
    std::vector<double> prev, next;
    for (const auto& [id, tb] : t.frame(b)) {
      const auto ta = t.at(a, id), tc = t.at(c, id);
      if (!ta || !tc || !detail::usable(*ta) || !detail::usable(tb) || !detail::usable(*tc)) continue;
      const Point3 x_ab = triangulate_two_view(k.normalize(ta->position), k.normalize(tb.position), relatives[p - 1]);
      const Point3 x_bc = triangulate_two_view(k.normalize(tb.position), k.normalize(tc->position), relatives[p]);
      const double d_prev = relatives[p - 1].apply(x_ab).z();
      const double d_next = x_bc.z();
      if (d_prev > 0 && d_next > 0 && std::isfinite(d_prev) && std::isfinite(d_next)) {
        prev.push_back(d_prev);
        next.push_back(d_next);
      }
    }
    if (prev.empty())
      throw Error(ErrorCode::kDegenerateConfiguration, "no structure shared across keyframe pairs", std::to_string(b));
    scales[p] = scales[p - 1] * detail::median(prev) / detail::median(next);
  }
  return scales;
}

/// Keyframe eight-point chain, triangulation, per-frame resection and final
/// triangulation over every frame of `tracks`.
inline Reconstruction reconstruct(const TrackSequence& tracks, const Intrinsics& k, const SfmConfig& cfg = {}) {
  if (tracks.empty()) throw Error(ErrorCode::kEmptySequence, "no tracked frames");
  Reconstruction out;
  out.intrinsics = k;
  out.keyframes = keyframe_indices(tracks.first_frame, tracks.last_frame(), cfg.keyframe_stride);
  if (out.keyframes.size() < 2) throw Error(ErrorCode::kInsufficientBaseline, "a single frame has no baseline");
  const std::size_t pairs = out.keyframes.size() - 1;
  std::vector<Pose> rel(pairs);
  parallel_for(pairs, cfg.threads, [&](std::size_t p) {
    const auto d = detail::pair_data(tracks, out.keyframes[p], out.keyframes[p + 1]);
    const Mat3 e = eight_point(d.x1, d.x2, k, cfg.rank_tol);
    rel[p] = decompose_essential(e, d.x1, d.x2, k);
  });
  const auto scales = propagate_scale(tracks, out.keyframes, rel, k);
  const auto key_poses = chain_poses(rel, scales);

  Trajectory keys;
  keys.first_frame = tracks.first_frame;
  keys.poses.assign(static_cast<std::size_t>(tracks.last_frame() - tracks.first_frame + 1), Pose::identity());
  for (std::size_t i = 0; i < out.keyframes.size(); ++i)
    keys.poses[static_cast<std::size_t>(out.keyframes[i] - tracks.first_frame)] = key_poses[i];

  // structure from keyframes only
  TrackSequence key_tracks;
  key_tracks.first_frame = tracks.first_frame;
  key_tracks.frames.resize(tracks.frames.size());
  for (int f : out.keyframes) key_tracks.frame(f) = tracks.frame(f);
  const Triangulation key_structure = triangulate(key_tracks, keys, k, cfg.min_parallax_deg);

  Trajectory traj = keys;
  for (std::size_t i = 0; i + 1 < out.keyframes.size(); ++i) {
    const int a = out.keyframes[i], b = out.keyframes[i + 1];
    for (int f = a + 1; f < b; ++f) {
      const std::size_t slot = static_cast<std::size_t>(f - tracks.first_frame);
      std::vector<Point3> xs;
      std::vector<Point2> px;
      for (const auto& [id, tp] : tracks.frame(f)) {
        const auto it = key_structure.points.find(id);
        if (it == key_structure.points.end() || !detail::usable(tp)) continue;
        xs.push_back(it->second);
        px.push_back(tp.position);
      }
      try {
        traj.poses[slot] = resect(xs, px, k, cfg.rank_tol);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
        traj.poses[slot] = detail::interpolate_pose(keys.at(a), keys.at(b), double(f - a) / double(b - a));
      }
    }
  }
  out.trajectory = traj;
  Triangulation tri = triangulate(tracks, traj, k, cfg.min_parallax_deg);
  out.points = std::move(tri.points);
  out.residuals = std::move(tri.residuals);
  out.excluded = std::move(tri.excluded);
  out.total_sq_error = tri.total_sq_error;
  out.observations = tri.observations;
  return out;
}

/// Geometric grid of n focal values over [lo, hi].
inline std::vector<double> focal_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0) || !(hi >= lo)) throw Error(ErrorCode::kInvalidArgument, "bad focal grid");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo * std::pow(hi / lo, double(i) / (n - 1)));
  return out;
}

struct FocalSearchResult {
  Reconstruction best;
  std::vector<double> focals;
  std::vector<double> scores;  // +inf for degenerate candidates
  std::size_t chosen = 0;
};

/// Runs the reconstruction for each candidate focal length (principal point
/// at the image center) and keeps the one with the least total squared
/// reprojection error. Observations of excluded nodes are charged the
/// squared image diagonal so candidates compare over the same data.
inline FocalSearchResult focal_search(const TrackSequence& tracks, std::span<const double> focals, int width,
                                      int height, const SfmConfig& cfg = {}) {
  if (focals.empty()) throw Error(ErrorCode::kInvalidArgument, "no focal candidates");
  FocalSearchResult out;
  out.focals.assign(focals.begin(), focals.end());
  out.scores.assign(focals.size(), std::numeric_limits<double>::infinity());
  std::vector<Reconstruction> recs(focals.size());
  const double penalty = double(width) * width + double(height) * height;
  SfmConfig inner = cfg;
  inner.threads = 1;
  parallel_for(focals.size(), cfg.threads, [&](std::size_t i) {
    const Intrinsics k{focals[i], 0.5 * width, 0.5 * height};
    try {
      recs[i] = reconstruct(tracks, k, inner);
      int excluded_obs = 0;
      for (NodeId id : recs[i].excluded)
        for (const auto& f : tracks.frames) {
          const auto it = f.find(id);
          if (it != f.end() && detail::usable(it->second)) ++excluded_obs;
        }
      out.scores[i] = recs[i].total_sq_error + penalty * excluded_obs;
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::kDegenerateConfiguration:
        case ErrorCode::kCheiralityAmbiguous:
        case ErrorCode::kInsufficientBaseline:
          break;
        default:
          throw;
      }
    }
  });
  bool any = false;
  for (std::size_t i = 0; i < focals.size(); ++i)
    if (std::isfinite(out.scores[i]) && (!any || out.scores[i] < out.scores[out.chosen])) {
      out.chosen = i;
      any = true;
    }
  if (!any) throw Error(ErrorCode::kAllCandidatesDegenerate, "every focal candidate failed");
  out.best = std::move(recs[out.chosen]);
  return out;
}

}  // namespace planarc
