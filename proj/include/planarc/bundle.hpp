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
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "planarc/error.hpp"
#include "planarc/geometry.hpp"
#include "planarc/plane_graph.hpp"
#include "planarc/relations.hpp"

namespace planarc {

struct BAConfig {
  double lambda_plane = 1e2;
  double lambda_rel = 1e4;
  double tau_release = 1.05;
  // reprojection cost slack (px^2 per observation) added to the release test
  double release_abs_eps = 1e-6;
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
  double gradient_tolerance = 1e-12;
  double step_tolerance = 1e-12;  // relative to the parameter norm
  bool planarity = true;
};

struct BAObservation {
  int frame = 0;
  NodeId node = 0;
  Point2 px = Point2::Zero();

  bool operator==(const BAObservation&) const = default;
};

/// Poses are world-to-camera per frame index; points are keyed by node.
struct BAProblem {
  Intrinsics intrinsics;
  std::vector<Pose> poses;
  std::map<NodeId, Point3> points;
  std::vector<BAObservation> observations;
  std::vector<Face> faces;
  RelationSet relations;
};

struct BATermCosts {
  double reprojection = 0.0;
  double planarity = 0.0;
  std::vector<double> relation;  // per constraint index, 0 when inactive

  double total() const {
    double s = reprojection + planarity;
    for (double r : relation) s += r;
    return s;
  }
};

struct BAReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  BATermCosts initial_terms;
  BATermCosts final_terms;
  std::vector<double> cost_history;  // accepted costs, non-increasing
  std::vector<std::size_t> released;  // constraint indices
  std::string stop_reason;
  int solves = 0;
};

struct BAResult {
  std::vector<Pose> poses;
  std::map<NodeId, Point3> points;
  RelationSet relations;
  BAReport report;
};

namespace detail {

/// Least-squares plane normal of a polygon oriented along its Newell normal,
/// with d normal / d corner when requested.
struct FaceGeometry {
  Point3 normal = Point3::UnitZ();
  Point3 centroid = Point3::Zero();
  std::vector<Mat3> dnormal;
};

inline FaceGeometry face_geometry(std::span<const Point3> pts, bool jacobian) {
  FaceGeometry fg;
  const std::size_t m = pts.size();
  for (const auto& p : pts) fg.centroid += p;
  fg.centroid /= static_cast<double>(m);
  Mat3 s = Mat3::Zero();
  Point3 newell = Point3::Zero();
  for (std::size_t i = 0; i < m; ++i) {
    s += (pts[i] - fg.centroid) * (pts[i] - fg.centroid).transpose();
    newell += (pts[i] - fg.centroid).cross(pts[(i + 1) % m] - fg.centroid);
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
  const Eigen::Vector3d lam = eig.eigenvalues();
  const Mat3 v = eig.eigenvectors();
  const double sign = v.col(0).dot(newell) < 0 ? -1.0 : 1.0;
  fg.normal = sign * v.col(0);
  if (!jacobian) return fg;
  fg.dnormal.resize(m);
  const Point3 v0 = v.col(0);
  for (std::size_t p = 0; p < m; ++p) {
    const Point3 a = pts[p] - fg.centroid;
    Mat3 d = Mat3::Zero();
    for (int k = 1; k < 3; ++k) {
      const double gap = lam(0) - lam(k);
      if (gap == 0.0) continue;
      const Point3 vk = v.col(k);
      d += vk * (a.dot(v0) * vk.transpose() + vk.dot(a) * v0.transpose()) / gap;
    }
    fg.dnormal[p] = sign * d;
  }
  return fg;
}

/// Column layout: free pose parameters (frames 1..F-1, 3 rotation then 3
/// translation, one translation component of the gauge frame removed),
/// followed by 3 parameters per point.
struct Layout {
  std::vector<std::array<int, 6>> pose_cols;  // -1 for frozen
  std::vector<int> point_col;
  int camera_params = 0;
  int size = 0;
};

inline Layout make_layout(int frames, int points, int gauge_frame, int gauge_axis) {
  Layout l;
  l.pose_cols.assign(static_cast<std::size_t>(frames), {-1, -1, -1, -1, -1, -1});
  int c = 0;
  for (int f = 1; f < frames; ++f)
    for (int k = 0; k < 6; ++k) {
      if (f == gauge_frame && k == 3 + gauge_axis) continue;
      l.pose_cols[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)] = c++;
    }
  l.camera_params = c;
  for (int p = 0; p < points; ++p) {
    l.point_col.push_back(c);
    c += 3;
  }
  l.size = c;
  return l;
}

struct Entry {
  int col;
  double val;
};

}  // namespace detail

/// Residual and Jacobian evaluation for a fixed problem structure.
class BAEvaluator {
 public:
  struct State {
    std::vector<Pose> poses;
    std::vector<Point3> points;  // node order of the problem's point map
  };

  BAEvaluator(const BAProblem& problem, const BAConfig& cfg, std::vector<bool> use_constraint)
      : problem_(problem), cfg_(cfg), use_(std::move(use_constraint)) {
    const int frames = static_cast<int>(problem.poses.size());
    if (frames < 2) throw Error(ErrorCode::kInvalidArgument, "bundle adjustment needs two or more frames");
    for (const auto& [id, _] : problem.points) {
      index_[id] = static_cast<int>(ids_.size());
      ids_.push_back(id);
    }
    for (const auto& o : problem.observations) {
      if (o.frame < 0 || o.frame >= frames)
        throw Error(ErrorCode::kInvalidArgument, "observation frame out of range", std::to_string(o.frame));
      if (!index_.contains(o.node))
        throw Error(ErrorCode::kInvalidArgument, "observation of an unknown node", std::to_string(o.node));
    }
    // gauge: the frame with the longest translation keeps its dominant component
    int gauge_frame = 1;
    double longest = -1.0;
    for (int f = 1; f < frames; ++f) {
      const double n = problem.poses[static_cast<std::size_t>(f)].translation.norm();
      if (n > longest) {
        longest = n;
        gauge_frame = f;
      }
    }
    int axis = 0;
    problem.poses[static_cast<std::size_t>(gauge_frame)].translation.cwiseAbs().maxCoeff(&axis);
    layout_ = detail::make_layout(frames, static_cast<int>(ids_.size()), gauge_frame, axis);
    gauge_frame_ = gauge_frame;
    gauge_axis_ = axis;

    const State init = initial_state();
    for (const auto& face : problem.faces) {
      std::vector<int> corners;
      for (NodeId id : face) {
        const auto it = index_.find(id);
        if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "face corner without a point", std::to_string(id));
        corners.push_back(it->second);
      }
      faces_.push_back(corners);
    }
    const auto geo = geometry(init, false);
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      std::vector<Point3> pts;
      for (int c : faces_[f]) pts.push_back(init.points[static_cast<std::size_t>(c)]);
      area_.push_back(polygon_area(pts));
    }
    if (use_.empty()) {
      for (const auto& c : problem.relations.constraints) use_.push_back(c.active());
    }
    if (use_.size() != problem.relations.constraints.size())
      throw Error(ErrorCode::kInvalidArgument, "constraint mask size mismatch");
    group_sign_.resize(problem.relations.groups.size());
    for (std::size_t g = 0; g < problem.relations.groups.size(); ++g) {
      const auto& faces = problem.relations.groups[g].faces;
      for (int f : faces) {
        check_face(f);
        const Point3& ref = geo[static_cast<std::size_t>(faces.front())].normal;
        group_sign_[g].push_back(geo[static_cast<std::size_t>(f)].normal.dot(ref) < 0 ? -1.0 : 1.0);
      }
    }
    for (std::size_t i = 0; i < problem.relations.constraints.size(); ++i) {
      const auto& c = problem.relations.constraints[i];
      for (int m : c.members) {
        if (c.kind == RelationKind::kOrthogonal) {
          if (m < 0 || m >= static_cast<int>(problem.relations.groups.size()))
            throw Error(ErrorCode::kInvalidArgument, "orthogonal relation references an unknown group", std::to_string(m));
        } else {
          check_face(m);
        }
      }
      std::vector<double> signs;
      if (c.kind != RelationKind::kOrthogonal)
        for (int m : c.members)
          signs.push_back(geo[static_cast<std::size_t>(m)].normal.dot(geo[static_cast<std::size_t>(c.members.front())].normal) < 0
                              ? -1.0
                              : 1.0);
      member_sign_.push_back(signs);
    }
  }

  const detail::Layout& layout() const { return layout_; }
  const std::vector<NodeId>& node_ids() const { return ids_; }
  int gauge_frame() const { return gauge_frame_; }
  int gauge_axis() const { return gauge_axis_; }

  State initial_state() const {
    State s;
    s.poses = problem_.poses;
    for (NodeId id : ids_) s.points.push_back(problem_.points.at(id));
    return s;
  }

  State apply(const State& s, const Eigen::VectorXd& dx) const {
    State out = s;
    for (std::size_t f = 1; f < s.poses.size(); ++f) {
      const auto& cols = layout_.pose_cols[f];
      Point3 w = Point3::Zero(), t = Point3::Zero();
      for (int k = 0; k < 3; ++k) {
        if (cols[static_cast<std::size_t>(k)] >= 0) w(k) = dx(cols[static_cast<std::size_t>(k)]);
        if (cols[static_cast<std::size_t>(k + 3)] >= 0) t(k) = dx(cols[static_cast<std::size_t>(k + 3)]);
      }
      out.poses[f].rotation = orthonormalize(so3_exp(w) * s.poses[f].rotation);
      out.poses[f].translation = s.poses[f].translation + t;
    }
    for (std::size_t p = 0; p < s.points.size(); ++p) out.points[p] += dx.segment<3>(layout_.point_col[p]);
    return out;
  }

  /// Calls sink(residual, entries) once per scalar residual, in a fixed
  /// order; entries are empty unless `jacobian` is set.
  template <class Sink>
  BATermCosts evaluate(const State& s, bool jacobian, Sink&& sink) const {
    BATermCosts costs;
    costs.relation.assign(problem_.relations.constraints.size(), 0.0);
    std::vector<detail::Entry> row;
    const Intrinsics& k = problem_.intrinsics;

    for (const auto& o : problem_.observations) {
      const Pose& pose = s.poses[static_cast<std::size_t>(o.frame)];
      const int pi = index_.at(o.node);
      const Point3& x = s.points[static_cast<std::size_t>(pi)];
      const Point3 q = pose.apply(x);
      const double z = q.z();
      const Point2 proj(k.f * q.x() / z + k.u, k.f * q.y() / z + k.v);
      const Point2 r = o.px - proj;
      Eigen::Matrix<double, 2, 3> dq;
      dq << -k.f / z, 0, k.f * q.x() / (z * z), 0, -k.f / z, k.f * q.y() / (z * z);
      Eigen::Matrix<double, 2, 3> drot, dpt;
      if (jacobian) {
        drot = dq * -skew(pose.rotation * x);
        dpt = dq * pose.rotation;
      }
      for (int a = 0; a < 2; ++a) {
        row.clear();
        if (jacobian) {
          const auto& cols = layout_.pose_cols[static_cast<std::size_t>(o.frame)];
          for (int c = 0; c < 3; ++c) {
            if (cols[static_cast<std::size_t>(c)] >= 0) row.push_back({cols[static_cast<std::size_t>(c)], drot(a, c)});
            if (cols[static_cast<std::size_t>(c + 3)] >= 0) row.push_back({cols[static_cast<std::size_t>(c + 3)], dq(a, c)});
          }
          for (int c = 0; c < 3; ++c) row.push_back({layout_.point_col[static_cast<std::size_t>(pi)] + c, dpt(a, c)});
        }
        costs.reprojection += r(a) * r(a);
        sink(r(a), row);
      }
    }

    const auto geo = geometry(s, jacobian);
    auto push_point = [&](int point, const Eigen::RowVector3d& d) {
      for (int c = 0; c < 3; ++c)
        if (d(c) != 0.0) row.push_back({layout_.point_col[static_cast<std::size_t>(point)] + c, d(c)});
    };
    // d(w . N_f) for a fixed vector w
    auto push_normal = [&](std::size_t f, const Point3& w, double scale) {
      for (std::size_t p = 0; p < faces_[f].size(); ++p)
        push_point(faces_[f][p], scale * w.transpose() * geo[f].dnormal[p]);
    };

    if (cfg_.planarity) {
      const double sq = std::sqrt(cfg_.lambda_plane);
      for (std::size_t f = 0; f < faces_.size(); ++f) {
        const auto& c = faces_[f];
        for (std::size_t e = 0; e < c.size(); ++e) {
          const std::size_t e1 = (e + 1) % c.size();
          const Point3 edge = s.points[static_cast<std::size_t>(c[e1])] - s.points[static_cast<std::size_t>(c[e])];
          const double r = sq * edge.dot(geo[f].normal);
          row.clear();
          if (jacobian) {
            push_point(c[e1], sq * geo[f].normal.transpose());
            push_point(c[e], -sq * geo[f].normal.transpose());
            push_normal(f, edge, sq);
          }
          costs.planarity += r * r;
          sink(r, row);
        }
      }
    }

    const double sr = std::sqrt(cfg_.lambda_rel);
    const auto& rel = problem_.relations;
    for (std::size_t ci = 0; ci < rel.constraints.size(); ++ci) {
      if (!use_[ci]) continue;
      const auto& con = rel.constraints[ci];
      const auto& sign = member_sign_[ci];
      if (con.kind == RelationKind::kOrthogonal) {
        const auto ga = group_normal(static_cast<std::size_t>(con.members[0]), geo);
        const auto gb = group_normal(static_cast<std::size_t>(con.members[1]), geo);
        const double r = sr * ga.normal.dot(gb.normal);
        row.clear();
        if (jacobian) {
          push_group(static_cast<std::size_t>(con.members[0]), ga, gb.normal, sr, geo, push_normal);
          push_group(static_cast<std::size_t>(con.members[1]), gb, ga.normal, sr, geo, push_normal);
        }
        costs.relation[ci] += r * r;
        sink(r, row);
      } else if (con.kind == RelationKind::kParallel) {
        for (std::size_t a = 0; a < con.members.size(); ++a)
          for (std::size_t b = a + 1; b < con.members.size(); ++b) {
            const auto fa = static_cast<std::size_t>(con.members[a]), fb = static_cast<std::size_t>(con.members[b]);
            const double d = geo[fa].normal.dot(geo[fb].normal);
            const double sg = d < 0 ? -1.0 : 1.0;
            const double r = sr * (std::abs(d) - 1.0);
            row.clear();
            if (jacobian) {
              push_normal(fa, geo[fb].normal, sr * sg);
              push_normal(fb, geo[fa].normal, sr * sg);
            }
            costs.relation[ci] += r * r;
            sink(r, row);
          }
      } else {
        for (std::size_t a = 0; a < con.members.size(); ++a)
          for (std::size_t b = a + 1; b < con.members.size(); ++b) {
            const auto fa = static_cast<std::size_t>(con.members[a]), fb = static_cast<std::size_t>(con.members[b]);
            const Point3 navg = 0.5 * (sign[a] * geo[fa].normal + sign[b] * geo[fb].normal);
            auto emit = [&](const Point3& edge, const std::vector<std::pair<int, double>>& ends) {
              const double r = sr * edge.dot(navg);
              row.clear();
              if (jacobian) {
                for (const auto& [pt, w] : ends) push_point(pt, sr * w * navg.transpose());
                push_normal(fa, edge, 0.5 * sr * sign[a]);
                push_normal(fb, edge, 0.5 * sr * sign[b]);
              }
              costs.relation[ci] += r * r;
              sink(r, row);
            };
            // centroid to centroid
            std::vector<std::pair<int, double>> ends;
            for (int p : faces_[fb]) ends.emplace_back(p, 1.0 / static_cast<double>(faces_[fb].size()));
            for (int p : faces_[fa]) ends.emplace_back(p, -1.0 / static_cast<double>(faces_[fa].size()));
            emit(geo[fb].centroid - geo[fa].centroid, ends);
            // every corner pair across the two faces
            for (int p : faces_[fa])
              for (int q : faces_[fb]) {
                if (p == q) continue;
                emit(s.points[static_cast<std::size_t>(q)] - s.points[static_cast<std::size_t>(p)], {{q, 1.0}, {p, -1.0}});
              }
          }
      }
    }
    return costs;
  }

  BATermCosts costs(const State& s) const {
    return evaluate(s, false, [](double, const std::vector<detail::Entry>&) {});
  }

  Eigen::VectorXd residuals(const State& s) const {
    std::vector<double> r;
    evaluate(s, false, [&](double v, const std::vector<detail::Entry>&) { r.push_back(v); });
    return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
  }

  /// Jacobian of the stacked residual vector w.r.t. the parameter increment.
  Eigen::MatrixXd jacobian(const State& s) const {
    std::vector<std::vector<detail::Entry>> rows;
    evaluate(s, true, [&](double, const std::vector<detail::Entry>& e) { rows.push_back(e); });
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), layout_.size);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (const auto& e : rows[i]) j(static_cast<Eigen::Index>(i), e.col) += e.val;
    return j;
  }

  /// Gauss-Newton system H = J^T J, g = J^T r and the cost.
  BATermCosts normal_equations(const State& s, Eigen::MatrixXd& h, Eigen::VectorXd& g) const {
    h.setZero(layout_.size, layout_.size);
    g.setZero(layout_.size);
    std::vector<detail::Entry> merged;
    return evaluate(s, true, [&](double r, const std::vector<detail::Entry>& row) {
      merged.assign(row.begin(), row.end());
      std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.col < b.col; });
      std::size_t w = 0;
      for (std::size_t i = 0; i < merged.size(); ++i) {
        if (w > 0 && merged[w - 1].col == merged[i].col) {
          merged[w - 1].val += merged[i].val;
        } else {
          merged[w++] = merged[i];
        }
      }
      merged.resize(w);
      for (const auto& a : merged) {
        g(a.col) += a.val * r;
        for (const auto& b : merged)
          if (b.col >= a.col) h(a.col, b.col) += a.val * b.val;
      }
    });
  }

  bool structure_terms() const {
    if (cfg_.planarity && !faces_.empty()) return true;
    return std::any_of(use_.begin(), use_.end(), [](bool u) { return u; });
  }

 private:
  struct GroupNormal {
    Point3 normal;
    Point3 sum;
  };

  void check_face(int f) const {
    if (f < 0 || f >= static_cast<int>(faces_.size()))
      throw Error(ErrorCode::kInvalidArgument, "relation references an unknown face", std::to_string(f));
  }

  std::vector<detail::FaceGeometry> geometry(const State& s, bool jacobian) const {
    std::vector<detail::FaceGeometry> out;
    std::vector<Point3> pts;
    for (const auto& c : faces_) {
      pts.clear();
      for (int p : c) pts.push_back(s.points[static_cast<std::size_t>(p)]);
      out.push_back(detail::face_geometry(pts, jacobian));
    }
    return out;
  }

  GroupNormal group_normal(std::size_t g, const std::vector<detail::FaceGeometry>& geo) const {
    GroupNormal gn;
    gn.sum = Point3::Zero();
    const auto& faces = problem_.relations.groups[g].faces;
    for (std::size_t i = 0; i < faces.size(); ++i)
      gn.sum += area_[static_cast<std::size_t>(faces[i])] * group_sign_[g][i] * geo[static_cast<std::size_t>(faces[i])].normal;
    gn.normal = gn.sum.normalized();
    return gn;
  }

  // d(w . G) with G the normalized weighted group normal
  template <class PushNormal>
  void push_group(std::size_t g, const GroupNormal& gn, const Point3& w, double scale,
                  const std::vector<detail::FaceGeometry>&, PushNormal& push_normal) const {
    const Point3 proj = (Mat3::Identity() - gn.normal * gn.normal.transpose()) * w / gn.sum.norm();
    const auto& faces = problem_.relations.groups[g].faces;
    for (std::size_t i = 0; i < faces.size(); ++i)
      push_normal(static_cast<std::size_t>(faces[i]), proj, scale * area_[static_cast<std::size_t>(faces[i])] * group_sign_[g][i]);
  }

  BAProblem problem_;
  BAConfig cfg_;
  std::vector<bool> use_;
  std::map<NodeId, int> index_;
  std::vector<NodeId> ids_;
  detail::Layout layout_;
  int gauge_frame_ = 1;
  int gauge_axis_ = 0;
  std::vector<std::vector<int>> faces_;
  std::vector<double> area_;
  std::vector<std::vector<double>> group_sign_;
  std::vector<std::vector<double>> member_sign_;
};

/// Re-expresses the problem so that pose 0 is the identity.
inline BAProblem normalize_gauge(BAProblem p) {
  if (p.poses.empty()) return p;
  const Pose p0 = p.poses[0];
  const Pose inv = p0.inverse();
  for (auto& pose : p.poses) pose = compose_poses(pose, inv);
  p.poses[0] = Pose::identity();
  for (auto& [_, x] : p.points) x = p0.apply(x);
  return p;
}

namespace detail {

// Solves (H + mu D) dx = -g by eliminating the point block.
inline bool solve_schur(const Eigen::MatrixXd& h_upper, const Eigen::VectorXd& g, double mu, int nc,
                        bool dense_points, Eigen::VectorXd& dx) {
  const int n = static_cast<int>(g.size());
  const int np = n - nc;
  Eigen::MatrixXd h = h_upper.selfadjointView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    if (!(h(i, i) > 0.0)) return false;
    h(i, i) += mu * h(i, i);
  }
  const Eigen::MatrixXd a = h.topLeftCorner(nc, nc);
  const Eigen::MatrixXd b = h.topRightCorner(nc, np);
  const Eigen::MatrixXd c = h.bottomRightCorner(np, np);
  Eigen::MatrixXd cinv_bt(np, nc);
  Eigen::VectorXd cinv_gp(np);
  const Eigen::VectorXd gc = g.head(nc), gp = g.tail(np);
  if (dense_points) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    cinv_bt = ldlt.solve(b.transpose());
    cinv_gp = ldlt.solve(gp);
  } else {
    for (int p = 0; p < np; p += 3) {
      const Mat3 blk = c.block<3, 3>(p, p);
      const Eigen::LDLT<Mat3> ldlt(blk);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
      cinv_bt.middleRows(p, 3) = ldlt.solve(b.transpose().middleRows(p, 3));
      cinv_gp.segment<3>(p) = ldlt.solve(gp.segment<3>(p));
    }
  }
  dx.resize(n);
  if (nc > 0) {
    const Eigen::MatrixXd s = a - b * cinv_bt;
    const Eigen::VectorXd rhs = -gc + b * cinv_gp;
    const Eigen::LDLT<Eigen::MatrixXd> ls(s);
    if (ls.info() != Eigen::Success || !ls.isPositive()) return false;
    dx.head(nc) = ls.solve(rhs);
  }
  dx.tail(np) = -cinv_gp - cinv_bt * dx.head(nc);
  return dx.allFinite();
}

}  // namespace detail

/// Levenberg-Marquardt on the problem with the given constraint mask (empty:
/// the constraints' own active flags). The problem is gauge-normalized first.
inline BAResult solve_lm(const BAProblem& input, const BAConfig& cfg = {}, std::vector<bool> use = {}) {
  const BAProblem problem = normalize_gauge(input);
  const BAEvaluator ev(problem, cfg, std::move(use));
  const int nc = ev.layout().camera_params;
  const bool dense_points = ev.structure_terms();

  BAEvaluator::State x = ev.initial_state();
  Eigen::MatrixXd h;
  Eigen::VectorXd g, dx;
  BATermCosts terms = ev.normal_equations(x, h, g);
  double cost = terms.total();

  BAResult out;
  out.report.initial_cost = cost;
  out.report.initial_terms = terms;
  out.report.cost_history.push_back(cost);
  out.report.solves = 1;
  double mu = 1e-4, nu = 2.0;
  int it = 0;
  out.report.stop_reason = "max iterations";
  if (h.diagonal().minCoeff() <= 0.0)
    throw Error(ErrorCode::kSingularNormalEquations, "a parameter has no constraining residual");
  auto param_norm = [](const BAEvaluator::State& s) {
    double n = 0.0;
    for (std::size_t f = 1; f < s.poses.size(); ++f) n += s.poses[f].translation.squaredNorm();
    for (const auto& p : s.points) n += p.squaredNorm();
    return std::sqrt(n);
  };
  for (; it < cfg.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < cfg.gradient_tolerance) {
      out.report.stop_reason = "gradient";
      break;
    }
    if (!detail::solve_schur(h, g, mu, nc, dense_points, dx)) {
      if (h.diagonal().minCoeff() <= 0.0 || mu > 1e16)
        throw Error(ErrorCode::kSingularNormalEquations, "normal equations are singular");
      mu *= nu;
      nu *= 2.0;
      continue;
    }
    const BAEvaluator::State trial = ev.apply(x, dx);
    const BATermCosts trial_terms = ev.costs(trial);
    const double trial_cost = trial_terms.total();
    const Eigen::MatrixXd hs = h.selfadjointView<Eigen::Upper>();
    const double predicted = -2.0 * g.dot(dx) - dx.dot(hs * dx);
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      const double rho = predicted > 0 ? (cost - trial_cost) / predicted : 0.0;
      const double decrease = cost - trial_cost;
      const bool small_step = dx.norm() <= cfg.step_tolerance * (param_norm(x) + cfg.step_tolerance);
      x = trial;
      const double prev = cost;
      terms = ev.normal_equations(x, h, g);
      cost = terms.total();
      out.report.cost_history.push_back(cost);
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (decrease <= cfg.relative_tolerance * prev) {
        ++it;
        out.report.stop_reason = "relative decrease";
        break;
      }
      if (small_step) {
        ++it;
        out.report.stop_reason = "step";
        break;
      }
    } else {
      if (dx.norm() <= cfg.step_tolerance * (param_norm(x) + cfg.step_tolerance)) {
        out.report.stop_reason = "step";
        break;
      }
      mu *= nu;
      nu *= 2.0;
      if (mu > 1e32) {
        out.report.stop_reason = "damping";
        break;
      }
    }
  }
  out.report.iterations = it;
  out.report.final_cost = cost;
  out.report.final_terms = terms;
  out.poses = x.poses;
  for (std::size_t i = 0; i < ev.node_ids().size(); ++i) out.points[ev.node_ids()[i]] = x.points[i];
  out.relations = problem.relations;
  return out;
}

/// Constraint accept/release loop: the reference is the solve without
/// relations; while the constrained reprojection cost exceeds tau times the
/// reference (plus a per-observation slack), the active detected constraint
/// with the largest cost is released and the problem re-solved from the
/// initialization. User constraints are never released automatically.
inline BAResult optimize_with_release(const BAProblem& problem, const BAConfig& cfg = {}) {
  const std::size_t n = problem.relations.constraints.size();
  const BAResult baseline = solve_lm(problem, cfg, std::vector<bool>(n, false));
  const double reference = baseline.report.final_terms.reprojection;
  const double slack = cfg.release_abs_eps * static_cast<double>(problem.observations.size());
  std::vector<bool> use(n);
  for (std::size_t i = 0; i < n; ++i) use[i] = problem.relations.constraints[i].active();
  std::vector<std::size_t> released;
  int solves = baseline.report.solves;
  while (true) {
    BAResult r = std::any_of(use.begin(), use.end(), [](bool u) { return u; }) ? solve_lm(problem, cfg, use) : baseline;
    solves += r.report.solves;
    const double reproj = r.report.final_terms.reprojection;
    std::size_t worst = n;
    if (reproj > cfg.tau_release * reference + slack) {
      double worst_cost = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& c = problem.relations.constraints[i];
        if (!use[i] || c.source == RelationSource::kUser) continue;
        if (r.report.final_terms.relation[i] > worst_cost) {
          worst_cost = r.report.final_terms.relation[i];
          worst = i;
        }
      }
    }
    if (worst == n) {
      for (std::size_t i : released) r.relations.constraints[i].status = RelationStatus::kReleased;
      r.report.released = released;
      r.report.solves = solves;
      return r;
    }
    use[worst] = false;
    released.push_back(worst);
  }
}

}  // namespace planarc
