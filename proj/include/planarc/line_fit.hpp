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
#include <numeric>
#include <span>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/geometry.hpp"
#include "planarc/random.hpp"

namespace planarc {

/// Line n . p = offset with unit normal.
struct Line2 {
  Point2 normal = Point2::UnitY();
  double offset = 0.0;

  static Line2 through(const Point2& a, const Point2& b) {
    const Point2 dir = (b - a).normalized();
    Line2 l;
    l.normal = Point2(-dir.y(), dir.x());
    l.offset = l.normal.dot(a);
    return l.canonical();
  }

  double distance(const Point2& p) const { return std::abs(normal.dot(p) - offset); }

  Line2 canonical() const {
    Line2 l = *this;
    if (l.normal.x() < 0.0 || (l.normal.x() == 0.0 && l.normal.y() < 0.0)) {
      l.normal = -l.normal;
      l.offset = -l.offset;
    }
    return l;
  }
};

struct SampledSegment {
  std::pair<int, int> endpoints{-1, -1};  // node ids, when known
  std::vector<Point2> samples;
  double spacing = 0.0;  // actual spacing between consecutive samples
};

/// `n` evenly spaced samples from a to b inclusive.
inline SampledSegment sample_segment_n(const Point2& a, const Point2& b, int n) {
  if ((a - b).norm() <= 0.0) throw Error(ErrorCode::kDegenerateSegment, "segment endpoints coincide");
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two samples");
  SampledSegment s;
  s.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    s.samples.push_back(a + t * (b - a));
  }
  s.samples.back() = b;
  s.spacing = (b - a).norm() / (n - 1);
  return s;
}

inline int segment_sample_count(double length, double spacing, int min_samples = 8) {
  const int n = static_cast<int>(std::ceil(length / spacing - 1e-9)) + 1;
  return std::max(min_samples, n);
}

/// Uniform samples along a->b: max(8, ceil(|b-a|/spacing)+1) points, endpoints included.
inline SampledSegment sample_segment(const Point2& a, const Point2& b, double spacing) {
  if ((a - b).norm() <= 0.0) throw Error(ErrorCode::kDegenerateSegment, "segment endpoints coincide");
  if (!(spacing > 0.0)) throw Error(ErrorCode::kInvalidArgument, "spacing must be positive");
  return sample_segment_n(a, b, segment_sample_count((b - a).norm(), spacing));
}

struct LineFit {
  Line2 line;
  std::vector<bool> inliers;
  double inlier_weight = 0.0;
  double total_weight = 0.0;
};

/// Weighted total least squares over the points selected by `mask`.
inline Line2 weighted_tls(std::span<const Point2> pts, std::span<const double> w,
                          const std::vector<bool>& mask) {
  double sw = 0.0;
  Point2 c = Point2::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (mask[i]) {
      sw += w[i];
      c += w[i] * pts[i];
    }
  c /= sw;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (mask[i]) cov += w[i] * (pts[i] - c) * (pts[i] - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Line2 l;
  l.normal = eig.eigenvectors().col(0).normalized();
  l.offset = l.normal.dot(c);
  return l.canonical();
}

/// Tukey-biweight IRLS refinement of `line` over the points in `mask`. The
/// residual scale is 1.4826 MAD, floored at `min_scale`.
inline Line2 refine_line_tukey(std::span<const Point2> pts, std::span<const double> w,
                               const std::vector<bool>& mask, Line2 line, int iters = 10,
                               double min_scale = 0.05) {
  std::vector<double> rw(pts.size(), 0.0);
  std::vector<bool> use(pts.size(), false);
  std::vector<double> abs_r;
  for (int it = 0; it < iters; ++it) {
    abs_r.clear();
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (mask[i]) abs_r.push_back(line.distance(pts[i]));
    if (abs_r.size() < 2) return line;
    auto mid = abs_r.begin() + static_cast<std::ptrdiff_t>(abs_r.size() / 2);
    std::nth_element(abs_r.begin(), mid, abs_r.end());
    const double c = 4.685 * std::max(1.4826 * *mid, min_scale);
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double u = mask[i] ? line.distance(pts[i]) / c : 1.0;
      rw[i] = u < 1.0 ? w[i] * (1.0 - u * u) * (1.0 - u * u) : 0.0;
      use[i] = rw[i] > 0.0;
      n += use[i] ? 1 : 0;
    }
    if (n < 2) return line;
    const Line2 next = weighted_tls(pts, rw, use);
    const double change = (next.normal - line.normal).norm() + std::abs(next.offset - line.offset);
    line = next;
    if (change < 1e-9) break;
  }
  return line;
}

/// RANSAC line fit with weight-proportional two-point hypotheses.
///
/// Hypotheses are scored by the total weight of points within `inlier_tol`;
/// the first best-scoring hypothesis wins ties. The result is a weighted TLS
/// refit over the winning consensus set, re-collected once against the refit.
inline LineFit fit_line_weighted_ransac(std::span<const Point2> pts, std::span<const double> weights,
                                        int iters, double inlier_tol, Rng& rng) {
  if (pts.size() != weights.size())
    throw Error(ErrorCode::kInvalidArgument, "points and weights differ in length");
  std::vector<std::size_t> support;
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (weights[i] > 0.0) {
      support.push_back(i);
      total += weights[i];
    }
  if (support.size() < 2) throw Error(ErrorCode::kInsufficientSupport, "fewer than two weighted points");

  auto consensus = [&](const Line2& l, std::vector<bool>& mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      mask[i] = weights[i] > 0.0 && l.distance(pts[i]) <= inlier_tol;
      if (mask[i]) s += weights[i];
    }
    return s;
  };

  // draws an index from `support` proportional to weight, skipping `exclude`
  auto draw = [&](std::size_t exclude, double mass) {
    double r = rng.uniform() * mass;
    std::size_t last = support.front();
    for (std::size_t i : support) {
      if (i == exclude) continue;
      last = i;
      r -= weights[i];
      if (r < 0.0) return i;
    }
    return last;
  };

  LineFit best;
  best.inliers.assign(pts.size(), false);
  best.total_weight = total;
  std::vector<bool> mask(pts.size());
  bool found = false;
  for (int it = 0; it < std::max(1, iters); ++it) {
    const std::size_t a = draw(pts.size(), total);
    const std::size_t b = draw(a, total - weights[a]);
    if (a == b || (pts[a] - pts[b]).norm() < 1e-12) continue;
    const Line2 hyp = Line2::through(pts[a], pts[b]);
    const double score = consensus(hyp, mask);
    if (!found || score > best.inlier_weight) {
      found = true;
      best.line = hyp;
      best.inlier_weight = score;
      best.inliers = mask;
    }
  }
  if (!found) throw Error(ErrorCode::kInsufficientSupport, "all weighted points coincide");
  if (best.inlier_weight < 0.5 * total)
    throw Error(ErrorCode::kNoConsensus, "best line explains less than half of the weight");

  const auto count = std::count(best.inliers.begin(), best.inliers.end(), true);
  if (count >= 2) {
    Line2 refit = weighted_tls(pts, weights, best.inliers);
    const double s = consensus(refit, mask);
    if (std::count(mask.begin(), mask.end(), true) >= 2 && s >= best.inlier_weight) {
      refit = weighted_tls(pts, weights, mask);
      best.inliers = mask;
      best.inlier_weight = consensus(refit, mask);
      best.inliers = mask;
    }
    best.line = refit;
  }
  return best;
}

/// Point minimizing sum_i w_i (n_i . p - d_i)^2; exact intersection for two lines.
inline Point2 intersect_lines(std::span<const Line2> lines, std::span<const double> w) {
  if (lines.size() < 2 || lines.size() != w.size())
    throw Error(ErrorCode::kInvalidArgument, "need at least two weighted lines");
  const double sin_tol = std::sin(0.1 * M_PI / 180.0);
  bool spread = false;
  for (std::size_t i = 0; i < lines.size() && !spread; ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (w[i] <= 0.0 || w[j] <= 0.0) continue;
      const Point2& a = lines[i].normal;
      const Point2& b = lines[j].normal;
      if (std::abs(a.x() * b.y() - a.y() * b.x()) > sin_tol) {
        spread = true;
        break;
      }
    }
  if (!spread) throw Error(ErrorCode::kNearParallel, "lines are parallel within 0.1 degrees");
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    a += w[i] * lines[i].normal * lines[i].normal.transpose();
    b += w[i] * lines[i].offset * lines[i].normal;
  }
  return a.ldlt().solve(b);
}

}  // namespace planarc
