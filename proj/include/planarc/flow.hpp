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

#include <cmath>
#include <span>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/geometry.hpp"
#include "planarc/image.hpp"

namespace planarc {

struct FlowConfig {
  int window = 11;          // patch side, odd
  int max_iterations = 20;  // per pyramid level
  double epsilon = 0.01;    // px, convergence on update norm
  double sigma_r = 10.0;    // intensity levels, residual scale in the confidence
  int levels = 3;
  double min_eigen = 1e-6;  // per-pixel eigenvalue below which a patch is untrackable
  double window_sigma = 0.0;  // px, Gaussian patch weighting; 0 for a uniform window
};

struct FlowResult {
  Point2 position = Point2::Zero();
  double confidence = 0.0;  // 0 means lost

  bool lost() const { return confidence <= 0.0; }
};

namespace detail {

struct PatchGradient {
  std::vector<double> tmpl, gx, gy, w;
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
};

// Pixel weights normalized to sum to the patch area.
inline std::vector<double> window_weights(int half, double sigma) {
  const int side = 2 * half + 1;
  std::vector<double> w(static_cast<std::size_t>(side * side), 1.0);
  if (sigma <= 0.0) return w;
  double sum = 0.0;
  std::size_t k = 0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx, ++k) {
      w[k] = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
      sum += w[k];
    }
  for (double& v : w) v *= static_cast<double>(w.size()) / sum;
  return w;
}

inline PatchGradient patch_gradient(const ImageF& img, const Point2& c, int half, double sigma = 0.0) {
  PatchGradient pg;
  const int n = (2 * half + 1) * (2 * half + 1);
  pg.w = window_weights(half, sigma);
  pg.tmpl.reserve(n);
  pg.gx.reserve(n);
  pg.gy.reserve(n);
  std::size_t k = 0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx, ++k) {
      const double x = c.x() + dx, y = c.y() + dy;
      const double ix = 0.5 * (img.sample(x + 1, y) - img.sample(x - 1, y));
      const double iy = 0.5 * (img.sample(x, y + 1) - img.sample(x, y - 1));
      pg.tmpl.push_back(img.sample(x, y));
      pg.gx.push_back(ix);
      pg.gy.push_back(iy);
      const double w = pg.w[k];
      pg.g(0, 0) += w * ix * ix;
      pg.g(0, 1) += w * ix * iy;
      pg.g(1, 1) += w * iy * iy;
    }
  pg.g(1, 0) = pg.g(0, 1);
  return pg;
}

inline double min_eigenvalue(const Eigen::Matrix2d& g) {
  const double tr = g(0, 0) + g(1, 1);
  const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  return std::max(0.0, 0.5 * tr - disc);
}

}  // namespace detail

/// Pyramidal iterative Lucas-Kanade for one point.
///
/// The patch is Gaussian weighted (uniform when window_sigma is 0).
/// Confidence is the smallest eigenvalue of the level-0 gradient matrix per
/// patch pixel, scaled by exp(-r^2 / sigma_r^2) with r the RMS intensity
/// residual at the final position.
inline FlowResult track_point(const Pyramid& src, const Pyramid& dst, const Point2& p,
                              const FlowConfig& cfg = {}) {
  const int levels = std::min({cfg.levels, src.size(), dst.size()});
  const int half = cfg.window / 2;
  const double area = static_cast<double>(cfg.window * cfg.window);
  Point2 guess = Point2::Zero();  // displacement at the current level
  FlowResult out;
  out.position = p;

  for (int l = levels - 1; l >= 0; --l) {
    const double scale = std::ldexp(1.0, -l);
    const ImageF& a = src.level(l);
    const ImageF& b = dst.level(l);
    const Point2 pl = p * scale;
    const auto pg = detail::patch_gradient(a, pl, half, cfg.window_sigma);
    const double lmin = detail::min_eigenvalue(pg.g) / area;
    const bool solvable = lmin > cfg.min_eigen;
    Point2 d = Point2::Zero();
    bool converged = !solvable;
    if (solvable) {
      const Eigen::Matrix2d ginv = pg.g.inverse();
      for (int it = 0; it < cfg.max_iterations; ++it) {
        Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
        const Point2 q = pl + guess + d;
        if (!b.contains(q.x(), q.y())) break;
        std::size_t k = 0;
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx, ++k) {
            const double e = pg.w[k] * (pg.tmpl[k] - b.sample(q.x() + dx, q.y() + dy));
            rhs.x() += e * pg.gx[k];
            rhs.y() += e * pg.gy[k];
          }
        const Point2 step = ginv * rhs;
        d += step;
        if (step.norm() < cfg.epsilon) {
          converged = true;
          break;
        }
      }
    }
    const Point2 total = guess + d;
    const Point2 q = pl + total;
    if (l == 0) {
      if (!solvable || !converged || !b.contains(q.x(), q.y())) {
        out.position = b.contains(q.x(), q.y()) ? q : p + guess;
        out.confidence = 0.0;
        return out;
      }
      double ss = 0.0;
      std::size_t k = 0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx, ++k) {
          const double e = pg.tmpl[k] - b.sample(q.x() + dx, q.y() + dy);
          ss += pg.w[k] * e * e;
        }
      const double rms2 = ss / area;
      out.position = q;
      out.confidence = lmin * std::exp(-rms2 / (cfg.sigma_r * cfg.sigma_r));
      return out;
    }
    // a diverged coarse estimate is discarded rather than propagated
    guess = b.contains(q.x(), q.y()) ? Point2(2.0 * total) : Point2(2.0 * guess);
  }
  return out;
}

inline std::vector<FlowResult> track_points(const Pyramid& src, const Pyramid& dst,
                                            std::span<const Point2> pts, const FlowConfig& cfg = {}) {
  if (pts.empty()) throw Error(ErrorCode::kEmptyPointList, "no points to track");
  std::vector<FlowResult> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(track_point(src, dst, p, cfg));
  return out;
}

}  // namespace planarc
