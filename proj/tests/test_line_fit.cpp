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

#include "planarc/line_fit.hpp"

namespace planarc {
namespace {

TEST(SampleSegment, ArithmeticSpacing) {
  const auto s = sample_segment({0, 0}, {0, 14}, 2.0);
  ASSERT_EQ(s.samples.size(), 8u);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(s.samples[static_cast<std::size_t>(i)].y(), 2.0 * i, 1e-12);
}

TEST(SampleSegment, MinimumCountRaisesDensity) {
  const auto s = sample_segment({0, 0}, {0, 7}, 2.0);
  ASSERT_EQ(s.samples.size(), 8u);
  EXPECT_EQ(s.samples.front(), Point2(0, 0));
  EXPECT_EQ(s.samples.back(), Point2(0, 7));
  EXPECT_NEAR(s.spacing, 1.0, 1e-12);
}

TEST(SampleSegment, DiagonalGaps) {
  const auto s = sample_segment({0, 0}, {30, 40}, 5.0);
  ASSERT_EQ(s.samples.size(), 11u);
  for (std::size_t i = 1; i < s.samples.size(); ++i)
    EXPECT_NEAR((s.samples[i] - s.samples[i - 1]).norm(), 5.0, 1e-9);
}

TEST(SampleSegment, DegenerateRejected) {
  try {
    sample_segment({1, 1}, {1, 1}, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateSegment);
  }
}

double tls_residual(const Line2& l, const std::vector<Point2>& pts) {
  double m = 0;
  for (const auto& p : pts) m = std::max(m, l.distance(p));
  return m;
}

TEST(WeightedRansac, CollinearPointsExact) {
  std::vector<Point2> pts;
  for (int i = 0; i < 10; ++i) pts.emplace_back(i * 1.7 + 2, -0.4 * i * 1.7 + 5);
  const std::vector<double> w(10, 1.0);
  Rng rng(1);
  const LineFit fit = fit_line_weighted_ransac(pts, w, 100, 1.5, rng);
  EXPECT_LT(tls_residual(fit.line, pts), 1e-10);
  EXPECT_NEAR(fit.inlier_weight, 10.0, 1e-12);
}

TEST(WeightedRansac, TwoPointsGiveTheirLine) {
  const std::vector<Point2> pts{{1, 1}, {4, 5}};
  const std::vector<double> w{0.3, 2.0};
  Rng rng(1);
  const LineFit fit = fit_line_weighted_ransac(pts, w, 10, 1.5, rng);
  EXPECT_LT(fit.line.distance(pts[0]), 1e-12);
  EXPECT_LT(fit.line.distance(pts[1]), 1e-12);
}

// Exhaustive oracle: every pair is a hypothesis, the best consensus is refit.
Line2 exhaustive_fit(const std::vector<Point2>& pts, const std::vector<double>& w, double tol) {
  double best = -1;
  std::vector<bool> best_mask;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const Line2 l = Line2::through(pts[i], pts[j]);
      std::vector<bool> mask(pts.size());
      double s = 0;
      for (std::size_t k = 0; k < pts.size(); ++k) {
        mask[k] = l.distance(pts[k]) <= tol;
        if (mask[k]) s += w[k];
      }
      if (s > best) {
        best = s;
        best_mask = mask;
      }
    }
  return weighted_tls(pts, w, best_mask);
}

TEST(WeightedRansac, OutliersAgainstExhaustiveOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng gen(100 + seed);
    std::vector<Point2> pts;
    std::vector<double> w;
    for (int i = 0; i < 14; ++i) {
      const double x = gen.uniform(-20, 20);
      pts.emplace_back(x, 2 * x);
      w.push_back(1.0);
    }
    for (int i = 0; i < 6; ++i) {
      pts.emplace_back(gen.uniform(-20, 20), gen.uniform(-40, 40));
      w.push_back(0.1);
    }
    Rng rng(seed);
    const LineFit fit = fit_line_weighted_ransac(pts, w, 100, 1.5, rng);
    const Line2 truth = Line2::through({0, 0}, {1, 2});
    const Line2 oracle = exhaustive_fit(pts, w, 1.5);
    const double ang = std::acos(std::min(1.0, std::abs(fit.line.normal.dot(truth.normal)))) * 180 / M_PI;
    EXPECT_LT(ang, 0.5);
    EXPECT_LT(fit.line.distance({0, 0}), 0.5);
    EXPECT_LT(std::acos(std::min(1.0, std::abs(fit.line.normal.dot(oracle.normal)))) * 180 / M_PI, 0.5);
  }
}

TEST(WeightedRansac, Errors) {
  Rng rng(0);
  const std::vector<Point2> pts{{0, 0}, {1, 0}, {2, 0}};
  try {
    fit_line_weighted_ransac(pts, std::vector<double>{1, 0, 0}, 10, 1.0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientSupport);
  }
  // four far-apart clusters of equal weight: no line holds half the weight
  const std::vector<Point2> spread{{0, 0}, {100, 0}, {0, 100}, {100, 100}, {50, 37}};
  try {
    fit_line_weighted_ransac(spread, std::vector<double>{1, 1, 1, 1, 1}, 50, 1.0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoConsensus);
  }
}

TEST(WeightedRansac, DeterministicUnderSeed) {
  Rng gen(7);
  std::vector<Point2> pts;
  std::vector<double> w;
  for (int i = 0; i < 30; ++i) {
    pts.emplace_back(i, 0.5 * i + gen.normal() * 0.3);
    w.push_back(gen.uniform(0.1, 1));
  }
  Rng a(42), b(42);
  const LineFit fa = fit_line_weighted_ransac(pts, w, 100, 1.5, a);
  const LineFit fb = fit_line_weighted_ransac(pts, w, 100, 1.5, b);
  EXPECT_EQ(fa.line.normal, fb.line.normal);
  EXPECT_EQ(fa.line.offset, fb.line.offset);
}

TEST(IntersectLines, Axes) {
  const std::vector<Line2> lines{Line2::through({0, -1}, {0, 1}), Line2::through({-1, 0}, {1, 0})};
  const Point2 p = intersect_lines(lines, std::vector<double>{3, 0.2});
  EXPECT_LT(p.norm(), 1e-12);
}

TEST(IntersectLines, ThreeConcurrentLines) {
  const Point2 c(5, 3);
  std::vector<Line2> lines;
  for (double deg : {0.0, 60.0, 120.0}) {
    const double a = deg * M_PI / 180;
    lines.push_back(Line2::through(c, c + Point2(std::cos(a), std::sin(a))));
  }
  const Point2 p = intersect_lines(lines, std::vector<double>{1, 2, 3});
  EXPECT_LT((p - c).norm(), 1e-9);
}

TEST(IntersectLines, WeightedNormalEquations) {
  // minimize 3 x^2 + (x - 2)^2 + y^2 -> x = 0.5
  const std::vector<Line2> lines{Line2::through({0, 0}, {0, 1}), Line2::through({2, 0}, {2, 1}),
                                 Line2::through({0, 0}, {1, 0})};
  const Point2 p = intersect_lines(lines, std::vector<double>{3, 1, 1});
  EXPECT_NEAR(p.x(), 0.5, 1e-12);
  EXPECT_NEAR(p.y(), 0.0, 1e-12);
}

TEST(IntersectLines, NearParallelRejected) {
  const double a = 0.05 * M_PI / 180;
  const std::vector<Line2> lines{Line2::through({0, 0}, {1, 0}),
                                 Line2::through({0, 1}, {1, 1 + std::tan(a)})};
  try {
    intersect_lines(lines, std::vector<double>{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNearParallel);
  }
}

}  // namespace
}  // namespace planarc
