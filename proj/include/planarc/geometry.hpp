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
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "planarc/error.hpp"

namespace planarc {

using Point2 = Eigen::Vector2d;
using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics with square pixels and zero skew.
struct Intrinsics {
  double f = 1.0;
  double u = 0.0;
  double v = 0.0;

  Mat3 matrix() const {
    Mat3 k;
    k << f, 0, u, 0, f, v, 0, 0, 1;
    return k;
  }

  /// Pixel to normalized camera coordinates (K^-1 x, dehomogenized).
  Point2 normalize(const Point2& px) const { return {(px.x() - u) / f, (px.y() - v) / f}; }
  Point2 denormalize(const Point2& n) const { return {f * n.x() + u, f * n.y() + v}; }

  bool operator==(const Intrinsics&) const = default;
};

/// Rigid transform X_target = rotation * X_source + translation.
///
/// Camera poses in a trajectory map world coordinates into the camera frame,
/// so `apply` on a world point yields camera-frame coordinates.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Point3 translation = Point3::Zero();

  static Pose identity() { return {}; }

  Point3 apply(const Point3& x) const { return rotation * x + translation; }

  Pose inverse() const {
    Pose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  /// Optical center of a world-to-camera pose, in world coordinates.
  Point3 center() const { return -(rotation.transpose() * translation); }

  bool operator==(const Pose&) const = default;
};

/// Returns the pose mapping frame-c coordinates into frame-a coordinates.
inline Pose compose_poses(const Pose& p_ab, const Pose& p_bc) {
  Pose out;
  out.rotation = p_ab.rotation * p_bc.rotation;
  out.translation = p_ab.rotation * p_bc.translation + p_ab.translation;
  return out;
}

inline Mat3 skew(const Point3& w) {
  Mat3 s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

/// Rodrigues exponential map of a rotation vector.
inline Mat3 so3_exp(const Point3& w) {
  const double theta = w.norm();
  const Mat3 k = skew(w);
  if (theta < 1e-8) return Mat3::Identity() + k + 0.5 * k * k;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

inline Point3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

/// Nearest rotation in the Frobenius sense.
inline Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 r = a.transpose() * b;
  const Point3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * v.norm(), 0.5 * (r.trace() - 1.0));
}

/// Pinhole projection; the homogeneous coordinate is divided out immediately.
inline Point2 project(const Point3& x, const Intrinsics& k, const Pose& pose) {
  const Point3 xc = pose.apply(x);
  if (!(xc.z() > 0.0)) throw Error(ErrorCode::kNonPositiveDepth, "point is not in front of the camera");
  return {k.f * xc.x() / xc.z() + k.u, k.f * xc.y() / xc.z() + k.v};
}

/// World point at camera-frame depth `depth` along the ray through pixel `px`.
inline Point3 unproject(const Point2& px, double depth, const Intrinsics& k, const Pose& pose) {
  const Point2 n = k.normalize(px);
  const Point3 xc(n.x() * depth, n.y() * depth, depth);
  return pose.inverse().apply(xc);
}

/// Plane n . X = offset with unit normal.
struct Plane {
  Point3 normal = Point3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Point3& x) const { return normal.dot(x) - offset; }

  bool operator==(const Plane&) const = default;
};

/// Least-squares plane through `points`, normal oriented toward `viewer`.
inline Plane face_plane(std::span<const Point3> points, const Point3& viewer = Point3::Zero()) {
  if (points.size() < 3) throw Error(ErrorCode::kDegenerateFace, "a face needs at least 3 points");
  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : points) scatter += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  // eigenvalues are ascending; the middle one vanishes for collinear input
  const double extent = std::max(1.0, std::sqrt(eig.eigenvalues()(2)));
  if (std::sqrt(std::max(0.0, eig.eigenvalues()(1))) <= 1e-9 * extent)
    throw Error(ErrorCode::kDegenerateFace, "face points are collinear");
  Plane plane;
  plane.normal = eig.eigenvectors().col(0).normalized();
  if (plane.normal.dot(viewer - centroid) < 0.0) plane.normal = -plane.normal;
  plane.offset = plane.normal.dot(centroid);
  return plane;
}

inline double angle_between_deg(const Point3& a, const Point3& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

/// Angle between two undirected axes, in [0, 90] degrees.
inline double axis_angle_deg(const Point3& a, const Point3& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

}  // namespace planarc
