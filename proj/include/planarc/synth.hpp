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
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/geometry.hpp"
#include "planarc/image.hpp"
#include "planarc/plane_graph.hpp"
#include "planarc/random.hpp"
#include "planarc/tracker.hpp"

namespace planarc {

/// Planar polygonal model; faces list vertex ids counter-clockwise when seen
/// from the side their normal points to.
struct PolyModel {
  std::vector<Point3> vertices;
  std::vector<std::vector<int>> faces;
  std::vector<double> base_intensity;  // per face

  Point3 face_normal(std::size_t f) const {
    const auto& ids = faces[f];
    Point3 n = Point3::Zero();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Point3& a = vertices[static_cast<std::size_t>(ids[i])];
      const Point3& b = vertices[static_cast<std::size_t>(ids[(i + 1) % ids.size()])];
      n += a.cross(b);
    }
    return n.normalized();
  }

  Point3 face_centroid(std::size_t f) const {
    Point3 c = Point3::Zero();
    for (int id : faces[f]) c += vertices[static_cast<std::size_t>(id)];
    return c / static_cast<double>(faces[f].size());
  }
};

/// Unit cube resting on z = 0, centered on the z axis.
inline PolyModel make_box_model() {
  PolyModel m;
  for (int z = 0; z <= 1; ++z)
    for (int y = 0; y <= 1; ++y)
      for (int x = 0; x <= 1; ++x) m.vertices.emplace_back(x - 0.5, y - 0.5, z);
  // vertex index = x + 2y + 4z
  m.faces = {{4, 5, 7, 6}, {0, 2, 3, 1}, {1, 3, 7, 5}, {0, 4, 6, 2}, {2, 6, 7, 3}, {0, 1, 5, 4}};
  m.base_intensity = {200, 90, 150, 110, 120, 100};
  return m;
}

/// The box standing in the corner of a room: floor tile plus two walls.
inline PolyModel make_cube_room_model() {
  PolyModel m = make_box_model();
  const double lo = -1.5, hi = 1.0, h = 1.2;
  const int base = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(lo, lo, 0);  // room corner on the floor
  m.vertices.emplace_back(hi, lo, 0);
  m.vertices.emplace_back(hi, hi, 0);
  m.vertices.emplace_back(lo, hi, 0);
  m.vertices.emplace_back(lo, lo, h);
  m.vertices.emplace_back(hi, lo, h);
  m.vertices.emplace_back(lo, hi, h);
  m.faces.push_back({base + 0, base + 1, base + 2, base + 3});  // floor, +z
  m.faces.push_back({base + 0, base + 3, base + 6, base + 4});  // wall x = lo, +x
  m.faces.push_back({base + 0, base + 4, base + 5, base + 1});  // wall y = lo, +y
  m.base_intensity.insert(m.base_intensity.end(), {70, 170, 135});
  return m;
}

struct OccluderSpec {
  int vertex = -1;  // model vertex to cover
  int first_frame = 0;
  int last_frame = -1;
  double radius = 12.0;  // px
  double intensity = 40.0;
};

struct SynthSpec {
  std::string model = "cube";  // "cube" (box in a room corner) or "box"
  int frames = 30;
  int width = 640;
  int height = 480;
  Intrinsics intrinsics{500.0, 320.0, 240.0};
  Point3 target{-0.25, -0.25, 0.5};
  double radius = 5.0;
  double elevation_deg = 55.0;
  double azimuth_start_deg = 30.0;
  double azimuth_step_deg = 1.0;
  double noise = 0.0;  // Gaussian intensity noise, gray levels
  std::uint64_t seed = 1;
  int supersample = 4;
  double margin = 8.0;  // px, annotated vertices must stay this far inside
  std::vector<OccluderSpec> occluders;
  bool render = true;  // false leaves SynthResult::frames empty
};

/// Ground truth for a rendered sequence. Node ids are model vertex ids.
struct SynthTruth {
  Intrinsics intrinsics;
  std::vector<Pose> poses;  // world-to-camera per frame
  std::map<NodeId, Point3> points;
  PlaneGraph graph;             // annotation in frame 0, faces extracted
  std::vector<int> face_model;  // graph face -> model face
  TrackSequence tracks;         // exact projections for every frame
  PolyModel model;
};

struct SynthResult {
  std::vector<Frame> frames;
  SynthTruth truth;
};

inline Pose look_at(const Point3& eye, const Point3& target, const Point3& up = Point3::UnitZ()) {
  const Point3 z = (target - eye).normalized();
  const Point3 x = z.cross(up).normalized();
  const Point3 y = z.cross(x);
  Pose p;
  p.rotation.row(0) = x.transpose();
  p.rotation.row(1) = y.transpose();
  p.rotation.row(2) = z.transpose();
  p.translation = -(p.rotation * eye);
  return p;
}

inline std::vector<Pose> orbit_poses(const SynthSpec& s) {
  std::vector<Pose> out;
  const double el = s.elevation_deg * M_PI / 180.0;
  for (int k = 0; k < s.frames; ++k) {
    const double az = (s.azimuth_start_deg + k * s.azimuth_step_deg) * M_PI / 180.0;
    const Point3 eye = s.target + s.radius * Point3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                                   std::sin(el));
    out.push_back(look_at(eye, s.target));
  }
  return out;
}

namespace detail {

inline double hash01(std::uint64_t seed, std::int64_t a, std::int64_t b, std::int64_t c) {
  const std::uint64_t h = mix_seed(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(a)),
                                            static_cast<std::uint64_t>(b)),
                                   static_cast<std::uint64_t>(c));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double value_noise(std::uint64_t seed, int layer, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const auto iu = static_cast<std::int64_t>(fu), iv = static_cast<std::int64_t>(fv);
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double su = smooth(u - fu), sv = smooth(v - fv);
  auto h = [&](std::int64_t a, std::int64_t b) { return hash01(seed, layer, a * 73856093LL, b); };
  const double top = (1 - su) * h(iu, iv) + su * h(iu + 1, iv);
  const double bot = (1 - su) * h(iu, iv + 1) + su * h(iu + 1, iv + 1);
  return (1 - sv) * top + sv * bot;
}

struct FaceRaster {
  Point3 normal, origin, e1, e2;
  double offset = 0.0;
  std::vector<Point3> corners;
  double base = 128.0;
  int layer = 0;
};

// Texture of a face at world point x: two octaves of value noise in face
// coordinates, darkened in a band along the polygon boundary.
inline double face_texture(const FaceRaster& f, const Point3& x, std::uint64_t seed) {
  const Point3 d = x - f.origin;
  const double u = d.dot(f.e1), v = d.dot(f.e2);
  double val = f.base + 55.0 * (value_noise(seed, f.layer, u / 0.09, v / 0.09) - 0.5) +
               25.0 * (value_noise(seed, f.layer + 1000, u / 0.035, v / 0.035) - 0.5);
  double edge = 1e9;
  for (std::size_t i = 0; i < f.corners.size(); ++i) {
    const Point3& a = f.corners[i];
    const Point3& b = f.corners[(i + 1) % f.corners.size()];
    const Point3 ab = b - a;
    const double t = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    edge = std::min(edge, (a + t * ab - x).norm());
  }
  if (edge < 0.025) val -= 45.0;
  return val;
}

inline double background_texture(const Point3& dir, std::uint64_t seed) {
  const double az = std::atan2(dir.y(), dir.x());
  const double el = std::asin(std::clamp(dir.z(), -1.0, 1.0));
  return 128.0 + 50.0 * (value_noise(seed, 777, az / 0.03, el / 0.03) - 0.5);
}

}  // namespace detail

/// Renders one frame of `model` seen through `pose`.
inline Frame render_frame(const PolyModel& model, const Intrinsics& k, const Pose& pose, int width,
                          int height, int supersample, std::uint64_t seed, int index = 0) {
  const int s = std::max(1, supersample);
  const int sw = width * s, sh = height * s;
  std::vector<float> depth(static_cast<std::size_t>(sw) * sh, std::numeric_limits<float>::infinity());
  std::vector<float> value(static_cast<std::size_t>(sw) * sh, -1.f);
  const Point3 eye = pose.center();
  const Mat3 rt = pose.rotation.transpose();

  for (std::size_t fi = 0; fi < model.faces.size(); ++fi) {
    detail::FaceRaster f;
    f.normal = model.face_normal(fi);
    for (int id : model.faces[fi]) f.corners.push_back(model.vertices[static_cast<std::size_t>(id)]);
    f.origin = f.corners[0];
    f.offset = f.normal.dot(f.origin);
    f.e1 = (f.corners[1] - f.corners[0]).normalized();
    f.e2 = f.normal.cross(f.e1);
    f.base = model.base_intensity[fi];
    f.layer = static_cast<int>(fi) * 7 + 1;
    if (f.normal.dot(eye - f.origin) <= 0.0) continue;  // back facing

    std::vector<Point2> poly;
    bool in_front = true;
    for (const auto& c : f.corners) {
      const Point3 xc = pose.apply(c);
      if (xc.z() <= 1e-6) in_front = false;
      else poly.emplace_back(k.f * xc.x() / xc.z() + k.u, k.f * xc.y() / xc.z() + k.v);
    }
    if (!in_front) continue;
    double minx = 1e18, maxx = -1e18, miny = 1e18, maxy = -1e18;
    for (const auto& p : poly) {
      minx = std::min(minx, p.x());
      maxx = std::max(maxx, p.x());
      miny = std::min(miny, p.y());
      maxy = std::max(maxy, p.y());
    }
    // sample (i, j) sits at pixel coordinate ((i + 0.5) / s - 0.5)
    const int i0 = std::max(0, static_cast<int>(std::floor((minx + 0.5) * s)));
    const int i1 = std::min(sw - 1, static_cast<int>(std::ceil((maxx + 0.5) * s)));
    const int j0 = std::max(0, static_cast<int>(std::floor((miny + 0.5) * s)));
    const int j1 = std::min(sh - 1, static_cast<int>(std::ceil((maxy + 0.5) * s)));
    double area = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) area += detail::cross2(poly[i], poly[(i + 1) % poly.size()]);
    const double orient = area >= 0 ? 1.0 : -1.0;
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        const Point2 px((i + 0.5) / s - 0.5, (j + 0.5) / s - 0.5);
        bool inside = true;
        for (std::size_t e = 0; e < poly.size() && inside; ++e) {
          const Point2& a = poly[e];
          const Point2& b = poly[(e + 1) % poly.size()];
          inside = orient * detail::cross2(b - a, px - a) >= 0.0;
        }
        if (!inside) continue;
        const Point3 dir = rt * Point3((px.x() - k.u) / k.f, (px.y() - k.v) / k.f, 1.0);
        const double t = (f.offset - f.normal.dot(eye)) / f.normal.dot(dir);
        const std::size_t idx = static_cast<std::size_t>(j) * sw + i;
        if (t > 0 && t < depth[idx]) {
          depth[idx] = static_cast<float>(t);
          value[idx] = static_cast<float>(detail::face_texture(f, eye + t * dir, seed));
        }
      }
  }

  Frame out(width, height, index);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int j = 0; j < s; ++j)
        for (int i = 0; i < s; ++i) {
          const std::size_t idx = static_cast<std::size_t>(y * s + j) * sw + (x * s + i);
          double v = value[idx];
          if (v < 0.0) {
            const Point2 px(x + (i + 0.5) / s - 0.5, y + (j + 0.5) / s - 0.5);
            v = detail::background_texture(
                (rt * Point3((px.x() - k.u) / k.f, (px.y() - k.v) / k.f, 1.0)).normalized(), seed);
          }
          acc += v;
        }
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(acc / (s * s)), 0L, 255L));
    }
  return out;
}

inline PolyModel synth_model(const std::string& name) {
  if (name == "cube") return make_cube_room_model();
  if (name == "box") return make_box_model();
  throw Error(ErrorCode::kInvalidArgument, "unknown synthetic model", name);
}

/// Renders a synthetic orbit sequence with its ground truth.
///
/// Annotated faces are the model faces that face the camera in every frame;
/// the annotation graph lives in frame 0 with node ids equal to vertex ids.
inline SynthResult synth_scene(const SynthSpec& spec) {
  if (spec.frames < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one frame");
  SynthResult out;
  SynthTruth& t = out.truth;
  t.model = synth_model(spec.model);
  t.intrinsics = spec.intrinsics;
  t.poses = orbit_poses(spec);

  std::vector<std::size_t> visible;
  for (std::size_t f = 0; f < t.model.faces.size(); ++f) {
    const Point3 n = t.model.face_normal(f);
    const Point3 c = t.model.face_centroid(f);
    bool all = true;
    for (const auto& p : t.poses) all = all && n.dot(p.center() - c) > 1e-9;
    if (all) visible.push_back(f);
  }
  std::set<int> used;
  for (std::size_t f : visible)
    for (int id : t.model.faces[f]) used.insert(id);
  for (int id : used) t.points[id] = t.model.vertices[static_cast<std::size_t>(id)];

  for (std::size_t k = 0; k < t.poses.size(); ++k) {
    FrameTrack& ft = t.tracks.ensure(static_cast<int>(k));
    for (const auto& [id, x] : t.points) {
      Point2 px;
      try {
        px = project(x, t.intrinsics, t.poses[k]);
      } catch (const Error&) {
        throw Error(ErrorCode::kModelOutOfView, "vertex behind the camera", std::to_string(id));
      }
      if (px.x() < spec.margin || px.y() < spec.margin || px.x() > spec.width - 1 - spec.margin ||
          px.y() > spec.height - 1 - spec.margin)
        throw Error(ErrorCode::kModelOutOfView,
                    "vertex leaves the image in frame " + std::to_string(k), std::to_string(id));
      ft[id] = {px, 1.0, k == 0 ? Provenance::kNewlyAdded : Provenance::kTracked};
    }
  }

  for (const auto& [id, tp] : t.tracks.frame(0)) t.graph.nodes[id] = {tp.position, 0};
  for (std::size_t f : visible) {
    const auto& ids = t.model.faces[f];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const NodeId a = ids[i], b = ids[(i + 1) % ids.size()];
      if (!t.graph.has_edge(a, b)) t.graph.add_edge(a, b);
    }
  }
  t.graph.faces = extract_faces(t.graph);
  for (const auto& face : t.graph.faces) {
    const std::set<int> members(face.begin(), face.end());
    int match = -1;
    for (std::size_t f : visible) {
      const auto& ids = t.model.faces[f];
      if (std::set<int>(ids.begin(), ids.end()) == members) match = static_cast<int>(f);
    }
    t.face_model.push_back(match);
  }

  Rng noise_rng(mix_seed(spec.seed, 0xC0FFEE));
  for (int k = 0; spec.render && k < spec.frames; ++k) {
    Frame fr = render_frame(t.model, t.intrinsics, t.poses[static_cast<std::size_t>(k)], spec.width,
                            spec.height, spec.supersample, spec.seed, k);
    for (const auto& occ : spec.occluders) {
      if (k < occ.first_frame || k > occ.last_frame) continue;
      const Point2 c = project(t.model.vertices.at(static_cast<std::size_t>(occ.vertex)), t.intrinsics,
                               t.poses[static_cast<std::size_t>(k)]);
      for (int y = 0; y < fr.height; ++y)
        for (int x = 0; x < fr.width; ++x)
          if ((Point2(x, y) - c).norm() <= occ.radius)
            fr.at(x, y) = static_cast<std::uint8_t>(occ.intensity);
    }
    if (spec.noise > 0.0) {
      for (auto& v : fr.intensity)
        v = static_cast<std::uint8_t>(std::clamp(std::lround(v + spec.noise * noise_rng.normal()), 0L, 255L));
    }
    out.frames.push_back(std::move(fr));
  }
  return out;
}

}  // namespace planarc
