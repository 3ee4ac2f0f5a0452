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

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "planarc/error.hpp"
#include "planarc/geometry.hpp"
#include "planarc/plane_graph.hpp"
#include "planarc/relations.hpp"
#include "planarc/sfm.hpp"
#include "planarc/tracker.hpp"

namespace planarc {

inline constexpr int kSchemaVersion = 1;

/// Frame directory, relative to the session file unless absolute.
struct FrameSource {
  std::string directory;
  int count = 0;
  int width = 0;
  int height = 0;

  bool operator==(const FrameSource&) const = default;
};

struct SceneFace {
  Face nodes;
  int graph_face = -1;
  Plane plane;
  double planarity_residual = 0.0;  // max corner distance to the fitted plane
  double area = 0.0;

  bool operator==(const SceneFace&) const = default;
};

/// Reconstructed geometry. Relation members index `faces`.
struct SceneModel {
  std::map<NodeId, Point3> points;
  std::vector<SceneFace> faces;
  double rms_reprojection = 0.0;  // px
  bool optimized = false;

  bool operator==(const SceneModel&) const = default;
};

struct Session {
  int schema_version = kSchemaVersion;
  FrameSource source;
  PlaneGraph graph;
  TrackSequence tracks;
  std::optional<Intrinsics> intrinsics;
  std::optional<Trajectory> trajectory;
  std::optional<SceneModel> model;
  RelationSet relations;

  bool operator==(const Session&) const = default;
};

using Json = nlohmann::json;

namespace detail {

inline Json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> json_vec(const Json& j) {
  if (!j.is_array() || j.size() != N) throw Error(ErrorCode::kCorruptFile, "expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

}  // namespace detail

inline Json to_json(const PlaneGraph& g) {
  Json nodes = Json::array();
  for (const auto& [id, n] : g.nodes) nodes.push_back({{"id", id}, {"x", n.position.x()}, {"y", n.position.y()}, {"frame", n.frame}});
  Json edges = Json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  return {{"nodes", nodes}, {"edges", edges}, {"faces", g.faces}};
}

inline PlaneGraph graph_from_json(const Json& j) {
  PlaneGraph g;
  for (const auto& n : j.at("nodes")) {
    const NodeId id = n.at("id").get<NodeId>();
    if (g.nodes.contains(id)) throw Error(ErrorCode::kCorruptFile, "duplicate node id", std::to_string(id));
    g.nodes[id] = {Point2(n.at("x").get<double>(), n.at("y").get<double>()), n.value("frame", 0)};
  }
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::kCorruptFile, "edge must be a pair");
    g.edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
  }
  if (j.contains("faces")) g.faces = j.at("faces").get<std::vector<Face>>();
  return g;
}

inline Json to_json(const TrackSequence& t) {
  Json frames = Json::array();
  for (const auto& f : t.frames) {
    Json pts = Json::array();
    for (const auto& [id, tp] : f)
      pts.push_back({{"node", id},
                     {"x", tp.position.x()},
                     {"y", tp.position.y()},
                     {"confidence", tp.confidence},
                     {"provenance", to_string(tp.provenance)}});
    frames.push_back(pts);
  }
  Json refs = Json::array();
  for (const auto& [id, c] : t.reference_confidence) refs.push_back({id, c});
  return {{"first_frame", t.first_frame}, {"frames", frames}, {"reference_confidence", refs}};
}

inline TrackSequence tracks_from_json(const Json& j) {
  TrackSequence t;
  t.first_frame = j.at("first_frame").get<int>();
  for (const auto& f : j.at("frames")) {
    FrameTrack ft;
    for (const auto& p : f)
      ft[p.at("node").get<NodeId>()] = {Point2(p.at("x").get<double>(), p.at("y").get<double>()),
                                        p.at("confidence").get<double>(),
                                        provenance_from_string(p.at("provenance").get<std::string>())};
    t.frames.push_back(std::move(ft));
  }
  for (const auto& r : j.at("reference_confidence")) t.reference_confidence[r.at(0).get<NodeId>()] = r.at(1).get<double>();
  return t;
}

inline Json to_json(const Pose& p) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(p.rotation(i, k));
  return {{"rotation", r}, {"translation", detail::vec_json(p.translation)}};
}

inline Pose pose_from_json(const Json& j) {
  Pose p;
  const auto& r = j.at("rotation");
  if (!r.is_array() || r.size() != 9) throw Error(ErrorCode::kCorruptFile, "rotation must have 9 entries");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p.rotation(i, k) = r.at(static_cast<std::size_t>(3 * i + k)).get<double>();
  p.translation = detail::json_vec<3>(j.at("translation"));
  return p;
}

inline Json to_json(const Trajectory& t) {
  Json poses = Json::array();
  for (const auto& p : t.poses) poses.push_back(to_json(p));
  return {{"first_frame", t.first_frame}, {"poses", poses}};
}

inline Trajectory trajectory_from_json(const Json& j) {
  Trajectory t;
  t.first_frame = j.at("first_frame").get<int>();
  for (const auto& p : j.at("poses")) t.poses.push_back(pose_from_json(p));
  return t;
}

inline Json to_json(const SceneModel& m) {
  Json pts = Json::array();
  for (const auto& [id, x] : m.points) pts.push_back({{"id", id}, {"x", x.x()}, {"y", x.y()}, {"z", x.z()}});
  Json faces = Json::array();
  for (const auto& f : m.faces)
    faces.push_back({{"nodes", f.nodes},
                     {"graph_face", f.graph_face},
                     {"normal", detail::vec_json(f.plane.normal)},
                     {"offset", f.plane.offset},
                     {"planarity_residual", f.planarity_residual},
                     {"area", f.area}});
  return {{"points", pts}, {"faces", faces}, {"rms_reprojection", m.rms_reprojection}, {"optimized", m.optimized}};
}

inline SceneModel model_from_json(const Json& j) {
  SceneModel m;
  for (const auto& p : j.at("points"))
    m.points[p.at("id").get<NodeId>()] = Point3(p.at("x").get<double>(), p.at("y").get<double>(), p.at("z").get<double>());
  for (const auto& f : j.at("faces")) {
    SceneFace sf;
    sf.nodes = f.at("nodes").get<Face>();
    sf.graph_face = f.at("graph_face").get<int>();
    sf.plane.normal = detail::json_vec<3>(f.at("normal"));
    sf.plane.offset = f.at("offset").get<double>();
    sf.planarity_residual = f.at("planarity_residual").get<double>();
    sf.area = f.at("area").get<double>();
    m.faces.push_back(std::move(sf));
  }
  m.rms_reprojection = j.at("rms_reprojection").get<double>();
  m.optimized = j.at("optimized").get<bool>();
  return m;
}

inline Json to_json(const RelationConstraint& c) {
  return {{"kind", to_string(c.kind)}, {"members", c.members}, {"source", to_string(c.source)}, {"status", to_string(c.status)}};
}

inline RelationConstraint constraint_from_json(const Json& j) {
  RelationConstraint c;
  c.kind = relation_kind_from_string(j.at("kind").get<std::string>());
  c.members = j.at("members").get<std::vector<int>>();
  c.source = relation_source_from_string(j.at("source").get<std::string>());
  c.status = relation_status_from_string(j.at("status").get<std::string>());
  return c;
}

inline Json to_json(const RelationSet& r) {
  Json groups = Json::array();
  for (const auto& g : r.groups)
    groups.push_back({{"id", g.id}, {"faces", g.faces}, {"normal", detail::vec_json(g.normal)}, {"weight", g.weight}});
  Json cons = Json::array();
  for (const auto& c : r.constraints) cons.push_back(to_json(c));
  return {{"groups", groups}, {"constraints", cons}};
}

inline RelationSet relations_from_json(const Json& j) {
  RelationSet r;
  for (const auto& g : j.at("groups"))
    r.groups.push_back({g.at("id").get<int>(), g.at("faces").get<std::vector<int>>(), detail::json_vec<3>(g.at("normal")),
                        g.at("weight").get<double>()});
  for (const auto& c : j.at("constraints")) r.constraints.push_back(constraint_from_json(c));
  return r;
}

inline Json to_json(const Session& s) {
  Json j;
  j["schema_version"] = s.schema_version;
  j["source"] = {{"directory", s.source.directory}, {"count", s.source.count}, {"width", s.source.width}, {"height", s.source.height}};
  j["graph"] = to_json(s.graph);
  j["tracks"] = to_json(s.tracks);
  j["intrinsics"] = s.intrinsics ? Json{{"f", s.intrinsics->f}, {"u", s.intrinsics->u}, {"v", s.intrinsics->v}} : Json(nullptr);
  j["trajectory"] = s.trajectory ? to_json(*s.trajectory) : Json(nullptr);
  j["model"] = s.model ? to_json(*s.model) : Json(nullptr);
  j["relations"] = to_json(s.relations);
  return j;
}

inline Session session_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("schema_version")) throw Error(ErrorCode::kCorruptFile, "missing schema_version");
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion)
    throw Error(ErrorCode::kSchemaVersionMismatch,
                "file has schema " + std::to_string(version) + ", expected " + std::to_string(kSchemaVersion));
  try {
    Session s;
    s.schema_version = version;
    const auto& src = j.at("source");
    s.source = {src.at("directory").get<std::string>(), src.at("count").get<int>(), src.at("width").get<int>(),
                src.at("height").get<int>()};
    s.graph = graph_from_json(j.at("graph"));
    s.tracks = tracks_from_json(j.at("tracks"));
    if (!j.at("intrinsics").is_null()) {
      const auto& k = j.at("intrinsics");
      s.intrinsics = Intrinsics{k.at("f").get<double>(), k.at("u").get<double>(), k.at("v").get<double>()};
    }
    if (!j.at("trajectory").is_null()) s.trajectory = trajectory_from_json(j.at("trajectory"));
    if (!j.at("model").is_null()) s.model = model_from_json(j.at("model"));
    s.relations = relations_from_json(j.at("relations"));
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptFile) throw;
    throw Error(ErrorCode::kCorruptFile, e.what(), e.entity());
  }
}

/// Deterministic text form: sorted keys, one-space indentation, shortest
/// round-trip decimal for doubles.
inline std::string serialize_session(const Session& s) { return to_json(s).dump(1) + "\n"; }

inline Session parse_session(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, e.what());
  }
  return session_from_json(j);
}

/// A directory argument means the `session` file inside it.
inline std::filesystem::path session_file(const std::filesystem::path& p) {
  std::error_code ec;
  return std::filesystem::is_directory(p, ec) ? p / "session" : p;
}

/// Writes atomically through a temporary file and rename.
inline void save_session(const Session& s, const std::filesystem::path& path) {
  const auto target = session_file(path);
  const auto tmp = std::filesystem::path(target.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write session", target.string());
    out << serialize_session(s);
    if (!out) throw Error(ErrorCode::kIoError, "write failed", target.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::kIoError, ec.message(), target.string());
}

inline Session load_session(const std::filesystem::path& path) {
  const auto target = session_file(path);
  std::ifstream in(target, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read session", target.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_session(ss.str());
}

/// Frame directory of a session stored at `session_path`.
inline std::filesystem::path frames_directory(const Session& s, const std::filesystem::path& session_path) {
  const std::filesystem::path dir(s.source.directory);
  return dir.is_absolute() ? dir : session_file(session_path).parent_path() / dir;
}

}  // namespace planarc
