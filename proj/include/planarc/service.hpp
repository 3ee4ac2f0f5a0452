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

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "planarc/pipeline.hpp"
#include "httplib.h"

namespace planarc {

enum class StageStatus { kIdle, kRunning, kDone, kError };

constexpr std::string_view to_string(StageStatus s) {
  switch (s) {
    case StageStatus::kIdle: return "idle";
    case StageStatus::kRunning: return "running";
    case StageStatus::kDone: return "done";
    case StageStatus::kError: return "error";
  }
  return "idle";
}

struct StageState {
  StageStatus status = StageStatus::kIdle;
  Json result;
  Json error;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidAnnotation:
    case ErrorCode::kNonPlanarEmbedding:
    case ErrorCode::kDegenerateFace:
    case ErrorCode::kNoAnnotations:
    case ErrorCode::kNoPath:
      return 422;
    case ErrorCode::kEmptyModel:
      return 409;
    case ErrorCode::kInvalidArgument:
      return 400;
    default:
      return 500;
  }
}

inline Json error_json(const Error& e) {
  return {{"error", to_string(e.code())}, {"message", e.what()}, {"entity", e.entity()}};
}

/// HTTP front end over one session directory.
///
/// GET handlers read the last committed snapshot. Mutations are serialized:
/// while one is in flight (including an asynchronous stage) any other
/// mutation is answered with 409. Every committed mutation is written to the
/// session file before it becomes visible.
class SessionService {
 public:
  static constexpr const char* kStages[] = {"track", "reconstruct", "detect-relations", "optimize"};

  SessionService(std::filesystem::path dir, PipelineConfig cfg = {})
      : dir_(std::move(dir)), cfg_(std::move(cfg.finalize())) {
    snapshot_ = std::make_shared<const Session>(load_session(dir_));
    for (const char* s : kStages) stages_[s] = {};
    routes();
  }

  ~SessionService() {
    stop();
    if (job_.joinable()) job_.join();
  }

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  httplib::Server& server() { return server_; }

  /// Binds to an ephemeral port and serves on a background thread.
  int start_background(const std::string& host = "127.0.0.1") {
    const int port = server_.bind_to_any_port(host);
    if (port < 0) throw Error(ErrorCode::kIoError, "cannot bind", host);
    listener_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port;
  }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  void stop() {
    server_.stop();
    if (listener_.joinable()) listener_.join();
  }

  std::shared_ptr<const Session> snapshot() const {
    std::lock_guard lock(state_mutex_);
    return snapshot_;
  }

  /// Blocks until no stage job is running.
  void wait_idle() {
    std::unique_lock lock(state_mutex_);
    idle_cv_.wait(lock, [this] { return !busy_; });
  }

 private:
  using Mutation = std::function<Json(Session&)>;

  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(1), "application/json");
  }

  static Json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
      return Json::parse(req.body);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("body is not valid JSON: ") + e.what());
    }
  }

  bool acquire(const std::string& stage) {
    std::lock_guard lock(state_mutex_);
    if (busy_) return false;
    busy_ = true;
    running_ = stage;
    return true;
  }

  void release() {
    {
      std::lock_guard lock(state_mutex_);
      busy_ = false;
      running_.clear();
    }
    idle_cv_.notify_all();
  }

  void commit(Session s, bool model_stale) {
    save_session(s, dir_);
    std::lock_guard lock(state_mutex_);
    snapshot_ = std::make_shared<const Session>(std::move(s));
    if (model_stale) dirty_ = true;
  }

  PyramidCache& frames() {
    std::lock_guard lock(frames_mutex_);
    if (!frames_) frames_ = std::make_unique<PyramidCache>(load_session_frames(*snapshot(), dir_), cfg_.tracker.flow.levels);
    return *frames_;
  }

  void conflict(httplib::Response& res) {
    std::string running;
    {
      std::lock_guard lock(state_mutex_);
      running = running_;
    }
    reply(res, 409, {{"error", "Busy"}, {"message", "a mutation is in progress"}, {"entity", running}});
  }

  void record(const std::string& stage, StageState st) {
    std::lock_guard lock(state_mutex_);
    if (stages_.contains(stage)) stages_[stage] = std::move(st);
  }

  // Runs `m` on a copy of the snapshot and commits it, synchronously.
  void mutate(httplib::Response& res, const std::string& what, bool model_stale, const Mutation& m) {
    if (!acquire(what)) return conflict(res);
    try {
      Session s = *snapshot();
      Json out = m(s);
      commit(std::move(s), model_stale);
      record(what, {StageStatus::kDone, out, nullptr});
      release();
      reply(res, 200, out);
    } catch (const Error& e) {
      record(what, {StageStatus::kError, nullptr, error_json(e)});
      release();
      reply(res, http_status(e.code()), error_json(e));
    } catch (const Json::exception& e) {
      release();
      reply(res, 400, {{"error", "InvalidArgument"}, {"message", e.what()}, {"entity", ""}});
    } catch (const std::exception& e) {
      release();
      reply(res, 500, {{"error", "Internal"}, {"message", e.what()}, {"entity", ""}});
    }
  }

  // Starts `m` as a stage job; progress is reported through /status.
  void launch(httplib::Response& res, const std::string& stage, bool model_stale, Mutation m) {
    if (!acquire(stage)) return conflict(res);
    if (job_.joinable()) job_.join();
    {
      std::lock_guard lock(state_mutex_);
      stages_[stage] = {StageStatus::kRunning, nullptr, nullptr};
    }
    job_ = std::thread([this, stage, model_stale, m = std::move(m)] {
      StageState st;
      try {
        Session s = *snapshot();
        st.result = m(s);
        commit(std::move(s), model_stale);
        st.status = StageStatus::kDone;
      } catch (const Error& e) {
        st.status = StageStatus::kError;
        st.error = error_json(e);
      } catch (const std::exception& e) {
        st.status = StageStatus::kError;
        st.error = {{"error", "Internal"}, {"message", e.what()}, {"entity", ""}};
      }
      {
        std::lock_guard lock(state_mutex_);
        stages_[stage] = st;
      }
      release();
    });
    reply(res, 202, {{"stage", stage}, {"status", "running"}});
  }

  static Json track_point_json(int frame, const TrackPoint& tp) {
    return {{"frame", frame},
            {"x", tp.position.x()},
            {"y", tp.position.y()},
            {"confidence", tp.confidence},
            {"provenance", to_string(tp.provenance)}};
  }

  static Point2 point_from(const Json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::kInvalidArgument, "point must be [x, y]");
    return {j.at(0).get<double>(), j.at(1).get<double>()};
  }

  // Wraps handlers so JSON access errors become 400 responses.
  template <class F>
  auto guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        reply(res, http_status(e.code()), error_json(e));
      } catch (const Json::exception& e) {
        reply(res, 400, {{"error", "InvalidArgument"}, {"message", e.what()}, {"entity", ""}});
      }
    };
  }

  void routes() {
    server_.Get(R"(/frames/(-?\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const int k = std::stoi(req.matches[1]);
      const auto snap = snapshot();
      if (k < 0 || k >= snap->source.count)
        return reply(res, 404, {{"error", "NotFound"}, {"message", "unknown frame"}, {"entity", std::to_string(k)}});
      res.set_content(encode_png(frames().frame(k)), "image/png");
    }));

    server_.Get("/graph", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, to_json(snapshot()->graph));
    }));

    server_.Put("/graph", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req);
      mutate(res, "graph", true, [&](Session& s) {
        PlaneGraph g;
        const int frame = s.graph.nodes.empty() ? 0 : annotation_frame(s.graph);
        for (const auto& n : body.at("nodes")) {
          const NodeId id = n.at("id").get<NodeId>();
          if (g.nodes.contains(id)) throw Error(ErrorCode::kInvalidAnnotation, "duplicate node id", std::to_string(id));
          g.nodes[id] = {Point2(n.at("x").get<double>(), n.at("y").get<double>()), n.value("frame", frame)};
        }
        for (const auto& e : body.at("edges")) g.add_edge(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
        if (g.nodes.empty()) throw Error(ErrorCode::kNoAnnotations, "graph has no nodes");
        Session next = s;
        next.graph = g;
        if (!(next.graph.nodes == s.graph.nodes && next.graph.edges == s.graph.edges)) {
          next.tracks = TrackSequence{};
          next.trajectory.reset();
          next.model.reset();
          next.relations = RelationSet{};
        }
        refresh_faces(next);
        s = std::move(next);
        return to_json(s.graph);
      });
    }));

    server_.Post("/track", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req);
      std::optional<int> from, to;
      if (body.contains("from")) from = body.at("from").get<int>();
      if (body.contains("to")) to = body.at("to").get<int>();
      launch(res, "track", true, [this, from, to](Session& s) {
        const auto r = run_track(s, frames(), cfg_, from, to);
        return Json{{"from", r.from}, {"to", r.to}, {"tracked", r.tracked}, {"lost", r.lost}, {"flagged", r.flagged},
                    {"lost_nodes", r.lost_nodes}};
      });
    }));

    server_.Post("/correct", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req);
      const NodeId node = body.at("node").get<NodeId>();
      const int i = body.at("frame_i").get<int>();
      const int j = body.at("frame_j").get<int>();
      const Point2 p = point_from(body.at("point"));
      const auto snap = snapshot();
      if (!snap->graph.nodes.contains(node))
        return reply(res, 404, {{"error", "NotFound"}, {"message", "unknown node"}, {"entity", std::to_string(node)}});
      if (i < 0 || j >= snap->source.count || !snap->tracks.has_frame(i))
        return reply(res, 404, {{"error", "NotFound"}, {"message", "unknown frame"}, {"entity", std::to_string(i < 0 ? i : j)}});
      mutate(res, "correct", true, [&](Session& s) {
        const CorrectionReport r = run_correct(s, frames(), cfg_, node, i, j, p);
        Json frames_out = Json::array();
        for (int k = i + 1; k <= j; ++k) frames_out.push_back(track_point_json(k, *s.tracks.at(k, node)));
        Json retracked = Json::array();
        for (int k : r.retracked) retracked.push_back(track_point_json(k, *s.tracks.at(k, node)));
        return Json{{"node", node}, {"frames", frames_out}, {"retracked", retracked}, {"path_cost", r.path.cost}};
      });
    }));

    server_.Post("/add-point", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req);
      const int frame = body.at("frame").get<int>();
      const Point2 p = point_from(body.at("point"));
      const auto edges = body.at("edges").get<std::vector<NodeId>>();
      const auto snap = snapshot();
      for (NodeId e : edges)
        if (!snap->graph.nodes.contains(e))
          return reply(res, 404, {{"error", "NotFound"}, {"message", "unknown node"}, {"entity", std::to_string(e)}});
      if (!snap->tracks.has_frame(frame))
        return reply(res, 404, {{"error", "NotFound"}, {"message", "frame not tracked"}, {"entity", std::to_string(frame)}});
      mutate(res, "add-point", true, [&](Session& s) {
        const NodeId id = run_add_point(s, frame, p, edges);
        return Json{{"node", id}, {"graph", to_json(s.graph)}};
      });
    }));

    server_.Post("/reconstruct", guarded([this](const httplib::Request&, httplib::Response& res) {
      launch(res, "reconstruct", false, [this](Session& s) {
        const auto r = run_reconstruct(s, cfg_);
        {
          std::lock_guard lock(state_mutex_);
          dirty_ = false;
        }
        return Json{{"focal", r.focal}, {"keyframes", r.keyframes}, {"points", r.points}, {"faces", r.faces}, {"sfm_rms", r.sfm_rms}, {"rms", r.rms}};
      });
    }));

    server_.Post("/relations/detect", guarded([this](const httplib::Request&, httplib::Response& res) {
      mutate(res, "detect-relations", false, [this](Session& s) {
        run_detect_relations(s, cfg_);
        return to_json(s.relations);
      });
    }));

    server_.Post("/relations/user", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req);
      const RelationKind kind = relation_kind_from_string(body.at("kind").get<std::string>());
      const auto faces = body.at("faces").get<std::vector<int>>();
      const auto snap = snapshot();
      if (!snap->model) return reply(res, 409, {{"error", "EmptyModel"}, {"message", "no reconstruction"}, {"entity", ""}});
      for (int f : faces)
        if (f < 0 || f >= static_cast<int>(snap->model->faces.size()))
          return reply(res, 404, {{"error", "NotFound"}, {"message", "unknown face"}, {"entity", std::to_string(f)}});
      mutate(res, "relations-user", false, [&](Session& s) {
        const RelationConstraint& c = run_add_user_relation(s, kind, faces);
        return Json{{"constraint", to_json(c)}, {"index", s.relations.constraints.size() - 1}, {"relations", to_json(s.relations)}};
      });
    }));

    server_.Post("/optimize", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req);
      PipelineConfig cfg = cfg_;
      if (body.contains("no_relations")) cfg.use_relations = !body.at("no_relations").get<bool>();
      launch(res, "optimize", false, [cfg](Session& s) {
        const auto r = run_optimize(s, cfg);
        return Json{{"iterations", r.bundle.iterations},
                    {"initial_cost", r.bundle.initial_cost},
                    {"final_cost", r.bundle.final_cost},
                    {"rms", r.rms},
                    {"max_planarity", r.max_planarity},
                    {"released", r.bundle.released},
                    {"active", r.active}};
      });
    }));

    server_.Get("/model", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto snap = snapshot();
      if (!snap->model) return reply(res, 404, {{"error", "NotFound"}, {"message", "no model yet"}, {"entity", ""}});
      Json out = to_json(*snap->model);
      out["relations"] = to_json(snap->relations);
      out["report"] = relations_report(*snap->model, snap->relations);
      out["intrinsics"] = {{"f", snap->intrinsics->f}, {"u", snap->intrinsics->u}, {"v", snap->intrinsics->v}};
      out["trajectory"] = to_json(*snap->trajectory);
      reply(res, 200, out);
    }));

    server_.Get("/tracks", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, to_json(snapshot()->tracks));
    }));

    server_.Get("/status", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto snap = snapshot();
      Json stages = Json::object();
      bool busy = false, dirty = false;
      std::string running;
      {
        std::lock_guard lock(state_mutex_);
        for (const auto& [name, st] : stages_)
          stages[name] = {{"status", to_string(st.status)}, {"result", st.result}, {"error", st.error}};
        busy = busy_;
        dirty = dirty_;
        running = running_;
      }
      reply(res, 200,
            {{"session", dir_.filename().string().empty() ? dir_.parent_path().filename().string() : dir_.filename().string()},
             {"dirty", dirty},
             {"busy", busy},
             {"running", running},
             {"stages", stages},
             {"frames", snap->source.count},
             {"tracked_frames", snap->tracks.empty() ? Json(nullptr) : Json::array({snap->tracks.first_frame, snap->tracks.last_frame()})},
             {"has_model", snap->model.has_value()}});
    }));
  }

  std::filesystem::path dir_;
  PipelineConfig cfg_;
  httplib::Server server_;
  std::thread listener_;
  std::thread job_;

  mutable std::mutex state_mutex_;
  std::condition_variable idle_cv_;
  std::shared_ptr<const Session> snapshot_;
  std::map<std::string, StageState> stages_;
  bool busy_ = false;
  bool dirty_ = false;
  std::string running_;

  std::mutex frames_mutex_;
  std::unique_ptr<PyramidCache> frames_;
};

}  // namespace planarc
