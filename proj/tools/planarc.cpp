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
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "planarc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace planarc;

namespace {

struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, ransac_iters, keyframe_stride;
  std::optional<double> bandwidth, lambda_plane, lambda_rel, tau_release, focal;
  std::optional<std::string> window_schedule;
  bool no_relations = false;

  void attach(CLI::App& app) {
    app.add_option("--seed", seed, "seed for randomized stages");
    app.add_option("--threads", threads, "worker thread cap");
    app.add_option("--ransac-iters", ransac_iters, "RANSAC hypotheses per segment");
    app.add_option("--bandwidth", bandwidth, "mean-shift bandwidth on unit normals");
    app.add_option("--lambda-plane", lambda_plane, "planarity weight");
    app.add_option("--lambda-rel", lambda_rel, "relation weight");
    app.add_option("--tau-release", tau_release, "release threshold on reprojection cost ratio");
    app.add_option("--keyframe-stride", keyframe_stride, "frames between keyframes");
    app.add_option("--window-schedule", window_schedule, "back-trace window schedule")->check(CLI::IsMember({"min", "max"}));
    app.add_option("--focal", focal, "focal length in pixels; skips the focal search");
    app.add_flag("--no-relations", no_relations, "optimize without relation constraints");
  }

  PipelineConfig config() const {
    PipelineConfig cfg = config_from_environment();
    Json j = Json::object();
    if (seed) j["seed"] = *seed;
    if (threads) j["threads"] = *threads;
    if (ransac_iters) j["ransac-iters"] = *ransac_iters;
    if (keyframe_stride) j["keyframe-stride"] = *keyframe_stride;
    if (bandwidth) j["bandwidth"] = *bandwidth;
    if (lambda_plane) j["lambda-plane"] = *lambda_plane;
    if (lambda_rel) j["lambda-rel"] = *lambda_rel;
    if (tau_release) j["tau-release"] = *tau_release;
    if (focal) j["focal"] = *focal;
    if (window_schedule) j["window-schedule"] = *window_schedule;
    if (no_relations) j["no-relations"] = true;
    apply_config(cfg, j);
    return cfg.finalize();
  }
};

void emit(const std::string& stage, Json metrics) {
  metrics["stage"] = stage;
  std::cout << metrics.dump() << std::endl;
}

Json metrics(const TrackStageReport& r) {
  return {{"from", r.from}, {"to", r.to}, {"tracked_corners", r.tracked}, {"lost", r.lost}, {"flagged", r.flagged},
          {"lost_nodes", r.lost_nodes}};
}

Json metrics(const ReconstructStageReport& r) {
  return {{"focal", r.focal}, {"focal_searched", r.searched}, {"keyframes", r.keyframes}, {"points", r.points},
          {"excluded", r.excluded}, {"faces", r.faces}, {"sfm_rms", r.sfm_rms}, {"rms", r.rms},
          {"bundle_iterations", r.bundle_iterations}};
}

Json metrics(const RelationStageReport& r) {
  return {{"groups", r.groups}, {"parallel", r.parallel}, {"orthogonal", r.orthogonal}, {"coplanar", r.coplanar},
          {"user", r.user}};
}

Json metrics(const OptimizeStageReport& r) {
  return {{"iterations", r.bundle.iterations}, {"initial_cost", r.bundle.initial_cost},
          {"final_cost", r.bundle.final_cost}, {"final_rms", r.rms}, {"max_planarity", r.max_planarity},
          {"released_constraints", r.released}, {"active_constraints", r.active}, {"stop", r.bundle.stop_reason}};
}

fs::path default_obj(const fs::path& session) { return session_file(session).parent_path() / "model.obj"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planarc: planar structure recovery from annotated video frames"};
  app.require_subcommand(1);
  Flags flags;
  flags.attach(app);
  app.fallthrough();

  std::string session;
  std::string stage;

  auto* track = app.add_subcommand("track", "track annotated corners through the sequence");
  std::optional<int> track_from, track_to;
  track->add_option("session", session, "session file or directory")->required();
  track->add_option("--from", track_from, "first frame (default: annotation frame)");
  track->add_option("--to", track_to, "last frame (default: last frame)");

  auto* backtrace = app.add_subcommand("backtrace", "apply a corner correction and back-trace its path");
  NodeId bt_node = 0;
  int bt_from = 0, bt_to = 0;
  double bt_x = 0, bt_y = 0;
  backtrace->add_option("session", session)->required();
  backtrace->add_option("--node", bt_node, "corrected node id")->required();
  backtrace->add_option("--from", bt_from, "trusted frame i")->required();
  backtrace->add_option("--to", bt_to, "corrected frame j")->required();
  backtrace->add_option("--x", bt_x, "corrected x in frame j")->required();
  backtrace->add_option("--y", bt_y, "corrected y in frame j")->required();

  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "recover camera poses and 3D corners");
  reconstruct_cmd->add_option("session", session)->required();

  auto* detect = app.add_subcommand("detect-relations", "detect parallel, orthogonal and coplanar faces");
  detect->add_option("session", session)->required();

  auto* optimize = app.add_subcommand("optimize", "relation-augmented bundle adjustment");
  optimize->add_option("session", session)->required();

  auto* export_cmd = app.add_subcommand("export", "write the model as OBJ plus a relations report");
  std::string obj;
  export_cmd->add_option("session", session)->required();
  export_cmd->add_option("--out", obj, "OBJ path (default: model.obj next to the session)");

  auto* pipeline = app.add_subcommand("pipeline", "track, reconstruct, detect-relations, optimize, export");
  pipeline->add_option("session", session)->required();
  pipeline->add_option("--out", obj, "OBJ path (default: model.obj next to the session)");

  auto* synth = app.add_subcommand("synth", "render a synthetic sequence with ground truth");
  SynthSpec spec;
  std::string out_dir;
  std::vector<std::string> occluders;
  synth->add_option("--model", spec.model, "cube or box")->check(CLI::IsMember({"cube", "box"}));
  synth->add_option("--frames", spec.frames, "number of frames");
  synth->add_option("--noise", spec.noise, "Gaussian intensity noise (gray levels)");
  synth->add_option("--width", spec.width);
  synth->add_option("--height", spec.height);
  synth->add_option("--azimuth-step", spec.azimuth_step_deg, "orbit step per frame (degrees)");
  synth->add_option("--occlude", occluders, "vertex,first,last: disc over a vertex in a frame range");
  synth->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const PipelineConfig cfg = flags.config();
    if (synth->parsed()) {
      stage = "synth";
      spec.seed = cfg.seed;
      for (const auto& o : occluders) {
        OccluderSpec occ;
        if (std::sscanf(o.c_str(), "%d,%d,%d", &occ.vertex, &occ.first_frame, &occ.last_frame) != 3)
          throw Error(ErrorCode::kInvalidArgument, "occluder must be vertex,first,last", o);
        spec.occluders.push_back(occ);
      }
      const SynthResult r = write_synthetic_session(spec, out_dir);
      emit(stage, {{"frames", r.frames.size()}, {"corners", r.truth.points.size()}, {"faces", r.truth.graph.faces.size()},
                   {"session", (fs::path(out_dir) / "session").string()}});
      return 0;
    }

    stage = "load";
    Session s = load_session(session);
    auto frames = [&] { return open_frames(s, session, cfg.tracker.flow.levels); };

    if (track->parsed()) {
      stage = "track";
      auto cache = frames();
      emit(stage, metrics(run_track(s, cache, cfg, track_from, track_to)));
    } else if (backtrace->parsed()) {
      stage = "backtrace";
      auto cache = frames();
      const auto r = run_correct(s, cache, cfg, bt_node, bt_from, bt_to, {bt_x, bt_y});
      emit(stage, {{"node", bt_node}, {"path_cost", r.path.cost}, {"relaxations", r.path.relaxations},
                   {"retracked_frames", r.retracked.size()}});
    } else if (reconstruct_cmd->parsed()) {
      stage = "reconstruct";
      emit(stage, metrics(run_reconstruct(s, cfg)));
    } else if (detect->parsed()) {
      stage = "detect-relations";
      emit(stage, metrics(run_detect_relations(s, cfg)));
    } else if (optimize->parsed()) {
      stage = "optimize";
      emit(stage, metrics(run_optimize(s, cfg)));
    } else if (export_cmd->parsed()) {
      stage = "export";
      const fs::path path = obj.empty() ? default_obj(session) : fs::path(obj);
      run_export(s, path);
      emit(stage, {{"obj", path.string()}, {"faces", s.model->faces.size()}, {"vertices", s.model->points.size()}});
      return 0;
    } else if (pipeline->parsed()) {
      auto cache = frames();
      stage = "track";
      emit(stage, metrics(run_track(s, cache, cfg)));
      stage = "reconstruct";
      emit(stage, metrics(run_reconstruct(s, cfg)));
      stage = "detect-relations";
      emit(stage, metrics(run_detect_relations(s, cfg)));
      stage = "optimize";
      emit(stage, metrics(run_optimize(s, cfg)));
      stage = "export";
      const fs::path path = obj.empty() ? default_obj(session) : fs::path(obj);
      run_export(s, path);
      emit(stage, {{"obj", path.string()}, {"faces", s.model->faces.size()}, {"vertices", s.model->points.size()}});
      Json report = relations_report(*s.model, s.relations);
      report["rms_reprojection"] = s.model->rms_reprojection;
      emit("report", report);
    }
    stage = "save";
    save_session(s, session);
    return 0;
  } catch (const Error& e) {
    std::cerr << Json{{"error", to_string(e.code())}, {"stage", stage}, {"entity", e.entity()}, {"message", e.what()}}.dump()
              << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "Internal"}, {"stage", stage}, {"entity", ""}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  }
}
