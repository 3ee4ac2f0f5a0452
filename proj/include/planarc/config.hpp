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

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"
#include "planarc/backtrace.hpp"
#include "planarc/bundle.hpp"
#include "planarc/error.hpp"
#include "planarc/relations.hpp"
#include "planarc/sfm.hpp"
#include "planarc/tracker.hpp"

namespace planarc {

inline constexpr const char* kConfigEnv = "PLANARC_CONFIG";

struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  TrackerConfig tracker;
  BacktraceConfig backtrace;
  SfmConfig sfm;
  RelationConfig relations;
  BAConfig bundle;
  bool use_relations = true;
  std::optional<double> focal;  // px; overrides the session intrinsics
  int focal_steps = 21;
  double focal_min_factor = 0.3;  // grid bounds as multiples of the image width
  double focal_max_factor = 3.0;

  /// Copies the shared settings into the per-stage configurations.
  PipelineConfig& finalize() {
    tracker.seed = seed;
    tracker.threads = threads;
    sfm.threads = threads;
    backtrace.tracker = tracker;
    return *this;
  }
};

/// Applies a JSON object whose keys mirror the command line flags.
inline void apply_config(PipelineConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "configuration must be an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "threads") cfg.threads = v.get<int>();
      else if (key == "ransac-iters") cfg.tracker.ransac_iters = v.get<int>();
      else if (key == "spacing") cfg.tracker.spacing = v.get<double>();
      else if (key == "bandwidth") cfg.relations.bandwidth = v.get<double>();
      else if (key == "parallel-deg") cfg.relations.parallel_deg = v.get<double>();
      else if (key == "lambda-plane") cfg.bundle.lambda_plane = v.get<double>();
      else if (key == "lambda-rel") cfg.bundle.lambda_rel = v.get<double>();
      else if (key == "tau-release") cfg.bundle.tau_release = v.get<double>();
      else if (key == "max-iterations") cfg.bundle.max_iterations = v.get<int>();
      else if (key == "keyframe-stride") cfg.sfm.keyframe_stride = v.get<int>();
      else if (key == "window-schedule") {
        const auto s = v.get<std::string>();
        if (s != "min" && s != "max") throw Error(ErrorCode::kInvalidArgument, "window-schedule must be min or max", s);
        cfg.backtrace.max_schedule = s == "max";
      } else if (key == "window-cap") cfg.backtrace.window_cap = v.get<int>();
      else if (key == "no-relations") cfg.use_relations = !v.get<bool>();
      else if (key == "focal") cfg.focal = v.get<double>();
      else if (key == "focal-steps") cfg.focal_steps = v.get<int>();
      else throw Error(ErrorCode::kInvalidArgument, "unknown configuration key", key);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("bad value: ") + e.what(), key);
    }
  }
  if (cfg.threads < 1) throw Error(ErrorCode::kInvalidArgument, "threads must be at least 1");
  if (cfg.sfm.keyframe_stride < 1) throw Error(ErrorCode::kInvalidArgument, "keyframe-stride must be at least 1");
}

inline PipelineConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read configuration", path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("configuration is not valid JSON: ") + e.what(), path.string());
  }
  PipelineConfig cfg;
  apply_config(cfg, j);
  return cfg;
}

/// Defaults, overridden by the file named in PLANARC_CONFIG when set.
inline PipelineConfig config_from_environment() {
  const char* path = std::getenv(kConfigEnv);
  if (path == nullptr || *path == '\0') return {};
  return load_config_file(path);
}

}  // namespace planarc
