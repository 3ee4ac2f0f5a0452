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
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "planarc/service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"planarc-service: HTTP session service for the annotation console"};
  std::string dir;
  std::string host = "127.0.0.1";
  int port = 8765;
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("session", dir, "session directory")->required();
  app.add_option("--host", host, "bind address");
  app.add_option("--port", port, "port");
  app.add_option("--seed", seed);
  app.add_option("--threads", threads);
  CLI11_PARSE(app, argc, argv);
  try {
    planarc::PipelineConfig cfg = planarc::config_from_environment();
    if (app.count("--seed")) cfg.seed = seed;
    if (app.count("--threads")) cfg.threads = threads;
    planarc::SessionService service(dir, cfg);
    std::cout << planarc::Json{{"listening", host + ":" + std::to_string(port)}, {"session", dir}}.dump() << std::endl;
    if (!service.listen(host, port)) {
      std::cerr << planarc::Json{{"error", "IoError"}, {"message", "cannot listen"}, {"entity", host}}.dump() << std::endl;
      return 1;
    }
    return 0;
  } catch (const planarc::Error& e) {
    std::cerr << planarc::Json{{"error", planarc::to_string(e.code())}, {"message", e.what()}, {"entity", e.entity()}}.dump()
              << std::endl;
    return 1;
  }
}
