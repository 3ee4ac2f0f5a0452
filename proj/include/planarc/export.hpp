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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/session.hpp"

namespace planarc {

struct ObjMesh {
  std::vector<Point3> vertices;
  std::vector<std::vector<int>> faces;  // 0-based vertex indices
};

inline std::filesystem::path relations_sidecar(const std::filesystem::path& obj) {
  return std::filesystem::path(obj.string() + ".relations.json");
}

/// Relation report: every constraint with its status and, for model faces,
/// their plane and planarity residual.
inline Json relations_report(const SceneModel& model, const RelationSet& relations) {
  Json faces = Json::array();
  for (std::size_t i = 0; i < model.faces.size(); ++i) {
    const auto& f = model.faces[i];
    faces.push_back({{"face", i},
                     {"normal", detail::vec_json(f.plane.normal)},
                     {"offset", f.plane.offset},
                     {"planarity_residual", f.planarity_residual}});
  }
  Json active = Json::array(), released = Json::array();
  for (const auto& c : relations.constraints) (c.active() ? active : released).push_back(to_json(c));
  return {{"faces", faces}, {"active", active}, {"released", released}};
}

/// Writes vertices (node order) and face loops as OBJ plus the relations
/// sidecar next to it.
inline void export_model(const SceneModel& model, const RelationSet& relations, const std::filesystem::path& path) {
  if (model.faces.empty()) throw Error(ErrorCode::kEmptyModel, "model has no faces");
  std::map<NodeId, int> index;
  std::ostringstream out;
  out << "# planarc model\n";
  char buf[128];
  for (const auto& [id, x] : model.points) {
    index[id] = static_cast<int>(index.size()) + 1;
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", x.x(), x.y(), x.z());
    out << buf;
  }
  for (std::size_t i = 0; i < model.faces.size(); ++i) {
    out << "g face" << i << "\nf";
    for (NodeId id : model.faces[i].nodes) {
      const auto it = index.find(id);
      if (it == index.end()) throw Error(ErrorCode::kEmptyModel, "face corner without a point", std::to_string(id));
      out << ' ' << it->second;
    }
    out << '\n';
  }
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::kIoError, "cannot write", path.string());
    f << out.str();
  }
  std::ofstream side(relations_sidecar(path), std::ios::binary);
  if (!side) throw Error(ErrorCode::kIoError, "cannot write", relations_sidecar(path).string());
  side << relations_report(model, relations).dump(1) << '\n';
}

/// Minimal OBJ reader: `v` and `f` records, `v/vt/vn` face tokens accepted.
inline ObjMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read", path.string());
  ObjMesh m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Point3 v;
      ls >> v.x() >> v.y() >> v.z();
      if (!ls) throw Error(ErrorCode::kCorruptFile, "bad vertex record", line);
      m.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string tok;
      while (ls >> tok) {
        const int i = std::stoi(tok.substr(0, tok.find('/')));
        face.push_back(i > 0 ? i - 1 : static_cast<int>(m.vertices.size()) + i);
      }
      m.faces.push_back(face);
    }
  }
  return m;
}

}  // namespace planarc
