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

#include <stdexcept>
#include <string>
#include <string_view>

namespace planarc {

enum class ErrorCode {
  kNonPositiveDepth,
  kNonPlanarEmbedding,
  kDegenerateFace,
  kInvalidAnnotation,
  kFrameTooSmall,
  kEmptyPointList,
  kDegenerateSegment,
  kInsufficientSupport,
  kNoConsensus,
  kNearParallel,
  kCornerLost,
  kAllCandidatesLost,
  kNoPath,
  kDegenerateConfiguration,
  kCheiralityAmbiguous,
  kInsufficientBaseline,
  kAllCandidatesDegenerate,
  kSingularNormalEquations,
  kEmptySequence,
  kMixedDimensions,
  kUnreadableImage,
  kSchemaVersionMismatch,
  kCorruptFile,
  kModelOutOfView,
  kEmptyModel,
  kNoAnnotations,
  kInvalidArgument,
  kIoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kNonPlanarEmbedding: return "NonPlanarEmbedding";
    case ErrorCode::kDegenerateFace: return "DegenerateFace";
    case ErrorCode::kInvalidAnnotation: return "InvalidAnnotation";
    case ErrorCode::kFrameTooSmall: return "FrameTooSmall";
    case ErrorCode::kEmptyPointList: return "EmptyPointList";
    case ErrorCode::kDegenerateSegment: return "DegenerateSegment";
    case ErrorCode::kInsufficientSupport: return "InsufficientSupport";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kNearParallel: return "NearParallel";
    case ErrorCode::kCornerLost: return "CornerLost";
    case ErrorCode::kAllCandidatesLost: return "AllCandidatesLost";
    case ErrorCode::kNoPath: return "NoPath";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kCheiralityAmbiguous: return "CheiralityAmbiguous";
    case ErrorCode::kInsufficientBaseline: return "InsufficientBaseline";
    case ErrorCode::kAllCandidatesDegenerate: return "AllCandidatesDegenerate";
    case ErrorCode::kSingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kMixedDimensions: return "MixedDimensions";
    case ErrorCode::kUnreadableImage: return "UnreadableImage";
    case ErrorCode::kSchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kModelOutOfView: return "ModelOutOfView";
    case ErrorCode::kEmptyModel: return "EmptyModel";
    case ErrorCode::kNoAnnotations: return "NoAnnotations";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code and, where one exists, the id
/// of the offending entity (node, frame, file, constraint).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string entity = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        entity_(std::move(entity)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& entity() const noexcept { return entity_; }

 private:
  ErrorCode code_;
  std::string entity_;
};

}  // namespace planarc
