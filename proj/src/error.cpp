// Copyright 2026 The metasense Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "metasense/error.hpp"

namespace metasense {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnknownSense: return "UnknownSense";
    case ErrorCode::kEmptyUnion: return "EmptyUnion";
    case ErrorCode::kSenseUncovered: return "SenseUncovered";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kDuplicateSense: return "DuplicateSense";
    case ErrorCode::kGoldNotInCandidates: return "GoldNotInCandidates";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kRankTooLarge: return "RankTooLarge";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kNotAMultiple: return "NotAMultiple";
    case ErrorCode::kIdMismatch: return "IdMismatch";
    case ErrorCode::kNoCandidates: return "NoCandidates";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kTooLarge: return "TooLarge";
  }
  return "Unknown";
}

}  // namespace metasense
