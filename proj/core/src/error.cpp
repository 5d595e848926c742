// Copyright 2026 The hlmtc Authors.
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

#include "hlmtc/error.hpp"

namespace hlmtc {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kInvalidArgument: return "E_INVALID_ARGUMENT";
    case Errc::kParse: return "E_PARSE";
    case Errc::kDuplicateId: return "E_DUPLICATE_ID";
    case Errc::kUnresolvedParent: return "E_UNRESOLVED_PARENT";
    case Errc::kCycle: return "E_CYCLE";
    case Errc::kLevelOrder: return "E_LEVEL_ORDER";
    case Errc::kEmptyHierarchy: return "E_EMPTY_HIERARCHY";
    case Errc::kUnknownLabel: return "E_UNKNOWN_LABEL";
    case Errc::kOutOfRange: return "E_OUT_OF_RANGE";
    case Errc::kShapeMismatch: return "E_SHAPE_MISMATCH";
    case Errc::kNonFinite: return "E_NON_FINITE";
    case Errc::kConfig: return "E_CONFIG";
    case Errc::kIo: return "E_IO";
    case Errc::kDivergence: return "E_DIVERGENCE";
    case Errc::kEmptySplit: return "E_EMPTY_SPLIT";
    case Errc::kIncongruent: return "E_INCONGRUENT";
    case Errc::kUnsupportedScheme: return "E_UNSUPPORTED_SCHEME";
    case Errc::kFormat: return "E_FORMAT";
  }
  return "E_UNKNOWN";
}

}  // namespace hlmtc
