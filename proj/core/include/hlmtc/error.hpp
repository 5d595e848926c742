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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hlmtc {

/// Machine-readable error categories. The CLI prints them as `error[E_...]`.
enum class Errc {
  kInvalidArgument,
  kParse,
  kDuplicateId,
  kUnresolvedParent,
  kCycle,
  kLevelOrder,
  kEmptyHierarchy,
  kUnknownLabel,
  kOutOfRange,
  kShapeMismatch,
  kNonFinite,
  kConfig,
  kIo,
  kDivergence,
  kEmptySplit,
  kIncongruent,
  kUnsupportedScheme,
  kFormat,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace hlmtc
