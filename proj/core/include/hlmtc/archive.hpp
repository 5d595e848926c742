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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hlmtc/tensor.hpp"

namespace hlmtc {

inline constexpr int kArchiveFormatVersion = 1;

/// Container shared by checkpoints and analysis snapshots.
///
/// Layout: a text line `hlmtc-archive <version>`, a single-line JSON manifest
/// `{"format_version", "meta", "arrays": [{"name", "shape", "dtype",
/// "offset", "count"}]}`, then the raw float64 little-endian payload of each
/// array in manifest order. Offsets are relative to the payload start.
struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor& array(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

}  // namespace hlmtc
