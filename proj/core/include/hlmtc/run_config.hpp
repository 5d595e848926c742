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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hlmtc/encoder.hpp"
#include "hlmtc/introspection.hpp"
#include "hlmtc/training.hpp"

namespace hlmtc {

/// Fully resolved settings of one CLI run. Sources are applied in order:
/// built-in defaults, the config file, then command-line flags.
///
/// File format: INI-style `key = value` lines under `[section]` headers;
/// `;` and `#` start comments. Sections: run, model, train, grid, data,
/// paths, analysis. Unknown sections or keys are errors.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string scheme = "last-six";

  ModelConfig model;  // vocabulary_size and seed are filled in at run time
  TrainConfig train;
  GridConfig grid;

  int drop_top = 0;
  int drop_bottom = 0;
  std::size_t min_frequency = 1;
  std::size_t max_vocabulary = 0;
  /// Path to a stopword list, or "default" for the built-in English list.
  std::string stopwords = "default";

  std::string corpus;
  std::string hierarchy;

  Reduction reduction = Reduction::kAllQueries;

  /// Reads a config file over the current values. Throws kConfig, kIo.
  void merge_file(const std::filesystem::path& path);
  /// Applies one `section.key=value` assignment. Throws kConfig.
  void set(std::string_view section, std::string_view key, std::string_view value);
  /// Throws kConfig for inconsistent values.
  void validate() const;

  /// Every key in canonical order; parsing the result reproduces this
  /// config exactly.
  std::string to_ini() const;
  static RunConfig from_ini(std::string_view text);
};

}  // namespace hlmtc
