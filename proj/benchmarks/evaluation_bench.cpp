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

#include <benchmark/benchmark.h>

#include <numeric>

#include "hlmtc/evaluation.hpp"
#include "hlmtc/rng.hpp"

namespace {

using namespace hlmtc;

void BM_RPrecision(benchmark::State& state) {
  const auto labels = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<double> scores(labels);
  for (double& x : scores) x = rng.uniform();
  std::vector<std::size_t> gold;
  for (std::size_t i = 0; i < labels; i += 97) gold.push_back(i);
  std::vector<std::size_t> keys(labels);
  std::iota(keys.begin(), keys.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(r_precision(scores, gold, keys));
}
BENCHMARK(BM_RPrecision)->Arg(126)->Arg(8093)->Arg(22391);

}  // namespace
