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

#include "hlmtc/autograd.hpp"
#include "hlmtc/rng.hpp"

namespace {

using namespace hlmtc;

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (double& x : t.data()) x = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_matrix(n, n, rng);
  const Tensor b = random_matrix(n, n, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.value(matmul(tape.constant(a), tape.constant(b))).data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor a = random_matrix(n, n, rng);
  const Tensor b = random_matrix(n, n, rng);
  Tensor ga = Tensor::zeros_like(a), gb = Tensor::zeros_like(b);
  for (auto _ : state) {
    Tape tape(Mode::kTraining);
    tape.backward(sum(matmul(tape.leaf(a, &ga), tape.leaf(b, &gb))));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_SoftmaxRows(benchmark::State& state) {
  Rng rng(3);
  const Tensor x = random_matrix(128, 128, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.value(softmax_rows(tape.constant(x))).data().data());
  }
}
BENCHMARK(BM_SoftmaxRows);

}  // namespace
