// benchmarks/seqrep-bench.cc

// Copyright 2026  seqrep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Microbenchmarks of the hot paths: CTC, recurrent stacks, the feedforward
// VAE step and synthetic data generation.

#include <benchmark/benchmark.h>

#include "seqrep/ctc.h"
#include "seqrep/dataio.h"
#include "seqrep/ffmodels.h"
#include "seqrep/nn.h"
#include "seqrep/ops.h"

namespace seqrep {
namespace {

void BM_CtcLossForwardBackward(benchmark::State &state) {
  const int64_t T = state.range(0), V = 40;
  Rng rng(1);
  const Tensor logits = rng.NormalTensor(T, V + 1);
  std::vector<int32_t> transcript;
  for (int64_t i = 0; i < T / 4; ++i) transcript.push_back(static_cast<int32_t>(1 + i % V));
  for (auto _ : state) {
    Graph g;
    Var x = g.Constant(logits);
    Var loss = CtcLoss(LogSoftmax(x), transcript);
    g.Backward(loss);
    benchmark::DoNotOptimize(loss.value().item());
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_CtcLossForwardBackward)->Arg(50)->Arg(200)->Arg(800);

void BM_BiLstmForwardBackward(benchmark::State &state) {
  const int64_t T = state.range(0), hidden = state.range(1);
  Rng rng(2);
  ParamStore store;
  RecurrentStack rnn(&store, "rnn", 20, {2, hidden, true, {}, 0.0}, rng);
  const Tensor x = rng.NormalTensor(T, 20);
  for (auto _ : state) {
    Graph g;
    Var loss = Sum(Square(rnn.Forward(g, g.Constant(x))));
    g.Backward(loss);
    benchmark::DoNotOptimize(loss.value().item());
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_BiLstmForwardBackward)->Args({50, 32})->Args({200, 32})->Args({200, 128});

void BM_VaeStep(benchmark::State &state) {
  Rng rng(3);
  ParamStore store;
  FFEncoderConfig cfg;
  cfg.input_dim = 140;
  cfg.hidden = {64, 64};
  cfg.latent = 16;
  cfg.variant = FFVariant::kVae;
  FFModel model(&store, "vae", cfg, rng);
  const Tensor x = rng.NormalTensor(state.range(0), 140);
  for (auto _ : state) {
    Graph g;
    Rng noise(4);
    Var loss = FFLoss(g, model, x, RunMode{true, &noise}).loss;
    g.Backward(loss);
    benchmark::DoNotOptimize(loss.value().item());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VaeStep)->Arg(64)->Arg(512);

void BM_GenerateSynthetic(benchmark::State &state) {
  SyntheticConfig cfg;
  cfg.n_utterances = static_cast<int32_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(GenSynthetic(cfg, 5).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateSynthetic)->Arg(100)->Arg(1000);

}  // namespace
}  // namespace seqrep

BENCHMARK_MAIN();
