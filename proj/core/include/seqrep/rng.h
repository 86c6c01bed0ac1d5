// seqrep/rng.h

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

#ifndef SEQREP_RNG_H_
#define SEQREP_RNG_H_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "seqrep/tensor.h"

namespace seqrep {

/// Seeded random source.  All stochastic behaviour in the library draws from
/// an explicitly passed Rng so that every run is a function of its seeds.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  double Normal() { return normal_(engine_); }
  double Uniform() { return uniform_(engine_); }
  /// Uniform integer in [lo, hi].
  int64_t UniformInt(int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
  }
  bool Bernoulli(double p) { return Uniform() < p; }
  uint64_t NextSeed() { return engine_(); }

  Tensor NormalTensor(int64_t rows, int64_t cols) {
    Tensor t(rows, cols);
    for (auto &v : t.values()) v = Normal();
    return t;
  }
  Tensor UniformTensor(int64_t rows, int64_t cols, double lo, double hi) {
    Tensor t(rows, cols);
    for (auto &v : t.values()) v = lo + (hi - lo) * Uniform();
    return t;
  }

  std::vector<int64_t> Permutation(int64_t n) {
    std::vector<int64_t> p(static_cast<size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    // Fisher-Yates with our own draws; std::shuffle is implementation-defined.
    for (int64_t i = n - 1; i > 0; --i) std::swap(p[i], p[UniformInt(0, i)]);
    return p;
  }

  std::mt19937_64 &engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace seqrep

#endif  // SEQREP_RNG_H_
