// tests/unit/ctc-test.cc

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

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "doctest.h"
#include "seqrep/ctc.h"
#include "seqrep/error.h"
#include "seqrep/gradcheck.h"
#include "seqrep/ops.h"
#include "seqrep/rng.h"

using namespace seqrep;

namespace {

Tensor RandomLattice(Rng &rng, int64_t T, int64_t C) {
  Tensor x = rng.NormalTensor(T, C);
  Graph g;
  return LogSoftmax(g.Constant(x)).value();
}

std::vector<int32_t> RandomTranscript(Rng &rng, int64_t T, int64_t V) {
  for (;;) {
    const int64_t m = rng.UniformInt(0, T);
    std::vector<int32_t> tr;
    for (int64_t i = 0; i < m; ++i) tr.push_back(static_cast<int32_t>(rng.UniformInt(1, V)));
    if (CtcMinFrames(tr) <= T) return tr;
  }
}

}  // namespace

TEST_CASE("single frame single token") {
  Tensor lp = Tensor::FromRows({{std::log(0.3), std::log(0.7)}});
  CHECK(CtcLossValue(lp, {1}) == doctest::Approx(-std::log(0.7)).epsilon(1e-14));
}

TEST_CASE("two frames one token enumerates three paths") {
  const double p1a = 0.6, p1b = 0.4, p2a = 0.25, p2b = 0.75;
  Tensor lp = Tensor::FromRows({{std::log(p1b), std::log(p1a)}, {std::log(p2b), std::log(p2a)}});
  const double expected = -std::log(p1a * p2a + p1a * p2b + p1b * p2a);
  CHECK(CtcLossValue(lp, {1}) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("empty transcript is all blanks") {
  Rng rng(2);
  Tensor lp = RandomLattice(rng, 4, 3);
  double s = 0.0;
  for (int64_t t = 0; t < 4; ++t) s += lp(t, 0);
  CHECK(CtcLossValue(lp, {}) == doctest::Approx(-s).epsilon(1e-13));
  CHECK(CtcOracle(lp, {}) == doctest::Approx(-s).epsilon(1e-13));
}

TEST_CASE("forward-backward matches brute-force enumeration") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const int64_t T = rng.UniformInt(1, 6), V = rng.UniformInt(1, 3);
    Tensor lp = RandomLattice(rng, T, V + 1);
    auto tr = RandomTranscript(rng, T, V);
    CHECK(std::abs(CtcLossValue(lp, tr) - CtcOracle(lp, tr)) <= 1e-9);
  }
}

TEST_CASE("impossible transcripts") {
  Rng rng(1);
  Tensor lp = RandomLattice(rng, 2, 3);
  CHECK(std::isinf(CtcOracle(lp, {1, 1})));
  CHECK_THROWS_AS(CtcLossValue(lp, {1, 1}), Error);
  CHECK_THROWS_AS(CtcLossValue(lp, {3}), ShapeError);
}

TEST_CASE("ctc gradient matches finite differences") {
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const int64_t T = rng.UniformInt(2, 7), V = rng.UniformInt(1, 4);
    Tensor x = rng.NormalTensor(T, V + 1);
    auto tr = RandomTranscript(rng, T, V);
    auto f = [&](Graph &, const Var &v) { return CtcLoss(LogSoftmax(v), tr); };
    CHECK(GradCheck(f, x, 1e-6).max_rel_error <= 1e-4);
  }
}

TEST_CASE("greedy decoding collapse rule") {
  auto onehot = [](std::vector<int> ids) {
    Tensor t(static_cast<int64_t>(ids.size()), 3);
    for (size_t i = 0; i < ids.size(); ++i) t(static_cast<int64_t>(i), ids[i]) = 1.0;
    return t;
  };
  CHECK(GreedyDecode(onehot({1, 1, 0, 2})) == std::vector<int32_t>{1, 2});
  CHECK(GreedyDecode(onehot({0, 0, 0})).empty());
  CHECK(GreedyDecode(onehot({1, 0, 1})) == std::vector<int32_t>{1, 1});
}

TEST_CASE("beam search agrees with greedy on peaked lattices") {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    Tensor lp(6, 4, std::log(1e-4));
    for (int64_t t = 0; t < 6; ++t) lp(t, rng.UniformInt(0, 3)) = std::log(1.0 - 3e-4);
    CHECK(PrefixBeamDecode(lp, 8) == GreedyDecode(lp));
  }
}

TEST_CASE("error rate") {
  CHECK(ErrorRate({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ErrorRate({}, {1, 2, 3}) == 1.0);
  CHECK(ErrorRate({1, 2, 3}, {1, 3}) == 0.5);
  CHECK_THROWS_AS(ErrorRate({1}, {}), ConfigError);
}
