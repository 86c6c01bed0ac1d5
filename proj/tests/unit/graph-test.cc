// tests/unit/graph-test.cc

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
#include <string>
#include <vector>

#include "doctest.h"
#include "seqrep/error.h"
#include "seqrep/gradcheck.h"
#include "seqrep/graph.h"
#include "seqrep/ops.h"
#include "seqrep/rng.h"

using namespace seqrep;

namespace {

// Contracts an arbitrary-shaped output with fixed random weights so every
// output coordinate contributes to the scalar.
Var Contract(const Var &y, uint64_t seed) {
  Rng rng(seed);
  Var w = y.graph().Constant(rng.NormalTensor(y.rows(), y.cols()), "w");
  return Sum(Mul(y, w));
}

struct OpCase {
  std::string name;
  int64_t rows, cols;
  std::function<Var(Graph &, const Var &)> f;
  double lo = -1.0, hi = 1.0;
};

std::vector<OpCase> OpCases() {
  std::vector<OpCase> cases;
  auto k = [](Graph &g, int64_t r, int64_t c, uint64_t s) {
    Rng rng(s);
    return g.Constant(rng.NormalTensor(r, c), "k");
  };
  cases.push_back({"add", 3, 4, [=](Graph &g, const Var &x) { return Contract(Add(x, k(g, 3, 4, 1)), 9); }});
  cases.push_back({"add_row_bcast", 3, 4, [=](Graph &g, const Var &x) {
                     Var b = SliceRows(x, 0, 1);
                     return Contract(Add(x, b), 9);
                   }});
  cases.push_back({"sub_col_bcast", 3, 4, [=](Graph &g, const Var &x) {
                     return Contract(Sub(k(g, 3, 4, 2), SliceCols(x, 1, 2)), 9);
                   }});
  cases.push_back({"mul", 3, 4, [=](Graph &g, const Var &x) { return Contract(Mul(x, x), 9); }});
  cases.push_back({"div", 3, 4, [=](Graph &g, const Var &x) {
                     return Contract(Div(k(g, 3, 4, 3), AddScalar(Square(x), 1.0)), 9);
                   }});
  cases.push_back({"matmul", 3, 4, [=](Graph &g, const Var &x) {
                     return Contract(MatMul(x, Transpose(Tanh(x))), 9);
                   }});
  cases.push_back({"concat", 3, 4, [=](Graph &g, const Var &x) {
                     return Contract(ConcatRows({ConcatCols({x, Exp(x)}), ConcatCols({x, x})}), 9);
                   }});
  cases.push_back({"slice", 3, 4, [=](Graph &g, const Var &x) {
                     return Contract(SliceCols(SliceRows(x, 1, 3), 1, 4), 9);
                   }});
  cases.push_back({"sum_mean", 3, 4, [=](Graph &g, const Var &x) {
                     return Add(Mul(Sum(x), Mean(Square(x))), Contract(SumCols(x), 2));
                   }});
  cases.push_back({"sum_rows", 3, 4, [=](Graph &g, const Var &x) { return Contract(SumRows(Tanh(x)), 3); }});
  cases.push_back({"exp", 3, 4, [=](Graph &g, const Var &x) { return Contract(Exp(x), 9); }});
  cases.push_back({"log", 3, 4, [=](Graph &g, const Var &x) { return Contract(Log(x), 9); }, 0.5, 2.0});
  cases.push_back({"tanh", 3, 4, [=](Graph &g, const Var &x) { return Contract(Tanh(x), 9); }});
  cases.push_back({"sigmoid", 3, 4, [=](Graph &g, const Var &x) { return Contract(Sigmoid(Scale(x, 3.0)), 9); }});
  cases.push_back({"relu", 3, 4, [=](Graph &g, const Var &x) { return Contract(Relu(x), 9); }});
  cases.push_back({"sqrt_abs", 3, 4, [=](Graph &g, const Var &x) { return Contract(Sqrt(AddScalar(Abs(x), 0.5)), 9); }});
  cases.push_back({"softmax", 3, 4, [=](Graph &g, const Var &x) { return Contract(Softmax(Scale(x, 2.0)), 9); }});
  cases.push_back({"log_softmax", 3, 4, [=](Graph &g, const Var &x) { return Contract(LogSoftmax(x), 9); }});
  cases.push_back({"logsumexp", 3, 4, [=](Graph &g, const Var &x) { return Contract(LogSumExp(Scale(x, 3.0)), 9); }});
  cases.push_back({"squared_error", 3, 4, [=](Graph &g, const Var &x) { return SquaredError(Tanh(x), k(g, 3, 4, 4)); }});
  cases.push_back({"row_dot", 3, 4, [=](Graph &g, const Var &x) { return Contract(RowDot(x, Exp(x)), 9); }});
  cases.push_back({"dropout_bernoulli", 3, 4, [=](Graph &g, const Var &x) {
                     Rng rng(17);
                     return Contract(Dropout(Tanh(x), 0.3, rng), 9);
                   }});
  cases.push_back({"dropout_gaussian", 3, 4, [=](Graph &g, const Var &x) {
                     Rng rng(18);
                     return Contract(GaussianDropout(Tanh(x), 0.5, rng), 9);
                   }});
  cases.push_back({"gather", 3, 4, [=](Graph &g, const Var &x) {
                     return Contract(GatherRows(x, {2, 0, 2, 1, 2}), 9);
                   }});
  cases.push_back({"pick_per_row", 3, 4, [=](Graph &g, const Var &x) {
                     return Contract(PickPerRow(LogSoftmax(x), {3, 0, 1}), 9);
                   }});
  cases.push_back({"reverse_reshape", 3, 4, [=](Graph &g, const Var &x) {
                     return Contract(Reshape(ReverseRows(Square(x)), 2, 6), 9);
                   }});
  cases.push_back({"clamp", 3, 4, [=](Graph &g, const Var &x) { return Contract(Clamp(Scale(x, 3.0), -2.0, 2.0), 9); }});
  cases.push_back({"lstm_cell", 3, 4, [=](Graph &g, const Var &x) {
                     // x is 3 x 4 (batch 3, input 4); hidden 2.
                     Var wx = k(g, 4, 8, 5);
                     Var wh = k(g, 2, 8, 6);
                     Var h0 = k(g, 3, 2, 7);
                     Var c0 = k(g, 3, 2, 8);
                     Var hc = LstmCell(MatMul(x, wx), h0, c0, wh);
                     return Sum(hc);
                   }});
  cases.push_back({"lstm_cell_state", 3, 2, [=](Graph &g, const Var &x) {
                     // Gradient with respect to the carried state.
                     Var xp = k(g, 3, 8, 5);
                     Var wh = k(g, 2, 8, 6);
                     Var hc = LstmCell(xp, Tanh(x), x, wh);
                     Var hc2 = LstmCell(xp, SliceCols(hc, 0, 2), SliceCols(hc, 2, 4), wh);
                     return Contract(hc2, 3);
                   }});
  cases.push_back({"lstm_scan_bidirectional", 5, 3, [=](Graph &g, const Var &x) {
                     Var wf = k(g, 3, 8, 10), wb = k(g, 3, 8, 11);
                     Var uf = k(g, 2, 8, 12), ub = k(g, 2, 8, 13);
                     Var fwd = LstmScan(MatMul(x, wf), uf, false);
                     Var bwd = LstmScan(MatMul(x, wb), ub, true);
                     return Contract(ConcatCols({fwd, bwd}), 9);
                   }});
  cases.push_back({"lstm_scan_recurrent_weights", 2, 8, [=](Graph &g, const Var &x) {
                     Var xp = k(g, 6, 8, 14);
                     return Contract(LstmScan(xp, Scale(x, 0.7), false), 9);
                   }});
  cases.push_back({"pair_concat", 5, 3, [=](Graph &g, const Var &x) { return Contract(PairConcat(Tanh(x)), 9); }});
  return cases;
}

}  // namespace

TEST_CASE("gradient of sum of squares") {
  Graph g;
  Var x = g.Input(Tensor::Row({1, 2, 3}));
  auto grads = g.Backward(Sum(Mul(x, x)));
  CHECK(grads.at(x) == Tensor::Row({2, 4, 6}));
}

TEST_CASE("gradient of logsumexp of zeros is uniform") {
  Graph g;
  Var x = g.Input(Tensor::Row({0, 0}));
  auto grads = g.Backward(Sum(LogSumExp(x)));
  CHECK(grads.at(x)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(grads.at(x)[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("every registered op passes gradcheck at 10 random points") {
  for (const OpCase &oc : OpCases()) {
    Rng rng(1234);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Tensor p = rng.UniformTensor(oc.rows, oc.cols, oc.lo, oc.hi);
      if (oc.name == "relu" || oc.name == "clamp" || oc.name == "sqrt_abs") {
        // keep away from kinks
        for (auto &v : p.values())
          if (std::abs(v) < 0.05) v += 0.1;
        if (oc.name == "clamp")
          for (auto &v : p.values())
            if (std::abs(std::abs(3.0 * v) - 2.0) < 0.05) v += 0.05;
      }
      worst = std::max(worst, GradCheck(oc.f, p, 1e-6).max_rel_error);
    }
    INFO("op " << oc.name);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("shared subexpressions accumulate gradients") {
  Rng rng(3);
  Tensor v = rng.NormalTensor(2, 3);
  // y = tanh(x) used twice versus two independent copies of the leaf.
  Graph g1;
  Var x = g1.Input(v);
  Var t = Tanh(x);
  auto g_shared = g1.Backward(Sum(Mul(t, Exp(t))));

  Graph g2;
  Var a = g2.Input(v), b = g2.Input(v);
  auto g_dup = g2.Backward(Sum(Mul(Tanh(a), Exp(Tanh(b)))));
  Tensor summed = g_dup.at(a);
  summed.AddScaled(g_dup.at(b));
  for (int64_t i = 0; i < v.size(); ++i)
    CHECK(g_shared.at(x)[i] == doctest::Approx(summed[i]).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one and logsumexp shifts") {
  Rng rng(5);
  Graph g;
  Tensor v = rng.NormalTensor(6, 7);
  Var s = Softmax(g.Constant(v));
  for (int64_t r = 0; r < 6; ++r) {
    double tot = 0.0;
    for (double e : s.value().row(r)) tot += e;
    CHECK(std::abs(tot - 1.0) <= 1e-12);
  }
  Var l0 = LogSumExp(g.Constant(v));
  Var l1 = LogSumExp(AddScalar(g.Constant(v), 3.25));
  for (int64_t r = 0; r < 6; ++r) CHECK(std::abs(l1.value()[r] - l0.value()[r] - 3.25) <= 1e-10);
}

TEST_CASE("backward errors") {
  Graph g;
  Var x = g.Input(Tensor::Row({1, 2}));
  CHECK_THROWS_AS(g.Backward(x), ShapeError);
  Var z = g.Input(Tensor::Row({0.0}));
  try {
    Log(z);
    FAIL("expected a numerical error");
  } catch (const NumericalError &e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
}

TEST_CASE("constant leaves receive no gradient") {
  Graph g;
  Var c = g.Constant(Tensor::Row({1, 2}));
  Var x = g.Input(Tensor::Row({3, 4}));
  auto grads = g.Backward(Sum(Mul(c, x)));
  CHECK_FALSE(grads.contains(c));
  CHECK(grads.at(x) == Tensor::Row({1, 2}));
}

TEST_CASE("gradcheck on a quadratic and argument validation") {
  auto f = [](Graph &, const Var &x) { return Sum(Square(x)); };
  CHECK(GradCheck(f, Tensor::Scalar(3.0), 1e-5).max_rel_error <= 1e-8);
  CHECK_THROWS_AS(GradCheck(f, Tensor::Scalar(3.0), 0.1), ConfigError);
  auto g = [](Graph &, const Var &x) { return Square(x); };
  CHECK_THROWS_AS(GradCheck(g, Tensor::Row({1, 2}), 1e-5), ShapeError);
}

TEST_CASE("backward is deterministic") {
  Rng rng(8);
  Tensor v = rng.NormalTensor(4, 3);
  Graph g1, g2;
  Var x1 = g1.Input(v), x2 = g2.Input(v);
  auto a = g1.Backward(Sum(Softmax(MatMul(x1, Transpose(x1)))));
  auto b = g2.Backward(Sum(Softmax(MatMul(x2, Transpose(x2)))));
  CHECK(a.at(x1) == b.at(x2));
}

TEST_CASE("pair concat drops an odd tail") {
  Graph g;
  Var x = g.Constant(Tensor::FromRows({{1}, {2}, {3}, {4}, {5}}));
  Var p = PairConcat(x);
  CHECK(p.value() == Tensor::FromRows({{1, 2}, {3, 4}}));
}
