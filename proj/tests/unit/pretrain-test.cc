// tests/unit/pretrain-test.cc

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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>

#include "doctest.h"
#include "seqrep/error.h"
#include "seqrep/gradcheck.h"
#include "seqrep/ops.h"
#include "seqrep/optim.h"
#include "seqrep/pretrain.h"

using namespace seqrep;

namespace {

double Value(const Var &v) { return v.value().item(); }

double InfoNceOracle(const Tensor &pos, const Tensor &neg) {
  double total = 0.0;
  for (int64_t i = 0; i < pos.rows(); ++i) {
    double denom = std::exp(pos(i, 0));
    for (int64_t j = 0; j < neg.cols(); ++j) denom += std::exp(neg(i, j));
    total += -std::log(std::exp(pos(i, 0)) / denom);
  }
  return total / static_cast<double>(pos.rows());
}

CpcConfig SmallCpc(int64_t d = 3) {
  CpcConfig c;
  c.input_dim = d;
  c.K = 2;
  c.N = 3;
  c.latent_hidden = {4};
  c.latent_dim = 3;
  c.context = {1, 4, false, {}, 0.0};
  return c;
}

MaskedPretrainConfig SmallMasked(MaskedObjective o, int64_t d = 4) {
  MaskedPretrainConfig c;
  c.input_dim = d;
  c.objective = o;
  c.mask = {1, 2, 1, 2, 0};
  c.encoder = {1, 3, true, {}, 0.0};
  c.decoder_hidden = {4};
  c.latent_hidden = {4};
  c.n_negatives = 2;
  c.act = Activation::kTanh;
  return c;
}

MaskPair TimeMask(int64_t T, int64_t D, int64_t begin, int64_t end) {
  MaskPair m{Tensor(T, D), Tensor(T, D)};
  m.mask.Fill(1.0);
  const int64_t w = end - begin, c = (w + 1) / 2, cb = begin + (w - c) / 2;
  for (int64_t t = begin; t < end; ++t)
    for (int64_t d = 0; d < D; ++d) {
      m.mask(t, d) = 0.0;
      if (t >= cb && t < cb + c) m.central(t, d) = 1.0;
    }
  return m;
}

MaskPair NoMask(int64_t T, int64_t D) {
  MaskPair m{Tensor(T, D), Tensor(T, D)};
  m.mask.Fill(1.0);
  return m;
}

std::string ReadBytes(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("InfoNCE") {
  Graph g;
  for (int64_t N : {1, 4, 9}) {
    Tensor pos(3, 1), neg(3, N);
    pos.Fill(0.3);
    neg.Fill(0.3);
    CHECK(std::abs(Value(InfoNce(g.Constant(pos), g.Constant(neg))) - std::log(N + 1.0)) <= 1e-12);
  }
  Tensor pos(1, 1), neg(1, 3);
  pos.Fill(50.0);
  const double big = Value(InfoNce(g.Constant(pos), g.Constant(neg)));
  CHECK(big >= 0.0);
  CHECK(big <= 1e-20);
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor p = rng.NormalTensor(5, 1), n = rng.NormalTensor(5, 4);
    for (auto &v : n.values()) v *= 3.0;
    const double got = Value(InfoNce(g.Constant(p), g.Constant(n)));
    CHECK(got >= 0.0);
    CHECK(std::abs(got - InfoNceOracle(p, n)) <= 1e-12);
    CHECK(std::abs(Value(InfoNceSum(g.Constant(p), g.Constant(n))) - 5.0 * got) <= 1e-12);
  }
  auto f = [&](Graph &gg, const Var &x) { return InfoNce(SliceCols(x, 0, 1), SliceCols(x, 1, 4)); };
  CHECK(GradCheck(f, rng.NormalTensor(4, 4), 1e-6).max_rel_error <= 1e-6);
  CHECK_THROWS_AS(InfoNce(g.Constant(Tensor(3, 2)), g.Constant(Tensor(3, 2))), ShapeError);
}

TEST_CASE("deranged shuffles are permutations without fixed points") {
  Rng rng(2);
  for (int64_t n = 2; n <= 9; ++n)
    for (int trial = 0; trial < 50; ++trial) {
      auto p = DerangedShuffle(n, rng);
      std::vector<int64_t> sorted = p;
      std::sort(sorted.begin(), sorted.end());
      for (int64_t i = 0; i < n; ++i) {
        CHECK(sorted[i] == i);
        CHECK(p[i] != i);
      }
    }
  CHECK_THROWS_AS(DerangedShuffle(1, rng), ShapeError);
}

TEST_CASE("CPC") {
  SUBCASE("configuration errors") {
    CpcConfig c = SmallCpc();
    c.K = 0;
    CHECK_THROWS_AS(c.Check(), ConfigError);
    c = SmallCpc();
    c.context.bidirectional = true;
    CHECK_THROWS_AS(c.Check(), ConfigError);
    ParamStore s;
    Rng rng(1);
    CpcModel m(&s, "cpc", SmallCpc(), rng);
    Graph g;
    CHECK_THROWS_AS(CpcLoss(g, m, Tensor(2, 3), rng), ShapeError);
  }
  SUBCASE("untrained loss is at chance") {
    double total = 0.0;
    CpcConfig c = SmallCpc(4);
    c.N = 5;
    for (uint64_t seed = 0; seed < 100; ++seed) {
      ParamStore s;
      Rng rng(seed);
      CpcModel m(&s, "cpc", c, rng);
      Graph g;
      total += Value(CpcLoss(g, m, rng.NormalTensor(20, 4), rng));
    }
    CHECK(std::abs(total / 100.0 - std::log(6.0)) <= 0.1);
  }
  SUBCASE("learns a periodic sequence") {
    CpcConfig c = SmallCpc(2);
    c.K = 1;
    c.N = 4;
    c.latent_hidden = {8};
    c.latent_dim = 4;
    c.context = {1, 8, false, {}, 0.0};
    ParamStore s;
    Rng rng(3);
    CpcModel m(&s, "cpc", c, rng);
    Tensor x(24, 2);
    for (int64_t t = 0; t < 24; ++t) {
      x(t, 0) = std::cos(2.0 * M_PI * static_cast<double>(t) / 6.0);
      x(t, 1) = std::sin(2.0 * M_PI * static_cast<double>(t) / 6.0);
    }
    AdamConfig ac;
    ac.lr = 0.02;
    Adam opt(ac);
    for (int step = 0; step < 300; ++step) {
      s.ZeroGrad();
      Graph g;
      Var loss = CpcLoss(g, m, x, rng, RunMode{true, &rng});
      g.Backward(loss);
      opt.Step(s.All());
    }
    Rng eval(99);
    Graph g;
    CHECK(Value(CpcLoss(g, m, x, eval)) < 0.9 * std::log(5.0));
  }
  SUBCASE("gradients") {
    ParamStore s;
    Rng rng(4);
    CpcModel m(&s, "cpc", SmallCpc(), rng);
    Tensor x = rng.NormalTensor(6, 3), other = rng.NormalTensor(4, 3);
    auto f = [&](Graph &g) {
      Rng n(1);
      return CpcLoss(g, m, x, n);
    };
    CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);
    CpcConfig bc = SmallCpc();
    bc.negatives = NegativeMode::kBatch;
    ParamStore s2;
    CpcModel mb(&s2, "cpc", bc, rng);
    auto fb = [&](Graph &g) {
      Rng n(1);
      return CpcLoss(g, mb, x, n, {}, {&other});
    };
    CHECK(GradCheckParams(fb, s2.All(), 1e-6).max_rel_error <= 1e-4);
    CHECK(m.Features(x).cols() == 4);
  }
}

TEST_CASE("masked reconstruction") {
  ParamStore s;
  Rng rng(5);
  MaskedModel m(&s, "mr", SmallMasked(MaskedObjective::kBert), rng);
  Tensor x = rng.NormalTensor(5, 4);
  Graph g;
  CHECK(Value(MaskedReconLoss(g, m, x, NoMask(5, 4), false)) == 0.0);
  CHECK(Value(MaskedReconLoss(g, m, x, NoMask(5, 4), true)) == 0.0);

  for (int trial = 0; trial < 5; ++trial) {
    MaskPair mk = GenMask({1, 3, 1, 2, 0}, 5, 4, rng);
    Tensor masked = x;
    for (int64_t i = 0; i < x.size(); ++i) masked[i] *= mk.mask[i];
    Graph g2;
    Tensor rec = m.Reconstruct(g2, m.Context(g2, g2.Constant(masked))).value();
    double full = 0.0, half = 0.0;
    for (int64_t t = 0; t < 5; ++t)
      for (int64_t d = 0; d < 4; ++d) {
        const double r = x(t, d) - rec(t, d);
        full += (1.0 - mk.mask(t, d)) * r * r;
        half += mk.central(t, d) * r * r;
      }
    Graph g3;
    CHECK(std::abs(Value(MaskedReconLoss(g3, m, x, mk, false)) - full) <= 1e-12);
    CHECK(std::abs(Value(MaskedReconLoss(g3, m, x, mk, true)) - half) <= 1e-12);
    CHECK(half <= full);
  }

  // With a zero predictor the loss is the masked energy of X, so growing the
  // masked area cannot decrease it.
  ParamStore zs;
  MaskedModel zero(&zs, "mr", SmallMasked(MaskedObjective::kBert), rng);
  for (Parameter *p : zs.WithPrefix("mr.dec.l1")) p->value.Fill(0.0);
  double prev = 0.0;
  for (int64_t end = 1; end <= 5; ++end) {
    Graph g4;
    const double v = Value(MaskedReconLoss(g4, zero, x, TimeMask(5, 4, 0, end), false));
    CHECK(v >= prev);
    prev = v;
  }
  Graph g5;
  CHECK(std::abs(Value(MaskedReconLoss(g5, zero, x, TimeMask(5, 4, 0, 5), false)) -
                 -2.0 * GaussianLogLik(x, Tensor(5, 4))) <= 1e-12);
  CHECK_THROWS_AS(MaskedReconLoss(g5, m, x, NoMask(4, 4), false), ShapeError);

  auto f = [&](Graph &gg) { return MaskedReconLoss(gg, m, x, TimeMask(5, 4, 1, 4), true); };
  CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);

  MaskedPretrainConfig bad = SmallMasked(MaskedObjective::kBert);
  bad.mask = {0, 0, 0, 0, 0};
  CHECK_THROWS_AS(bad.Check(), ConfigError);
  bad = SmallMasked(MaskedObjective::kBert);
  bad.encoder.bidirectional = false;
  CHECK_THROWS_AS(bad.Check(), ConfigError);
  bad = SmallMasked(MaskedObjective::kBert);
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.Check(), ConfigError);
}

TEST_CASE("BiCPC") {
  MaskedPretrainConfig c = SmallMasked(MaskedObjective::kBicpc);
  c.n_negatives = 1;
  double total = 0.0;
  const int64_t T = 12;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    ParamStore s;
    Rng rng(seed);
    MaskedModel m(&s, "bc", c, rng);
    Graph g;
    total += Value(BicpcLoss(g, m, rng.NormalTensor(T, 4), TimeMask(T, 4, 2, 8), false, rng).loss);
  }
  CHECK(std::abs(total / 50.0 / (T * std::log(2.0)) - 1.0) <= 0.1);

  ParamStore s;
  Rng rng(6);
  MaskedModel m(&s, "bc", c, rng);
  Tensor x = rng.NormalTensor(6, 4);
  Graph g;
  BicpcOut none = BicpcLoss(g, m, x, NoMask(6, 4), false, rng);
  CHECK(none.degenerate);
  CHECK(std::isfinite(Value(none.loss)));
  CHECK_FALSE(BicpcLoss(g, m, x, TimeMask(6, 4, 1, 3), true, rng).degenerate);
  for (bool half : {false, true}) {
    auto f = [&](Graph &gg) {
      Rng n(2);
      return BicpcLoss(gg, m, x, TimeMask(6, 4, 1, 5), half, n).loss;
    };
    CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);
  }
  CHECK_THROWS_AS(BicpcLoss(g, m, Tensor(1, 4), NoMask(1, 4), false, rng), ShapeError);
}

TEST_CASE("multi-view masked objectives") {
  Rng rng(7);
  Tensor x = rng.NormalTensor(6, 4);
  MaskPair m1 = TimeMask(6, 4, 1, 3), m2 = TimeMask(6, 4, 3, 6);
  SUBCASE("identical masks give zero MAE consistency") {
    MaskedPretrainConfig c = SmallMasked(MaskedObjective::kMvMae);
    c.alpha = 0.0;
    ParamStore s;
    MaskedModel m(&s, "mv", c, rng);
    Graph g;
    CHECK(Value(MultiviewMaskedLoss(g, m, x, m1, m1, rng)) == 0.0);
    CHECK(Value(MultiviewMaskedLoss(g, m, x, m1, m2, rng)) > 0.0);
  }
  SUBCASE("alpha one is two masked reconstructions") {
    for (auto o : {MaskedObjective::kMvMae, MaskedObjective::kMvContrast,
                   MaskedObjective::kCrossviewBert}) {
      MaskedPretrainConfig c = SmallMasked(o);
      c.alpha = 1.0;
      ParamStore s;
      MaskedModel m(&s, "mv", c, rng);
      Graph g;
      const double expect = Value(MaskedReconLoss(g, m, x, m1, false)) +
                            Value(MaskedReconLoss(g, m, x, m2, false));
      CHECK(std::abs(Value(MultiviewMaskedLoss(g, m, x, m1, m2, rng)) - expect) <= 1e-12);
    }
  }
  SUBCASE("symmetry under swapping the masks") {
    for (auto o : {MaskedObjective::kMvMae, MaskedObjective::kMvContrast}) {
      MaskedPretrainConfig c = SmallMasked(o);
      c.alpha = 0.3;
      ParamStore s;
      MaskedModel m(&s, "mv", c, rng);
      Rng a(3), b(3);
      Graph g;
      CHECK(std::abs(Value(MultiviewMaskedLoss(g, m, x, m1, m2, a)) -
                     Value(MultiviewMaskedLoss(g, m, x, m2, m1, b))) <= 1e-12);
    }
  }
  SUBCASE("cross-view chance level") {
    MaskedPretrainConfig c = SmallMasked(MaskedObjective::kCrossviewBert);
    c.alpha = 0.0;
    c.n_negatives = 3;
    double total = 0.0;
    const int64_t T = 10;
    for (uint64_t seed = 0; seed < 50; ++seed) {
      ParamStore s;
      Rng r(seed);
      MaskedModel m(&s, "mv", c, r);
      MaskPair mk = TimeMask(T, 4, 2, 7);
      Graph g;
      total += Value(MultiviewMaskedLoss(g, m, r.NormalTensor(T, 4), mk, mk, r));
    }
    CHECK(std::abs(total / 50.0 / (2.0 * T) - std::log(4.0)) <= 0.1);
  }
  SUBCASE("gradients") {
    for (auto o : {MaskedObjective::kMvMae, MaskedObjective::kMvContrast,
                   MaskedObjective::kCrossviewBert}) {
      MaskedPretrainConfig c = SmallMasked(o);
      c.alpha = 0.4;
      ParamStore s;
      MaskedModel m(&s, "mv", c, rng);
      auto f = [&](Graph &g) {
        Rng n(5);
        return MultiviewMaskedLoss(g, m, x, m1, m2, n);
      };
      CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);
    }
    MaskedPretrainConfig c = SmallMasked(MaskedObjective::kMvMae);
    c.alpha = 0.4;
    ParamStore s;
    MaskedModel m(&s, "mv", c, rng);
    Graph g;
    CHECK_THROWS_AS(MaskedReconLoss(g, MaskedModel(&s, "other", SmallMasked(MaskedObjective::kBicpc),
                                                   rng),
                                    x, m1, false),
                    ConfigError);
  }
  SUBCASE("mask sampling dispatch") {
    for (auto o : {MaskedObjective::kBert, MaskedObjective::kBertHalf, MaskedObjective::kBicpc,
                   MaskedObjective::kBicpcHalf, MaskedObjective::kMvMae,
                   MaskedObjective::kMvContrast, MaskedObjective::kCrossviewBert}) {
      CHECK(ParseMaskedObjective(MaskedObjectiveName(o)) == o);
      ParamStore s;
      MaskedModel m(&s, "mp", SmallMasked(o), rng);
      Rng a(8), b(8);
      Graph g;
      const double v = Value(MaskedPretrainLoss(g, m, x, a));
      CHECK(std::isfinite(v));
      CHECK(v == Value(MaskedPretrainLoss(g, m, x, b)));
    }
  }
}

TEST_CASE("LIN adaptation and encoder transfer") {
  Rng rng(9);
  Tensor x = rng.NormalTensor(5, 4);
  MaskedPretrainConfig plain = SmallMasked(MaskedObjective::kBert);
  MaskedPretrainConfig with_lin = plain;
  with_lin.lin = true;
  ParamStore s0, s1;
  Rng r0(1), r1(1);
  MaskedModel m0(&s0, "mr", plain, r0);
  MaskedModel m1(&s1, "mr", with_lin, r1);
  CHECK(s1.CopyMatching(s0) == static_cast<int64_t>(s0.size()));
  CHECK(m0.Features(x) == m1.Features(x));
  {
    Graph g;
    g.Backward(MaskedReconLoss(g, m1, x, TimeMask(5, 4, 1, 3), false));
    CHECK(s1.Get("mr.lin.W")->grad.MaxAbs() > 0.0);
  }
  ParamStore ls;
  Linear a = LinAdapt(&ls, "a", 4), b = LinAdapt(&ls, "b", 4);
  Graph g;
  Var xv = g.Constant(x);
  CHECK(b.Forward(g, a.Forward(g, xv)).value() == x);

  RecognizerConfig rc;
  rc.input_dim = 4;
  rc.vocab = 3;
  rc.rnn = {1, 3, true, {}, 0.0};
  rc.lin = true;
  ParamStore rs;
  Rng rr(2);
  CtcRecognizer rec(&rs, "rec", rc, rr);
  const std::string ckpt = "pretrain-test-ckpt.bin";
  s1.Save(ckpt);
  auto tensors = ReadCheckpoint(ckpt);
  auto untouched = FinetuneInit(&rs, "rec.rnn", tensors, "mr.enc");
  CHECK(untouched.empty());
  CHECK(FinetuneInit(&rs, "rec.lin", tensors, "mr.lin").empty());
  for (const CheckpointTensor &t : tensors)
    if (t.name.rfind("mr.enc.", 0) == 0) CHECK(rs.Get("rec.rnn." + t.name.substr(7))->value == t.value);

  rc.rnn.layers = 2;
  ParamStore deeper;
  CtcRecognizer rec2(&deeper, "rec", rc, rr);
  untouched = FinetuneInit(&deeper, "rec.rnn", tensors, "mr.enc");
  CHECK(std::find(untouched.begin(), untouched.end(), "rec.rnn.l1.fwd.Wx") != untouched.end());

  rc.rnn = {1, 5, true, {}, 0.0};
  ParamStore wider;
  CtcRecognizer rec3(&wider, "rec", rc, rr);
  try {
    FinetuneInit(&wider, "rec.rnn", tensors, "mr.enc");
    FAIL("shape mismatch not reported");
  } catch (const ShapeError &e) {
    CHECK(std::string(e.what()).find("mr.enc.l0") != std::string::npos);
  }
  ParamStore tiny;
  Linear only(&tiny, "rec.rnn.l0.fwd.Wx", 1, 1, rr);
  CHECK_THROWS_AS(FinetuneInit(&tiny, "rec.rnn", tensors, "mr.enc"), Error);

  // Load-then-save is bit-identical; fresh heads differ across seeds.
  const std::string again = "pretrain-test-ckpt2.bin";
  rs.Save(again);
  ParamStore reload;
  Rng rz(77);
  rc.rnn = {1, 3, true, {}, 0.0};
  CtcRecognizer rec4(&reload, "rec", rc, rz);
  CHECK(reload.Get("rec.out.W")->value != rs.Get("rec.out.W")->value);
  reload.Load(again);
  const std::string third = "pretrain-test-ckpt3.bin";
  reload.Save(third);
  CHECK(ReadBytes(again) == ReadBytes(third));
  std::remove(ckpt.c_str());
  std::remove(again.c_str());
  std::remove(third.c_str());
}
