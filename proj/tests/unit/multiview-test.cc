// tests/unit/multiview-test.cc

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
#include <numbers>

#include "doctest.h"
#include "seqrep/error.h"
#include "seqrep/gradcheck.h"
#include "seqrep/multiview.h"
#include "seqrep/ops.h"
#include "seqrep/optim.h"

using namespace seqrep;

namespace {

VccapConfig SmallVccap(int64_t px, int64_t py) {
  VccapConfig c;
  c.x_dim = 4;
  c.y_dim = 3;
  c.hidden = {5, 4};
  c.private_hidden = {3};
  c.latent = 2;
  c.private_x = px;
  c.private_y = py;
  c.beta = 0.6;
  c.act = Activation::kTanh;
  return c;
}

PairedBatch RandomBatch(Rng &rng, int64_t n, int64_t dx = 4, int64_t dy = 3) {
  PairedBatch b;
  b.x = rng.NormalTensor(n, dx);
  b.y = rng.NormalTensor(n, dy);
  for (int64_t i = 0; i < n; ++i) b.keys.emplace_back(i % 2 ? "b" : "a", i);
  return b;
}

PriorStore StoreFrom(const std::vector<PriorKey> &keys, const DiagGaussian &rows) {
  PriorStore::Builder b(1);
  for (size_t i = 0; i < keys.size(); ++i) {
    auto mu = rows.mu.row(static_cast<int64_t>(i));
    auto lv = rows.logvar.row(static_cast<int64_t>(i));
    b.Put(keys[i].first, keys[i].second, {mu.begin(), mu.end()}, {lv.begin(), lv.end()});
  }
  return std::move(b).Finish();
}

DiagGaussian StandardRows(int64_t n, int64_t d) { return {Tensor(n, d), Tensor(n, d)}; }

double Value(const Var &v) { return v.value().item(); }

}  // namespace

TEST_CASE("VCCAP without private variables is VCCA") {
  ParamStore s;
  Rng rng(1);
  VccapModel m(&s, "m", SmallVccap(0, 0), rng);
  for (int trial = 0; trial < 5; ++trial) {
    PairedBatch b = RandomBatch(rng, 6);
    Rng n1(trial), n2(trial);
    Graph g1, g2;
    const double a = Value(VccaLoss(g1, m, b, RunMode{true, &n1}));
    const double c = Value(VccapLoss(g2, m, b, RunMode{true, &n2}).loss);
    CHECK(std::abs(a - c) <= 1e-12);
  }
}

TEST_CASE("VCCA with duplicated views and tied decoders") {
  VccapConfig c = SmallVccap(0, 0);
  c.y_dim = 4;
  ParamStore s;
  Rng rng(2);
  VccapModel m(&s, "m", c, rng);
  for (auto *p : s.WithPrefix("m.decy.")) {
    std::string other = p->name;
    other.replace(0, 7, "m.decx.");
    p->value = s.Get(other)->value;
  }
  PairedBatch b = RandomBatch(rng, 5, 4, 4);
  b.y = b.x;
  Rng n1(3);
  Graph g;
  VccapLossOut out = VccapLoss(g, m, b, RunMode{true, &n1});
  CHECK(Value(out.recon_x) == Value(out.recon_y));
  CHECK(std::abs(Value(out.loss) - (2 * Value(out.recon_x) + 0.6 * Value(out.kl))) <= 1e-12);
}

TEST_CASE("VCCAP is zero when posteriors equal priors and reconstruction is exact") {
  ParamStore s;
  Rng rng(3);
  VccapModel m(&s, "m", SmallVccap(2, 1), rng);
  for (auto *p : s.All()) p->value.Fill(0.0);
  PairedBatch b;
  b.x = Tensor(4, 4);
  b.y = Tensor(4, 3);
  Graph g;
  CHECK(Value(VccapLoss(g, m, b).loss) == 0.0);
}

TEST_CASE("VCCAP single-sample loss is an unbiased ELBO estimate") {
  ParamStore s;
  Rng rng(4);
  VccapModel m(&s, "m", SmallVccap(2, 1), rng);
  PairedBatch b = RandomBatch(rng, 1);
  const int n = 20000;
  Rng noise(5);
  double mean_loss = 0.0;
  for (int i = 0; i < n; ++i) {
    Graph g;
    mean_loss += Value(VccapLoss(g, m, b, RunMode{true, &noise}).loss) / n;
  }
  // Oracle: sample every latent directly and use log-density ratios for KL.
  Graph g;
  Var x = g.Constant(b.x), y = g.Constant(b.y);
  auto to_diag = [](const GaussianVar &q) { return DiagGaussian{q.mu.value(), q.logvar.value()}; };
  DiagGaussian qz = to_diag(m.EncodeZ(g, x)), q1 = to_diag(m.EncodeH1(g, x)),
               q2 = to_diag(m.EncodeH2(g, y));
  Rng r2(6);
  double oracle = 0.0;
  auto draw = [&](const DiagGaussian &q, double &kl) {
    Tensor z = ReparamSample(q, r2.NormalTensor(1, q.dim()));
    DiagGaussian std{Tensor(1, q.dim()), Tensor(1, q.dim())};
    kl += LogDensity(q, 0, z.row(0)) - LogDensity(std, 0, z.row(0));
    return z;
  };
  for (int i = 0; i < n; ++i) {
    double kl = 0.0;
    Graph gg;
    Var z = gg.Constant(draw(qz, kl)), h1 = gg.Constant(draw(q1, kl)), h2 = gg.Constant(draw(q2, kl));
    const double rx = 0.5 * SquaredError(m.DecodeX(gg, z, &h1), gg.Constant(b.x)).value().item();
    const double ry = 0.5 * SquaredError(m.DecodeY(gg, z, &h2), gg.Constant(b.y)).value().item();
    oracle += (rx + ry + 0.6 * kl) / n;
  }
  CHECK(std::abs(mean_loss - oracle) <= 0.01 * std::abs(oracle));
}

TEST_CASE("prior updating with standard-normal entries equals the base loss") {
  Rng rng(5);
  SUBCASE("vccap") {
    ParamStore s;
    VccapModel m(&s, "m", SmallVccap(2, 1), rng);
    PairedBatch b = RandomBatch(rng, 6);
    PriorStore store = StoreFrom(b.keys, StandardRows(6, m.posterior_dim()));
    Rng n1(1), n2(1);
    Graph g1, g2;
    const double base = Value(VccapLoss(g1, m, b, RunMode{true, &n1}).loss);
    const double pu = Value(PriorUpdatedLoss(g2, m, b, store, 0.6, RunMode{true, &n2}).loss);
    CHECK(std::abs(base - pu) <= 1e-12);
  }
  SUBCASE("vae") {
    ParamStore s;
    FFEncoderConfig c;
    c.input_dim = 4;
    c.hidden = {5};
    c.latent = 3;
    c.beta = 0.8;
    c.act = Activation::kTanh;
    FFModel m(&s, "vae", c, rng);
    Tensor w = rng.NormalTensor(5, 4);
    std::vector<PriorKey> keys;
    for (int64_t i = 0; i < 5; ++i) keys.emplace_back("u", i);
    PriorStore store = StoreFrom(keys, StandardRows(5, 3));
    Rng n1(2), n2(2);
    Graph g1, g2;
    const double base = Value(FFLoss(g1, m, w, RunMode{true, &n1}).loss);
    const double pu = Value(PriorUpdatedLoss(g2, m, w, keys, store, 0.8, RunMode{true, &n2}).loss);
    CHECK(std::abs(base - pu) <= 1e-12);
    // Store = current posteriors: the KL term vanishes.
    PriorStore self = StoreFrom(keys, FFPosteriors(m, w));
    Graph g3;
    FFLossOut out = PriorUpdatedLoss(g3, m, w, keys, self, 0.8);
    CHECK(std::abs(Value(out.reg)) <= 1e-12);
    CHECK(std::abs(Value(out.loss) - Value(out.recon)) <= 1e-12);
    std::vector<PriorKey> missing = keys;
    missing[2].first = "nope";
    Graph g4;
    CHECK_THROWS_AS(PriorUpdatedLoss(g4, m, w, missing, store, 0.8), Error);
  }
}

TEST_CASE("large beta pulls the posterior to the stored prior") {
  Rng rng(6);
  ParamStore s;
  VccapModel m(&s, "m", SmallVccap(1, 1), rng);
  PairedBatch b = RandomBatch(rng, 8);
  DiagGaussian target{rng.NormalTensor(8, m.posterior_dim()),
                      rng.UniformTensor(8, m.posterior_dim(), -1.0, 0.5)};
  PriorStore store = StoreFrom(b.keys, target);
  auto kl = [&] {
    Graph g;
    return Value(PriorUpdatedLoss(g, m, b, store, 1.0).kl);
  };
  const double before = kl();
  Adam opt(AdamConfig{1e-2});
  Rng noise(1);
  for (int step = 0; step < 50; ++step) {
    s.ZeroGrad();
    Graph g;
    g.Backward(PriorUpdatedLoss(g, m, b, store, 50.0, RunMode{true, &noise}).loss);
    opt.Step(s.All());
  }
  CHECK(kl() < before);
}

TEST_CASE("cross-domain objectives") {
  Rng rng(7);
  CrossDomainConfig c;
  c.source = SmallVccap(1, 1);
  c.target_dim = 4;
  c.target_private = 0;
  ParamStore s;
  CrossDomainModel m(&s, "cd", c, rng);
  PairedBatch src = RandomBatch(rng, 5);
  Tensor tgt = rng.NormalTensor(4, 4);

  SUBCASE("VAEP without a private variable is the VAE") {
    FFEncoderConfig fc;
    fc.input_dim = 4;
    fc.hidden = c.source.hidden;
    fc.latent = c.source.latent;
    fc.beta = c.source.beta;
    fc.act = c.source.act;
    ParamStore fs;
    FFModel vae(&fs, "vae", fc, rng);
    for (int i = 0; i < 2; ++i)
      for (const char *suffix : {".W", ".b"}) {
        const std::string l = ".l" + std::to_string(i) + suffix;
        fs.Get("vae.enc" + l)->value = s.Get("cd.src.z.upper" + l)->value;
      }
    for (int i = 0; i < 3; ++i)
      for (const char *suffix : {".W", ".b"}) {
        const std::string l = ".l" + std::to_string(i) + suffix;
        fs.Get("vae.dec" + l)->value = s.Get("cd.tgt.dec" + l)->value;
      }
    for (const char *p : {".mu.W", ".mu.b", ".lv.W", ".lv.b"})
      fs.Get(std::string("vae.head") + p)->value = s.Get(std::string("cd.src.z.head") + p)->value;
    Rng n1(1), n2(1);
    Graph g1, g2;
    const double a = Value(VaepLoss(g1, m, tgt, RunMode{true, &n1}));
    const double b = Value(FFLoss(g2, vae, tgt, RunMode{true, &n2}).loss);
    CHECK(std::abs(a - b) <= 1e-12);
  }
  SUBCASE("mixing weight endpoints") {
    Rng n1(2), n2(2), n3(3), n4(3);
    Graph g1, g2, g3, g4;
    CHECK(Value(CrossDomainLoss(g1, m, src, tgt, 0.0, RunMode{true, &n1})) ==
          Value(VccapLoss(g2, m.source(), src, RunMode{true, &n2}).loss));
    CHECK(Value(CrossDomainLoss(g3, m, src, tgt, 1.0, RunMode{true, &n3})) ==
          Value(VaepLoss(g4, m, tgt, RunMode{true, &n4})));
    Graph g5;
    CHECK_THROWS_AS(CrossDomainLoss(g5, m, src, Tensor(0, 4), 0.5), Error);
    CHECK_THROWS_AS(CrossDomainLoss(g5, m, src, tgt, 1.5), ConfigError);
  }
}

TEST_CASE("partial sharing keeps target-specific layers out of the source loss") {
  Rng rng(8);
  CrossDomainConfig c;
  c.source = SmallVccap(1, 1);
  c.source.split = 1;
  c.target_dim = 6;
  c.target_private = 2;
  c.partial = true;
  ParamStore s;
  CrossDomainModel m(&s, "cd", c, rng);
  PairedBatch src = RandomBatch(rng, 5);
  Tensor tgt = rng.NormalTensor(4, 6);
  s.ZeroGrad();
  Graph g;
  Rng noise(1);
  g.Backward(CrossDomainLoss(g, m, src, tgt, 0.0, RunMode{true, &noise}));
  REQUIRE(!s.WithPrefix("cd.tgt.").empty());
  for (auto *p : s.WithPrefix("cd.tgt.")) CHECK(p->grad.MaxAbs() == 0.0);
  s.ZeroGrad();
  Graph g2;
  g2.Backward(VaepLoss(g2, m, tgt, RunMode{true, &noise}));
  CHECK(s.Get("cd.src.z.upper.l0.W")->grad.MaxAbs() > 0.0);
  CHECK(s.Get("cd.src.z.lower.l0.W")->grad.MaxAbs() == 0.0);
  CHECK(s.Get("cd.tgt.lower.l0.W")->grad.MaxAbs() > 0.0);
}

TEST_CASE("multiview losses pass gradcheck") {
  Rng rng(9);
  PairedBatch b = RandomBatch(rng, 5);
  SUBCASE("vcca and vccap") {
    ParamStore s0, s1;
    VccapModel vcca(&s0, "m", SmallVccap(0, 0), rng);
    VccapModel vccap(&s1, "m", SmallVccap(2, 1), rng);
    auto f0 = [&](Graph &g) { Rng n(1); return VccaLoss(g, vcca, b, RunMode{true, &n}); };
    auto f1 = [&](Graph &g) { Rng n(1); return VccapLoss(g, vccap, b, RunMode{true, &n}).loss; };
    CHECK(GradCheckParams(f0, s0.All(), 1e-6).max_rel_error <= 1e-4);
    CHECK(GradCheckParams(f1, s1.All(), 1e-6).max_rel_error <= 1e-4);
    DiagGaussian pr{rng.NormalTensor(5, 5), rng.UniformTensor(5, 5, -1, 1)};
    PriorStore store = StoreFrom(b.keys, pr);
    auto f2 = [&](Graph &g) {
      Rng n(2);
      return PriorUpdatedLoss(g, vccap, b, store, 0.7, RunMode{true, &n}).loss;
    };
    CHECK(GradCheckParams(f2, s1.All(), 1e-6).max_rel_error <= 1e-4);
  }
  SUBCASE("cross-domain and multitask") {
    CrossDomainConfig c;
    c.source = SmallVccap(1, 1);
    c.source.split = 1;
    c.target_dim = 3;
    c.target_private = 2;
    c.partial = true;
    ParamStore s;
    CrossDomainModel m(&s, "cd", c, rng);
    RecognizerConfig rc;
    rc.input_dim = c.source.latent;
    rc.vocab = 3;
    rc.rnn.layers = 1;
    rc.rnn.hidden = 2;
    CtcRecognizer rec(&s, "rec", rc, rng);
    Tensor tgt = rng.NormalTensor(6, 3);
    auto f = [&](Graph &g) {
      Rng n(3);
      return CrossDomainMultitaskLoss(g, m, rec, b, tgt, {0, 2}, 0.4, 0.3, RunMode{true, &n});
    };
    CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);
    auto v = [&](Graph &g) { Rng n(4); return VaepLoss(g, m, tgt, RunMode{true, &n}); };
    CHECK(GradCheckParams(v, s.All(), 1e-6).max_rel_error <= 1e-4);
  }
  SUBCASE("shared-top recognizers") {
    ParamStore s;
    RecurrentStackConfig lower;
    lower.layers = 1;
    lower.hidden = 2;
    SharedTopRecognizers m(&s, "two", 4, 3, 2, lower, 2, rng);
    auto f = [&](Graph &g) {
      return Add(m.Loss(g, 0, g.Constant(b.x), {0, 1}), m.Loss(g, 1, g.Constant(b.y), {1}));
    };
    CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);
    s.ZeroGrad();
    Graph g;
    g.Backward(m.Loss(g, 1, g.Constant(b.y), {1}));
    CHECK(s.Get("two.src.out.W")->grad.MaxAbs() == 0.0);
    CHECK(s.Get("two.top.l0.fwd.Wh")->grad.MaxAbs() > 0.0);
  }
}

TEST_CASE("similarity losses") {
  Rng rng(10);
  Tensor a = rng.NormalTensor(30, 3);
  SimilarityLossConfig cfg;
  Graph g;
  Var va = g.Constant(a);
  cfg.kind = SimilarityKind::kL2;
  CHECK(Value(SimilarityLoss(va, va, cfg)) == 0.0);
  cfg.kind = SimilarityKind::kCosine;
  CHECK(Value(SimilarityLoss(va, va, cfg)) == doctest::Approx(-1.0).epsilon(1e-14));
  cfg.kind = SimilarityKind::kContrastive;
  cfg.margin = 0.0;
  std::vector<Var> same = {va};
  CHECK(Value(SimilarityLoss(va, va, cfg, &same)) == 0.0);
  cfg.margin = 0.3;
  CHECK(Value(SimilarityLoss(va, va, cfg, &same)) == doctest::Approx(0.3));

  SUBCASE("CCA closed forms") {
    cfg.kind = SimilarityKind::kCca;
    cfg.rx = cfg.ry = 1e-6;
    CHECK(Value(SimilarityLoss(va, va, cfg)) == doctest::Approx(-3.0).epsilon(1e-3));
    // Independent oracle: canonical correlations of a 1-d pair equal |corr|.
    Tensor x = rng.NormalTensor(200, 1), y(200, 1);
    for (int64_t i = 0; i < 200; ++i) y[i] = 0.5 * x[i] + rng.Normal();
    double mx = 0, my = 0;
    for (int64_t i = 0; i < 200; ++i) mx += x[i] / 200, my += y[i] / 200;
    double sxy = 0, sxx = 0, syy = 0;
    for (int64_t i = 0; i < 200; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    Graph g2;
    CHECK(Value(CcaCorrelation(g2.Constant(x), g2.Constant(y), 1e-12, 1e-12)) ==
          doctest::Approx(std::abs(sxy) / std::sqrt(sxx * syy)).epsilon(1e-8));
  }
  SUBCASE("CCA is invariant to rotating either view") {
    cfg.kind = SimilarityKind::kCca;
    cfg.rx = cfg.ry = 1e-3;
    Tensor b = rng.NormalTensor(30, 3);
    for (int64_t i = 0; i < 30; ++i) b(i, 0) += a(i, 1);
    const double base = Value(SimilarityLoss(va, g.Constant(b), cfg));
    const double th = 0.7;
    Tensor rot = Tensor::FromRows({{std::cos(th), -std::sin(th), 0}, {std::sin(th), std::cos(th), 0}, {0, 0, 1}});
    Tensor br(30, 3);
    Gemm(b, false, rot, false, &br);
    CHECK(std::abs(Value(SimilarityLoss(va, g.Constant(br), cfg)) - base) <= 1e-6);
  }
  SUBCASE("gradcheck of every similarity loss") {
    Parameter pa{"a", rng.NormalTensor(12, 3), {}}, pb{"b", rng.NormalTensor(12, 3), {}};
    for (auto kind : {SimilarityKind::kL2, SimilarityKind::kCosine, SimilarityKind::kContrastive,
                      SimilarityKind::kCca}) {
      SimilarityLossConfig c;
      c.kind = kind;
      c.rx = c.ry = 1e-2;
      c.lambda = 0.3;
      c.n_negatives = 2;
      auto f = [&](Graph &gg) {
        Rng r(5);
        return SimilarityLoss(gg.Param(&pa), gg.Param(&pb), c, nullptr, &r);
      };
      INFO(SimilarityKindName(kind));
      CHECK(GradCheckParams(f, {&pa, &pb}, 1e-6).max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("label embedding") {
  Rng rng(11);
  LabelEmbeddingConfig c;
  c.frame_dim = 2;
  c.labels = 3;
  c.window = 3;
  c.hidden = {4};
  c.latent = 2;
  c.beta = 0.5;
  c.act = Activation::kTanh;
  std::vector<int32_t> labels = {0, 0, 1, 1, 1, 2};
  LabelWindows lw = MakeLabelWindows(labels, 3, 3);
  CHECK(lw.targets.size() == 18);
  CHECK(lw.onehot(0, 0) == 1.0);   // clamped left edge
  CHECK(lw.onehot(5, 8) == 1.0);   // clamped right edge
  Tensor x = WindowStack(rng.NormalTensor(6, 2), 3);

  SUBCASE("alpha1 = 1 is the acoustic classifier alone") {
    c.alpha1 = 1.0;
    c.alpha2 = 0.0;
    ParamStore s;
    LabelEmbeddingModel m(&s, "le", c, rng);
    Rng n1(1);
    Graph g;
    auto out = LabelEmbeddingLoss(g, m, x, lw, RunMode{true, &n1});
    CHECK(Value(out.loss) == Value(out.acoustic));
  }
  SUBCASE("gradcheck for each similarity loss") {
    for (auto kind : {SimilarityKind::kL2, SimilarityKind::kCosine, SimilarityKind::kContrastive,
                      SimilarityKind::kCca}) {
      c.sim.kind = kind;
      c.sim.rx = c.sim.ry = 1e-1;
      ParamStore s;
      LabelEmbeddingModel m(&s, "le", c, rng);
      auto f = [&](Graph &g) {
        Rng n(2);
        return LabelEmbeddingLoss(g, m, x, lw, RunMode{true, &n}).loss;
      };
      INFO(SimilarityKindName(kind));
      CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);
    }
  }
  c.alpha1 = 0.7;
  c.alpha2 = 0.5;
  CHECK_THROWS_AS(c.Check(), ConfigError);
}

TEST_CASE("geometric mean prediction") {
  // Hand example: two frames, two labels, window 3.
  // Row t holds the distributions for frames t-1, t, t+1 (clamped).
  Tensor p = Tensor::FromRows({{0.5, 0.5, 0.9, 0.1, 0.2, 0.8},
                               {0.6, 0.4, 0.3, 0.7, 0.5, 0.5}});
  GeometricMeanResult r = GeometricMeanPredict(p, 3, 2);
  // Frame 0 is covered by window 0 (centre) and window 1 (left position).
  CHECK(std::exp(r.log_mean(0, 0)) == doctest::Approx(std::sqrt(0.9 * 0.6)));
  CHECK(std::exp(r.log_mean(0, 1)) == doctest::Approx(std::sqrt(0.1 * 0.4)));
  CHECK(std::exp(r.log_mean(1, 0)) == doctest::Approx(std::sqrt(0.2 * 0.3)));
  CHECK(r.labels == std::vector<int32_t>{0, 1});
  // W = 1 is a plain argmax.
  Tensor q = Tensor::FromRows({{0.1, 0.7, 0.2}, {0.5, 0.2, 0.3}});
  CHECK(GeometricMeanPredict(q, 1, 3).labels == std::vector<int32_t>{1, 0});
  // Identical windows give that distribution's argmax; rescaling a
  // window's positions leaves the decision unchanged.
  Tensor same(5, 9);
  for (int64_t t = 0; t < 5; ++t)
    for (int64_t w = 0; w < 3; ++w) {
      same(t, w * 3 + 0) = 0.2;
      same(t, w * 3 + 1) = 0.3;
      same(t, w * 3 + 2) = 0.5;
    }
  Tensor scaled = same;
  for (int64_t k = 3; k < 6; ++k) scaled(2, k) *= 7.0;
  for (auto *t : {&same, &scaled}) {
    auto res = GeometricMeanPredict(*t, 3, 3);
    for (int32_t l : res.labels) CHECK(l == 2);
  }
  Tensor zero = Tensor::FromRows({{0.0, 1.0}});
  CHECK(GeometricMeanPredict(zero, 1, 2).floored == 1);
}

TEST_CASE("window mixture prior KL") {
  Rng rng(12);
  DiagGaussian q{Tensor::Row({0.3, -0.2}), Tensor::Row({-0.4, 0.1})};
  DiagGaussian p{Tensor::Row({-0.1, 0.4}), Tensor::Row({0.2, -0.3})};
  Rng r1(1);
  auto self = WindowMixturePriorKl(q, {q}, 20000, r1);
  CHECK(std::abs(self.value) <= 3 * self.std_error + 1e-15);
  Rng r2(2);
  auto one = WindowMixturePriorKl(q, {p}, 200000, r2);
  CHECK(std::abs(one.value - KlDiagDiag(q, p)) <= 3 * one.std_error);
  Rng r3(2);
  auto two = WindowMixturePriorKl(q, {p, p}, 200000, r3);
  CHECK(std::abs(two.value - one.value) <= 1e-9);
  CHECK_THROWS_AS(WindowMixturePriorKl(q, {}, 10, r3), ConfigError);
}
