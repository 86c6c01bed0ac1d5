// tests/unit/ffmodels-test.cc

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

#include "doctest.h"
#include "seqrep/dataio.h"
#include "seqrep/error.h"
#include "seqrep/ffmodels.h"
#include "seqrep/gradcheck.h"
#include "seqrep/ops.h"
#include "seqrep/optim.h"

using namespace seqrep;

namespace {

FFEncoderConfig Small(FFVariant v, int64_t in = 6) {
  FFEncoderConfig c;
  c.input_dim = in;
  c.hidden = {5, 4};
  c.latent = 3;
  c.variant = v;
  c.beta = 0.7;
  c.act = Activation::kTanh;
  return c;
}

double LossValue(const FFModel &m, const Tensor &x, bool train, uint64_t seed) {
  Rng rng(seed);
  Graph g;
  return FFLoss(g, m, x, RunMode{train, &rng}).loss.value().item();
}

}  // namespace

TEST_CASE("identity-wired autoencoder reconstructs perfectly") {
  FFEncoderConfig c = Small(FFVariant::kAE, 3);
  c.hidden = {};
  c.act = Activation::kIdentity;
  ParamStore s;
  Rng rng(1);
  FFModel m(&s, "ae", c, rng);
  s.Get("ae.head.mu.W")->value = Tensor::Identity(3);
  s.Get("ae.dec.l0.W")->value = Tensor::Identity(3);
  Tensor x = rng.NormalTensor(5, 3);
  CHECK(LossValue(m, x, false, 0) == 0.0);
}

TEST_CASE("VAE with beta 0 and no noise equals the AE with the same weights") {
  Rng rng(2);
  ParamStore vs, as;
  FFEncoderConfig vc = Small(FFVariant::kVae);
  vc.beta = 0.0;
  Rng r1(5), r2(6);
  FFModel vae(&vs, "m", vc, r1);
  FFModel ae(&as, "m", Small(FFVariant::kAE), r2);
  CHECK(as.CopyMatching(vs) == static_cast<int64_t>(as.size()));
  Tensor x = rng.NormalTensor(8, 6);
  CHECK(LossValue(vae, x, false, 0) == LossValue(ae, x, false, 0));
}

TEST_CASE("NAE plus the variance part of the KL equals the VAE") {
  Rng rng(3);
  ParamStore vs, ns;
  Rng r1(5), r2(6);
  FFModel vae(&vs, "m", Small(FFVariant::kVae), r1);
  FFModel nae(&ns, "m", Small(FFVariant::kNae), r2);
  ns.CopyMatching(vs);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = rng.NormalTensor(7, 6);
    Rng n1(trial), n2(trial);
    Graph g1, g2;
    FFLossOut v = FFLoss(g1, vae, x, RunMode{true, &n1});
    FFLossOut n = FFLoss(g2, nae, x, RunMode{true, &n2});
    const double var_term = Sum(KlVarianceTerm(n.q)).value().item() / 7.0;
    CHECK(std::abs(n.loss.value().item() + 0.7 * var_term - v.loss.value().item()) <= 1e-12);
  }
}

TEST_CASE("bernoulli and gaussian corruption variances pair up") {
  const double p = 0.3;
  const double gamma = std::sqrt(p / (1.0 - p));
  // Inverted Bernoulli multiplier m = b / (1 - p), b ~ Bernoulli(1 - p).
  const double mean = (1.0 - p) / (1.0 - p);
  const double var = (1.0 - p) / ((1.0 - p) * (1.0 - p)) - mean * mean;
  CHECK(var == doctest::Approx(gamma * gamma).epsilon(1e-14));
  // Empirically through the ops.
  Rng rng(4);
  Graph g;
  Var ones = g.Constant(Tensor(1, 200000, 1.0));
  Var b = Dropout(ones, p, rng);
  Var n = GaussianDropout(ones, gamma, rng);
  auto variance = [](const Tensor &t) {
    double m = t.Sum() / t.size(), v = 0;
    for (double e : t.values()) v += (e - m) * (e - m);
    return v / t.size();
  };
  CHECK(variance(b.value()) == doctest::Approx(gamma * gamma).epsilon(0.02));
  CHECK(variance(n.value()) == doctest::Approx(gamma * gamma).epsilon(0.02));
}

TEST_CASE("every feedforward variant passes gradcheck") {
  for (FFVariant v : {FFVariant::kAE, FFVariant::kDaeBernoulli, FFVariant::kDaeGaussian,
                      FFVariant::kNae, FFVariant::kVae, FFVariant::kDropoutBottleneckBernoulli,
                      FFVariant::kDropoutBottleneckGaussian, FFVariant::kDropoutLayerwise}) {
    ParamStore s;
    Rng rng(10);
    FFModel m(&s, "m", Small(v), rng);
    Tensor x = rng.NormalTensor(4, 6);
    auto f = [&](Graph &g) {
      Rng noise(77);
      return FFLoss(g, m, x, RunMode{true, &noise}).loss;
    };
    INFO("variant " << FFVariantName(v));
    CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);
  }
}

TEST_CASE("VAE training halves the loss in 50 epochs") {
  SyntheticConfig sc;
  sc.n_states = 4;
  sc.dim = 4;
  sc.n_utterances = 5;
  sc.min_length = 20;
  sc.max_length = 20;
  Dataset d = GenSynthetic(sc, 1);
  Tensor windows(0, 12);
  std::vector<const Tensor *> parts;
  std::vector<Tensor> ws;
  for (const auto &u : d) ws.push_back(WindowStack(u.frames, 3));
  for (const auto &w : ws) parts.push_back(&w);
  windows = ConcatRows(parts);
  REQUIRE(windows.rows() == 100);

  FFEncoderConfig c = Small(FFVariant::kVae, 12);
  c.hidden = {32, 32};
  c.latent = 6;
  c.beta = 0.1;
  c.act = Activation::kRelu;
  ParamStore s;
  Rng rng(2);
  FFModel m(&s, "vae", c, rng);
  Adam opt(AdamConfig{2e-3});
  const double before = LossValue(m, windows, false, 0);
  Rng noise(3);
  for (int epoch = 0; epoch < 50; ++epoch) {
    for (int64_t b = 0; b < 100; b += 10) {
      s.ZeroGrad();
      Graph g;
      g.Backward(FFLoss(g, m, windows.RowSlice(b, b + 10), RunMode{true, &noise}).loss);
      opt.Step(s.All());
    }
  }
  const double after = LossValue(m, windows, false, 0);
  CHECK(after <= 0.5 * before);
}

TEST_CASE("feature extraction") {
  Rng rng(4);
  ParamStore s;
  FFModel m(&s, "vae", Small(FFVariant::kVae, 6), rng);
  Tensor a = rng.NormalTensor(5, 2), b = rng.NormalTensor(4, 2);
  Tensor fa = ExtractFeatures(a, m, 3);
  CHECK(fa.rows() == 5);
  CHECK(fa.cols() == 3);
  CHECK(ExtractFeatures(a, m, 3) == fa);
  // Batch partitioning: windows of both utterances in one matrix.
  Tensor wa = WindowStack(a, 3), wb = WindowStack(b, 3);
  Tensor both = ConcatRows(std::vector<const Tensor *>{&wa, &wb});
  Graph g;
  Tensor joint = m.Encode(g, g.Constant(both)).mu.value();
  Tensor fb = ExtractFeatures(b, m, 3);
  for (int64_t r = 0; r < 5; ++r)
    for (int64_t k = 0; k < 3; ++k) CHECK(std::abs(joint(r, k) - fa(r, k)) <= 1e-12);
  for (int64_t r = 0; r < 4; ++r)
    for (int64_t k = 0; k < 3; ++k) CHECK(std::abs(joint(5 + r, k) - fb(r, k)) <= 1e-12);
  CHECK_THROWS_AS(ExtractFeatures(a, m, 5), ShapeError);

  // A linear identity-initialised encoder returns a linear map of the windows.
  FFEncoderConfig lin = Small(FFVariant::kAE, 6);
  lin.hidden = {};
  lin.latent = 6;
  ParamStore ls;
  FFModel lm(&ls, "lin", lin, rng);
  ls.Get("lin.head.mu.W")->value = Tensor::Identity(6);
  CHECK(ExtractFeatures(a, lm, 3) == wa);
}

TEST_CASE("feedforward multitask loss") {
  Rng rng(5);
  ParamStore s;
  FFEncoderConfig c = Small(FFVariant::kVae, 6);
  RecognizerConfig rc;
  rc.vocab = 3;
  rc.rnn.layers = 1;
  rc.rnn.hidden = 3;
  FFMultitaskModel m(&s, "mt", c, rc, rng);
  Tensor w = WindowStack(rng.NormalTensor(6, 2), 3);
  std::vector<int32_t> tr = {0, 2, 1};
  auto eval = [&](double alpha) {
    Rng n(1);
    Graph g;
    return FFMultitaskLoss(g, m, w, tr, alpha, RunMode{true, &n}).value().item();
  };
  Rng n0(1), n1(1);
  Graph g0, g1;
  Var x0 = g0.Constant(w);
  FFLossOut ff = m.ff().Loss(g0, x0, x0, RunMode{true, &n0});
  const double ctc = m.recognizer().Loss(g0, ff.z, tr, RunMode{true, &n0}).value().item();
  CHECK(eval(0.0) == doctest::Approx(ctc).epsilon(1e-14));
  CHECK(eval(1.0) == doctest::Approx(ff.loss.value().item()).epsilon(1e-14));
  CHECK_THROWS_AS(eval(1.5), ConfigError);
  auto f = [&](Graph &g) {
    Rng n(9);
    return FFMultitaskLoss(g, m, w, tr, 0.4, RunMode{true, &n});
  };
  CHECK(GradCheckParams(f, s.All(), 1e-6, 8, 1).max_rel_error <= 1e-4);
}
