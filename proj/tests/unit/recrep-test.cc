// tests/unit/recrep-test.cc

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
#include "seqrep/error.h"
#include "seqrep/gradcheck.h"
#include "seqrep/ops.h"
#include "seqrep/recrep.h"

using namespace seqrep;

namespace {

RecRepConfig SmallRecRep(int64_t d = 3) {
  RecRepConfig c;
  c.input_dim = d;
  c.encoder = {1, 3, true, {}, 0.0};
  c.latent = 2;
  c.decoder_hidden = {4};
  c.decoder_act = Activation::kTanh;
  c.beta = 0.7;
  return c;
}

Utterance RandomUtt(Rng &rng, const std::string &id, int64_t t, int64_t d, int32_t classes) {
  Utterance u;
  u.id = id;
  u.frames = rng.NormalTensor(t, d);
  for (int64_t i = 0; i < t; ++i) u.labels.push_back(static_cast<int32_t>(i / 2 % classes));
  u.transcript = RunCollapse(u.labels);
  return u;
}

double Value(const Var &v) { return v.value().item(); }

}  // namespace

TEST_CASE("RecRep ELBO matches a direct evaluation") {
  ParamStore s;
  Rng rng(3);
  RecRepModel m(&s, "m", SmallRecRep(), rng);
  for (int64_t T : {1, 5}) {
    Tensor x = rng.NormalTensor(T, 3);
    Graph g;
    RecRepOut o = RecRepElbo(g, m, x);
    CHECK(o.steps == T);
    DiagGaussian q = m.Posteriors(x);
    Graph g2;
    Tensor rec = m.Decode(g2, g2.Constant(q.mu)).value();
    const double recon = -GaussianLogLik(x, rec) / static_cast<double>(T);
    const double kl = KlToStandard(q) / static_cast<double>(T);
    CHECK(std::abs(Value(o.recon) - recon) <= 1e-12);
    CHECK(std::abs(Value(o.kl) - kl) <= 1e-12);
    CHECK(std::abs(Value(o.neg_elbo) - (recon + 0.7 * kl)) <= 1e-12);
  }
}

TEST_CASE("joint loss endpoints and kappa") {
  Rng rng(4);
  Utterance u = RandomUtt(rng, "u", 6, 3, 3);
  SUBCASE("framewise") {
    RecRepConfig c = SmallRecRep();
    c.supervision = Supervision::kFramewise;
    c.classes = 3;
    for (double alpha : {0.0, 1.0}) {
      c.alpha = alpha;
      ParamStore s;
      Rng init(5);
      RecRepModel m(&s, "m", c, init);
      Rng n1(9), n2(9);
      Graph g1, g2;
      RecRepOut joint = RecRepJointLoss(g1, m, u, RunMode{true, &n1});
      if (alpha == 1.0) {
        CHECK(Value(joint.loss) == Value(RecRepElbo(g2, m, u.frames, RunMode{true, &n2}).neg_elbo));
        CHECK_FALSE(joint.supervised.valid());
      } else {
        CHECK_FALSE(joint.neg_elbo.valid());
        Var z = SampleLatent(g2, m.Posterior(g2, m.Encode(g2, g2.Constant(u.frames))),
                             RunMode{true, &n2});
        CHECK(Value(joint.loss) == Value(m.SupervisedLoss(g2, z, u.labels)));
      }
    }
  }
  SUBCASE("kappa zero feeds the mean") {
    RecRepConfig c = SmallRecRep();
    c.supervision = Supervision::kCtc;
    c.classes = 3;
    c.private_rnn = {1, 2, true, {}, 0.0};
    c.kappa = 0.0;
    ParamStore s;
    Rng init(5), n(1);
    RecRepModel m(&s, "m", c, init);
    Graph g;
    RecRepOut o = RecRepJointLoss(g, m, u, RunMode{true, &n});
    CHECK(o.z_disc.id() == o.q.mu.id());
    CHECK(std::abs(Value(o.loss) - (0.5 * Value(o.supervised) + 0.5 * Value(o.neg_elbo))) <= 1e-12);
  }
  SUBCASE("normalized supervised term") {
    RecRepConfig c = SmallRecRep();
    c.supervision = Supervision::kFramewise;
    c.classes = 3;
    ParamStore s;
    Rng init(5);
    RecRepModel m(&s, "m", c, init);
    Graph g;
    const double raw = Value(RecRepJointLoss(g, m, u).supervised);
    c.normalize_supervised = true;
    ParamStore s2;
    Rng init2(5);
    RecRepModel m2(&s2, "m", c, init2);
    Graph g2;
    CHECK(std::abs(Value(RecRepJointLoss(g2, m2, u).supervised) - raw / 6.0) <= 1e-12);
  }
}

TEST_CASE("pyramid targets and step labels") {
  RecRepConfig c = SmallRecRep(2);
  c.encoder = {2, 3, true, {true, false}, 0.0};
  ParamStore s;
  Rng rng(6);
  RecRepModel m(&s, "m", c, rng);
  CHECK(c.Reduction() == 2);
  Tensor x(7, 2);
  for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  Tensor u = m.Targets(x);
  REQUIRE(u.rows() == 3);
  REQUIRE(u.cols() == 4);
  for (int64_t k = 0; k < 3; ++k)
    for (int64_t j = 0; j < 4; ++j) CHECK(u(k, j) == x[4 * k + j]);
  CHECK(m.StepLabels({0, 1, 2, 3, 4, 5, 6}) == std::vector<int32_t>{1, 3, 5});
  Graph g;
  RecRepOut o = RecRepPyramidElbo(g, m, x);
  CHECK(o.steps == 3);
  CHECK(o.q.mu.rows() == 3);
  Graph g1;
  CHECK_THROWS_AS(RecRepPyramidElbo(g1, m, Tensor(1, 2)), ShapeError);

  RecRepConfig wide = c;
  wide.pyramid_window = 3;
  ParamStore s2;
  RecRepModel m3(&s2, "m", wide, rng);
  Tensor w = m3.Targets(x);
  REQUIRE(w.cols() == 6);
  // Step 0 covers frames -1..1, clamped to 0..1.
  CHECK(w(0, 0) == x(0, 0));
  CHECK(w(0, 2) == x(0, 0));
  CHECK(w(0, 4) == x(1, 0));
  CHECK(w(2, 0) == x(3, 0));
  CHECK(w(2, 4) == x(5, 0));

  RecRepConfig flat = SmallRecRep(2);
  ParamStore s3;
  RecRepModel m4(&s3, "m", flat, rng);
  Graph g3;
  CHECK_THROWS_AS(RecRepPyramidElbo(g3, m4, x), ConfigError);
}

TEST_CASE("hierarchical auxiliary head with zero z weights is the flat head") {
  RecRepConfig fc = SmallRecRep();
  fc.aux = AuxMode::kFlat;
  fc.aux_latent = 2;
  RecRepConfig hc = fc;
  hc.aux = AuxMode::kHierarchical;
  ParamStore fs, hs;
  Rng r1(7), r2(8);
  RecRepModel fm(&fs, "m", fc, r1);
  RecRepModel hm(&hs, "m", hc, r2);
  for (Parameter *p : fs.All()) {
    if (!hs.Has(p->name)) continue;
    Parameter *q = hs.Get(p->name);
    if (q->value.SameShape(p->value)) {
      q->value = p->value;
      continue;
    }
    if (p->name.rfind("m.r.", 0) != 0) continue;
    REQUIRE(q->value.cols() == p->value.cols());
    REQUIRE(q->value.rows() > p->value.rows());
    q->value.Fill(0.0);
    for (int64_t i = 0; i < p->value.size(); ++i) q->value[i] = p->value[i];
  }
  Rng rng(9);
  Tensor x = rng.NormalTensor(4, 3);
  Graph g;
  Var h = hm.Encode(g, g.Constant(x));
  Var z = g.Constant(rng.NormalTensor(4, 2));
  GaussianVar a = hm.AuxPosterior(g, h, &z);
  GaussianVar b = fm.AuxPosterior(g, fm.Encode(g, g.Constant(x)), nullptr);
  CHECK(a.mu.value() == b.mu.value());
  CHECK(a.logvar.value() == b.logvar.value());
  Graph g2;
  CHECK_THROWS_AS(hm.AuxPosterior(g2, h, nullptr), ConfigError);
}

TEST_CASE("prior updating") {
  ParamStore s;
  Rng rng(10);
  RecRepModel m(&s, "m", SmallRecRep(), rng);
  Dataset data = {RandomUtt(rng, "a", 5, 3, 2), RandomUtt(rng, "b", 3, 3, 2)};
  PriorStore store = BuildSelfPriors(m, data, 4);
  CHECK(store.epoch_tag() == 4);
  for (const Utterance &u : data) {
    DiagGaussian p = LookupPriors(store, u, u.num_frames());
    Graph g;
    CHECK(std::abs(Value(RecRepElbo(g, m, u.frames, {}, &p).kl)) <= 1e-12);
  }
  DiagGaussian std_prior{Tensor(5, 2), Tensor(5, 2)};
  Rng n1(1), n2(1);
  Graph g1, g2;
  const double base = Value(RecRepElbo(g1, m, data[0].frames, RunMode{true, &n1}).loss);
  CHECK(Value(RecRepElbo(g2, m, data[0].frames, RunMode{true, &n2}, &std_prior).loss) == base);
  Utterance missing = data[0];
  missing.id = "zz";
  CHECK_THROWS_AS(LookupPriors(store, missing, 5), Error);
  CHECK(AverageKlToStandard(m, data) > 0.0);
}

TEST_CASE("prior update schedule") {
  PriorUpdateSchedule s;
  CHECK_FALSE(s.ShouldUpdate(5, true));
  s.enabled = true;
  s.start_epoch = 3;
  s.frequency = 2;
  std::vector<int32_t> fired;
  for (int32_t e = 1; e <= 9; ++e)
    if (s.ShouldUpdate(e, false)) fired.push_back(e);
  CHECK(fired == std::vector<int32_t>{3, 5, 7, 9});
  s.save_best = true;
  CHECK_FALSE(s.ShouldUpdate(4, false));
  CHECK(s.ShouldUpdate(4, true));
  CHECK_FALSE(s.ShouldUpdate(2, true));
  s.frequency = 0;
  CHECK_THROWS_AS(s.Check(), ConfigError);
}

TEST_CASE("semi-supervised loss") {
  RecRepConfig c = SmallRecRep();
  c.supervision = Supervision::kFramewise;
  c.classes = 2;
  ParamStore s;
  Rng rng(11);
  RecRepModel m(&s, "m", c, rng);
  Utterance a = RandomUtt(rng, "a", 4, 3, 2), b = RandomUtt(rng, "b", 5, 3, 2),
            u = RandomUtt(rng, "u", 3, 3, 2);
  Graph g;
  const double sup = (Value(RecRepJointLoss(g, m, a).supervised) +
                      Value(RecRepJointLoss(g, m, b).supervised)) / 2.0;
  const double elbo = (Value(RecRepElbo(g, m, a.frames).neg_elbo) +
                       Value(RecRepElbo(g, m, b.frames).neg_elbo) +
                       Value(RecRepElbo(g, m, u.frames).neg_elbo)) / 3.0;
  Graph g2;
  const double got = Value(SemiSupervisedLoss(g2, m, {&a, &b}, {&u}, 0.3));
  CHECK(std::abs(got - (0.7 * sup + 0.3 * elbo)) <= 1e-12);
  Graph g3;
  CHECK(std::abs(Value(SemiSupervisedLoss(g3, m, {&a, &b}, {&u}, 0.0)) - sup) <= 1e-12);
  Graph g4;
  CHECK_THROWS_AS(SemiSupervisedLoss(g4, m, {}, {&u}, 0.5), Error);
}

TEST_CASE("RecRep gradients") {
  Rng rng(12);
  Utterance u = RandomUtt(rng, "u", 6, 3, 3);
  auto check = [&](RecRepConfig c) {
    ParamStore s;
    Rng init(13);
    RecRepModel m(&s, "m", c, init);
    auto f = [&](Graph &g) {
      Rng n(2);
      if (c.supervision == Supervision::kNone) return RecRepElbo(g, m, u.frames, RunMode{true, &n}).loss;
      return RecRepJointLoss(g, m, u, RunMode{true, &n}).loss;
    };
    CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);
  };
  RecRepConfig c = SmallRecRep();
  SUBCASE("plain") { check(c); }
  SUBCASE("flat aux") {
    c.aux = AuxMode::kFlat;
    c.aux_latent = 2;
    check(c);
  }
  SUBCASE("hierarchical aux") {
    c.aux = AuxMode::kHierarchical;
    c.aux_latent = 2;
    check(c);
  }
  SUBCASE("pyramid framewise") {
    c.encoder = {2, 2, true, {true, false}, 0.0};
    c.supervision = Supervision::kFramewise;
    c.classes = 3;
    c.kappa = 0.5;
    check(c);
  }
  SUBCASE("ctc") {
    c.supervision = Supervision::kCtc;
    c.classes = 3;
    c.private_rnn = {1, 2, true, {}, 0.0};
    check(c);
  }
}

TEST_CASE("forward-backward model") {
  FBConfig c;
  c.input_dim = 3;
  c.hidden = 3;
  c.d_f = 2;
  c.d_b = 2;
  c.d_zf = 2;
  c.d_zb = 2;
  c.decoder_hidden = {3};
  c.decoder_act = Activation::kTanh;
  c.beta = 0.5;
  CHECK(c.FeatureDim() == 6);
  ParamStore s;
  Rng rng(14);
  FBModel m(&s, "fb", c, rng);
  Utterance u = RandomUtt(rng, "u", 5, 3, 2);
  CHECK(m.Features(u.frames).rows() == 5);
  CHECK(m.Features(u.frames).cols() == 6);
  auto f = [&](Graph &g) {
    Rng n(3);
    return FBLoss(g, m, u.frames, RunMode{true, &n});
  };
  CHECK(GradCheckParams(f, s.All(), 1e-6).max_rel_error <= 1e-4);

  RecognizerConfig rc;
  rc.input_dim = 6;
  rc.vocab = 2;
  rc.rnn = {1, 2, true, {}, 0.0};
  CtcRecognizer rec(&s, "rec", rc, rng);
  auto mt = [&](Graph &g) {
    Rng n(3);
    return FBMultitaskLoss(g, m, rec, u, 0.4, RunMode{true, &n});
  };
  CHECK(GradCheckParams(mt, s.All(), 1e-6).max_rel_error <= 1e-4);
  Graph g1, g2;
  CHECK(Value(FBMultitaskLoss(g1, m, rec, u, 1.0)) == Value(FBLoss(g2, m, u.frames)));

  FBConfig bad = c;
  bad.d_zb = 3;
  CHECK_THROWS_AS(bad.Check(), ConfigError);
  bad = c;
  bad.d_f = bad.d_b = bad.d_zf = bad.d_zb = 0;
  CHECK_THROWS_AS(bad.Check(), ConfigError);

  FBConfig only_f = c;
  only_f.d_b = only_f.d_zf = only_f.d_zb = 0;
  ParamStore s2;
  FBModel mf(&s2, "fb", only_f, rng);
  Graph g3;
  FBModel::Parts p = mf.Forward(g3, u.frames);
  CHECK(p.features.cols() == 2);
  CHECK(Value(p.loss) == Value(p.predict));
  Graph g4;
  CHECK_THROWS_AS(mf.Forward(g4, Tensor(1, 3)), ShapeError);
}
