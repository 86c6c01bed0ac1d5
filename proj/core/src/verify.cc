// core/src/verify.cc

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

#include "seqrep/verify.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "seqrep/ctc.h"
#include "seqrep/distributions.h"
#include "seqrep/error.h"
#include "seqrep/ffmodels.h"
#include "seqrep/gradcheck.h"
#include "seqrep/multiview.h"
#include "seqrep/nn.h"
#include "seqrep/ops.h"
#include "seqrep/optim.h"
#include "seqrep/pretrain.h"
#include "seqrep/recognizer.h"
#include "seqrep/recrep.h"

namespace seqrep {

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kEps = 1e-6;

VerifyCheck Check(const std::string &suite, const std::string &name, double value, double tol,
                  std::string detail = "") {
  return VerifyCheck{suite, name, value, tol, value <= tol, std::move(detail)};
}

double Value(const Var &v) { return v.value().item(); }

// Runs f and turns any exception into a failed check.
void Guard(std::vector<VerifyCheck> *out, const std::string &suite, const std::string &name,
           const std::function<VerifyCheck()> &f) {
  try {
    out->push_back(f());
  } catch (const std::exception &e) {
    out->push_back(VerifyCheck{suite, name, INFINITY, 0.0, false, e.what()});
  }
}

VerifyCheck Grad(const std::string &name, const std::function<Var(Graph &)> &f,
                 const std::vector<Parameter *> &params) {
  const GradCheckResult r = GradCheckParams(f, params, kEps);
  return Check("gradcheck", name, r.max_rel_error, kGradTol,
               "worst " + r.worst_coordinate + " over " + std::to_string(r.coordinates_checked) +
                   " coordinates");
}

Utterance RandomUtt(Rng &rng, const std::string &id, int64_t t, int64_t d, int32_t classes) {
  Utterance u;
  u.id = id;
  u.frames = rng.NormalTensor(t, d);
  for (int64_t i = 0; i < t; ++i) u.labels.push_back(static_cast<int32_t>(i / 2 % classes));
  u.transcript = RunCollapse(u.labels);
  return u;
}

PairedBatch RandomBatch(Rng &rng, int64_t n, int64_t dx, int64_t dy) {
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

FFEncoderConfig SmallFF(FFVariant v) {
  FFEncoderConfig c;
  c.input_dim = 6;
  c.hidden = {5, 4};
  c.latent = 3;
  c.variant = v;
  c.beta = 0.7;
  c.act = Activation::kTanh;
  return c;
}

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

RecRepConfig SmallRecRep() {
  RecRepConfig c;
  c.input_dim = 3;
  c.encoder = {1, 3, true, {}, 0.0};
  c.latent = 2;
  c.decoder_hidden = {4};
  c.decoder_act = Activation::kTanh;
  c.beta = 0.7;
  return c;
}

CpcConfig SmallCpc() {
  CpcConfig c;
  c.input_dim = 3;
  c.K = 2;
  c.N = 3;
  c.latent_hidden = {4};
  c.latent_dim = 3;
  c.context = {1, 4, false, {}, 0.0};
  return c;
}

MaskedPretrainConfig SmallMasked(MaskedObjective o) {
  MaskedPretrainConfig c;
  c.input_dim = 4;
  c.objective = o;
  c.mask = {1, 2, 1, 2, 0};
  c.encoder = {1, 3, true, {}, 0.0};
  c.decoder_hidden = {4};
  c.latent_hidden = {4};
  c.n_negatives = 2;
  c.alpha = 0.4;
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

std::vector<int32_t> RandomTranscript(Rng &rng, int64_t T, int64_t V) {
  for (;;) {
    const int64_t m = rng.UniformInt(0, T);
    std::vector<int32_t> tr;
    for (int64_t i = 0; i < m; ++i) tr.push_back(static_cast<int32_t>(rng.UniformInt(1, V)));
    if (CtcMinFrames(tr) <= T) return tr;
  }
}

Tensor RandomLattice(Rng &rng, int64_t T, int64_t C) {
  Graph g;
  return LogSoftmax(g.Constant(rng.NormalTensor(T, C))).value();
}

double RelErr(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// ---------------------------------------------------------------------------

void FeedforwardGrads(std::vector<VerifyCheck> *out) {
  for (FFVariant v : {FFVariant::kAE, FFVariant::kDaeBernoulli, FFVariant::kDaeGaussian,
                      FFVariant::kNae, FFVariant::kVae, FFVariant::kDropoutBottleneckBernoulli,
                      FFVariant::kDropoutBottleneckGaussian, FFVariant::kDropoutLayerwise}) {
    Guard(out, "gradcheck", "ff_loss/" + FFVariantName(v), [&] {
      ParamStore s;
      Rng rng(10);
      FFModel m(&s, "m", SmallFF(v), rng);
      Tensor x = rng.NormalTensor(4, 6);
      return Grad("ff_loss/" + FFVariantName(v), [&](Graph &g) {
        Rng noise(77);
        return FFLoss(g, m, x, RunMode{true, &noise}).loss;
      }, s.All());
    });
  }
  Guard(out, "gradcheck", "prior_updated/vae", [&] {
    ParamStore s;
    Rng rng(11);
    FFModel m(&s, "m", SmallFF(FFVariant::kVae), rng);
    Tensor x = rng.NormalTensor(4, 6);
    std::vector<PriorKey> keys;
    for (int64_t i = 0; i < 4; ++i) keys.emplace_back("u", i);
    PriorStore store = StoreFrom(keys, {rng.NormalTensor(4, 3), rng.UniformTensor(4, 3, -1, 1)});
    return Grad("prior_updated/vae", [&](Graph &g) {
      Rng noise(5);
      return PriorUpdatedLoss(g, m, x, keys, store, 0.7, RunMode{true, &noise}).loss;
    }, s.All());
  });
}

void MultiviewGrads(std::vector<VerifyCheck> *out) {
  Rng rng(9);
  const PairedBatch b = RandomBatch(rng, 5, 4, 3);
  Guard(out, "gradcheck", "vcca", [&] {
    ParamStore s;
    VccapModel m(&s, "m", SmallVccap(0, 0), rng);
    return Grad("vcca", [&](Graph &g) { Rng n(1); return VccaLoss(g, m, b, RunMode{true, &n}); }, s.All());
  });
  Guard(out, "gradcheck", "vccap", [&] {
    ParamStore s;
    VccapModel m(&s, "m", SmallVccap(2, 1), rng);
    return Grad("vccap", [&](Graph &g) { Rng n(1); return VccapLoss(g, m, b, RunMode{true, &n}).loss; },
                s.All());
  });
  Guard(out, "gradcheck", "prior_updated/vccap", [&] {
    ParamStore s;
    VccapModel m(&s, "m", SmallVccap(2, 1), rng);
    PriorStore store = StoreFrom(b.keys, {rng.NormalTensor(5, 5), rng.UniformTensor(5, 5, -1, 1)});
    return Grad("prior_updated/vccap", [&](Graph &g) {
      Rng n(2);
      return PriorUpdatedLoss(g, m, b, store, 0.7, RunMode{true, &n}).loss;
    }, s.All());
  });
  Guard(out, "gradcheck", "vaep", [&] {
    CrossDomainConfig c;
    c.source = SmallVccap(1, 1);
    c.source.split = 1;
    c.target_dim = 3;
    c.target_private = 2;
    c.partial = true;
    ParamStore s;
    CrossDomainModel m(&s, "cd", c, rng);
    Tensor tgt = rng.NormalTensor(4, 3);
    return Grad("vaep", [&](Graph &g) { Rng n(4); return VaepLoss(g, m, tgt, RunMode{true, &n}); }, s.All());
  });
  for (auto kind : {SimilarityKind::kL2, SimilarityKind::kCosine, SimilarityKind::kContrastive,
                    SimilarityKind::kCca}) {
    const std::string name = "similarity/" + SimilarityKindName(kind);
    Guard(out, "gradcheck", name, [&] {
      Parameter pa{"a", rng.NormalTensor(12, 3), {}}, pb{"b", rng.NormalTensor(12, 3), {}};
      SimilarityLossConfig c;
      c.kind = kind;
      c.rx = c.ry = 1e-2;
      c.lambda = 0.3;
      c.n_negatives = 2;
      return Grad(name, [&](Graph &g) {
        Rng r(5);
        return SimilarityLoss(g.Param(&pa), g.Param(&pb), c, nullptr, &r);
      }, {&pa, &pb});
    });
  }
  for (auto kind : {SimilarityKind::kL2, SimilarityKind::kCosine, SimilarityKind::kContrastive,
                    SimilarityKind::kCca}) {
    const std::string name = "label_embedding/" + SimilarityKindName(kind);
    Guard(out, "gradcheck", name, [&] {
      LabelEmbeddingConfig c;
      c.frame_dim = 2;
      c.labels = 3;
      c.window = 3;
      c.hidden = {4};
      c.latent = 2;
      c.beta = 0.5;
      c.act = Activation::kTanh;
      c.sim.kind = kind;
      c.sim.rx = c.sim.ry = 1e-1;
      ParamStore s;
      LabelEmbeddingModel m(&s, "le", c, rng);
      const LabelWindows lw = MakeLabelWindows({0, 0, 1, 1, 1, 2}, 3, 3);
      const Tensor x = WindowStack(rng.NormalTensor(6, 2), 3);
      return Grad(name, [&](Graph &g) {
        Rng n(2);
        return LabelEmbeddingLoss(g, m, x, lw, RunMode{true, &n}).loss;
      }, s.All());
    });
  }
}

void RecurrentGrads(std::vector<VerifyCheck> *out) {
  Rng rng(12);
  const Utterance u = RandomUtt(rng, "u", 6, 3, 3);
  auto recrep = [&](const std::string &name, const RecRepConfig &c) {
    Guard(out, "gradcheck", name, [&] {
      ParamStore s;
      Rng init(13);
      RecRepModel m(&s, "m", c, init);
      return Grad(name, [&](Graph &g) {
        Rng n(2);
        if (c.supervision == Supervision::kNone) return RecRepElbo(g, m, u.frames, RunMode{true, &n}).loss;
        return RecRepJointLoss(g, m, u, RunMode{true, &n}).loss;
      }, s.All());
    });
  };
  RecRepConfig c = SmallRecRep();
  recrep("recrep", c);
  RecRepConfig flat = c;
  flat.aux = AuxMode::kFlat;
  flat.aux_latent = 2;
  recrep("recrep/aux_flat", flat);
  RecRepConfig hier = flat;
  hier.aux = AuxMode::kHierarchical;
  recrep("recrep/aux_hierarchical", hier);
  RecRepConfig pyr = c;
  pyr.encoder = {2, 2, true, {true, false}, 0.0};
  pyr.supervision = Supervision::kFramewise;
  pyr.classes = 3;
  pyr.kappa = 0.5;
  recrep("recrep/pyramid_mt", pyr);
  RecRepConfig ctc = c;
  ctc.supervision = Supervision::kCtc;
  ctc.classes = 3;
  ctc.private_rnn = {1, 2, true, {}, 0.0};
  recrep("recrep/ctc_mt", ctc);
  Guard(out, "gradcheck", "recrep/semi", [&] {
    RecRepConfig sc = c;
    sc.supervision = Supervision::kFramewise;
    sc.classes = 3;
    ParamStore s;
    Rng init(14);
    RecRepModel m(&s, "m", sc, init);
    const Utterance a = RandomUtt(rng, "a", 4, 3, 3), v = RandomUtt(rng, "v", 5, 3, 3);
    return Grad("recrep/semi", [&](Graph &g) {
      Rng n(3);
      return SemiSupervisedLoss(g, m, {&a}, {&v}, 0.4, RunMode{true, &n});
    }, s.All());
  });
  Guard(out, "gradcheck", "fb", [&] {
    FBConfig fc;
    fc.input_dim = 3;
    fc.hidden = 3;
    fc.d_f = fc.d_b = fc.d_zf = fc.d_zb = 2;
    fc.decoder_hidden = {3};
    fc.decoder_act = Activation::kTanh;
    fc.beta = 0.5;
    ParamStore s;
    FBModel m(&s, "fb", fc, rng);
    return Grad("fb", [&](Graph &g) { Rng n(3); return FBLoss(g, m, u.frames, RunMode{true, &n}); }, s.All());
  });
}

void PredictiveGrads(std::vector<VerifyCheck> *out) {
  Rng rng(4);
  Guard(out, "gradcheck", "infonce", [&] {
    auto f = [](Graph &, const Var &x) { return InfoNce(SliceCols(x, 0, 1), SliceCols(x, 1, 4)); };
    const GradCheckResult r = GradCheck(f, rng.NormalTensor(4, 4), kEps);
    return Check("gradcheck", "infonce", r.max_rel_error, kGradTol);
  });
  for (NegativeMode mode : {NegativeMode::kWithinUtterance, NegativeMode::kBatch}) {
    const std::string name = "cpc/" + NegativeModeName(mode);
    Guard(out, "gradcheck", name, [&] {
      CpcConfig c = SmallCpc();
      c.negatives = mode;
      ParamStore s;
      CpcModel m(&s, "cpc", c, rng);
      Tensor x = rng.NormalTensor(6, 3), other = rng.NormalTensor(4, 3);
      return Grad(name, [&](Graph &g) {
        Rng n(1);
        if (mode == NegativeMode::kBatch) return CpcLoss(g, m, x, n, {}, {&other});
        return CpcLoss(g, m, x, n);
      }, s.All());
    });
  }
  const Tensor x = rng.NormalTensor(6, 4);
  for (bool half : {false, true}) {
    const std::string name = half ? "masked_recon/half" : "masked_recon/full";
    Guard(out, "gradcheck", name, [&] {
      ParamStore s;
      MaskedModel m(&s, "mr", SmallMasked(MaskedObjective::kBert), rng);
      return Grad(name, [&](Graph &g) { return MaskedReconLoss(g, m, x, TimeMask(6, 4, 1, 4), half); },
                  s.All());
    });
  }
  for (bool half : {false, true}) {
    const std::string name = half ? "bicpc/half" : "bicpc/full";
    Guard(out, "gradcheck", name, [&] {
      ParamStore s;
      MaskedModel m(&s, "bc", SmallMasked(MaskedObjective::kBicpc), rng);
      return Grad(name, [&](Graph &g) {
        Rng n(2);
        return BicpcLoss(g, m, x, TimeMask(6, 4, 1, 5), half, n).loss;
      }, s.All());
    });
  }
  const MaskPair m1 = TimeMask(6, 4, 1, 3), m2 = TimeMask(6, 4, 3, 6);
  for (auto o : {MaskedObjective::kMvMae, MaskedObjective::kMvContrast, MaskedObjective::kCrossviewBert}) {
    const std::string name = "multiview/" + MaskedObjectiveName(o);
    Guard(out, "gradcheck", name, [&] {
      ParamStore s;
      MaskedModel m(&s, "mv", SmallMasked(o), rng);
      return Grad(name, [&](Graph &g) {
        Rng n(5);
        return MultiviewMaskedLoss(g, m, x, m1, m2, n);
      }, s.All());
    });
  }
}

void CtcGrads(std::vector<VerifyCheck> *out) {
  Rng rng(4);
  double worst = 0.0;
  Guard(out, "gradcheck", "ctc_loss", [&] {
    for (int i = 0; i < 10; ++i) {
      const int64_t T = rng.UniformInt(2, 7), V = rng.UniformInt(1, 4);
      Tensor x = rng.NormalTensor(T, V + 1);
      const auto tr = RandomTranscript(rng, T, V);
      auto f = [&](Graph &, const Var &v) { return CtcLoss(LogSoftmax(v), tr); };
      worst = std::max(worst, GradCheck(f, x, kEps).max_rel_error);
    }
    return Check("gradcheck", "ctc_loss", worst, kGradTol, "10 random lattices");
  });
  Guard(out, "gradcheck", "ctc_recognizer", [&] {
    RecognizerConfig rc;
    rc.input_dim = 3;
    rc.vocab = 2;
    rc.rnn = {1, 2, true, {}, 0.0};
    rc.lin = true;
    ParamStore s;
    CtcRecognizer rec(&s, "rec", rc, rng);
    Tensor x = rng.NormalTensor(5, 3);
    return Grad("ctc_recognizer", [&](Graph &g) { return rec.Loss(g, g.Constant(x), {0, 1}); }, s.All());
  });
}

}  // namespace

std::vector<VerifyCheck> GradcheckSuite() {
  std::vector<VerifyCheck> out;
  FeedforwardGrads(&out);
  MultiviewGrads(&out);
  RecurrentGrads(&out);
  PredictiveGrads(&out);
  CtcGrads(&out);
  return out;
}

std::vector<VerifyCheck> KlMonteCarloChecks(int n_gaussians, int64_t samples, uint64_t seed) {
  std::vector<VerifyCheck> out;
  Rng rng(seed);
  auto estimate = [&](const DiagGaussian &q, const DiagGaussian &p, double *se) {
    const int64_t d = q.dim();
    std::vector<double> z(static_cast<size_t>(d));
    double sum = 0.0, sum2 = 0.0;
    for (int64_t s = 0; s < samples; ++s) {
      for (int64_t i = 0; i < d; ++i)
        z[static_cast<size_t>(i)] = q.mu(0, i) + std::exp(0.5 * q.logvar(0, i)) * rng.Normal();
      const double v = LogDensity(q, 0, z) - LogDensity(p, 0, z);
      sum += v;
      sum2 += v * v;
    }
    const double n = static_cast<double>(samples), mean = sum / n;
    *se = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
    return mean;
  };
  auto add = [&](const std::string &name, double closed, double mc, double se) {
    // Agreement within 1% relative or within 3 standard errors.
    const double rel = std::abs(closed - mc) / std::max(std::abs(closed), 1e-300);
    const double in_se = se > 0.0 ? std::abs(closed - mc) / se : (closed == mc ? 0.0 : INFINITY);
    VerifyCheck c{"oracles", name, std::min(rel / 0.01, in_se / 3.0), 1.0, false, ""};
    c.pass = c.value <= 1.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "closed %.6g mc %.6g se %.3g rel %.3g", closed, mc, se, rel);
    c.detail = buf;
    out.push_back(c);
  };
  for (int k = 0; k < n_gaussians; ++k) {
    const int64_t d = rng.UniformInt(1, 4);
    DiagGaussian q{rng.NormalTensor(1, d), rng.UniformTensor(1, d, -1.5, 1.5)};
    DiagGaussian p{rng.NormalTensor(1, d), rng.UniformTensor(1, d, -1.0, 1.0)};
    double se = 0.0;
    const double mc_std = estimate(q, DiagGaussian::Standard(1, d), &se);
    add("kl_to_standard/" + std::to_string(k), KlToStandard(q), mc_std, se);
    const double mc_pair = estimate(q, p, &se);
    add("kl_diag_diag/" + std::to_string(k), KlDiagDiag(q, p), mc_pair, se);
  }
  return out;
}

std::vector<VerifyCheck> CtcOracleChecks(int instances, uint64_t seed) {
  std::vector<VerifyCheck> out;
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const int64_t T = rng.UniformInt(1, 6), V = rng.UniformInt(1, 3);
    const Tensor lp = RandomLattice(rng, T, V + 1);
    const auto tr = RandomTranscript(rng, T, V);
    worst = std::max(worst, std::abs(CtcLossValue(lp, tr) - CtcOracle(lp, tr)));
  }
  out.push_back(Check("oracles", "ctc_vs_enumeration", worst, 1e-9,
                      std::to_string(instances) + " instances, T <= 6, V <= 3"));
  double worst_total = 0.0;
  for (int64_t T = 1; T <= 4; ++T)
    for (int64_t V = 1; V <= 2; ++V) {
      const Tensor lp = RandomLattice(rng, T, V + 1);
      double total = 0.0;
      // Every token sequence of length <= T over 1..V.
      for (int64_t len = 0; len <= T; ++len) {
        int64_t count = 1;
        for (int64_t j = 0; j < len; ++j) count *= V;
        for (int64_t code = 0; code < count; ++code) {
          std::vector<int32_t> tr;
          for (int64_t j = 0, c = code; j < len; ++j, c /= V) tr.push_back(static_cast<int32_t>(1 + c % V));
          if (CtcMinFrames(tr) <= T) total += std::exp(-CtcLossValue(lp, tr));
        }
      }
      worst_total = std::max(worst_total, std::abs(total - 1.0));
    }
  out.push_back(Check("oracles", "ctc_completeness", worst_total, 1e-6, "T <= 4, V <= 2"));
  return out;
}

std::vector<VerifyCheck> OracleSuite() {
  std::vector<VerifyCheck> out = KlMonteCarloChecks(20, 1000000, 2024);
  for (auto &c : CtcOracleChecks(200, 11)) out.push_back(c);
  Guard(&out, "oracles", "adam_reference_trace", [] {
    Parameter p{"p", Tensor::Row({0.5, -1.0, 2.0}), {}};
    Adam opt(AdamConfig{0.01, 0.9, 0.999, 1e-8});
    std::vector<double> ref = {0.5, -1.0, 2.0}, m(3, 0.0), v(3, 0.0);
    for (int step = 1; step <= 20; ++step) {
      p.grad = Tensor(1, 3);
      for (int i = 0; i < 3; ++i) {
        const double g = ref[i] * ref[i] + 0.1 * step;
        p.grad[i] = p.value[i] * p.value[i] + 0.1 * step;
        m[i] = 0.9 * m[i] + 0.1 * g;
        v[i] = 0.999 * v[i] + 0.001 * g * g;
      }
      opt.Step({&p});
      for (int i = 0; i < 3; ++i) {
        const double mh = m[i] / (1 - std::pow(0.9, step)), vh = v[i] / (1 - std::pow(0.999, step));
        ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      }
    }
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(p.value[i] - ref[i]));
    return Check("oracles", "adam_reference_trace", worst, 1e-12);
  });
  Guard(&out, "oracles", "infonce_direct", [] {
    Rng rng(1);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Tensor p = rng.NormalTensor(5, 1), n = rng.NormalTensor(5, 4);
      double total = 0.0;
      for (int64_t i = 0; i < 5; ++i) {
        double denom = std::exp(p(i, 0));
        for (int64_t j = 0; j < 4; ++j) denom += std::exp(n(i, j));
        total -= std::log(std::exp(p(i, 0)) / denom);
      }
      Graph g;
      worst = std::max(worst, std::abs(Value(InfoNce(g.Constant(p), g.Constant(n))) - total / 5.0));
    }
    return Check("oracles", "infonce_direct", worst, 1e-12);
  });
  Guard(&out, "oracles", "masked_recon_direct", [] {
    Rng rng(5);
    ParamStore s;
    MaskedModel m(&s, "mr", SmallMasked(MaskedObjective::kBert), rng);
    const Tensor x = rng.NormalTensor(5, 4);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const MaskPair mk = GenMask({1, 3, 1, 2, 0}, 5, 4, rng);
      Tensor masked = x;
      for (int64_t i = 0; i < x.size(); ++i) masked[i] *= mk.mask[i];
      Graph g;
      const Tensor rec = m.Reconstruct(g, m.Context(g, g.Constant(masked))).value();
      double full = 0.0, half = 0.0;
      for (int64_t i = 0; i < x.size(); ++i) {
        const double r = x[i] - rec[i];
        full += (1.0 - mk.mask[i]) * r * r;
        half += mk.central[i] * r * r;
      }
      worst = std::max(worst, std::abs(Value(MaskedReconLoss(g, m, x, mk, false)) - full));
      worst = std::max(worst, std::abs(Value(MaskedReconLoss(g, m, x, mk, true)) - half));
    }
    return Check("oracles", "masked_recon_direct", worst, 1e-12);
  });
  Guard(&out, "oracles", "recrep_elbo_direct", [] {
    Rng rng(3);
    ParamStore s;
    RecRepModel m(&s, "m", SmallRecRep(), rng);
    const Tensor x = rng.NormalTensor(5, 3);
    Graph g;
    Var h = m.Encode(g, g.Constant(x));
    GaussianVar q = m.Posterior(g, h);
    const Tensor rec = m.Decode(g, q.mu).value();
    const DiagGaussian qd{q.mu.value(), q.logvar.value()};
    double recon = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) recon += 0.5 * (x[i] - rec[i]) * (x[i] - rec[i]);
    const double direct = (recon + 0.7 * KlToStandard(qd)) / 5.0;
    Graph g2;
    return Check("oracles", "recrep_elbo_direct", std::abs(Value(RecRepElbo(g2, m, x).neg_elbo) - direct),
                 1e-12);
  });
  Guard(&out, "oracles", "edit_distance", [] {
    const int64_t d = EditDistance({1, 2, 3, 4}, {1, 3, 4, 5});
    return Check("oracles", "edit_distance", std::abs(static_cast<double>(d) - 2.0), 0.0);
  });
  return out;
}

std::vector<VerifyCheck> IdentitySuite() {
  std::vector<VerifyCheck> out;
  Guard(&out, "identities", "vae_equals_nae_plus_variance_term", [] {
    Rng rng(3);
    ParamStore vs, ns;
    Rng r1(5), r2(6);
    FFModel vae(&vs, "m", SmallFF(FFVariant::kVae), r1);
    FFModel nae(&ns, "m", SmallFF(FFVariant::kNae), r2);
    ns.CopyMatching(vs);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor x = rng.NormalTensor(7, 6);
      Rng n1(trial), n2(trial);
      Graph g1, g2;
      const FFLossOut v = FFLoss(g1, vae, x, RunMode{true, &n1});
      const FFLossOut n = FFLoss(g2, nae, x, RunMode{true, &n2});
      // Pointwise: per row, sum over latent dims of sigma^2/2 - log sigma - 1/2.
      const Tensor &lv = n.q.logvar.value();
      double term = 0.0;
      for (int64_t i = 0; i < lv.size(); ++i) term += 0.5 * std::exp(lv[i]) - 0.5 * lv[i] - 0.5;
      worst = std::max(worst, std::abs(Value(n.loss) + 0.7 * term / 7.0 - Value(v.loss)));
    }
    return Check("identities", "vae_equals_nae_plus_variance_term", worst, 1e-12);
  });
  Guard(&out, "identities", "vccap_zero_private_equals_vcca", [] {
    Rng rng(1);
    ParamStore s;
    VccapModel m(&s, "m", SmallVccap(0, 0), rng);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const PairedBatch b = RandomBatch(rng, 6, 4, 3);
      Rng n1(trial), n2(trial);
      Graph g1, g2;
      worst = std::max(worst, std::abs(Value(VccaLoss(g1, m, b, RunMode{true, &n1})) -
                                       Value(VccapLoss(g2, m, b, RunMode{true, &n2}).loss)));
      // Evaluation mode against a direct evaluation from the model's parts.
      Graph g3;
      GaussianVar qz = m.EncodeZ(g3, g3.Constant(b.x));
      const Tensor rx = m.DecodeX(g3, qz.mu, nullptr).value(), ry = m.DecodeY(g3, qz.mu, nullptr).value();
      double direct = 0.6 * KlToStandard(DiagGaussian{qz.mu.value(), qz.logvar.value()});
      for (int64_t i = 0; i < rx.size(); ++i) direct += 0.5 * (b.x[i] - rx[i]) * (b.x[i] - rx[i]);
      for (int64_t i = 0; i < ry.size(); ++i) direct += 0.5 * (b.y[i] - ry[i]) * (b.y[i] - ry[i]);
      Graph g4;
      worst = std::max(worst, std::abs(Value(VccapLoss(g4, m, b).loss) - direct / 6.0));
    }
    return Check("identities", "vccap_zero_private_equals_vcca", worst, 1e-12);
  });
  Guard(&out, "identities", "prior_updated_standard_store_equals_base", [] {
    Rng rng(5);
    double worst = 0.0;
    {
      ParamStore s;
      VccapModel m(&s, "m", SmallVccap(2, 1), rng);
      const PairedBatch b = RandomBatch(rng, 6, 4, 3);
      const PriorStore store = StoreFrom(b.keys, DiagGaussian::Standard(6, m.posterior_dim()));
      Rng n1(1), n2(1);
      Graph g1, g2;
      worst = std::max(worst, std::abs(Value(VccapLoss(g1, m, b, RunMode{true, &n1}).loss) -
                                       Value(PriorUpdatedLoss(g2, m, b, store, 0.6, RunMode{true, &n2}).loss)));
    }
    {
      ParamStore s;
      FFEncoderConfig c = SmallFF(FFVariant::kVae);
      c.beta = 0.8;
      FFModel m(&s, "vae", c, rng);
      const Tensor w = rng.NormalTensor(5, 6);
      std::vector<PriorKey> keys;
      for (int64_t i = 0; i < 5; ++i) keys.emplace_back("u", i);
      const PriorStore store = StoreFrom(keys, DiagGaussian::Standard(5, 3));
      Rng n1(2), n2(2);
      Graph g1, g2;
      worst = std::max(worst, std::abs(Value(FFLoss(g1, m, w, RunMode{true, &n1}).loss) -
                                       Value(PriorUpdatedLoss(g2, m, w, keys, store, 0.8, RunMode{true, &n2}).loss)));
    }
    {
      ParamStore s;
      RecRepModel m(&s, "m", SmallRecRep(), rng);
      const Tensor x = rng.NormalTensor(5, 3);
      const DiagGaussian prior = DiagGaussian::Standard(5, 2);
      Rng n1(3), n2(3);
      Graph g1, g2;
      worst = std::max(worst, std::abs(Value(RecRepElbo(g1, m, x, RunMode{true, &n1}).loss) -
                                       Value(RecRepElbo(g2, m, x, RunMode{true, &n2}, &prior).loss)));
    }
    return Check("identities", "prior_updated_standard_store_equals_base", worst, 1e-12);
  });
  Guard(&out, "identities", "gaussian_dropout_reparameterisation", [] {
    Rng rng(12);
    const double gamma = 0.7;
    const Tensor mu = rng.NormalTensor(4, 6);
    Rng r1(99), r2(99);
    Graph g;
    const Tensor dropped = GaussianDropout(g.Constant(mu), gamma, r1).value();
    Tensor eps(4, 6), lv(4, 6);
    double op_vs_product = 0.0, reparam = 0.0;
    for (int64_t i = 0; i < mu.size(); ++i) {
      const double delta = 1.0 + gamma * r2.Normal();
      op_vs_product = std::max(op_vs_product, std::abs(dropped[i] - mu[i] * delta));
      eps[i] = (mu[i] < 0 ? -1.0 : 1.0) * (delta - 1.0) / gamma;
      lv[i] = std::log(gamma * gamma * mu[i] * mu[i]);
    }
    const Tensor s = ReparamSample(DiagGaussian{mu, lv}, eps, 1.0);
    for (int64_t i = 0; i < mu.size(); ++i) reparam = std::max(reparam, RelErr(s[i], dropped[i]));
    char buf[128];
    std::snprintf(buf, sizeof(buf), "op vs mu*delta %.3g, reparameterised sample rel %.3g",
                  op_vs_product, reparam);
    // The multiplicative form is bit-exact; the exp/log round trip of the
    // reparameterised form is exact up to rounding.
    const double value = op_vs_product == 0.0 ? reparam : INFINITY;
    return Check("identities", "gaussian_dropout_reparameterisation", value, 1e-13, buf);
  });
  Guard(&out, "identities", "infonce_constant_scores", [] {
    double worst = 0.0;
    for (int64_t N : {1, 4, 9, 31}) {
      Graph g;
      const double v = Value(InfoNce(g.Constant(Tensor(1, 1)), g.Constant(Tensor(1, N))));
      worst = std::max(worst, std::abs(v - std::log(static_cast<double>(N + 1))));
    }
    return Check("identities", "infonce_constant_scores", worst, 0.0);
  });
  Guard(&out, "identities", "masked_recon_all_ones_mask", [] {
    Rng rng(5);
    ParamStore s;
    MaskedModel m(&s, "mr", SmallMasked(MaskedObjective::kBert), rng);
    const Tensor x = rng.NormalTensor(5, 4);
    MaskPair none{Tensor(5, 4, 1.0), Tensor(5, 4)};
    Graph g;
    const double v = std::max(std::abs(Value(MaskedReconLoss(g, m, x, none, false))),
                              std::abs(Value(MaskedReconLoss(g, m, x, none, true))));
    return Check("identities", "masked_recon_all_ones_mask", v, 0.0);
  });
  Guard(&out, "identities", "mae_consistency_same_masks", [] {
    Rng rng(7);
    const Tensor x = rng.NormalTensor(6, 4);
    MaskedPretrainConfig c = SmallMasked(MaskedObjective::kMvMae);
    c.alpha = 0.0;
    ParamStore s;
    MaskedModel m(&s, "mv", c, rng);
    const MaskPair m1 = TimeMask(6, 4, 1, 3);
    Graph g;
    return Check("identities", "mae_consistency_same_masks",
                 std::abs(Value(MultiviewMaskedLoss(g, m, x, m1, m1, rng))), 0.0);
  });
  Guard(&out, "identities", "lin_wrapped_encoder_bit_equal", [] {
    Rng rng(9);
    const Tensor x = rng.NormalTensor(5, 4);
    MaskedPretrainConfig plain = SmallMasked(MaskedObjective::kBert), with_lin = plain;
    with_lin.lin = true;
    ParamStore s0, s1;
    Rng r0(1), r1(1);
    MaskedModel m0(&s0, "mr", plain, r0);
    MaskedModel m1(&s1, "mr", with_lin, r1);
    s1.CopyMatching(s0);
    RecognizerConfig rc;
    rc.input_dim = 4;
    rc.vocab = 3;
    rc.rnn = {1, 3, true, {}, 0.0};
    ParamStore q0, q1;
    Rng a(2), b(2);
    CtcRecognizer rec0(&q0, "rec", rc, a);
    rc.lin = true;
    CtcRecognizer rec1(&q1, "rec", rc, b);
    q1.CopyMatching(q0);
    Graph g;
    const Tensor l0 = rec0.Lattice(g, g.Constant(x)).value();
    const Tensor l1 = rec1.Lattice(g, g.Constant(x)).value();
    const bool same = m0.Features(x) == m1.Features(x) && l0 == l1;
    return Check("identities", "lin_wrapped_encoder_bit_equal", same ? 0.0 : 1.0, 0.0);
  });
  Guard(&out, "identities", "kl_to_standard_equals_kl_against_standard", [] {
    Rng rng(5);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const DiagGaussian q{rng.NormalTensor(1, 6), rng.UniformTensor(1, 6, -3, 3)};
      worst = std::max(worst, std::abs(KlToStandard(q) - KlDiagDiag(q, DiagGaussian::Standard(1, 6))));
    }
    return Check("identities", "kl_to_standard_equals_kl_against_standard", worst, 1e-12);
  });
  return out;
}

std::vector<VerifyCheck> RunVerifySuite(const std::string &suite) {
  if (suite == "gradcheck") return GradcheckSuite();
  if (suite == "oracles") return OracleSuite();
  if (suite == "identities") return IdentitySuite();
  if (suite == "all") {
    std::vector<VerifyCheck> out = GradcheckSuite();
    for (auto *f : {&OracleSuite, &IdentitySuite})
      for (auto &c : f()) out.push_back(std::move(c));
    return out;
  }
  throw ConfigError("unknown suite '" + suite + "' (expected gradcheck, oracles, identities or all)");
}

}  // namespace seqrep
