// core/src/recrep.cc

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

#include "seqrep/recrep.h"

#include <algorithm>
#include <cmath>

#include "seqrep/ctc.h"
#include "seqrep/error.h"
#include "seqrep/ops.h"

namespace seqrep {

namespace {

std::vector<int64_t> WithOutput(std::vector<int64_t> hidden, int64_t out) {
  hidden.push_back(out);
  return hidden;
}

Var Kl(Graph &g, const GaussianVar &q, const DiagGaussian *prior) {
  if (prior == nullptr) return Sum(KlToStandard(q));
  SEQREP_CHECK_SHAPE(prior->count() == q.mu.rows() && prior->dim() == q.mu.cols(),
                     "prior has shape " + prior->mu.ShapeString() + ", posterior " +
                         q.mu.value().ShapeString());
  GaussianVar p{g.Constant(prior->mu, "prior_mu"), g.Constant(prior->logvar, "prior_logvar")};
  return Sum(KlDiagDiag(q, p));
}

void CheckUnit(double v, const char *what) {
  SEQREP_CHECK_CONFIG(v >= 0.0 && v <= 1.0, std::string(what) + " must be in [0, 1]");
}

// The shared part of every RecRep objective: encoder, posterior and -ELBO.
RecRepOut ElboCore(Graph &g, const RecRepModel &model, const Tensor &frames, const RunMode &mode,
                   const DiagGaussian *prior, Var *h_out = nullptr) {
  const RecRepConfig &cfg = model.config();
  SEQREP_CHECK_SHAPE(frames.cols() == cfg.input_dim,
                     "sequence has " + std::to_string(frames.cols()) + " features, model expects " +
                         std::to_string(cfg.input_dim));
  SEQREP_CHECK_SHAPE(frames.rows() >= cfg.Reduction(), "sequence of " +
                                                           std::to_string(frames.rows()) +
                                                           " frames is too short for the encoder");
  RecRepOut out;
  Var h = model.Encode(g, g.Constant(frames, "frames"), mode);
  if (h_out) *h_out = h;
  out.steps = h.rows();
  out.q = model.Posterior(g, h);
  Var z = SampleLatent(g, out.q, mode);
  Var dec_in = z;
  Var kl = Kl(g, out.q, prior);
  if (cfg.aux != AuxMode::kNone) {
    out.qr = model.AuxPosterior(g, h, cfg.aux == AuxMode::kHierarchical ? &z : nullptr);
    Var r = SampleLatent(g, out.qr, mode);
    dec_in = cfg.aux == AuxMode::kFlat ? ConcatCols({z, r}) : r;
    kl = Add(kl, Sum(KlToStandard(out.qr)));
  }
  Rng fixed(0);
  Rng *target_rng = mode.rng != nullptr ? mode.rng : &fixed;
  Var u = g.Constant(model.Targets(frames, target_rng), "targets");
  const double inv = 1.0 / static_cast<double>(out.steps);
  out.recon = Scale(SquaredError(model.Decode(g, dec_in, mode), u), 0.5 * inv);
  out.kl = Scale(kl, inv);
  out.neg_elbo = Add(out.recon, Scale(out.kl, cfg.beta));
  out.loss = out.neg_elbo;
  return out;
}

const std::vector<int32_t> &SupervisionLabels(const RecRepConfig &cfg, const Utterance &utt) {
  if (cfg.supervision == Supervision::kCtc) return utt.transcript;
  return utt.labels;
}

}  // namespace

std::string AuxModeName(AuxMode m) {
  switch (m) {
    case AuxMode::kNone: return "none";
    case AuxMode::kFlat: return "flat";
    case AuxMode::kHierarchical: return "hierarchical";
  }
  return "?";
}

AuxMode ParseAuxMode(const std::string &s) {
  for (auto m : {AuxMode::kNone, AuxMode::kFlat, AuxMode::kHierarchical})
    if (AuxModeName(m) == s) return m;
  throw ConfigError("unknown auxiliary latent mode '" + s + "' (expected none, flat or hierarchical)");
}

std::string SupervisionName(Supervision s) {
  switch (s) {
    case Supervision::kNone: return "none";
    case Supervision::kFramewise: return "framewise";
    case Supervision::kCtc: return "ctc";
  }
  return "?";
}

Supervision ParseSupervision(const std::string &s) {
  for (auto v : {Supervision::kNone, Supervision::kFramewise, Supervision::kCtc})
    if (SupervisionName(v) == s) return v;
  throw ConfigError("unknown supervision '" + s + "' (expected none, framewise or ctc)");
}

void PriorUpdateSchedule::Check() const {
  SEQREP_CHECK_CONFIG(start_epoch >= 1, "prior update start epoch must be >= 1");
  SEQREP_CHECK_CONFIG(frequency >= 1, "prior update frequency must be >= 1");
}

bool PriorUpdateSchedule::ShouldUpdate(int32_t epoch, bool improved) const {
  if (!enabled || epoch < start_epoch) return false;
  if (save_best) return improved;
  return (epoch - start_epoch) % frequency == 0;
}

void RecRepConfig::Check() const {
  SEQREP_CHECK_CONFIG(input_dim >= 1, "input dimension must be positive");
  SEQREP_CHECK_CONFIG(encoder.layers >= 1, "the shared encoder needs at least one layer");
  SEQREP_CHECK_CONFIG(latent >= 1, "latent dimension must be >= 1");
  SEQREP_CHECK_CONFIG(aux == AuxMode::kNone || aux_latent >= 1,
                      "an auxiliary latent mode needs aux_latent >= 1");
  SEQREP_CHECK_CONFIG(beta >= 0.0, "beta must be >= 0");
  CheckUnit(alpha, "alpha");
  CheckUnit(kappa, "kappa");
  SEQREP_CHECK_CONFIG(pyramid_window >= 0, "pyramid window must be >= 0");
  SEQREP_CHECK_CONFIG(supervision == Supervision::kNone || classes >= 1,
                      "supervised training needs classes >= 1");
  target.Check();
  prior_update.Check();
}

int64_t RecRepConfig::Reduction() const {
  int64_t r = 1;
  for (bool p : encoder.pyramid)
    if (p) r *= 2;
  return r;
}

RecRepModel::RecRepModel(ParamStore *store, const std::string &name, const RecRepConfig &cfg,
                         Rng &rng)
    : cfg_((cfg.Check(), cfg)) {
  enc_ = RecurrentStack(store, name + ".enc", cfg.input_dim, cfg.encoder, rng);
  zhead_ = GaussianHead(store, name + ".z", enc_.out(), cfg.latent, rng, true);
  int64_t dec_in = cfg.latent;
  if (cfg.aux != AuxMode::kNone) {
    const bool hier = cfg.aux == AuxMode::kHierarchical;
    rhead_ = GaussianHead(store, name + ".r", enc_.out() + (hier ? cfg.latent : 0), cfg.aux_latent,
                          rng, true);
    dec_in = hier ? cfg.aux_latent : cfg.latent + cfg.aux_latent;
  }
  const int64_t out = cfg.pyramid()
                          ? (cfg.pyramid_window > 0 ? cfg.pyramid_window : cfg.Reduction()) * cfg.input_dim
                          : cfg.target.TargetDim(cfg.input_dim);
  dec_ = Mlp(store, name + ".dec", dec_in, WithOutput(cfg.decoder_hidden, out), cfg.decoder_act, rng);
  if (cfg.supervision == Supervision::kFramewise)
    cls_ = FramewiseClassifier(store, name + ".cls", cfg.latent, cfg.classifier_hidden, cfg.classes,
                               rng);
  if (cfg.supervision == Supervision::kCtc) {
    RecognizerConfig rc;
    rc.input_dim = cfg.latent;
    rc.vocab = cfg.classes;
    rc.rnn = cfg.private_rnn;
    ctc_ = CtcRecognizer(store, name + ".ctc", rc, rng);
  }
}

Var RecRepModel::Encode(Graph &g, const Var &x, const RunMode &mode) const {
  return enc_.Forward(g, x, mode);
}

GaussianVar RecRepModel::Posterior(Graph &g, const Var &h) const { return zhead_.Forward(g, h); }

GaussianVar RecRepModel::AuxPosterior(Graph &g, const Var &h, const Var *z) const {
  SEQREP_CHECK_CONFIG(cfg_.aux != AuxMode::kNone, "model has no auxiliary latent");
  if (cfg_.aux == AuxMode::kHierarchical) {
    SEQREP_CHECK_CONFIG(z != nullptr, "hierarchical auxiliary posterior needs a z sample");
    return rhead_.Forward(g, ConcatCols({h, *z}));
  }
  return rhead_.Forward(g, h);
}

Var RecRepModel::Decode(Graph &g, const Var &latent, const RunMode &mode) const {
  return dec_.Forward(g, latent, mode);
}

Tensor RecRepModel::Targets(const Tensor &frames, Rng *rng) const {
  if (!cfg_.pyramid()) return BuildReconTargets(frames, cfg_.target, rng);
  const int64_t R = cfg_.Reduction(), T = frames.rows(), D = frames.cols();
  const int64_t W = cfg_.pyramid_window > 0 ? cfg_.pyramid_window : R;
  const int64_t steps = T / R;
  Tensor u(steps, W * D);
  for (int64_t k = 0; k < steps; ++k) {
    const int64_t start = R * k + R / 2 - (W + 1) / 2;
    for (int64_t j = 0; j < W; ++j) {
      auto src = frames.row(std::clamp<int64_t>(start + j, 0, T - 1));
      std::copy(src.begin(), src.end(), u.data() + (k * W + j) * D);
    }
  }
  return u;
}

std::vector<int32_t> RecRepModel::StepLabels(const std::vector<int32_t> &labels) const {
  const int64_t R = cfg_.Reduction();
  if (R == 1) return labels;
  std::vector<int32_t> out;
  for (size_t t = static_cast<size_t>(R - 1); t < labels.size(); t += static_cast<size_t>(R))
    out.push_back(labels[t]);
  return out;
}

Var RecRepModel::HeadLogProbs(Graph &g, const Var &z, const RunMode &mode) const {
  switch (cfg_.supervision) {
    case Supervision::kFramewise: return cls_.LogProbs(g, z, mode);
    case Supervision::kCtc: return ctc_.Lattice(g, z, mode);
    case Supervision::kNone: break;
  }
  throw ConfigError("model has no supervised head");
}

Var RecRepModel::SupervisedLoss(Graph &g, const Var &z, const std::vector<int32_t> &labels,
                                const RunMode &mode) const {
  Var loss;
  if (cfg_.supervision == Supervision::kFramewise) {
    std::vector<int32_t> step = StepLabels(labels);
    SEQREP_CHECK_SHAPE(static_cast<int64_t>(step.size()) >= z.rows(),
                       "framewise labels do not cover the latent steps");
    std::vector<int64_t> idx(step.begin(), step.begin() + z.rows());
    loss = Neg(Sum(PickPerRow(cls_.LogProbs(g, z, mode), idx)));
  } else if (cfg_.supervision == Supervision::kCtc) {
    loss = ctc_.Loss(g, z, labels, mode);
  } else {
    throw ConfigError("model has no supervised head");
  }
  return cfg_.normalize_supervised ? Scale(loss, 1.0 / static_cast<double>(z.rows())) : loss;
}

DiagGaussian RecRepModel::Posteriors(const Tensor &frames) const {
  Graph g;
  g.set_accumulate_param_grads(false);
  GaussianVar q = Posterior(g, Encode(g, g.Constant(frames)));
  return {q.mu.value(), q.logvar.value()};
}

RecRepOut RecRepElbo(Graph &g, const RecRepModel &model, const Tensor &frames, const RunMode &mode,
                     const DiagGaussian *prior) {
  return ElboCore(g, model, frames, mode, prior);
}

RecRepOut RecRepPyramidElbo(Graph &g, const RecRepModel &model, const Tensor &frames,
                            const RunMode &mode, const DiagGaussian *prior) {
  SEQREP_CHECK_CONFIG(model.config().pyramid(), "model has no pyramidal layer");
  SEQREP_CHECK_SHAPE(frames.rows() >= 2, "pyramidal ELBO needs at least two frames");
  return ElboCore(g, model, frames, mode, prior);
}

RecRepOut AuxLatentElbo(Graph &g, const RecRepModel &model, const Tensor &frames,
                        const RunMode &mode, const DiagGaussian *prior) {
  SEQREP_CHECK_CONFIG(model.config().aux != AuxMode::kNone, "model has no auxiliary latent");
  return ElboCore(g, model, frames, mode, prior);
}

RecRepOut RecRepJointLoss(Graph &g, const RecRepModel &model, const Utterance &utt,
                          const RunMode &mode, const DiagGaussian *prior) {
  const RecRepConfig &cfg = model.config();
  SEQREP_CHECK_CONFIG(cfg.supervision != Supervision::kNone, "joint loss needs a supervised head");
  RecRepOut out;
  if (cfg.alpha > 0.0) {
    out = ElboCore(g, model, utt.frames, mode, prior);
  } else {
    Var h = model.Encode(g, g.Constant(utt.frames, "frames"), mode);
    out.steps = h.rows();
    out.q = model.Posterior(g, h);
  }
  if (cfg.alpha == 1.0) return out;
  out.z_disc = SampleLatent(g, out.q, mode, cfg.kappa);
  out.supervised = model.SupervisedLoss(g, out.z_disc, SupervisionLabels(cfg, utt), mode);
  out.loss = cfg.alpha == 0.0
                 ? out.supervised
                 : Add(Scale(out.supervised, 1.0 - cfg.alpha), Scale(out.neg_elbo, cfg.alpha));
  return out;
}

DiagGaussian LookupPriors(const PriorStore &store, const Utterance &utt, int64_t steps) {
  return store.LookupSequence(utt.id, steps);
}

Var SemiSupervisedLoss(Graph &g, const RecRepModel &model,
                       const std::vector<const Utterance *> &labeled,
                       const std::vector<const Utterance *> &unlabeled, double alpha,
                       const RunMode &mode, const PriorStore *priors) {
  CheckUnit(alpha, "alpha");
  if (labeled.empty()) throw Error("semi-supervised batch has no labeled sequences");
  const RecRepConfig &cfg = model.config();
  SEQREP_CHECK_CONFIG(cfg.supervision != Supervision::kNone,
                      "semi-supervised loss needs a supervised head");
  const int64_t R = cfg.Reduction();
  auto prior_for = [&](const Utterance &u, DiagGaussian &slot) -> const DiagGaussian * {
    if (priors == nullptr) return nullptr;
    slot = LookupPriors(*priors, u, u.frames.rows() / R);
    return &slot;
  };
  Var sup, elbo;
  int64_t n_elbo = 0;
  for (const Utterance *u : labeled) {
    DiagGaussian slot;
    const DiagGaussian *p = prior_for(*u, slot);
    RecRepOut core;
    if (alpha > 0.0) {
      core = ElboCore(g, model, u->frames, mode, p);
      elbo = n_elbo++ == 0 ? core.neg_elbo : Add(elbo, core.neg_elbo);
    } else {
      core.q = model.Posterior(g, model.Encode(g, g.Constant(u->frames, "frames"), mode));
    }
    if (alpha < 1.0) {
      Var s = model.SupervisedLoss(g, SampleLatent(g, core.q, mode, cfg.kappa),
                                   SupervisionLabels(cfg, *u), mode);
      sup = !sup.valid() ? s : Add(sup, s);
    }
  }
  if (alpha > 0.0)
    for (const Utterance *u : unlabeled) {
      DiagGaussian slot;
      Var e = ElboCore(g, model, u->frames, mode, prior_for(*u, slot)).neg_elbo;
      elbo = n_elbo++ == 0 ? e : Add(elbo, e);
    }
  if (alpha == 1.0) return Scale(elbo, 1.0 / static_cast<double>(n_elbo));
  Var sup_mean = Scale(sup, 1.0 / static_cast<double>(labeled.size()));
  if (alpha == 0.0) return sup_mean;
  return Add(Scale(sup_mean, 1.0 - alpha), Scale(elbo, alpha / static_cast<double>(n_elbo)));
}

PriorStore BuildSelfPriors(const RecRepModel &model, const Dataset &data, int64_t epoch_tag) {
  PriorStore::Builder b(epoch_tag);
  for (const Utterance &u : data) b.PutRows(u.id, model.Posteriors(u.frames));
  return std::move(b).Finish();
}

double AverageKlToStandard(const RecRepModel &model, const Dataset &data) {
  double kl = 0.0;
  int64_t steps = 0;
  for (const Utterance &u : data) {
    DiagGaussian q = model.Posteriors(u.frames);
    kl += KlToStandard(q);
    steps += q.count();
  }
  return steps > 0 ? kl / static_cast<double>(steps) : 0.0;
}

// ---------------------------------------------------------------------------
// Forward-backward model

void FBConfig::Check() const {
  SEQREP_CHECK_CONFIG(input_dim >= 1 && hidden >= 1, "FB model needs positive input and hidden sizes");
  SEQREP_CHECK_CONFIG(d_f >= 0 && d_b >= 0 && d_zf >= 0 && d_zb >= 0, "FB latent sizes must be >= 0");
  SEQREP_CHECK_CONFIG(d_f + d_b + d_zf + d_zb > 0, "FB model has every latent disabled");
  SEQREP_CHECK_CONFIG(d_zf == 0 || d_zb == 0 || d_zf == d_zb,
                      "forward and backward reconstruction latents must have equal sizes");
  SEQREP_CHECK_CONFIG(beta >= 0.0, "beta must be >= 0");
}

int64_t FBConfig::FeatureDim() const { return d_f + std::max(d_zf, d_zb) + d_b; }

FBModel::FBModel(ParamStore *store, const std::string &name, const FBConfig &cfg, Rng &rng)
    : cfg_((cfg.Check(), cfg)),
      fwd_(store, name + ".fwd", cfg.input_dim, cfg.hidden, rng),
      bwd_(store, name + ".bwd", cfg.input_dim, cfg.hidden, rng) {
  const auto widths = WithOutput(cfg.decoder_hidden, cfg.input_dim);
  auto make = [&](int64_t d, const char *tag, GaussianHead &head, Mlp &dec, const char *dtag) {
    if (d == 0) return;
    head = GaussianHead(store, name + tag, cfg.hidden, d, rng, true);
    dec = Mlp(store, name + dtag, d, widths, cfg.decoder_act, rng);
  };
  make(cfg.d_f, ".f", fhead_, dec_next_, ".dec_next");
  make(cfg.d_b, ".b", bhead_, dec_prev_, ".dec_prev");
  make(cfg.d_zf, ".zf", zfhead_, dec_zf_, ".dec_zf");
  make(cfg.d_zb, ".zb", zbhead_, dec_zb_, ".dec_zb");
}

FBModel::Parts FBModel::Forward(Graph &g, const Tensor &frames, const RunMode &mode) const {
  SEQREP_CHECK_SHAPE(frames.cols() == cfg_.input_dim, "FB input width mismatch");
  const int64_t T = frames.rows();
  SEQREP_CHECK_SHAPE(T >= 1, "empty sequence");
  const bool predicts = cfg_.d_f > 0 || cfg_.d_b > 0;
  SEQREP_CHECK_SHAPE(!predicts || T >= 2, "frame prediction needs at least two frames");
  Var x = g.Constant(frames, "frames");
  Var hf = fwd_.Forward(g, x, false);
  Var hb = bwd_.Forward(g, x, true);

  // Gaussian reconstruction + beta KL for rows [b, e) of the head input
  // against target rows [tb, tb + e - b).
  auto term = [&](const GaussianVar &q, const Var &sample, const Mlp &dec, int64_t b, int64_t e,
                  int64_t tb) {
    const double inv = 1.0 / static_cast<double>(e - b);
    GaussianVar qs{SliceRows(q.mu, b, e), SliceRows(q.logvar, b, e)};
    Var recon = SquaredError(dec.Forward(g, SliceRows(sample, b, e), mode), SliceRows(x, tb, tb + e - b));
    return Add(Scale(recon, 0.5 * inv), Scale(Sum(KlToStandard(qs)), cfg_.beta * inv));
  };

  Parts out;
  std::vector<Var> feats;
  Var zsum;
  int zcount = 0;
  if (cfg_.d_f > 0) {
    GaussianVar q = fhead_.Forward(g, hf);
    Var f = SampleLatent(g, q, mode);
    out.predict = term(q, f, dec_next_, 0, T - 1, 1);
    feats.push_back(f);
  }
  if (cfg_.d_zf > 0) {
    GaussianVar q = zfhead_.Forward(g, hf);
    Var z = SampleLatent(g, q, mode);
    out.reconstruct = term(q, z, dec_zf_, 0, T, 0);
    zsum = z;
    ++zcount;
  }
  if (cfg_.d_zb > 0) {
    GaussianVar q = zbhead_.Forward(g, hb);
    Var z = SampleLatent(g, q, mode);
    Var t = term(q, z, dec_zb_, 0, T, 0);
    out.reconstruct = zcount ? Add(out.reconstruct, t) : t;
    zsum = zcount ? Add(zsum, z) : z;
    ++zcount;
  }
  if (zcount) feats.push_back(zcount == 2 ? Scale(zsum, 0.5) : zsum);
  if (cfg_.d_b > 0) {
    GaussianVar q = bhead_.Forward(g, hb);
    Var b = SampleLatent(g, q, mode);
    Var t = term(q, b, dec_prev_, 1, T, 0);
    out.predict = cfg_.d_f > 0 ? Add(out.predict, t) : t;
    feats.push_back(b);
  }
  if (predicts && zcount) out.loss = Add(out.predict, out.reconstruct);
  else out.loss = predicts ? out.predict : out.reconstruct;
  out.features = feats.size() == 1 ? feats[0] : ConcatCols(feats);
  return out;
}

Tensor FBModel::Features(const Tensor &frames) const {
  Graph g;
  g.set_accumulate_param_grads(false);
  return Forward(g, frames).features.value();
}

Var FBLoss(Graph &g, const FBModel &model, const Tensor &frames, const RunMode &mode) {
  return model.Forward(g, frames, mode).loss;
}

Var FBMultitaskLoss(Graph &g, const FBModel &model, const CtcRecognizer &rec, const Utterance &utt,
                    double alpha, const RunMode &mode) {
  CheckUnit(alpha, "alpha");
  FBModel::Parts p = model.Forward(g, utt.frames, mode);
  if (alpha == 1.0) return p.loss;
  Var ctc = rec.Loss(g, p.features, utt.transcript, mode);
  if (alpha == 0.0) return ctc;
  return Add(Scale(ctc, 1.0 - alpha), Scale(p.loss, alpha));
}

}  // namespace seqrep
