// core/src/ffmodels.cc

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

#include "seqrep/ffmodels.h"

#include <algorithm>

#include "seqrep/error.h"
#include "seqrep/ops.h"

namespace seqrep {

std::string FFVariantName(FFVariant v) {
  switch (v) {
    case FFVariant::kAE: return "ae";
    case FFVariant::kDaeBernoulli: return "dae-bernoulli";
    case FFVariant::kDaeGaussian: return "dae-gaussian";
    case FFVariant::kNae: return "nae";
    case FFVariant::kVae: return "vae";
    case FFVariant::kDropoutBottleneckBernoulli: return "ae-dropout-bernoulli";
    case FFVariant::kDropoutBottleneckGaussian: return "ae-dropout-gaussian";
    case FFVariant::kDropoutLayerwise: return "ae-dropout-layerwise";
  }
  return "?";
}

FFVariant ParseFFVariant(const std::string &s) {
  for (FFVariant v : {FFVariant::kAE, FFVariant::kDaeBernoulli, FFVariant::kDaeGaussian,
                      FFVariant::kNae, FFVariant::kVae, FFVariant::kDropoutBottleneckBernoulli,
                      FFVariant::kDropoutBottleneckGaussian, FFVariant::kDropoutLayerwise})
    if (FFVariantName(v) == s) return v;
  if (s == "dae") return FFVariant::kDaeBernoulli;
  throw ConfigError("unknown feedforward model variant '" + s + "'");
}

bool IsStochasticLatent(FFVariant v) { return v == FFVariant::kVae || v == FFVariant::kNae; }

void FFEncoderConfig::Check() const {
  SEQREP_CHECK_CONFIG(input_dim >= 1, "feedforward input dimension must be >= 1");
  SEQREP_CHECK_CONFIG(latent >= 1, "latent dimension must be >= 1");
  for (int64_t w : hidden) SEQREP_CHECK_CONFIG(w >= 1, "hidden widths must be >= 1");
  SEQREP_CHECK_CONFIG(p > 0.0 && p < 1.0, "dropout rate p must be in (0, 1)");
  SEQREP_CHECK_CONFIG(gamma > 0.0, "gaussian noise gamma must be > 0");
  SEQREP_CHECK_CONFIG(beta >= 0.0, "beta must be >= 0");
  SEQREP_CHECK_CONFIG(samples >= 1, "posterior sample count must be >= 1");
}

FFModel::FFModel(ParamStore *store, const std::string &name, const FFEncoderConfig &cfg, Rng &rng)
    : cfg_(cfg) {
  cfg.Check();
  const double layer_dropout = cfg.variant == FFVariant::kDropoutLayerwise ? cfg.p : 0.0;
  enc_ = Mlp(store, name + ".enc", cfg.input_dim, cfg.hidden, cfg.act, rng, true, layer_dropout);
  const int64_t h = enc_.out();
  if (IsStochasticLatent(cfg.variant))
    head_ = GaussianHead(store, name + ".head", h, cfg.latent, rng);
  else
    mu_ = Linear(store, name + ".head.mu", h, cfg.latent, rng);
  std::vector<int64_t> widths(cfg.hidden.rbegin(), cfg.hidden.rend());
  widths.push_back(cfg.input_dim);
  dec_ = Mlp(store, name + ".dec", cfg.latent, widths, cfg.act, rng, false, layer_dropout);
}

GaussianVar FFModel::Encode(Graph &g, const Var &x, const RunMode &mode) const {
  Var in = x;
  const bool noisy = mode.train && mode.rng != nullptr;
  if (noisy && cfg_.variant == FFVariant::kDaeBernoulli) in = Dropout(x, cfg_.p, *mode.rng);
  if (noisy && cfg_.variant == FFVariant::kDaeGaussian) in = GaussianDropout(x, cfg_.gamma, *mode.rng);
  Var h = enc_.Forward(g, in, mode);
  if (IsStochasticLatent(cfg_.variant)) return head_.Forward(g, h);
  Var mu = mu_.Forward(g, h);
  return {mu, g.Constant(Tensor(mu.rows(), mu.cols()), "zero_logvar")};
}

Var FFModel::Decode(Graph &g, const Var &z, const RunMode &mode) const {
  return dec_.Forward(g, z, mode);
}

FFLossOut FFModel::Loss(Graph &g, const Var &x, const Var &target, const RunMode &mode) const {
  SEQREP_CHECK_SHAPE(x.cols() == cfg_.input_dim,
                     "window dimension " + std::to_string(x.cols()) + " does not match encoder input " +
                         std::to_string(cfg_.input_dim));
  SEQREP_CHECK_SHAPE(target.rows() == x.rows() && target.cols() == cfg_.input_dim,
                     "reconstruction target shape mismatch");
  FFLossOut out;
  out.q = Encode(g, x, mode);
  const double n = static_cast<double>(x.rows());
  const bool noisy = mode.train && mode.rng != nullptr;

  auto recon_of = [&](const Var &z) { return Scale(SquaredError(Decode(g, z, mode), target), 0.5 / n); };

  if (IsStochasticLatent(cfg_.variant)) {
    Var recon;
    for (int32_t s = 0; s < cfg_.samples; ++s) {
      Var z = out.q.mu;
      if (noisy) z = ReparamSample(out.q, NoiseLike(g, x.rows(), cfg_.latent, *mode.rng));
      if (s == 0) out.z = z;
      Var r = recon_of(z);
      recon = s == 0 ? r : Add(recon, r);
    }
    out.recon = cfg_.samples > 1 ? Scale(recon, 1.0 / cfg_.samples) : recon;
    if (cfg_.variant == FFVariant::kVae)
      out.reg = Scale(Sum(KlToStandard(out.q)), 1.0 / n);
    else
      out.reg = Scale(Sum(Square(out.q.mu)), 0.5 / n);
    out.loss = Add(out.recon, Scale(out.reg, cfg_.beta));
    return out;
  }

  Var z = out.q.mu;
  if (noisy && cfg_.variant == FFVariant::kDropoutBottleneckBernoulli) z = Dropout(z, cfg_.p, *mode.rng);
  if (noisy && cfg_.variant == FFVariant::kDropoutBottleneckGaussian)
    z = GaussianDropout(z, cfg_.gamma, *mode.rng);
  out.z = z;
  out.recon = recon_of(z);
  out.reg = g.Constant(Tensor::Scalar(0.0), "zero");
  out.loss = out.recon;
  return out;
}

FFLossOut FFLoss(Graph &g, const FFModel &model, const Tensor &windows, const RunMode &mode) {
  Var x = g.Constant(windows, "windows");
  return model.Loss(g, x, x, mode);
}

Tensor ExtractFeatures(const Tensor &frames, const FFModel &model, int64_t window) {
  Tensor w = WindowStack(frames, window);
  SEQREP_CHECK_SHAPE(w.cols() == model.config().input_dim,
                     "window of " + std::to_string(window) + " frames gives " +
                         std::to_string(w.cols()) + " inputs, encoder expects " +
                         std::to_string(model.config().input_dim));
  Graph g;
  g.set_accumulate_param_grads(false);
  return model.Encode(g, g.Constant(std::move(w)), RunMode{}).mu.value();
}

std::vector<Tensor> ExtractFeatures(const Dataset &data, const FFModel &model, int64_t window) {
  std::vector<Tensor> out;
  out.reserve(data.size());
  for (const auto &u : data) out.push_back(ExtractFeatures(u.frames, model, window));
  return out;
}

FFMultitaskModel::FFMultitaskModel(ParamStore *store, const std::string &name,
                                   const FFEncoderConfig &ff, const RecognizerConfig &rec, Rng &rng)
    : ff_(store, name + ".ff", ff, rng),
      rec_(store, name + ".rec",
           [&] {
             RecognizerConfig r = rec;
             r.input_dim = ff.latent;
             return r;
           }(),
           rng) {}

Var FFMultitaskModel::Loss(Graph &g, const Tensor &windows, const std::vector<int32_t> &transcript,
                           double alpha, const RunMode &mode) const {
  SEQREP_CHECK_CONFIG(alpha >= 0.0 && alpha <= 1.0, "multitask weight alpha must be in [0, 1]");
  Var x = g.Constant(windows, "windows");
  FFLossOut ff = ff_.Loss(g, x, x, mode);
  Var ctc = rec_.Loss(g, ff.z, transcript, mode);
  if (alpha == 0.0) return ctc;
  if (alpha == 1.0) return ff.loss;
  return Add(Scale(ctc, 1.0 - alpha), Scale(ff.loss, alpha));
}

Var FFMultitaskLoss(Graph &g, const FFMultitaskModel &model, const Tensor &windows,
                    const std::vector<int32_t> &transcript, double alpha, const RunMode &mode) {
  return model.Loss(g, windows, transcript, alpha, mode);
}

}  // namespace seqrep
