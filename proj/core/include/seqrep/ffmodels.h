// seqrep/ffmodels.h

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

#ifndef SEQREP_FFMODELS_H_
#define SEQREP_FFMODELS_H_

// Feedforward windowed representation learners.  A datum is one window of
// W stacked frames (a row of WindowStack); the default reconstruction
// target is the window itself.
//
// Per-row losses, averaged over the rows of a batch:
//   AE, DAE, dropout variants   ||x - F(mu~)||^2 / 2
//   NAE(beta)                   ||x - F(mu + delta*sigma)||^2 / 2 + beta ||mu||^2 / 2
//   VAE(beta)                   ||x - F(mu + delta*sigma)||^2 / 2 + beta KL(q || N(0, I))
// where mu~ is mu computed from a corrupted input (DAE), mu after dropout
// (bottleneck variants) or mu with dropout after every hidden activation
// (layerwise).  Bernoulli dropout with rate p zeroes an entry with
// probability p and rescales survivors by 1 / (1 - p), so its multiplier has
// variance p / (1 - p), matching Gaussian dropout with gamma^2 = p / (1 - p).

#include <cstdint>
#include <string>
#include <vector>

#include "seqrep/dataio.h"
#include "seqrep/nn.h"
#include "seqrep/recognizer.h"

namespace seqrep {

enum class FFVariant {
  kAE,
  kDaeBernoulli,
  kDaeGaussian,
  kNae,
  kVae,
  kDropoutBottleneckBernoulli,
  kDropoutBottleneckGaussian,
  kDropoutLayerwise,
};

std::string FFVariantName(FFVariant v);
FFVariant ParseFFVariant(const std::string &s);
/// Whether the variant has a variance head and samples its latent.
bool IsStochasticLatent(FFVariant v);

struct FFEncoderConfig {
  int64_t input_dim = 0;
  std::vector<int64_t> hidden = {1500, 1500, 1500};
  int64_t latent = 70;
  FFVariant variant = FFVariant::kVae;
  double p = 0.2;      // Bernoulli drop rate
  double gamma = 0.5;  // Gaussian dropout std-dev
  double beta = 1.0;
  Activation act = Activation::kRelu;
  /// Posterior samples averaged per datum (VAE/NAE).
  int32_t samples = 1;

  void Check() const;
};

struct FFLossOut {
  Var loss;   // 1 x 1, mean over rows
  Var recon;  // 1 x 1, mean over rows of ||x - F(.)||^2 / 2
  Var reg;    // 1 x 1, mean over rows of the unweighted regulariser (0 if none)
  GaussianVar q;
  Var z;      // latent fed to the decoder (first sample)
};

class FFModel {
 public:
  FFModel(ParamStore *store, const std::string &name, const FFEncoderConfig &cfg, Rng &rng);

  /// Posterior (logvar is zero for deterministic variants).  `x` must be
  /// the clean input; corruption is applied here in training mode.
  GaussianVar Encode(Graph &g, const Var &x, const RunMode &mode = {}) const;
  Var Decode(Graph &g, const Var &z, const RunMode &mode = {}) const;
  /// Loss for rows of x against rows of target.  In evaluation mode no
  /// corruption, dropout or sampling is applied.
  FFLossOut Loss(Graph &g, const Var &x, const Var &target, const RunMode &mode = {}) const;
  FFLossOut Loss(Graph &g, const Var &x, const RunMode &mode = {}) const { return Loss(g, x, x, mode); }

  const FFEncoderConfig &config() const { return cfg_; }
  const Mlp &encoder() const { return enc_; }
  const GaussianHead *head() const { return &head_; }
  const Linear &mu_layer() const { return mu_; }
  const Mlp &decoder() const { return dec_; }

 private:
  FFEncoderConfig cfg_;
  Mlp enc_;
  Linear mu_;
  GaussianHead head_;
  Mlp dec_;
};

/// ff_loss: builds and evaluates the loss for a batch of windows.
FFLossOut FFLoss(Graph &g, const FFModel &model, const Tensor &windows, const RunMode &mode = {});

/// Posterior means (no sampling) for every frame of every utterance, using
/// windows of width `window`.  One T x d matrix per utterance.
std::vector<Tensor> ExtractFeatures(const Dataset &data, const FFModel &model, int64_t window);
Tensor ExtractFeatures(const Tensor &frames, const FFModel &model, int64_t window);

/// Feedforward front end followed by a recurrent CTC recognizer that reads
/// the per-frame latents.
class FFMultitaskModel {
 public:
  FFMultitaskModel(ParamStore *store, const std::string &name, const FFEncoderConfig &ff,
                   const RecognizerConfig &rec, Rng &rng);
  /// (1 - alpha) * CTC(z) + alpha * (-ELBO), with the CTC term summed over the
  /// utterance and the ELBO term averaged over its frames.
  Var Loss(Graph &g, const Tensor &windows, const std::vector<int32_t> &transcript, double alpha,
           const RunMode &mode = {}) const;
  const FFModel &ff() const { return ff_; }
  const CtcRecognizer &recognizer() const { return rec_; }

 private:
  FFModel ff_;
  CtcRecognizer rec_;
};

Var FFMultitaskLoss(Graph &g, const FFMultitaskModel &model, const Tensor &windows,
                    const std::vector<int32_t> &transcript, double alpha, const RunMode &mode = {});

}  // namespace seqrep

#endif  // SEQREP_FFMODELS_H_
