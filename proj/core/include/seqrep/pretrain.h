// seqrep/pretrain.h

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

#ifndef SEQREP_PRETRAIN_H_
#define SEQREP_PRETRAIN_H_

// Objectives that predict unseen content: contrastive predictive coding,
// masked reconstruction and its contrastive and multi-view variants, plus
// the helpers that move a pretrained encoder into a recognizer.

#include <cstdint>
#include <string>
#include <vector>

#include "seqrep/dataio.h"
#include "seqrep/nn.h"
#include "seqrep/recognizer.h"

namespace seqrep {

/// Mean over rows of -log(exp(s+) / (exp(s+) + sum_j exp(s-_j))).
/// `pos` is n x 1 and `neg` n x N.
Var InfoNce(const Var &pos, const Var &neg);
/// Row sum instead of the mean.
Var InfoNceSum(const Var &pos, const Var &neg);

/// A random permutation of 0..n-1 with no fixed points (n >= 2).  Fixed
/// points of a uniform permutation are swapped with their successor.
std::vector<int64_t> DerangedShuffle(int64_t n, Rng &rng);

// ---------------------------------------------------------------------------
// CPC

enum class NegativeMode { kWithinUtterance, kBatch };
std::string NegativeModeName(NegativeMode m);
NegativeMode ParseNegativeMode(const std::string &s);

struct CpcConfig {
  int64_t input_dim = 0;
  int64_t K = 3;
  int64_t N = 8;
  std::vector<int64_t> latent_hidden = {32};
  int64_t latent_dim = 16;
  Activation act = Activation::kRelu;
  /// Causal context network; must be unidirectional.
  RecurrentStackConfig context = {1, 32, false, {}, 0.0};
  NegativeMode negatives = NegativeMode::kWithinUtterance;

  void Check() const;
};

class CpcModel {
 public:
  CpcModel(ParamStore *store, const std::string &name, const CpcConfig &cfg, Rng &rng);

  /// z_t = DNN(x_t), T x latent_dim.
  Var Latents(Graph &g, const Var &x, const RunMode &mode = {}) const;
  /// c_t from z_1..z_t.
  Var Context(Graph &g, const Var &z, const RunMode &mode = {}) const;
  /// W_k c_t for every row of c (k in 1..K).
  Var Predict(Graph &g, const Var &c, int64_t k) const;
  /// Context vectors of a sequence (evaluation mode).
  Tensor Features(const Tensor &frames) const;
  const CpcConfig &config() const { return cfg_; }

 private:
  CpcConfig cfg_;
  Mlp latent_;
  RecurrentStack context_;
  std::vector<Linear> w_;
};

/// InfoNCE averaged over every (t, k) with t + k < T.  Negatives for (t, k)
/// are N latents drawn uniformly from the utterance excluding t + k, or, in
/// batch mode, from the utterance and `others` together.
Var CpcLoss(Graph &g, const CpcModel &model, const Tensor &frames, Rng &rng,
            const RunMode &mode = {}, const std::vector<const Tensor *> &others = {});

// ---------------------------------------------------------------------------
// Masked pretraining

enum class MaskedObjective {
  kBert,
  kBertHalf,
  kBicpc,
  kBicpcHalf,
  kMvMae,
  kMvContrast,
  kCrossviewBert
};
std::string MaskedObjectiveName(MaskedObjective o);
MaskedObjective ParseMaskedObjective(const std::string &s);

struct MaskedPretrainConfig {
  int64_t input_dim = 0;
  MaskSpec mask = {2, 4, 1, 3, 0};
  MaskedObjective objective = MaskedObjective::kBert;
  double alpha = 0.5;
  int64_t n_negatives = 4;
  /// Identity-initialised input transform ahead of the encoder.
  bool lin = false;
  /// Context encoder; must be bidirectional without pyramid layers.
  RecurrentStackConfig encoder = {2, 32, true, {}, 0.0};
  std::vector<int64_t> decoder_hidden = {32};
  Activation act = Activation::kRelu;
  /// Hidden widths of the BiCPC latent network.
  std::vector<int64_t> latent_hidden = {32};
  /// Sequences are repeated this many times per epoch for more mask draws.
  int32_t epoch_multiplier = 1;

  void Check() const;
  bool multiview() const;
};

class MaskedModel {
 public:
  MaskedModel(ParamStore *store, const std::string &name, const MaskedPretrainConfig &cfg, Rng &rng);

  /// C = encoder(LIN(x)).
  Var Context(Graph &g, const Var &x, const RunMode &mode = {}) const;
  /// g(C), T x D.
  Var Reconstruct(Graph &g, const Var &c, const RunMode &mode = {}) const;
  /// Latent network of the contrastive variants (T x context width).
  Var Latent(Graph &g, const Var &x, const RunMode &mode = {}) const;
  /// Context of the unmasked sequence (evaluation mode).
  Tensor Features(const Tensor &frames) const;
  const MaskedPretrainConfig &config() const { return cfg_; }

 private:
  MaskedPretrainConfig cfg_;
  Linear lin_;
  RecurrentStack enc_;
  Mlp dec_;
  Mlp zdnn_;
  RecurrentStack zrnn_;
};

/// ||W * (X - g(f(M * X)))||_F^2 with W = 1 - M (full) or the central
/// indicator (half).
Var MaskedReconLoss(Graph &g, const MaskedModel &model, const Tensor &frames, const MaskPair &m,
                    bool half, const RunMode &mode = {});

struct BicpcOut {
  Var loss;
  /// Set when nothing was masked, so every positive is DNN(0).
  bool degenerate = false;
};
/// sum_t InfoNCE(c_t . z+_t, {c_t . z(i)_t}) with z+ = DNN(X * (1 - M)) (or
/// the central region for the half variant) and z(i) from N shuffled copies.
BicpcOut BicpcLoss(Graph &g, const MaskedModel &model, const Tensor &frames, const MaskPair &m,
                   bool half, Rng &rng, const RunMode &mode = {});

/// Multi-view objective for the model's objective: alpha (L1 + L2) +
/// (1 - alpha) consistency.
Var MultiviewMaskedLoss(Graph &g, const MaskedModel &model, const Tensor &frames,
                        const MaskPair &m1, const MaskPair &m2, Rng &rng,
                        const RunMode &mode = {});

/// Draws the mask(s) from `rng` and evaluates the configured objective.
Var MaskedPretrainLoss(Graph &g, const MaskedModel &model, const Tensor &frames, Rng &rng,
                       const RunMode &mode = {});

// ---------------------------------------------------------------------------
// Transfer

/// Copies every checkpoint tensor named `src_prefix` + suffix into the
/// parameter `dst_prefix` + suffix.  Source tensors without a destination
/// and shape mismatches are errors listing the names.  Returns the names of
/// parameters under `dst_prefix` that were not initialised.
std::vector<std::string> FinetuneInit(ParamStore *dst, const std::string &dst_prefix,
                                      const std::vector<CheckpointTensor> &src,
                                      const std::string &src_prefix);

}  // namespace seqrep

#endif  // SEQREP_PRETRAIN_H_
