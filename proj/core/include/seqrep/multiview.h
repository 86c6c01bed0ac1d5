// seqrep/multiview.h

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

#ifndef SEQREP_MULTIVIEW_H_
#define SEQREP_MULTIVIEW_H_

// Two-view variational models (VCCA and VCCA-private), sample-specific
// priors, cross-domain objectives, and label embedding with similarity
// losses.  All losses are averaged over the rows of a batch; every
// reconstruction term is ||target - decoder(.)||^2 / 2.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqrep/distributions.h"
#include "seqrep/ffmodels.h"
#include "seqrep/nn.h"
#include "seqrep/recognizer.h"

namespace seqrep {

using PriorKey = std::pair<std::string, int64_t>;

struct PairedBatch {
  Tensor x;  // n x Dx windows of view 1
  Tensor y;  // n x Dy windows of view 2
  std::vector<PriorKey> keys;  // (utterance id, frame) per row; may be empty

  void Check() const;
};

/// MLP body followed by a diagonal Gaussian head.
class MlpGaussianEncoder {
 public:
  MlpGaussianEncoder() = default;
  MlpGaussianEncoder(ParamStore *store, const std::string &name, int64_t in,
                     const std::vector<int64_t> &hidden, int64_t dim, Activation act, Rng &rng);
  GaussianVar Forward(Graph &g, const Var &x, const RunMode &mode = {}) const;
  int64_t dim() const { return head_.dim(); }
  const Mlp &body() const { return body_; }

 private:
  Mlp body_;
  GaussianHead head_;
};

struct VccapConfig {
  int64_t x_dim = 0;
  int64_t y_dim = 0;
  std::vector<int64_t> hidden = {256, 256};
  std::vector<int64_t> private_hidden = {64};
  int64_t latent = 30;
  int64_t private_x = 0;  // d_h1; 0 disables the private variable of view 1
  int64_t private_y = 0;  // d_h2
  double beta = 1.0;
  Activation act = Activation::kRelu;
  /// Number of leading shared-encoder layers that stay domain specific when
  /// a target domain partially shares this network.
  int64_t split = 0;

  void Check() const;
};

/// z ~ q(z|x), h1 ~ q(h1|x), h2 ~ q(h2|y); x ~ p(x|z,h1), y ~ p(y|z,h2).
/// With both private sizes zero this is VCCA.
class VccapModel {
 public:
  VccapModel(ParamStore *store, const std::string &name, const VccapConfig &cfg, Rng &rng);

  /// Lower (domain-specific) part of the shared encoder.
  Var EncodeLower(Graph &g, const Var &x, const RunMode &mode = {}) const;
  /// Upper shared layers and the z head, applied to EncodeLower output.
  GaussianVar EncodeUpper(Graph &g, const Var &h, const RunMode &mode = {}) const;
  GaussianVar EncodeZ(Graph &g, const Var &x, const RunMode &mode = {}) const;
  GaussianVar EncodeH1(Graph &g, const Var &x, const RunMode &mode = {}) const;
  GaussianVar EncodeH2(Graph &g, const Var &y, const RunMode &mode = {}) const;
  /// `h` is ignored when the corresponding private size is zero.
  Var DecodeX(Graph &g, const Var &z, const Var *h1, const RunMode &mode = {}) const;
  Var DecodeY(Graph &g, const Var &z, const Var *h2, const RunMode &mode = {}) const;

  const VccapConfig &config() const { return cfg_; }
  int64_t lower_out() const { return lower_.out(); }
  /// Width of one concatenated [z | h1 | h2] posterior row.
  int64_t posterior_dim() const { return cfg_.latent + cfg_.private_x + cfg_.private_y; }

 private:
  VccapConfig cfg_;
  Mlp lower_, upper_;
  GaussianHead zhead_;
  MlpGaussianEncoder h1_, h2_;
  Mlp decx_, decy_;
};

struct VccapLossOut {
  Var loss;
  Var recon_x, recon_y;  // row means
  Var kl;                // row mean of the summed (unweighted) KL terms
  GaussianVar qz, qh1, qh2;
};

/// VCCA: requires zero private sizes.
Var VccaLoss(Graph &g, const VccapModel &model, const PairedBatch &batch, const RunMode &mode = {});
VccapLossOut VccapLoss(Graph &g, const VccapModel &model, const PairedBatch &batch,
                       const RunMode &mode = {});

/// Same objectives with every KL against a stored posterior.  The store holds
/// one [z | h1 | h2] (respectively z) row per (id, frame); stored values are
/// constants.  A missing key throws.
VccapLossOut PriorUpdatedLoss(Graph &g, const VccapModel &model, const PairedBatch &batch,
                              const PriorStore &store, double beta, const RunMode &mode = {});
FFLossOut PriorUpdatedLoss(Graph &g, const FFModel &model, const Tensor &windows,
                           const std::vector<PriorKey> &keys, const PriorStore &store, double beta,
                           const RunMode &mode = {});

/// Evaluation-mode posteriors, one row per batch row, for writing a store.
DiagGaussian VccapPosteriors(const VccapModel &model, const PairedBatch &batch);
DiagGaussian FFPosteriors(const FFModel &model, const Tensor &windows);

struct CrossDomainConfig {
  VccapConfig source;
  int64_t target_dim = 0;
  /// Size of the target private variable h^T (0 gives model B).
  int64_t target_private = 0;
  std::vector<int64_t> target_private_hidden = {64};
  /// Give the target its own copy of the first `source.split` encoder layers.
  bool partial = false;

  void Check() const;
};

/// Source VCCAP network plus a target-domain VAE(P) sharing its encoder.
/// Parameters: "<name>.src.*" (shared), "<name>.tgt.*" (target only).
class CrossDomainModel {
 public:
  CrossDomainModel(ParamStore *store, const std::string &name, const CrossDomainConfig &cfg,
                   Rng &rng);
  GaussianVar EncodeTarget(Graph &g, const Var &x, const RunMode &mode = {}) const;
  GaussianVar EncodeTargetPrivate(Graph &g, const Var &x, const RunMode &mode = {}) const;
  Var DecodeTarget(Graph &g, const Var &z, const Var *h, const RunMode &mode = {}) const;
  const VccapModel &source() const { return src_; }
  const CrossDomainConfig &config() const { return cfg_; }

 private:
  CrossDomainConfig cfg_;
  VccapModel src_;
  Mlp tgt_lower_;
  MlpGaussianEncoder tgt_h_;
  Mlp tgt_dec_;
};

/// -ELBO of the target VAE(P): recon from (z, h^T) + beta (KL_z + KL_h).
Var VaepLoss(Graph &g, const CrossDomainModel &model, const Tensor &x, const RunMode &mode = {});
/// (1 - beta_mix) VCCAP(src) + beta_mix VAEP(tgt); either subset empty throws.
Var CrossDomainLoss(Graph &g, const CrossDomainModel &model, const PairedBatch &src,
                    const Tensor &tgt, double beta_mix, const RunMode &mode = {});
/// alpha {(1 - beta_mix) VCCAP + beta_mix VAEP} + (1 - alpha) CTC on the
/// target posterior means of one utterance's windows.
Var CrossDomainMultitaskLoss(Graph &g, const CrossDomainModel &model, const CtcRecognizer &rec,
                             const PairedBatch &src, const Tensor &tgt_windows,
                             const std::vector<int32_t> &transcript, double alpha, double beta_mix,
                             const RunMode &mode = {});

/// Two CTC recognizers with private lower recurrent layers and one shared
/// top recurrent layer ("<name>.top").  Domain 0 is the source.
class SharedTopRecognizers {
 public:
  SharedTopRecognizers(ParamStore *store, const std::string &name, int64_t src_dim,
                       int64_t tgt_dim, int64_t vocab, const RecurrentStackConfig &lower,
                       int64_t top_hidden, Rng &rng);
  Var Lattice(Graph &g, int domain, const Var &x, const RunMode &mode = {}) const;
  Var Loss(Graph &g, int domain, const Var &x, const std::vector<int32_t> &transcript,
           const RunMode &mode = {}) const;

 private:
  RecurrentStack lower_[2];
  RecurrentStack top_;
  Linear out_[2];
};

enum class SimilarityKind { kL2, kCosine, kContrastive, kCca };
std::string SimilarityKindName(SimilarityKind k);
SimilarityKind ParseSimilarityKind(const std::string &s);

struct SimilarityLossConfig {
  SimilarityKind kind = SimilarityKind::kL2;
  double margin = 0.5;
  double rx = 1e-3;
  double ry = 1e-3;
  /// Weight of the squared-Frobenius residual of the whitening constraints.
  double lambda = 0.0;
  int32_t n_negatives = 1;

  void Check() const;
};

/// Row-wise cosine similarity, n x 1.
Var CosineRows(const Var &a, const Var &b);
/// Sum of canonical correlations of the rows of a and b: the trace norm of
/// S11^{-1/2} S12 S22^{-1/2} with S = centred covariance / n plus ridge.
Var CcaCorrelation(const Var &a, const Var &b, double rx, double ry);

/// L2: mean ||a - b||^2.  Cosine: -mean cos(a, b).  Contrastive:
/// mean max(cos(a, b') - cos(a, b) + m, 0), averaged over the negatives
/// (rows of b permuted with `rng` when `negatives` is null).  CCA: minus
/// the total correlation plus the optional constraint penalty.
Var SimilarityLoss(const Var &a, const Var &b, const SimilarityLossConfig &cfg,
                   const std::vector<Var> *negatives = nullptr, Rng *rng = nullptr);

struct LabelWindows {
  Tensor onehot;                // n x (W * L)
  std::vector<int64_t> targets; // n * W label ids, row-major over (row, position)
  int64_t window = 0;
  int64_t labels = 0;
};
/// Windows of one-hot labels centred on every frame, clamped at the edges.
LabelWindows MakeLabelWindows(const std::vector<int32_t> &labels, int64_t vocab, int64_t window);

struct LabelEmbeddingConfig {
  int64_t frame_dim = 0;
  int64_t labels = 0;
  int64_t window = 15;
  std::vector<int64_t> hidden = {256, 256};
  int64_t latent = 32;
  double beta = 1.0;  // applied to both branches
  double alpha1 = 0.5;
  double alpha2 = 0.25;
  Activation act = Activation::kRelu;
  SimilarityLossConfig sim;

  void Check() const;
};

/// Acoustic and label encoders sharing one decoder that outputs W per-frame
/// label distributions.
class LabelEmbeddingModel {
 public:
  LabelEmbeddingModel(ParamStore *store, const std::string &name, const LabelEmbeddingConfig &cfg,
                      Rng &rng);
  GaussianVar EncodeAcoustic(Graph &g, const Var &x, const RunMode &mode = {}) const;
  GaussianVar EncodeLabels(Graph &g, const Var &onehot, const RunMode &mode = {}) const;
  /// (n * W) x L log-probabilities.
  Var DecodeLogProbs(Graph &g, const Var &z, const RunMode &mode = {}) const;
  /// Evaluation-mode n x (W * L) probabilities from acoustic windows.
  Tensor PredictProbs(const Tensor &windows) const;
  const LabelEmbeddingConfig &config() const { return cfg_; }

 private:
  LabelEmbeddingConfig cfg_;
  MlpGaussianEncoder ac_, lab_;
  Mlp dec_;
};

struct LabelEmbeddingLossOut {
  Var loss;
  Var acoustic, similarity, label;
};

/// alpha1 L_acoustic + alpha2 L_similarity(mu, mu^) + (1 - alpha1 - alpha2) L_label.
/// Contrastive negatives are label windows with their frames permuted.
LabelEmbeddingLossOut LabelEmbeddingLoss(Graph &g, const LabelEmbeddingModel &model,
                                         const Tensor &windows, const LabelWindows &labels,
                                         const RunMode &mode = {});

struct GeometricMeanResult {
  std::vector<int32_t> labels;
  Tensor log_mean;      // T x L
  int64_t floored = 0;  // probabilities raised to the floor
};
/// probs: T x (W * L), row t holding the W per-position distributions
/// predicted from the window centred on frame t.  Frame t combines the
/// predictions of every window covering it by a geometric mean.
GeometricMeanResult GeometricMeanPredict(const Tensor &probs, int64_t window, int64_t labels);

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
/// KL(q || uniform mixture of neighbours) by sampling from q (single rows).
MonteCarloEstimate WindowMixturePriorKl(const DiagGaussian &q,
                                        const std::vector<DiagGaussian> &neighbours,
                                        int64_t samples, Rng &rng);

}  // namespace seqrep

#endif  // SEQREP_MULTIVIEW_H_
