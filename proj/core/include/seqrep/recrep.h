// seqrep/recrep.h

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

#ifndef SEQREP_RECREP_H_
#define SEQREP_RECREP_H_

// Recurrent variational representation models.  A (Bi)LSTM stack encodes a
// T x D sequence into h_1..h_T' (T' = T / R for a pyramid with reduction R)
// and a per-step Gaussian head gives q(z_t | h_t).  The ELBO is averaged over
// the T' latent steps:
//   ELBO = (1/T') sum_t { -||u_t - F(z_t)||^2 / 2 - beta KL(q(z_t|h_t) || p_t) }
// with p_t = N(0, I) or a stored posterior from an earlier epoch.

#include <cstdint>
#include <string>
#include <vector>

#include "seqrep/dataio.h"
#include "seqrep/distributions.h"
#include "seqrep/nn.h"
#include "seqrep/recognizer.h"

namespace seqrep {

enum class AuxMode { kNone, kFlat, kHierarchical };
std::string AuxModeName(AuxMode m);
AuxMode ParseAuxMode(const std::string &s);

enum class Supervision { kNone, kFramewise, kCtc };
std::string SupervisionName(Supervision s);
Supervision ParseSupervision(const std::string &s);

struct PriorUpdateSchedule {
  bool enabled = false;
  int32_t start_epoch = 3;
  int32_t frequency = 1;
  /// Update only after epochs that improved the held-out loss.
  bool save_best = false;

  void Check() const;
  /// Whether the store is rebuilt after finishing `epoch` (1-based).
  bool ShouldUpdate(int32_t epoch, bool improved) const;
};

struct RecRepConfig {
  int64_t input_dim = 0;
  /// Shared encoder; pyramid flags make this RecRep-Pyramid.
  RecurrentStackConfig encoder;
  int64_t latent = 16;
  AuxMode aux = AuxMode::kNone;
  int64_t aux_latent = 0;
  std::vector<int64_t> decoder_hidden = {64};
  Activation decoder_act = Activation::kRelu;
  /// Reconstruction target for the non-pyramidal model.
  ReconTargetSpec target;
  /// Frames per target for the pyramid (0: the R frames under each step).
  int64_t pyramid_window = 0;
  double beta = 1.0;
  double alpha = 0.5;
  double kappa = 1.0;
  Supervision supervision = Supervision::kNone;
  int64_t classes = 0;
  /// Private recognizer layers on top of the latents (CTC supervision).
  RecurrentStackConfig private_rnn = {1, 32, true, {}, 0.0};
  /// Hidden widths of the framewise classifier on the latents.
  std::vector<int64_t> classifier_hidden;
  /// Divide the supervised term by the number of latent steps.
  bool normalize_supervised = false;
  PriorUpdateSchedule prior_update;

  void Check() const;
  /// Frames per latent step.
  int64_t Reduction() const;
  bool pyramid() const { return Reduction() > 1; }
};

struct RecRepOut {
  Var loss;        // the objective being minimised
  Var neg_elbo;    // -ELBO (step average)
  Var recon;       // step average of ||u - F(.)||^2 / 2
  Var kl;          // step average of the unweighted KL terms
  Var supervised;  // supervised term (if computed)
  GaussianVar q;   // q(z_t | h_t), T' rows
  GaussianVar qr;  // auxiliary posterior (aux mode only)
  Var z_disc;      // latent fed to the supervised head
  int64_t steps = 0;
};

class RecRepModel {
 public:
  RecRepModel(ParamStore *store, const std::string &name, const RecRepConfig &cfg, Rng &rng);

  Var Encode(Graph &g, const Var &x, const RunMode &mode = {}) const;
  GaussianVar Posterior(Graph &g, const Var &h) const;
  /// Auxiliary posterior from h (flat) or [h | z] (hierarchical).
  GaussianVar AuxPosterior(Graph &g, const Var &h, const Var *z) const;
  Var Decode(Graph &g, const Var &latent, const RunMode &mode = {}) const;
  /// Targets u_1..u_T' for a T x D sequence.
  Tensor Targets(const Tensor &frames, Rng *rng = nullptr) const;
  /// Labels aligned with the latent steps (the last frame under each step).
  std::vector<int32_t> StepLabels(const std::vector<int32_t> &labels) const;
  /// Supervised loss on latent samples (framewise cross-entropy summed over
  /// steps, or CTC).  `labels` are framewise labels or a transcript.
  Var SupervisedLoss(Graph &g, const Var &z, const std::vector<int32_t> &labels,
                     const RunMode &mode = {}) const;
  /// Per-step log-probabilities of the supervised head (framewise or CTC lattice).
  Var HeadLogProbs(Graph &g, const Var &z, const RunMode &mode = {}) const;

  /// Evaluation-mode posteriors (one row per latent step).
  DiagGaussian Posteriors(const Tensor &frames) const;

  const RecRepConfig &config() const { return cfg_; }

 private:
  RecRepConfig cfg_;
  RecurrentStack enc_;
  GaussianHead zhead_, rhead_;
  Mlp dec_;
  FramewiseClassifier cls_;
  CtcRecognizer ctc_;
};

/// -ELBO (and its parts) of one sequence; `prior` replaces N(0, I) row-wise.
RecRepOut RecRepElbo(Graph &g, const RecRepModel &model, const Tensor &frames,
                     const RunMode &mode = {}, const DiagGaussian *prior = nullptr);
/// Same as RecRepElbo but requires a pyramidal encoder and T >= 2.
RecRepOut RecRepPyramidElbo(Graph &g, const RecRepModel &model, const Tensor &frames,
                            const RunMode &mode = {}, const DiagGaussian *prior = nullptr);
/// Same as RecRepElbo but requires an auxiliary latent.
RecRepOut AuxLatentElbo(Graph &g, const RecRepModel &model, const Tensor &frames,
                        const RunMode &mode = {}, const DiagGaussian *prior = nullptr);
/// (1 - alpha) supervised + alpha (-ELBO).  The discriminative path uses
/// mu + kappa * delta1 * sigma and the generative path mu + delta2 * sigma.
RecRepOut RecRepJointLoss(Graph &g, const RecRepModel &model, const Utterance &utt,
                          const RunMode &mode = {}, const DiagGaussian *prior = nullptr);

/// (1 - alpha) mean supervised loss over `labeled` + alpha mean -ELBO over
/// labeled and unlabeled sequences together.
Var SemiSupervisedLoss(Graph &g, const RecRepModel &model,
                       const std::vector<const Utterance *> &labeled,
                       const std::vector<const Utterance *> &unlabeled, double alpha,
                       const RunMode &mode = {}, const PriorStore *priors = nullptr);

/// Writes the current evaluation-mode posteriors of every sequence under
/// (utterance id, latent step).
PriorStore BuildSelfPriors(const RecRepModel &model, const Dataset &data, int64_t epoch_tag);
/// Prior rows for the latent steps of one utterance.
DiagGaussian LookupPriors(const PriorStore &store, const Utterance &utt, int64_t steps);

/// Average KL(q(z_t|h_t) || N(0, I)) per latent step over a dataset.
double AverageKlToStandard(const RecRepModel &model, const Dataset &data);

// ---------------------------------------------------------------------------
// Forward-backward model

struct FBConfig {
  int64_t input_dim = 0;
  int64_t hidden = 32;
  int64_t d_f = 8;   // forward prediction latent
  int64_t d_b = 8;   // backward prediction latent
  int64_t d_zf = 8;  // forward reconstruction latent
  int64_t d_zb = 8;  // backward reconstruction latent
  std::vector<int64_t> decoder_hidden = {32};
  Activation decoder_act = Activation::kRelu;
  double beta = 1.0;

  void Check() const;
  /// Width of [f ; (zf + zb) / 2 ; b].
  int64_t FeatureDim() const;
};

/// Forward LSTM h_t -> f_t (predicts x_{t+1}), z^f_t (reconstructs x_t);
/// backward LSTM g_t -> b_t (predicts x_{t-1}), z^b_t (reconstructs x_t).
class FBModel {
 public:
  FBModel(ParamStore *store, const std::string &name, const FBConfig &cfg, Rng &rng);

  struct Parts {
    Var loss;       // sum of the enabled terms
    Var predict;    // prediction terms (recon + beta KL, averaged per term)
    Var reconstruct;
    Var features;   // T x FeatureDim samples (means in evaluation mode)
  };
  Parts Forward(Graph &g, const Tensor &frames, const RunMode &mode = {}) const;
  Tensor Features(const Tensor &frames) const;
  const FBConfig &config() const { return cfg_; }

 private:
  FBConfig cfg_;
  Lstm fwd_, bwd_;
  GaussianHead fhead_, bhead_, zfhead_, zbhead_;
  Mlp dec_next_, dec_prev_, dec_zf_, dec_zb_;
};

Var FBLoss(Graph &g, const FBModel &model, const Tensor &frames, const RunMode &mode = {});

/// FB-MT: (1 - alpha) CTC(recognizer on FB features) + alpha FB loss.
Var FBMultitaskLoss(Graph &g, const FBModel &model, const CtcRecognizer &rec, const Utterance &utt,
                    double alpha, const RunMode &mode = {});

}  // namespace seqrep

#endif  // SEQREP_RECREP_H_
