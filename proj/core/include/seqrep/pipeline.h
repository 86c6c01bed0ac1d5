// seqrep/pipeline.h

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

#ifndef SEQREP_PIPELINE_H_
#define SEQREP_PIPELINE_H_

// End-to-end protocols behind the command-line tool: corpus generation and
// loading, pretraining of any supported model, and recognizer training on
// raw, frozen or fine-tuned representations.  Pretrained parameters live
// under "pre." and recognizer parameters under "rec." in one ParamStore.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "seqrep/dataio.h"
#include "seqrep/distributions.h"
#include "seqrep/nn.h"
#include "seqrep/runconfig.h"
#include "seqrep/trainer.h"

namespace seqrep {

struct Corpus {
  Dataset unlabeled;  // no labels
  Dataset labeled;
  Dataset dev;
  int32_t vocab = 0;

  int64_t dim() const;
  /// Unlabeled followed by labeled utterances (the pretraining pool).
  Dataset Pool() const;
};

/// Samples the three splits from one synthetic model.  Utterance ids are
/// "unl-*", "lab-*" and "dev-*".
Corpus GenerateCorpus(const DataOptions &opts);
/// Writes <dir>/corpus.json and one dataset directory per split.
void SaveCorpus(const std::string &dir, const Corpus &corpus);
Corpus LoadCorpus(const std::string &dir);
/// Standardises every split with the statistics of the unlabeled split.
void NormalizeCorpus(Corpus *corpus);

/// Generation plus optional normalisation, as configured.
Corpus PrepareCorpus(const RunConfig &cfg);
/// LoadCorpus plus optional normalisation, as configured.
Corpus PrepareCorpus(const RunConfig &cfg, const std::string &dir);

struct FinetuneSpec {
  RecurrentStackConfig rnn;
  /// Parameter prefix of the encoder stack in the pretraining store.
  std::string enc_prefix;
  /// Prefix of a LIN transform ahead of the encoder ("" if none).
  std::string lin_prefix;
};

/// Everything a training item needs besides the utterance.
struct LossContext {
  const PriorStore *priors = nullptr;
  /// Training pool, for negatives drawn across utterances.
  const Dataset *pool = nullptr;
};

/// Uniform wrapper around every pretraining model.
class PretrainModel {
 public:
  /// Builds the configured model under "pre." in `store`.
  static std::unique_ptr<PretrainModel> Create(const ModelOptions &opts, int64_t input_dim,
                                               int32_t vocab, double dropout, ParamStore *store,
                                               Rng &rng);
  virtual ~PretrainModel() = default;

  /// Objective of one utterance.  Evaluation mode uses posterior means and
  /// no corruption; masks and negatives still come from mode.rng.
  virtual Var Loss(Graph &g, const Utterance &u, const RunMode &mode,
                   const LossContext &ctx) const = 0;
  /// Evaluation-mode representation, one row per output step.
  virtual Tensor Features(const Tensor &frames) const = 0;
  /// Labels aligned with the rows of Features().
  virtual std::vector<int32_t> FeatureLabels(const std::vector<int32_t> &labels) const {
    return labels;
  }
  virtual int64_t feature_dim() const = 0;
  /// Only utterances with labels are usable.
  virtual bool needs_labels() const { return false; }
  virtual bool supports_priors() const { return false; }
  virtual PriorStore BuildPriors(const Dataset &data, int64_t epoch_tag) const;
  /// Dev metrics beyond the loss.
  virtual std::map<std::string, double> ExtraMetrics(const Dataset & /*dev*/) const { return {}; }
  /// Average KL(q || N(0, I)) per latent row.
  virtual double AverageKl(const Dataset &data) const;
  virtual std::optional<FinetuneSpec> finetune() const { return std::nullopt; }
  /// Metric used for model selection.
  virtual std::string select_metric() const { return "loss"; }
  const std::string &type() const { return type_; }

 protected:
  explicit PretrainModel(std::string type) : type_(std::move(type)) {}

 private:
  std::string type_;
};

struct PretrainOutcome {
  TrainResult result;
  /// Store from the last prior update, if any.
  std::optional<PriorStore> priors;
};

/// Trains `model` on the pool of `corpus` with cfg.pretrain.
PretrainOutcome RunPretrain(const RunConfig &cfg, const Corpus &corpus, PretrainModel &model,
                            ParamStore *store);

/// Dev metrics of a pretraining model: "loss", any model-specific extras,
/// and "kl" (mean per-frame KL to the standard normal) for models that
/// support prior updating.
std::map<std::string, double> PretrainDevMetrics(const RunConfig &cfg, const PretrainModel &model,
                                                 const Dataset &dev);

/// Recognizer over raw frames, frozen features or a fine-tuned encoder.
class RecognizerModel {
 public:
  /// `pre` may be null for features = raw.  For finetune the recognizer stack
  /// takes the encoder's shape; call InitFromPretrained afterwards.
  RecognizerModel(const RunConfig &cfg, int64_t input_dim, int32_t vocab,
                  const PretrainModel *pre, ParamStore *store, Rng &rng);
  ~RecognizerModel();

  /// Copies the pretrained encoder ("pre.*" tensors of `store`) into the
  /// recognizer.  Returns the recognizer parameters left at random init.
  std::vector<std::string> InitFromPretrained(ParamStore *store) const;

  /// Recognizer inputs for a split: frames or frozen features, with labels
  /// aligned to the output rows.
  Dataset Inputs(const Dataset &data) const;
  Var Loss(Graph &g, const Utterance &input, const RunMode &mode) const;
  /// Evaluation-mode log-probabilities (lattice for CTC).
  Tensor LogProbs(const Utterance &input) const;
  /// "loss", plus "per" (ctc) or "framewise_acc" (framewise).
  std::map<std::string, double> DevMetrics(const Dataset &inputs, int64_t batch_size) const;
  EvalResult Evaluate(const Dataset &inputs, const std::string &metric, int64_t batch_size) const;
  bool ctc() const { return ctc_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  bool ctc_ = true;
};

/// Trains the recognizer on the labeled split, selecting on the dev loss.
TrainResult RunRecognizerTraining(const RunConfig &cfg, const Corpus &corpus,
                                  const RecognizerModel &rec, ParamStore *store);

/// Checkpoint plus "<path>.ini" holding the run configuration.
void SaveCheckpoint(const std::string &path, const ParamStore &store, const RunConfig &cfg);
RunConfig LoadCheckpointConfig(const std::string &path);
/// True if the checkpoint holds recognizer parameters.
bool IsRecognizerCheckpoint(const std::string &path);

}  // namespace seqrep

#endif  // SEQREP_PIPELINE_H_
