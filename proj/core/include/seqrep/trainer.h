// seqrep/trainer.h

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

#ifndef SEQREP_TRAINER_H_
#define SEQREP_TRAINER_H_

// Minibatch training loop with Adam, global-norm clipping, step learning-rate
// decay, early stopping on a dev metric, and a prior-update hook; plus the
// evaluation helpers shared by the command-line tool and the tests.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "seqrep/dataio.h"
#include "seqrep/nn.h"
#include "seqrep/optim.h"
#include "seqrep/recognizer.h"
#include "seqrep/recrep.h"

namespace seqrep {

struct TrainConfig {
  AdamConfig adam;
  int64_t batch_size = 8;
  int32_t max_epochs = 10;
  /// Stop after this many epochs without a dev improvement.
  int32_t patience = 5;
  uint64_t seed = 0;
  /// lr is multiplied by decay_factor at the start of every epoch >=
  /// decay_start (0 disables decay).
  double decay_factor = 1.0;
  int32_t decay_start = 0;
  /// Dropout rate handed to models built for this run.
  double dropout = 0.0;
  /// Global gradient-norm bound (0 disables clipping).
  double clip = 5.0;
  PriorUpdateSchedule prior_update;
  /// Evaluate on dev every this many epochs (the last epoch always is).
  int32_t eval_every = 1;

  void Check() const;
};

struct MetricRecord {
  int32_t epoch = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
};

/// Append-only metric log.
class MetricLog {
 public:
  void Add(int32_t epoch, const std::string &split, const std::string &metric, double value);
  const std::vector<MetricRecord> &records() const { return records_; }
  /// Values of one (split, metric) series in epoch order.
  std::vector<double> Series(const std::string &split, const std::string &metric) const;
  /// "epoch,split,metric,value" with a header line; values use %.17g.
  std::string Csv() const;
  void WriteCsv(const std::string &path) const;

 private:
  std::vector<MetricRecord> records_;
};

struct TrainTask {
  ParamStore *params = nullptr;
  int64_t n_train = 0;
  /// Loss of training item i; the batch loss is the mean over its items.
  std::function<Var(Graph &, int64_t, const RunMode &)> loss;
  /// Dev metrics in evaluation mode; lower is better for `select_metric`.
  /// Without it, selection uses the mean training loss.
  std::function<std::map<std::string, double>()> evaluate;
  std::string select_metric = "loss";
  /// Called after an epoch for which the prior-update schedule fires.
  std::function<void(int32_t epoch)> prior_update;
  /// Called after each epoch with the epoch number and the log so far.
  std::function<void(int32_t epoch, const MetricLog &)> on_epoch;
};

struct TrainResult {
  int32_t epochs_run = 0;
  int32_t best_epoch = 0;
  double best_metric = 0.0;
  bool diverged = false;
  std::string divergence;
  std::vector<int32_t> prior_updates;
  MetricLog log;
};

/// Runs the loop.  On return the parameters hold the best-dev values (or the
/// last finite values when training diverged before any evaluation).
TrainResult Train(const TrainTask &task, const TrainConfig &cfg);

/// JSON summary of a run.
std::string TrainSummaryJson(const TrainResult &r, const TrainConfig &cfg);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> per_utterance;
};

/// Mean over utterances of an evaluation-mode loss.  Utterances are grouped
/// into graphs of `batch_size`; the result does not depend on it.
EvalResult EvaluateLoss(const Dataset &data, const std::function<Var(Graph &, const Utterance &)> &loss,
                        int64_t batch_size = 1);

/// Fraction of frames whose argmax matches the label.  `log_probs` returns
/// one row per label in `labels(u)`.
EvalResult EvaluateFramewise(const Dataset &data,
                             const std::function<Tensor(const Utterance &)> &log_probs,
                             const std::function<std::vector<int32_t>(const Utterance &)> &labels);

/// Total edit distance of greedy CTC decodes over total reference length.
EvalResult EvaluateErrorRate(const Dataset &data,
                             const std::function<Tensor(const Utterance &)> &lattice);

/// Mean CTC loss of a recognizer over `features(u)` in evaluation mode.
EvalResult EvaluateCtcLoss(const Dataset &data, const CtcRecognizer &rec,
                           const std::function<Tensor(const Utterance &)> &features);

}  // namespace seqrep

#endif  // SEQREP_TRAINER_H_
