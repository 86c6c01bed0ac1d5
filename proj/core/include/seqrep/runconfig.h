// seqrep/runconfig.h

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

#ifndef SEQREP_RUNCONFIG_H_
#define SEQREP_RUNCONFIG_H_

// Run configuration of the command-line tool: an INI file with the
// sections [data], [model], [pretrain], [train] and [eval].  Every key maps
// to one field below; unknown sections or keys are errors.  Print() emits
// every key with its current value and re-parses to an equal RunConfig.

#include <cstdint>
#include <string>
#include <vector>

#include "seqrep/dataio.h"
#include "seqrep/trainer.h"

namespace seqrep {

struct DataOptions {
  SyntheticConfig synth;  // n_utterances is the unlabeled pool
  int32_t n_labeled = 50;
  int32_t n_dev = 50;
  uint64_t seed = 1;
  /// Global mean/variance normalisation with statistics of the unlabeled pool.
  bool normalize = true;
};

struct ModelOptions {
  /// ae|dae|nae|vae|vcca|vccap|recrep|recrep-pyramid|fb|cpc|bert|bert-half|
  /// bicpc|mv-mae|mv-contrast|crossview-bert|label-embed
  std::string type = "vae";
  std::string act = "relu";
  // Feedforward models.
  int64_t window = 7;
  std::vector<int64_t> hidden = {64, 64};
  int64_t latent = 16;
  double beta = 1.0;
  std::string corruption = "bernoulli";  // dae: bernoulli|gaussian
  double p = 0.2;
  double gamma = 0.5;
  int32_t samples = 1;
  std::vector<int64_t> decoder_hidden = {64};
  // Multi-view models (view 1 / view 2 are the two halves of the feature vector).
  int64_t private_x = 0;
  int64_t private_y = 0;
  std::vector<int64_t> private_hidden = {16};
  // Recurrent encoders.
  int64_t rnn_layers = 2;
  int64_t rnn_hidden = 32;
  bool bidirectional = true;
  std::string aux = "none";
  int64_t aux_latent = 0;
  int64_t pyramid_window = 0;
  std::string supervision = "none";
  double alpha = 0.5;
  double kappa = 1.0;
  bool normalize_supervised = true;
  std::vector<int64_t> classifier_hidden;
  // Forward-backward model.
  int64_t d_f = 8, d_b = 8, d_zf = 8, d_zb = 8;
  // CPC.
  int64_t cpc_k = 3;
  int64_t cpc_n = 8;
  std::string negatives = "within";
  // Masked objectives.
  int32_t n_time_masks = 2;
  int32_t max_time_width = 6;
  int32_t n_channel_masks = 1;
  int32_t max_channel_width = 4;
  double mask_alpha = 0.5;
  int64_t n_negatives = 4;
  bool lin = false;
  int32_t epoch_multiplier = 1;
  // Label embedding.
  double alpha1 = 0.5;
  double alpha2 = 0.25;
  std::string similarity = "l2";
  double margin = 0.5;
};

struct TrainOptions {
  TrainConfig loop;
  /// ctc | framewise
  std::string recognizer = "ctc";
  /// raw | frozen | finetune
  std::string features = "raw";
  bool lin = false;
  int64_t rnn_layers = 2;
  int64_t rnn_hidden = 32;
  bool bidirectional = true;
  std::vector<int64_t> ff_widths;
};

struct EvalOptions {
  /// loss | framewise-acc | per
  std::string metric = "per";
  int64_t batch_size = 8;
};

struct RunConfig {
  DataOptions data;
  ModelOptions model;
  TrainConfig pretrain;
  TrainOptions train;
  EvalOptions eval;

  RunConfig();
  /// Validates enumerations and ranges of every section.
  void Check() const;
  std::string Print() const;
  static RunConfig Parse(const std::string &text);
  static RunConfig Load(const std::string &path);
  /// Replaces every seed with `seed`.
  void OverrideSeed(uint64_t seed);

  bool operator==(const RunConfig &o) const { return Print() == o.Print(); }
};

/// Names of every (section, key) pair, in printing order.
std::vector<std::string> RunConfigKeys();

}  // namespace seqrep

#endif  // SEQREP_RUNCONFIG_H_
