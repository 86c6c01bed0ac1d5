// seqrep/recognizer.h

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

#ifndef SEQREP_RECOGNIZER_H_
#define SEQREP_RECOGNIZER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "seqrep/nn.h"

namespace seqrep {

struct RecognizerConfig {
  int64_t input_dim = 0;
  /// Number of output classes excluding the CTC blank.
  int64_t vocab = 0;
  RecurrentStackConfig rnn;
  /// Optional feedforward layers applied per frame before the recurrent stack.
  std::vector<int64_t> ff_widths;
  Activation ff_act = Activation::kRelu;
  /// Prepend an identity-initialised input transform (see LinAdapt).
  bool lin = false;
};

/// CTC recognizer: [LIN] -> per-frame MLP -> (Bi)LSTM stack -> Linear(V + 1)
/// -> LogSoftmax.  Parameters live under "<name>.".
class CtcRecognizer {
 public:
  CtcRecognizer() = default;
  CtcRecognizer(ParamStore *store, const std::string &name, const RecognizerConfig &cfg, Rng &rng);

  /// T x D features -> T' x (V + 1) log-probabilities.
  Var Lattice(Graph &g, const Var &x, const RunMode &mode = {}) const;
  /// CTC negative log-likelihood for framewise state labels in [0, V):
  /// the transcript is shifted by one to leave index 0 for the blank.
  Var Loss(Graph &g, const Var &x, const std::vector<int32_t> &transcript,
           const RunMode &mode = {}) const;
  const RecognizerConfig &config() const { return cfg_; }
  const RecurrentStack &rnn() const { return rnn_; }

 private:
  RecognizerConfig cfg_;
  Linear lin_;
  Mlp ff_;
  RecurrentStack rnn_;
  Linear out_;
};

/// Maps state labels [0, V) to CTC tokens [1, V].
std::vector<int32_t> ToCtcTokens(const std::vector<int32_t> &transcript);
std::vector<int32_t> FromCtcTokens(const std::vector<int32_t> &tokens);

/// Per-frame softmax classifier (MLP with the given hidden widths).
class FramewiseClassifier {
 public:
  FramewiseClassifier() = default;
  FramewiseClassifier(ParamStore *store, const std::string &name, int64_t in,
                      const std::vector<int64_t> &hidden, int64_t classes, Rng &rng,
                      Activation act = Activation::kRelu);
  /// n x classes log-probabilities.
  Var LogProbs(Graph &g, const Var &x, const RunMode &mode = {}) const;
  /// Mean cross-entropy over rows.
  Var Loss(Graph &g, const Var &x, const std::vector<int32_t> &labels, const RunMode &mode = {}) const;
  /// Number of rows whose argmax equals the label.
  int64_t CountCorrect(const Tensor &log_probs, const std::vector<int32_t> &labels) const;

 private:
  Mlp mlp_;
};

/// Mean cross-entropy of labels under row log-probabilities.
Var CrossEntropy(const Var &log_probs, const std::vector<int32_t> &labels);

/// Identity-initialised D x D linear transform with zero bias, registered
/// as "<name>.W" / "<name>.b".
Linear LinAdapt(ParamStore *store, const std::string &name, int64_t dim);

}  // namespace seqrep

#endif  // SEQREP_RECOGNIZER_H_
