// core/src/recognizer.cc

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

#include "seqrep/recognizer.h"

#include <algorithm>

#include "seqrep/ctc.h"
#include "seqrep/error.h"
#include "seqrep/ops.h"

namespace seqrep {

std::vector<int32_t> ToCtcTokens(const std::vector<int32_t> &transcript) {
  std::vector<int32_t> out(transcript);
  for (auto &t : out) t += 1;
  return out;
}

std::vector<int32_t> FromCtcTokens(const std::vector<int32_t> &tokens) {
  std::vector<int32_t> out(tokens);
  for (auto &t : out) t -= 1;
  return out;
}

Linear LinAdapt(ParamStore *store, const std::string &name, int64_t dim) {
  Rng unused(0);
  Linear l(store, name, dim, dim, unused);
  l.weight()->value = Tensor::Identity(dim);
  return l;
}

CtcRecognizer::CtcRecognizer(ParamStore *store, const std::string &name,
                             const RecognizerConfig &cfg, Rng &rng)
    : cfg_(cfg) {
  SEQREP_CHECK_CONFIG(cfg.input_dim >= 1, "recognizer input dimension must be >= 1");
  SEQREP_CHECK_CONFIG(cfg.vocab >= 1, "recognizer vocabulary must be >= 1");
  if (cfg.lin) lin_ = LinAdapt(store, name + ".lin", cfg.input_dim);
  int64_t width = cfg.input_dim;
  if (!cfg.ff_widths.empty()) {
    ff_ = Mlp(store, name + ".ff", width, cfg.ff_widths, cfg.ff_act, rng, true, cfg.rnn.dropout);
    width = ff_.out();
  }
  rnn_ = RecurrentStack(store, name + ".rnn", width, cfg.rnn, rng);
  width = rnn_.empty() ? width : rnn_.out();
  out_ = Linear(store, name + ".out", width, cfg.vocab + 1, rng);
}

Var CtcRecognizer::Lattice(Graph &g, const Var &x, const RunMode &mode) const {
  Var h = cfg_.lin ? lin_.Forward(g, x) : x;
  if (!ff_.empty()) h = ff_.Forward(g, h, mode);
  if (!rnn_.empty()) h = rnn_.Forward(g, h, mode);
  return LogSoftmax(out_.Forward(g, h));
}

Var CtcRecognizer::Loss(Graph &g, const Var &x, const std::vector<int32_t> &transcript,
                        const RunMode &mode) const {
  return CtcLoss(Lattice(g, x, mode), ToCtcTokens(transcript));
}

FramewiseClassifier::FramewiseClassifier(ParamStore *store, const std::string &name, int64_t in,
                                         const std::vector<int64_t> &hidden, int64_t classes,
                                         Rng &rng, Activation act) {
  std::vector<int64_t> widths(hidden);
  widths.push_back(classes);
  mlp_ = Mlp(store, name, in, widths, act, rng);
}

Var FramewiseClassifier::LogProbs(Graph &g, const Var &x, const RunMode &mode) const {
  return LogSoftmax(mlp_.Forward(g, x, mode));
}

Var CrossEntropy(const Var &log_probs, const std::vector<int32_t> &labels) {
  SEQREP_CHECK_SHAPE(static_cast<int64_t>(labels.size()) == log_probs.rows(),
                     "cross-entropy label count does not match rows");
  std::vector<int64_t> idx(labels.begin(), labels.end());
  for (int64_t i : idx)
    SEQREP_CHECK_SHAPE(i >= 0 && i < log_probs.cols(), "label outside the class range");
  return Neg(Mean(PickPerRow(log_probs, idx)));
}

Var FramewiseClassifier::Loss(Graph &g, const Var &x, const std::vector<int32_t> &labels,
                              const RunMode &mode) const {
  return CrossEntropy(LogProbs(g, x, mode), labels);
}

int64_t FramewiseClassifier::CountCorrect(const Tensor &log_probs,
                                          const std::vector<int32_t> &labels) const {
  int64_t n = 0;
  for (int64_t r = 0; r < log_probs.rows(); ++r) {
    auto row = log_probs.row(r);
    n += (std::max_element(row.begin(), row.end()) - row.begin()) == labels[r];
  }
  return n;
}

}  // namespace seqrep
