// seqrep/ctc.h

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

#ifndef SEQREP_CTC_H_
#define SEQREP_CTC_H_

// Connectionist temporal classification.  A lattice is a T x (V + 1) matrix
// of per-frame log-probabilities; column 0 is the blank and transcript
// tokens are 1..V.  Repeated tokens merge unless separated by a blank.

#include <cstdint>
#include <vector>

#include "seqrep/graph.h"
#include "seqrep/tensor.h"

namespace seqrep {

inline constexpr int32_t kBlank = 0;

/// Minimum number of frames needed to emit `transcript`: one per token plus
/// one blank between each pair of equal neighbours.
int64_t CtcMinFrames(const std::vector<int32_t> &transcript);

/// Negative log-likelihood -log sum_{paths -> transcript} prod_t p_t(path_t)
/// of one utterance, summed over frames (no length normalisation).  The
/// gradient is taken with respect to the log-probabilities themselves, so
/// the op composes with a preceding LogSoftmax.  Throws Error if the
/// transcript cannot be emitted in T frames.
Var CtcLoss(const Var &log_probs, const std::vector<int32_t> &transcript);
double CtcLossValue(const Tensor &log_probs, const std::vector<int32_t> &transcript);

/// Exhaustive enumeration of all (V + 1)^T label paths.  Returns +infinity
/// for an impossible transcript.  Throws ConfigError above 1e6 paths.
double CtcOracle(const Tensor &log_probs, const std::vector<int32_t> &transcript);

/// Standard CTC collapse: merge repeats, then strip blanks.
std::vector<int32_t> CtcCollapse(const std::vector<int32_t> &path);
/// Per-frame argmax followed by CtcCollapse.  Ties go to the lower index.
std::vector<int32_t> GreedyDecode(const Tensor &lattice);
/// Prefix beam search without a language model.
std::vector<int32_t> PrefixBeamDecode(const Tensor &log_probs, int beam_size);

/// Levenshtein distance with unit costs.
int64_t EditDistance(const std::vector<int32_t> &hyp, const std::vector<int32_t> &ref);
/// EditDistance / |ref|.  Throws ConfigError for an empty reference.
double ErrorRate(const std::vector<int32_t> &hyp, const std::vector<int32_t> &ref);

}  // namespace seqrep

#endif  // SEQREP_CTC_H_
