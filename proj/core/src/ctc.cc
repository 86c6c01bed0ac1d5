// core/src/ctc.cc

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

#include "seqrep/ctc.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "seqrep/error.h"

namespace seqrep {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Blank-interleaved label sequence: [-, l1, -, l2, ..., lM, -].
std::vector<int32_t> Expand(const std::vector<int32_t> &transcript) {
  std::vector<int32_t> ext;
  ext.reserve(2 * transcript.size() + 1);
  ext.push_back(kBlank);
  for (int32_t l : transcript) {
    ext.push_back(l);
    ext.push_back(kBlank);
  }
  return ext;
}

void CheckLattice(const Tensor &lp, const std::vector<int32_t> &transcript) {
  SEQREP_CHECK_SHAPE(lp.rows() >= 1 && lp.cols() >= 2,
                     "CTC lattice must have at least one frame and one non-blank symbol, got " +
                         lp.ShapeString());
  for (int32_t l : transcript)
    SEQREP_CHECK_SHAPE(l >= 1 && l < lp.cols(),
                       "CTC transcript token " + std::to_string(l) + " outside [1, " +
                           std::to_string(lp.cols() - 1) + "]");
  if (CtcMinFrames(transcript) > lp.rows())
    throw Error("CTC transcript of length " + std::to_string(transcript.size()) +
                " needs at least " + std::to_string(CtcMinFrames(transcript)) +
                " frames, lattice has " + std::to_string(lp.rows()));
}

// Log-space forward variables, alpha(t, s) including the emission at t.
Tensor Forward(const Tensor &lp, const std::vector<int32_t> &ext) {
  const int64_t T = lp.rows();
  const auto S = static_cast<int64_t>(ext.size());
  Tensor alpha(T, S, kNegInf);
  alpha(0, 0) = lp(0, ext[0]);
  if (S > 1) alpha(0, 1) = lp(0, ext[1]);
  for (int64_t t = 1; t < T; ++t) {
    for (int64_t s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = LogAdd(a, alpha(t - 1, s - 1));
      if (s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]) a = LogAdd(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + lp(t, ext[s]);
    }
  }
  return alpha;
}

// Log-space backward variables that exclude the emission at t.
Tensor BackwardExcl(const Tensor &lp, const std::vector<int32_t> &ext) {
  const int64_t T = lp.rows();
  const auto S = static_cast<int64_t>(ext.size());
  Tensor beta(T, S, kNegInf);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (int64_t t = T - 2; t >= 0; --t) {
    for (int64_t s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + lp(t + 1, ext[s]);
      if (s + 1 < S) b = LogAdd(b, beta(t + 1, s + 1) + lp(t + 1, ext[s + 1]));
      if (s + 2 < S && ext[s + 2] != kBlank && ext[s + 2] != ext[s])
        b = LogAdd(b, beta(t + 1, s + 2) + lp(t + 1, ext[s + 2]));
      beta(t, s) = b;
    }
  }
  return beta;
}

double LogLikelihood(const Tensor &alpha) {
  const int64_t T = alpha.rows(), S = alpha.cols();
  double ll = alpha(T - 1, S - 1);
  if (S > 1) ll = LogAdd(ll, alpha(T - 1, S - 2));
  return ll;
}

}  // namespace

int64_t CtcMinFrames(const std::vector<int32_t> &transcript) {
  int64_t n = static_cast<int64_t>(transcript.size());
  for (size_t i = 1; i < transcript.size(); ++i)
    if (transcript[i] == transcript[i - 1]) ++n;
  return n;
}

double CtcLossValue(const Tensor &log_probs, const std::vector<int32_t> &transcript) {
  CheckLattice(log_probs, transcript);
  const double ll = LogLikelihood(Forward(log_probs, Expand(transcript)));
  if (!std::isfinite(ll)) throw NumericalError("CTC log-likelihood is not finite");
  return -ll;
}

Var CtcLoss(const Var &log_probs, const std::vector<int32_t> &transcript) {
  const Tensor &lp = log_probs.value();
  CheckLattice(lp, transcript);
  std::vector<int32_t> ext = Expand(transcript);
  Tensor alpha = Forward(lp, ext);
  const double ll = LogLikelihood(alpha);
  if (!std::isfinite(ll)) throw NumericalError("CTC log-likelihood is not finite");
  const int32_t il = log_probs.id();
  return log_probs.graph().Record(
      "ctc_loss", Tensor::Scalar(-ll), {il},
      [il, ll, ext = std::move(ext), alpha = std::move(alpha)](Graph &gr, int32_t self) {
        const double gs = gr.grad(self)[0];
        const Tensor &lp = gr.value(il);
        Tensor beta = BackwardExcl(lp, ext);
        Tensor &ga = gr.grad(il);
        const int64_t T = lp.rows();
        const auto S = static_cast<int64_t>(ext.size());
        for (int64_t t = 0; t < T; ++t)
          for (int64_t s = 0; s < S; ++s) {
            const double la = alpha(t, s) + beta(t, s);
            if (la == kNegInf) continue;
            ga(t, ext[s]) -= gs * std::exp(la - ll);
          }
      });
}

double CtcOracle(const Tensor &log_probs, const std::vector<int32_t> &transcript) {
  const int64_t T = log_probs.rows();
  const int64_t C = log_probs.cols();
  double paths = 1.0;
  for (int64_t t = 0; t < T; ++t) paths *= static_cast<double>(C);
  SEQREP_CHECK_CONFIG(paths <= 1e6, "CtcOracle: instance too large for enumeration");
  std::vector<int32_t> path(static_cast<size_t>(T), 0);
  double total = kNegInf;
  while (true) {
    if (CtcCollapse(path) == transcript) {
      double lp = 0.0;
      for (int64_t t = 0; t < T; ++t) lp += log_probs(t, path[t]);
      total = LogAdd(total, lp);
    }
    int64_t t = T - 1;
    while (t >= 0 && path[t] == C - 1) path[t--] = 0;
    if (t < 0) break;
    ++path[t];
  }
  return -total;
}

std::vector<int32_t> CtcCollapse(const std::vector<int32_t> &path) {
  std::vector<int32_t> out;
  int32_t prev = -1;
  for (int32_t p : path) {
    if (p != prev && p != kBlank) out.push_back(p);
    prev = p;
  }
  return out;
}

std::vector<int32_t> GreedyDecode(const Tensor &lattice) {
  std::vector<int32_t> path;
  path.reserve(static_cast<size_t>(lattice.rows()));
  for (int64_t t = 0; t < lattice.rows(); ++t) {
    auto row = lattice.row(t);
    path.push_back(static_cast<int32_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return CtcCollapse(path);
}

std::vector<int32_t> PrefixBeamDecode(const Tensor &log_probs, int beam_size) {
  SEQREP_CHECK_CONFIG(beam_size >= 1, "beam size must be >= 1");
  struct Score {
    double blank = kNegInf;
    double non_blank = kNegInf;
    double total() const { return LogAdd(blank, non_blank); }
  };
  std::map<std::vector<int32_t>, Score> beams;
  beams[{}].blank = 0.0;
  for (int64_t t = 0; t < log_probs.rows(); ++t) {
    std::map<std::vector<int32_t>, Score> next;
    for (const auto &[prefix, sc] : beams) {
      // Blank keeps the prefix.
      Score &same = next[prefix];
      same.blank = LogAdd(same.blank, sc.total() + log_probs(t, kBlank));
      for (int32_t k = 1; k < log_probs.cols(); ++k) {
        const double p = log_probs(t, k);
        if (!prefix.empty() && prefix.back() == k) {
          // Repeat without a blank merges; after a blank it extends.
          same.non_blank = LogAdd(same.non_blank, sc.non_blank + p);
          std::vector<int32_t> ext = prefix;
          ext.push_back(k);
          Score &e = next[ext];
          e.non_blank = LogAdd(e.non_blank, sc.blank + p);
        } else {
          std::vector<int32_t> ext = prefix;
          ext.push_back(k);
          Score &e = next[ext];
          e.non_blank = LogAdd(e.non_blank, sc.total() + p);
        }
      }
    }
    std::vector<std::pair<std::vector<int32_t>, Score>> ranked(next.begin(), next.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto &a, const auto &b) { return a.second.total() > b.second.total(); });
    if (static_cast<int>(ranked.size()) > beam_size) ranked.resize(static_cast<size_t>(beam_size));
    beams = std::map<std::vector<int32_t>, Score>(ranked.begin(), ranked.end());
  }
  const auto best = std::max_element(beams.begin(), beams.end(), [](const auto &a, const auto &b) {
    return a.second.total() < b.second.total();
  });
  return best->first;
}

int64_t EditDistance(const std::vector<int32_t> &hyp, const std::vector<int32_t> &ref) {
  const size_t n = hyp.size(), m = ref.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double ErrorRate(const std::vector<int32_t> &hyp, const std::vector<int32_t> &ref) {
  SEQREP_CHECK_CONFIG(!ref.empty(), "error rate needs a non-empty reference");
  return static_cast<double>(EditDistance(hyp, ref)) / static_cast<double>(ref.size());
}

}  // namespace seqrep
