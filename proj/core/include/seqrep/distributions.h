// seqrep/distributions.h

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

#ifndef SEQREP_DISTRIBUTIONS_H_
#define SEQREP_DISTRIBUTIONS_H_

// Diagonal Gaussians.  A DiagGaussian holds one distribution per row, so a
// batch of posteriors is a pair of n x d matrices.
//
// Observation model convention: log-likelihoods are those of a unit-variance
// Gaussian with the normalising constant -d/2 log(2 pi) dropped, i.e. exactly
// -||x - mean||^2 / 2.  Reported ELBOs therefore exclude that constant.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seqrep/graph.h"
#include "seqrep/tensor.h"

namespace seqrep {

/// Log-variances produced by posterior heads are clamped into this range
/// before use, which keeps exp() finite.  The gradient is zero only on the
/// clamp boundary itself.
inline constexpr double kLogVarMin = -14.0;
inline constexpr double kLogVarMax = 14.0;

struct DiagGaussian {
  Tensor mu;      // n x d
  Tensor logvar;  // n x d

  int64_t dim() const { return mu.cols(); }
  int64_t count() const { return mu.rows(); }
  static DiagGaussian Standard(int64_t n, int64_t d) { return {Tensor(n, d), Tensor(n, d)}; }
  /// Row r as a 1 x d Gaussian.
  DiagGaussian RowAt(int64_t r) const { return {mu.RowSlice(r, r + 1), logvar.RowSlice(r, r + 1)}; }
};

/// A diagonal Gaussian living in a Graph.
struct GaussianVar {
  Var mu;
  Var logvar;
};

GaussianVar Bind(Graph &g, const DiagGaussian &q, bool requires_grad = false);
Var ClampLogVar(const Var &logvar);

/// mu + kappa * noise * exp(logvar / 2).  kappa = 1 is the generative sample,
/// kappa = 0 the mean.
Var ReparamSample(const GaussianVar &q, const Var &noise, double kappa = 1.0);
/// Per-row KL(q || N(0, I)) = |mu|^2/2 + sum_i (sigma_i^2/2 - log sigma_i) - d/2, n x 1.
Var KlToStandard(const GaussianVar &q);
/// The part of KlToStandard that does not involve mu, per row, n x 1:
/// sum_i (sigma_i^2/2 - log sigma_i - 1/2).
Var KlVarianceTerm(const GaussianVar &q);
/// Per-row KL(q || p) for diagonal Gaussians, n x 1.
Var KlDiagDiag(const GaussianVar &q, const GaussianVar &p);
/// Per-row -||x - mean||^2 / 2, n x 1.
Var GaussianLogLik(const Var &x, const Var &mean);

// Value-level versions.  Scalar results sum over rows.
Tensor ReparamSample(const DiagGaussian &q, const Tensor &noise, double kappa = 1.0);
double KlToStandard(const DiagGaussian &q);
double KlDiagDiag(const DiagGaussian &q, const DiagGaussian &p);
double GaussianLogLik(const Tensor &x, const Tensor &mean);
/// Full log-density of the 1 x d Gaussian (row r of q) at z, including the
/// normalising constant.
double LogDensity(const DiagGaussian &q, int64_t r, std::span<const double> z);

/// Frozen per-(utterance, timestep) Gaussians used as sample-specific priors.
/// A store is immutable once built; lookups that miss throw.
class PriorStore {
 public:
  struct Entry {
    std::vector<double> mu;
    std::vector<double> logvar;
  };

  class Builder {
   public:
    explicit Builder(int64_t epoch_tag) : tag_(epoch_tag) {}
    /// Throws ConfigError if (id, t) was already written.
    void Put(const std::string &id, int64_t t, std::vector<double> mu, std::vector<double> logvar);
    /// Writes every row of q as timesteps first_t, first_t + 1, ...
    void PutRows(const std::string &id, const DiagGaussian &q, int64_t first_t = 0);
    PriorStore Finish() &&;

   private:
    int64_t tag_;
    std::map<std::pair<std::string, int64_t>, Entry> entries_;
  };

  PriorStore() = default;

  int64_t epoch_tag() const { return tag_; }
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }
  bool Contains(const std::string &id, int64_t t) const;
  /// Throws Error naming (id, t) on a miss.
  const Entry &Lookup(const std::string &id, int64_t t) const;
  /// Gathers priors for timesteps [0, steps) of one utterance.
  DiagGaussian LookupSequence(const std::string &id, int64_t steps) const;
  /// Gathers priors for arbitrary (id, t) rows.
  DiagGaussian LookupRows(const std::vector<std::pair<std::string, int64_t>> &keys) const;

  /// Binary table, little-endian:
  ///   "SRP1" | i64 epoch_tag | u64 count |
  ///   count x ( u32 id_len | id bytes | u32 t | u32 d | d x f64 mu | d x f64 logvar )
  /// Entries are written in (id, t) order.
  void Save(const std::string &path) const;
  static PriorStore Load(const std::string &path);

  bool operator==(const PriorStore &o) const;

 private:
  int64_t tag_ = -1;
  std::map<std::pair<std::string, int64_t>, Entry> entries_;
};

}  // namespace seqrep

#endif  // SEQREP_DISTRIBUTIONS_H_
