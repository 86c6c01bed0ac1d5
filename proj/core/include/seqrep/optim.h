// seqrep/optim.h

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

#ifndef SEQREP_OPTIM_H_
#define SEQREP_OPTIM_H_

#include <cstdint>
#include <map>
#include <vector>

#include "seqrep/graph.h"

namespace seqrep {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void Check() const;
};

/// Adam with bias correction:
///   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) { cfg_.Check(); }

  /// One update of every parameter from its accumulated grad.
  void Step(const std::vector<Parameter *> &params);
  int64_t steps() const { return t_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::map<const Parameter *, Moments> state_;
};

/// Global L2 norm of all gradients.
double GradNorm(const std::vector<Parameter *> &params);
/// Rescales gradients so the global norm is at most max_norm (<= 0 disables).
/// Returns the norm before clipping.
double ClipGradNorm(const std::vector<Parameter *> &params, double max_norm);

}  // namespace seqrep

#endif  // SEQREP_OPTIM_H_
