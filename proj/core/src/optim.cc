// core/src/optim.cc

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

#include "seqrep/optim.h"

#include <cmath>

#include "seqrep/error.h"

namespace seqrep {

void AdamConfig::Check() const {
  SEQREP_CHECK_CONFIG(lr >= 0.0, "learning rate must be >= 0");
  SEQREP_CHECK_CONFIG(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
                      "Adam momenta must be in [0, 1)");
  SEQREP_CHECK_CONFIG(eps > 0.0, "Adam epsilon must be > 0");
}

void Adam::Step(const std::vector<Parameter *> &params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Parameter *p : params) {
    if (!p->grad.SameShape(p->value)) p->ZeroGrad();
    Moments &st = state_[p];
    if (!st.m.SameShape(p->value)) {
      st.m = Tensor(p->value.rows(), p->value.cols());
      st.v = Tensor(p->value.rows(), p->value.cols());
    }
    for (int64_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g;
      st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = st.m[i] / bc1;
      const double vhat = st.v[i] / bc2;
      p->value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double GradNorm(const std::vector<Parameter *> &params) {
  double s = 0.0;
  for (const Parameter *p : params)
    for (double g : p->grad.values()) s += g * g;
  return std::sqrt(s);
}

double ClipGradNorm(const std::vector<Parameter *> &params, double max_norm) {
  const double norm = GradNorm(params);
  if (!std::isfinite(norm)) throw NumericalError("gradient norm is not finite");
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter *p : params)
      for (double &g : p->grad.values()) g *= scale;
  }
  return norm;
}

}  // namespace seqrep
