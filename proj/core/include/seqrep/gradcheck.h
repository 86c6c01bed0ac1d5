// seqrep/gradcheck.h

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

#ifndef SEQREP_GRADCHECK_H_
#define SEQREP_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "seqrep/graph.h"

namespace seqrep {

struct GradCheckResult {
  /// max over coordinates of |analytic - numeric| / max(1, |analytic|)
  double max_rel_error = 0.0;
  std::string worst_coordinate;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t coordinates_checked = 0;
};

/// Compares the reverse-mode gradient of f at `point` against central
/// differences with step eps (0 < eps <= 1e-2).  f must rebuild its whole
/// computation from the given leaf and be deterministic (re-seed any noise
/// inside f).  Throws ShapeError if f is not scalar-valued.
GradCheckResult GradCheck(const std::function<Var(Graph &, const Var &)> &f, const Tensor &point,
                          double eps);

/// Same check with respect to a set of parameters.  f builds the loss from
/// graph.Param(...) nodes.  When max_coords_per_param > 0 only that many
/// coordinates per parameter are perturbed, chosen with `seed`.
GradCheckResult GradCheckParams(const std::function<Var(Graph &)> &f,
                                const std::vector<Parameter *> &params, double eps,
                                int64_t max_coords_per_param = -1, uint64_t seed = 0);

}  // namespace seqrep

#endif  // SEQREP_GRADCHECK_H_
