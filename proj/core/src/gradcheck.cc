// core/src/gradcheck.cc

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

#include "seqrep/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "seqrep/error.h"
#include "seqrep/rng.h"

namespace seqrep {

namespace {

void CheckEps(double eps) {
  SEQREP_CHECK_CONFIG(eps > 0.0 && eps <= 1e-2, "gradcheck eps must be in (0, 1e-2]");
}

double ScalarOf(const Var &v) {
  SEQREP_CHECK_SHAPE(v.rows() == 1 && v.cols() == 1,
                     "gradcheck: function is not scalar-valued (" + v.value().ShapeString() + ")");
  return v.value()[0];
}

void Update(GradCheckResult *res, double analytic, double numeric, const std::string &where) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
  ++res->coordinates_checked;
  if (err > res->max_rel_error || res->worst_coordinate.empty()) {
    res->max_rel_error = std::max(res->max_rel_error, err);
    res->worst_coordinate = where;
    res->worst_analytic = analytic;
    res->worst_numeric = numeric;
  }
}

}  // namespace

GradCheckResult GradCheck(const std::function<Var(Graph &, const Var &)> &f, const Tensor &point,
                          double eps) {
  CheckEps(eps);
  Tensor analytic;
  {
    Graph g;
    Var x = g.Input(point, "gradcheck_point");
    Var y = f(g, x);
    ScalarOf(y);
    auto grads = g.Backward(y);
    analytic = grads.contains(x) ? grads.at(x) : Tensor(point.rows(), point.cols());
  }
  auto eval = [&](const Tensor &p) {
    Graph g;
    Var x = g.Input(p, "gradcheck_point");
    return ScalarOf(f(g, x));
  };
  GradCheckResult res;
  Tensor p = point;
  for (int64_t i = 0; i < point.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + eps;
    const double fp = eval(p);
    p[i] = orig - eps;
    const double fm = eval(p);
    p[i] = orig;
    Update(&res, analytic[i], (fp - fm) / (2.0 * eps), "point[" + std::to_string(i) + "]");
  }
  return res;
}

GradCheckResult GradCheckParams(const std::function<Var(Graph &)> &f,
                                const std::vector<Parameter *> &params, double eps,
                                int64_t max_coords_per_param, uint64_t seed) {
  CheckEps(eps);
  for (Parameter *p : params) p->ZeroGrad();
  {
    Graph g;
    Var y = f(g);
    ScalarOf(y);
    g.Backward(y);
  }
  std::vector<Tensor> analytic;
  for (Parameter *p : params) {
    if (!p->grad.SameShape(p->value)) p->ZeroGrad();
    analytic.push_back(p->grad);
  }
  auto eval = [&]() {
    Graph g;
    return ScalarOf(f(g));
  };
  GradCheckResult res;
  Rng rng(seed);
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter *p = params[k];
    const int64_t n = p->value.size();
    std::vector<int64_t> coords;
    if (max_coords_per_param > 0 && n > max_coords_per_param) {
      auto perm = rng.Permutation(n);
      coords.assign(perm.begin(), perm.begin() + max_coords_per_param);
    } else {
      for (int64_t i = 0; i < n; ++i) coords.push_back(i);
    }
    for (int64_t i : coords) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double fp = eval();
      p->value[i] = orig - eps;
      const double fm = eval();
      p->value[i] = orig;
      Update(&res, analytic[k][i], (fp - fm) / (2.0 * eps),
             p->name + "[" + std::to_string(i) + "]");
    }
  }
  return res;
}

}  // namespace seqrep
