// core/src/ops.cc

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

#include "seqrep/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqrep/error.h"

namespace seqrep {

namespace {

enum class Bcast { kSame, kScalar, kRow, kCol };

Bcast ResolveBroadcast(const Tensor &a, const Tensor &b, const char *op) {
  if (a.SameShape(b)) return Bcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::kCol;
  throw ShapeError(std::string(op) + ": cannot broadcast " + b.ShapeString() + " onto " +
                   a.ShapeString());
}

inline int64_t BIndex(Bcast m, int64_t r, int64_t c, int64_t cols) {
  switch (m) {
    case Bcast::kSame: return r * cols + c;
    case Bcast::kScalar: return 0;
    case Bcast::kRow: return c;
    case Bcast::kCol: return r;
  }
  return 0;
}

Graph &SameGraph(const Var &a, const Var &b) {
  if (&a.graph() != &b.graph()) throw Error("operands belong to different graphs");
  return a.graph();
}

// Elementwise binary op with broadcasting of b.  FwdFn(x, y) -> z;
// GradFn(x, y, z) -> (dz/dx, dz/dy).
template <typename FwdFn, typename GradFn>
Var BinaryOp(const char *name, const Var &a, const Var &b, FwdFn fwd, GradFn grad_fn) {
  Graph &g = SameGraph(a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  const Bcast mode = ResolveBroadcast(av, bv, name);
  const int64_t rows = av.rows(), cols = av.cols();
  Tensor out(rows, cols);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c)
      out[r * cols + c] = fwd(av[r * cols + c], bv[BIndex(mode, r, c, cols)]);
  const int32_t ia = a.id(), ib = b.id();
  return g.Record(name, std::move(out), {ia, ib},
                  [ia, ib, mode, grad_fn](Graph &gr, int32_t self) {
                    const Tensor &gs = gr.grad(self);
                    const Tensor &x = gr.value(ia);
                    const Tensor &y = gr.value(ib);
                    const Tensor &z = gr.value(self);
                    Tensor *ga = gr.grad_if_needed(ia);
                    Tensor *gb = gr.grad_if_needed(ib);
                    const int64_t cols = x.cols();
                    for (int64_t r = 0; r < x.rows(); ++r) {
                      for (int64_t c = 0; c < cols; ++c) {
                        const int64_t i = r * cols + c;
                        const int64_t j = BIndex(mode, r, c, cols);
                        const auto [dx, dy] = grad_fn(x[i], y[j], z[i]);
                        if (ga) (*ga)[i] += gs[i] * dx;
                        if (gb) (*gb)[j] += gs[i] * dy;
                      }
                    }
                  });
}

// Elementwise unary op.  GradFn(x, z) -> dz/dx.
template <typename FwdFn, typename GradFn>
Var UnaryOp(const char *name, const Var &a, FwdFn fwd, GradFn grad_fn) {
  Graph &g = a.graph();
  const Tensor &av = a.value();
  Tensor out(av.rows(), av.cols());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const int32_t ia = a.id();
  return g.Record(name, std::move(out), {ia}, [ia, grad_fn](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    const Tensor &x = gr.value(ia);
    const Tensor &z = gr.value(self);
    Tensor &ga = gr.grad(ia);
    for (int64_t i = 0; i < x.size(); ++i) ga[i] += gs[i] * grad_fn(x[i], z[i]);
  });
}

inline double SigmoidValue(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Add(const Var &a, const Var &b) {
  return BinaryOp(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return std::pair{1.0, 1.0}; });
}

Var Sub(const Var &a, const Var &b) {
  return BinaryOp(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return std::pair{1.0, -1.0}; });
}

Var Mul(const Var &a, const Var &b) {
  return BinaryOp(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double) { return std::pair{y, x}; });
}

Var Div(const Var &a, const Var &b) {
  return BinaryOp(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double z) { return std::pair{1.0 / y, -z / y}; });
}

Var Scale(const Var &a, double s) {
  return UnaryOp(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var AddScalar(const Var &a, double s) {
  return UnaryOp(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var Neg(const Var &a) { return Scale(a, -1.0); }

Var Exp(const Var &a) {
  return UnaryOp(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double z) { return z; });
}

Var Log(const Var &a) {
  return UnaryOp(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var Tanh(const Var &a) {
  return UnaryOp(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double z) { return 1.0 - z * z; });
}

Var Sigmoid(const Var &a) {
  return UnaryOp(
      "sigmoid", a, [](double x) { return SigmoidValue(x); },
      [](double, double z) { return z * (1.0 - z); });
}

Var Relu(const Var &a) {
  return UnaryOp(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Square(const Var &a) {
  return UnaryOp(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var Sqrt(const Var &a) {
  return UnaryOp(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double z) { return 0.5 / z; });
}

Var Abs(const Var &a) {
  return UnaryOp(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var Clamp(const Var &a, double lo, double hi) {
  return UnaryOp(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var MatMul(const Var &a, const Var &b) {
  Graph &g = SameGraph(a, b);
  Tensor out;
  Gemm(a.value(), false, b.value(), false, &out);
  const int32_t ia = a.id(), ib = b.id();
  return g.Record("matmul", std::move(out), {ia, ib}, [ia, ib](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    if (Tensor *ga = gr.grad_if_needed(ia)) GemmAccumulate(gs, false, gr.value(ib), true, ga);
    if (Tensor *gb = gr.grad_if_needed(ib)) GemmAccumulate(gr.value(ia), true, gs, false, gb);
  });
}

Var Transpose(const Var &a) {
  const int32_t ia = a.id();
  return a.graph().Record("transpose", a.value().Transposed(), {ia},
                          [ia](Graph &gr, int32_t self) {
                            gr.grad(ia).AddScaled(gr.grad(self).Transposed());
                          });
}

Var ConcatCols(const std::vector<Var> &parts) {
  SEQREP_CHECK_SHAPE(!parts.empty(), "ConcatCols of nothing");
  Graph &g = parts.front().graph();
  std::vector<const Tensor *> vals;
  std::vector<int32_t> ids;
  for (const Var &p : parts) {
    vals.push_back(&p.value());
    ids.push_back(p.id());
  }
  Tensor out = ConcatCols(vals);
  return g.Record("concat_cols", std::move(out), ids, [ids](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    int64_t off = 0;
    for (int32_t id : ids) {
      const int64_t w = gr.value(id).cols();
      if (Tensor *gp = gr.grad_if_needed(id)) {
        for (int64_t r = 0; r < gs.rows(); ++r)
          for (int64_t c = 0; c < w; ++c) (*gp)(r, c) += gs(r, off + c);
      }
      off += w;
    }
  });
}

Var ConcatRows(const std::vector<Var> &parts) {
  SEQREP_CHECK_SHAPE(!parts.empty(), "ConcatRows of nothing");
  Graph &g = parts.front().graph();
  std::vector<const Tensor *> vals;
  std::vector<int32_t> ids;
  for (const Var &p : parts) {
    vals.push_back(&p.value());
    ids.push_back(p.id());
  }
  Tensor out = ConcatRows(vals);
  return g.Record("concat_rows", std::move(out), ids, [ids](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    int64_t off = 0;
    for (int32_t id : ids) {
      const int64_t n = gr.value(id).size();
      if (Tensor *gp = gr.grad_if_needed(id))
        for (int64_t i = 0; i < n; ++i) (*gp)[i] += gs[off + i];
      off += n;
    }
  });
}

Var SliceRows(const Var &a, int64_t begin, int64_t end) {
  const int32_t ia = a.id();
  return a.graph().Record("slice_rows", a.value().RowSlice(begin, end), {ia},
                          [ia, begin](Graph &gr, int32_t self) {
                            const Tensor &gs = gr.grad(self);
                            Tensor &ga = gr.grad(ia);
                            const int64_t off = begin * ga.cols();
                            for (int64_t i = 0; i < gs.size(); ++i) ga[off + i] += gs[i];
                          });
}

Var SliceCols(const Var &a, int64_t begin, int64_t end) {
  const int32_t ia = a.id();
  return a.graph().Record("slice_cols", a.value().ColSlice(begin, end), {ia},
                          [ia, begin](Graph &gr, int32_t self) {
                            const Tensor &gs = gr.grad(self);
                            Tensor &ga = gr.grad(ia);
                            for (int64_t r = 0; r < gs.rows(); ++r)
                              for (int64_t c = 0; c < gs.cols(); ++c) ga(r, begin + c) += gs(r, c);
                          });
}

Var Reshape(const Var &a, int64_t rows, int64_t cols) {
  SEQREP_CHECK_SHAPE(rows * cols == a.value().size(),
                     "Reshape " + a.value().ShapeString() + " to " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  const int32_t ia = a.id();
  return a.graph().Record("reshape", Tensor(rows, cols, a.value().values()), {ia},
                          [ia](Graph &gr, int32_t self) {
                            const Tensor &gs = gr.grad(self);
                            Tensor &ga = gr.grad(ia);
                            for (int64_t i = 0; i < gs.size(); ++i) ga[i] += gs[i];
                          });
}

Var GatherRows(const Var &a, const std::vector<int64_t> &index) {
  const Tensor &av = a.value();
  const int64_t cols = av.cols();
  Tensor out(static_cast<int64_t>(index.size()), cols);
  for (size_t i = 0; i < index.size(); ++i) {
    SEQREP_CHECK_SHAPE(index[i] >= 0 && index[i] < av.rows(), "GatherRows index out of range");
    std::copy_n(av.data() + index[i] * cols, cols, out.data() + static_cast<int64_t>(i) * cols);
  }
  const int32_t ia = a.id();
  return a.graph().Record("gather_rows", std::move(out), {ia},
                          [ia, index](Graph &gr, int32_t self) {
                            const Tensor &gs = gr.grad(self);
                            Tensor &ga = gr.grad(ia);
                            const int64_t cols = ga.cols();
                            for (size_t i = 0; i < index.size(); ++i)
                              for (int64_t c = 0; c < cols; ++c)
                                ga(index[i], c) += gs(static_cast<int64_t>(i), c);
                          });
}

Var PickPerRow(const Var &a, const std::vector<int64_t> &index) {
  const Tensor &av = a.value();
  SEQREP_CHECK_SHAPE(static_cast<int64_t>(index.size()) == av.rows(),
                     "PickPerRow needs one index per row");
  Tensor out(av.rows(), 1);
  for (int64_t r = 0; r < av.rows(); ++r) {
    SEQREP_CHECK_SHAPE(index[r] >= 0 && index[r] < av.cols(), "PickPerRow index out of range");
    out[r] = av(r, index[r]);
  }
  const int32_t ia = a.id();
  return a.graph().Record("pick_per_row", std::move(out), {ia},
                          [ia, index](Graph &gr, int32_t self) {
                            const Tensor &gs = gr.grad(self);
                            Tensor &ga = gr.grad(ia);
                            for (int64_t r = 0; r < ga.rows(); ++r) ga(r, index[r]) += gs[r];
                          });
}

Var ReverseRows(const Var &a) {
  const Tensor &av = a.value();
  std::vector<int64_t> index(static_cast<size_t>(av.rows()));
  for (int64_t r = 0; r < av.rows(); ++r) index[r] = av.rows() - 1 - r;
  return GatherRows(a, index);
}

Var Sum(const Var &a) {
  const int32_t ia = a.id();
  return a.graph().Record("sum", Tensor::Scalar(a.value().Sum()), {ia},
                          [ia](Graph &gr, int32_t self) {
                            const double gs = gr.grad(self)[0];
                            Tensor &ga = gr.grad(ia);
                            for (auto &v : ga.values()) v += gs;
                          });
}

Var Mean(const Var &a) {
  const int64_t n = a.value().size();
  SEQREP_CHECK_SHAPE(n > 0, "Mean of empty tensor");
  const int32_t ia = a.id();
  return a.graph().Record("mean", Tensor::Scalar(a.value().Sum() / static_cast<double>(n)), {ia},
                          [ia, n](Graph &gr, int32_t self) {
                            const double gs = gr.grad(self)[0] / static_cast<double>(n);
                            Tensor &ga = gr.grad(ia);
                            for (auto &v : ga.values()) v += gs;
                          });
}

Var SumCols(const Var &a) {
  const Tensor &av = a.value();
  Tensor out(av.rows(), 1);
  for (int64_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (double v : av.row(r)) s += v;
    out[r] = s;
  }
  const int32_t ia = a.id();
  return a.graph().Record("sum_cols", std::move(out), {ia}, [ia](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    Tensor &ga = gr.grad(ia);
    for (int64_t r = 0; r < ga.rows(); ++r)
      for (auto &v : ga.row(r)) v += gs[r];
  });
}

Var SumRows(const Var &a) {
  const Tensor &av = a.value();
  Tensor out(1, av.cols());
  for (int64_t r = 0; r < av.rows(); ++r)
    for (int64_t c = 0; c < av.cols(); ++c) out[c] += av(r, c);
  const int32_t ia = a.id();
  return a.graph().Record("sum_rows", std::move(out), {ia}, [ia](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    Tensor &ga = gr.grad(ia);
    for (int64_t r = 0; r < ga.rows(); ++r)
      for (int64_t c = 0; c < ga.cols(); ++c) ga(r, c) += gs[c];
  });
}

Var RowDot(const Var &a, const Var &b) {
  Graph &g = SameGraph(a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  SEQREP_CHECK_SHAPE(av.SameShape(bv), "RowDot shape mismatch " + av.ShapeString() + " vs " +
                                           bv.ShapeString());
  Tensor out(av.rows(), 1);
  for (int64_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (int64_t c = 0; c < av.cols(); ++c) s += av(r, c) * bv(r, c);
    out[r] = s;
  }
  const int32_t ia = a.id(), ib = b.id();
  return g.Record("row_dot", std::move(out), {ia, ib}, [ia, ib](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    const Tensor &x = gr.value(ia);
    const Tensor &y = gr.value(ib);
    Tensor *ga = gr.grad_if_needed(ia);
    Tensor *gb = gr.grad_if_needed(ib);
    for (int64_t r = 0; r < x.rows(); ++r)
      for (int64_t c = 0; c < x.cols(); ++c) {
        if (ga) (*ga)(r, c) += gs[r] * y(r, c);
        if (gb) (*gb)(r, c) += gs[r] * x(r, c);
      }
  });
}

namespace {

// Row-wise max and log-sum-exp.
void RowLogSumExp(const Tensor &x, std::vector<double> *lse) {
  lse->assign(static_cast<size_t>(x.rows()), 0.0);
  for (int64_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    if (row.empty()) {
      (*lse)[r] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    (*lse)[r] = m + std::log(s);
  }
}

}  // namespace

Var Softmax(const Var &a) {
  const Tensor &av = a.value();
  std::vector<double> lse;
  RowLogSumExp(av, &lse);
  Tensor out(av.rows(), av.cols());
  for (int64_t r = 0; r < av.rows(); ++r)
    for (int64_t c = 0; c < av.cols(); ++c) out(r, c) = std::exp(av(r, c) - lse[r]);
  const int32_t ia = a.id();
  return a.graph().Record("softmax", std::move(out), {ia}, [ia](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    const Tensor &y = gr.value(self);
    Tensor &ga = gr.grad(ia);
    for (int64_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (int64_t c = 0; c < y.cols(); ++c) dot += gs(r, c) * y(r, c);
      for (int64_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (gs(r, c) - dot);
    }
  });
}

Var LogSoftmax(const Var &a) {
  const Tensor &av = a.value();
  std::vector<double> lse;
  RowLogSumExp(av, &lse);
  Tensor out(av.rows(), av.cols());
  for (int64_t r = 0; r < av.rows(); ++r)
    for (int64_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) - lse[r];
  const int32_t ia = a.id();
  return a.graph().Record("log_softmax", std::move(out), {ia}, [ia](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    const Tensor &y = gr.value(self);
    Tensor &ga = gr.grad(ia);
    for (int64_t r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (int64_t c = 0; c < y.cols(); ++c) total += gs(r, c);
      for (int64_t c = 0; c < y.cols(); ++c) ga(r, c) += gs(r, c) - std::exp(y(r, c)) * total;
    }
  });
}

Var LogSumExp(const Var &a) {
  const Tensor &av = a.value();
  std::vector<double> lse;
  RowLogSumExp(av, &lse);
  const int32_t ia = a.id();
  return a.graph().Record("logsumexp", Tensor::Column(lse), {ia}, [ia](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    const Tensor &x = gr.value(ia);
    const Tensor &y = gr.value(self);
    Tensor &ga = gr.grad(ia);
    for (int64_t r = 0; r < x.rows(); ++r)
      for (int64_t c = 0; c < x.cols(); ++c) ga(r, c) += gs[r] * std::exp(x(r, c) - y[r]);
  });
}

Var SquaredError(const Var &a, const Var &b) {
  Graph &g = SameGraph(a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  SEQREP_CHECK_SHAPE(av.SameShape(bv), "SquaredError shape mismatch " + av.ShapeString() +
                                           " vs " + bv.ShapeString());
  double s = 0.0;
  for (int64_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  const int32_t ia = a.id(), ib = b.id();
  return g.Record("squared_error", Tensor::Scalar(s), {ia, ib}, [ia, ib](Graph &gr, int32_t self) {
    const double gs = gr.grad(self)[0];
    const Tensor &x = gr.value(ia);
    const Tensor &y = gr.value(ib);
    Tensor *ga = gr.grad_if_needed(ia);
    Tensor *gb = gr.grad_if_needed(ib);
    for (int64_t i = 0; i < x.size(); ++i) {
      const double d = 2.0 * (x[i] - y[i]) * gs;
      if (ga) (*ga)[i] += d;
      if (gb) (*gb)[i] -= d;
    }
  });
}

namespace {

Var MultiplyByMask(const char *name, const Var &a, Tensor mask) {
  const Tensor &av = a.value();
  Tensor out(av.rows(), av.cols());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = av[i] * mask[i];
  const int32_t ia = a.id();
  return a.graph().Record(name, std::move(out), {ia},
                          [ia, mask = std::move(mask)](Graph &gr, int32_t self) {
                            const Tensor &gs = gr.grad(self);
                            Tensor &ga = gr.grad(ia);
                            for (int64_t i = 0; i < gs.size(); ++i) ga[i] += gs[i] * mask[i];
                          });
}

}  // namespace

Var Dropout(const Var &a, double p, Rng &rng) {
  SEQREP_CHECK_CONFIG(p >= 0.0 && p < 1.0, "dropout probability must be in [0, 1)");
  Tensor mask(a.rows(), a.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (auto &m : mask.values()) m = rng.Uniform() < p ? 0.0 : keep_scale;
  return MultiplyByMask("dropout", a, std::move(mask));
}

Var GaussianDropout(const Var &a, double gamma, Rng &rng) {
  SEQREP_CHECK_CONFIG(gamma >= 0.0, "gaussian dropout gamma must be >= 0");
  Tensor mask(a.rows(), a.cols());
  for (auto &m : mask.values()) m = 1.0 + gamma * rng.Normal();
  return MultiplyByMask("gaussian_dropout", a, std::move(mask));
}

// ---------------------------------------------------------------------------
// LSTM.

namespace {

// Applies the gate nonlinearities in place to a row of pre-activations
// [a_i a_f a_g a_o] and computes the new cell and hidden state.
inline void LstmForwardRow(double *gates, const double *c_prev, double *c_out, double *h_out,
                           int64_t hidden) {
  double *gi = gates, *gf = gates + hidden, *gg = gates + 2 * hidden, *go = gates + 3 * hidden;
  for (int64_t j = 0; j < hidden; ++j) {
    gi[j] = SigmoidValue(gi[j]);
    gf[j] = SigmoidValue(gf[j]);
    gg[j] = std::tanh(gg[j]);
    go[j] = SigmoidValue(go[j]);
    const double c = gf[j] * (c_prev ? c_prev[j] : 0.0) + gi[j] * gg[j];
    c_out[j] = c;
    h_out[j] = go[j] * std::tanh(c);
  }
}

// Given activated gates, previous cell, current cell and incoming dh/dc,
// writes pre-activation gradients into da and the gradient w.r.t. c_prev
// into dc_prev (if non-null).
inline void LstmBackwardRow(const double *gates, const double *c_prev, const double *c,
                            const double *dh, const double *dc_in, double *da, double *dc_prev,
                            int64_t hidden) {
  const double *gi = gates, *gf = gates + hidden, *gg = gates + 2 * hidden,
               *go = gates + 3 * hidden;
  for (int64_t j = 0; j < hidden; ++j) {
    const double tc = std::tanh(c[j]);
    const double d_o = dh[j] * tc;
    const double dc = dc_in[j] + dh[j] * go[j] * (1.0 - tc * tc);
    const double cp = c_prev ? c_prev[j] : 0.0;
    da[j] = dc * gg[j] * gi[j] * (1.0 - gi[j]);
    da[hidden + j] = dc * cp * gf[j] * (1.0 - gf[j]);
    da[2 * hidden + j] = dc * gi[j] * (1.0 - gg[j] * gg[j]);
    da[3 * hidden + j] = d_o * go[j] * (1.0 - go[j]);
    if (dc_prev) dc_prev[j] = dc * gf[j];
  }
}

}  // namespace

Var LstmCell(const Var &x_proj, const Var &h, const Var &c, const Var &w_h) {
  Graph &g = x_proj.graph();
  const Tensor &xv = x_proj.value();
  const Tensor &hv = h.value();
  const Tensor &cv = c.value();
  const Tensor &wv = w_h.value();
  const int64_t batch = xv.rows();
  const int64_t hidden = hv.cols();
  SEQREP_CHECK_SHAPE(xv.cols() == 4 * hidden && hv.rows() == batch && cv.SameShape(hv) &&
                         wv.rows() == hidden && wv.cols() == 4 * hidden,
                     "LstmCell shape mismatch");
  Tensor gates = xv;
  GemmAccumulate(hv, false, wv, false, &gates);
  Tensor out(batch, 2 * hidden);
  for (int64_t b = 0; b < batch; ++b)
    LstmForwardRow(gates.data() + b * 4 * hidden, cv.data() + b * hidden,
                   out.data() + b * 2 * hidden + hidden, out.data() + b * 2 * hidden, hidden);
  const int32_t ix = x_proj.id(), ih = h.id(), ic = c.id(), iw = w_h.id();
  return g.Record("lstm_cell", std::move(out), {ix, ih, ic, iw},
                  [ix, ih, ic, iw, gates = std::move(gates), hidden](Graph &gr, int32_t self) {
                    const Tensor &gs = gr.grad(self);
                    const Tensor &out = gr.value(self);
                    const Tensor &cv = gr.value(ic);
                    const int64_t batch = out.rows();
                    Tensor da(batch, 4 * hidden);
                    Tensor dc_prev(batch, hidden);
                    for (int64_t b = 0; b < batch; ++b) {
                      LstmBackwardRow(gates.data() + b * 4 * hidden, cv.data() + b * hidden,
                                      out.data() + b * 2 * hidden + hidden,
                                      gs.data() + b * 2 * hidden,
                                      gs.data() + b * 2 * hidden + hidden,
                                      da.data() + b * 4 * hidden, dc_prev.data() + b * hidden,
                                      hidden);
                    }
                    if (Tensor *gx = gr.grad_if_needed(ix)) gx->AddScaled(da);
                    if (Tensor *gc = gr.grad_if_needed(ic)) gc->AddScaled(dc_prev);
                    if (Tensor *ghp = gr.grad_if_needed(ih))
                      GemmAccumulate(da, false, gr.value(iw), true, ghp);
                    if (Tensor *gw = gr.grad_if_needed(iw))
                      GemmAccumulate(gr.value(ih), true, da, false, gw);
                  });
}

Var LstmScan(const Var &x_proj, const Var &w_h, bool reverse) {
  Graph &g = x_proj.graph();
  const Tensor &xv = x_proj.value();
  const Tensor &wv = w_h.value();
  const int64_t steps = xv.rows();
  const int64_t hidden = wv.rows();
  SEQREP_CHECK_SHAPE(xv.cols() == 4 * hidden && wv.cols() == 4 * hidden,
                     "LstmScan shape mismatch: x_proj " + xv.ShapeString() + ", w_h " +
                         wv.ShapeString());
  Tensor gates = xv;  // activated in place
  Tensor cells(steps, hidden);
  Tensor out(steps, hidden);
  const double *w = wv.data();
  for (int64_t s = 0; s < steps; ++s) {
    const int64_t t = reverse ? steps - 1 - s : s;
    const int64_t tp = reverse ? t + 1 : t - 1;
    double *a = gates.data() + t * 4 * hidden;
    const double *c_prev = nullptr;
    if (s > 0) {
      const double *h_prev = out.data() + tp * hidden;
      c_prev = cells.data() + tp * hidden;
      for (int64_t k = 0; k < hidden; ++k) {
        const double hk = h_prev[k];
        const double *wk = w + k * 4 * hidden;
        for (int64_t j = 0; j < 4 * hidden; ++j) a[j] += hk * wk[j];
      }
    }
    LstmForwardRow(a, c_prev, cells.data() + t * hidden, out.data() + t * hidden, hidden);
  }
  const int32_t ix = x_proj.id(), iw = w_h.id();
  return g.Record(
      "lstm_scan", std::move(out), {ix, iw},
      [ix, iw, reverse, hidden, gates = std::move(gates), cells = std::move(cells)](
          Graph &gr, int32_t self) {
        const Tensor &gs = gr.grad(self);
        const Tensor &hs = gr.value(self);
        const Tensor &wv = gr.value(iw);
        const int64_t steps = hs.rows();
        Tensor da(steps, 4 * hidden);
        std::vector<double> dh(static_cast<size_t>(hidden)), dc(static_cast<size_t>(hidden), 0.0),
            dh_rec(static_cast<size_t>(hidden), 0.0), dc_prev(static_cast<size_t>(hidden));
        for (int64_t s = steps - 1; s >= 0; --s) {
          const int64_t t = reverse ? steps - 1 - s : s;
          const int64_t tp = reverse ? t + 1 : t - 1;
          for (int64_t j = 0; j < hidden; ++j) dh[j] = gs(t, j) + dh_rec[j];
          const double *c_prev = s > 0 ? cells.data() + tp * hidden : nullptr;
          double *dat = da.data() + t * 4 * hidden;
          LstmBackwardRow(gates.data() + t * 4 * hidden, c_prev, cells.data() + t * hidden,
                          dh.data(), dc.data(), dat, dc_prev.data(), hidden);
          dc = dc_prev;
          // dh_rec = da_t * W_h^T
          const double *w = wv.data();
          for (int64_t k = 0; k < hidden; ++k) {
            const double *wk = w + k * 4 * hidden;
            double acc = 0.0;
            for (int64_t j = 0; j < 4 * hidden; ++j) acc += dat[j] * wk[j];
            dh_rec[k] = acc;
          }
        }
        if (Tensor *gx = gr.grad_if_needed(ix)) gx->AddScaled(da);
        if (Tensor *gw = gr.grad_if_needed(iw)) {
          // Previous hidden state of each step (zero for the first step).
          Tensor h_prev(steps, hidden);
          for (int64_t s = 1; s < steps; ++s) {
            const int64_t t = reverse ? steps - 1 - s : s;
            const int64_t tp = reverse ? t + 1 : t - 1;
            std::copy_n(hs.data() + tp * hidden, hidden, h_prev.data() + t * hidden);
          }
          GemmAccumulate(h_prev, true, da, false, gw);
        }
      });
}

Var PairConcat(const Var &a) {
  const Tensor &av = a.value();
  const int64_t pairs = av.rows() / 2;
  const int64_t width = av.cols();
  Tensor out(pairs, 2 * width,
             std::vector<double>(av.values().begin(), av.values().begin() + pairs * 2 * width));
  const int32_t ia = a.id();
  return a.graph().Record("pair_concat", std::move(out), {ia}, [ia](Graph &gr, int32_t self) {
    const Tensor &gs = gr.grad(self);
    Tensor &ga = gr.grad(ia);
    for (int64_t i = 0; i < gs.size(); ++i) ga[i] += gs[i];
  });
}

}  // namespace seqrep
