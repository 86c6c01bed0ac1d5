// seqrep/ops.h

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

#ifndef SEQREP_OPS_H_
#define SEQREP_OPS_H_

// Differentiable operations on Graph nodes.  Every op records one node whose
// backward function accumulates into its inputs.
//
// Binary elementwise ops broadcast the second operand when it is 1 x 1,
// 1 x cols (one row, repeated down), or rows x 1 (one column, repeated across).

#include <cstdint>
#include <vector>

#include "seqrep/graph.h"
#include "seqrep/rng.h"

namespace seqrep {

// Elementwise arithmetic.
Var Add(const Var &a, const Var &b);
Var Sub(const Var &a, const Var &b);
Var Mul(const Var &a, const Var &b);
Var Div(const Var &a, const Var &b);
Var Scale(const Var &a, double s);
Var AddScalar(const Var &a, double s);
Var Neg(const Var &a);

// Elementwise functions.
Var Exp(const Var &a);
Var Log(const Var &a);
Var Tanh(const Var &a);
Var Sigmoid(const Var &a);
Var Relu(const Var &a);
Var Square(const Var &a);
Var Sqrt(const Var &a);
Var Abs(const Var &a);
/// Clamps into [lo, hi]; gradient passes only strictly inside the interval.
Var Clamp(const Var &a, double lo, double hi);

// Linear algebra and layout.
Var MatMul(const Var &a, const Var &b);
Var Transpose(const Var &a);
Var ConcatCols(const std::vector<Var> &parts);
Var ConcatRows(const std::vector<Var> &parts);
Var SliceRows(const Var &a, int64_t begin, int64_t end);
Var SliceCols(const Var &a, int64_t begin, int64_t end);
Var Reshape(const Var &a, int64_t rows, int64_t cols);
/// out[i] = a[index[i]] (rows); indices may repeat.
Var GatherRows(const Var &a, const std::vector<int64_t> &index);
/// out[i, 0] = a[i, index[i]].
Var PickPerRow(const Var &a, const std::vector<int64_t> &index);
/// Reverses the row order.
Var ReverseRows(const Var &a);

// Reductions.
Var Sum(const Var &a);
Var Mean(const Var &a);
/// Per-row sum, rows x 1.
Var SumCols(const Var &a);
/// Per-column sum, 1 x cols.
Var SumRows(const Var &a);
/// Per-row dot product of two equally shaped matrices, rows x 1.
Var RowDot(const Var &a, const Var &b);

// Normalisers (row-wise).
Var Softmax(const Var &a);
Var LogSoftmax(const Var &a);
/// Row-wise log-sum-exp, rows x 1.
Var LogSumExp(const Var &a);

// Losses and regularisers.
/// Sum over all entries of (a - b)^2, 1 x 1.
Var SquaredError(const Var &a, const Var &b);
/// Inverted Bernoulli dropout: entries are zeroed with probability p and the
/// survivors scaled by 1/(1-p).
Var Dropout(const Var &a, double p, Rng &rng);
/// Multiplicative Gaussian dropout: entries multiplied by N(1, gamma^2).
Var GaussianDropout(const Var &a, double gamma, Rng &rng);

// Recurrent building blocks.  Gate layout along the 4H columns is
// [input, forget, cell candidate, output]:
//   i = sigmoid(a_i), f = sigmoid(a_f), g = tanh(a_g), o = sigmoid(a_o)
//   c' = f * c + i * g,  h' = o * tanh(c')
// where a = x_proj + h W_h (x_proj already includes the input bias).

/// One LSTM step for a batch.  Returns [h' | c'] as B x 2H.
Var LstmCell(const Var &x_proj, const Var &h, const Var &c, const Var &w_h);
/// Full LSTM scan over the rows of x_proj (T x 4H) from zero state; runs from
/// the last row to the first when reverse is set.  Returns the T x H hidden
/// states aligned with the input rows.
Var LstmScan(const Var &x_proj, const Var &w_h, bool reverse);
/// Pyramidal subsampling: row k of the output is [a(2k) | a(2k+1)]; an odd
/// trailing row is dropped.  T x H -> floor(T/2) x 2H.
Var PairConcat(const Var &a);

}  // namespace seqrep

#endif  // SEQREP_OPS_H_
