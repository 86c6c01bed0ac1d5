// core/src/tensor.cc

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

#include "seqrep/tensor.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "seqrep/error.h"

namespace seqrep {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

}  // namespace

Tensor::Tensor(int64_t rows, int64_t cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), fill) {
  SEQREP_CHECK_SHAPE(rows >= 0 && cols >= 0, "negative tensor dimension");
}

Tensor::Tensor(int64_t rows, int64_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  SEQREP_CHECK_SHAPE(rows >= 0 && cols >= 0, "negative tensor dimension");
  SEQREP_CHECK_SHAPE(static_cast<int64_t>(data_.size()) == rows * cols,
                     "tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
}

Tensor Tensor::Row(std::vector<double> values) {
  const auto n = static_cast<int64_t>(values.size());
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::Column(const std::vector<double> &values) {
  return Tensor(static_cast<int64_t>(values.size()), 1, values);
}

Tensor Tensor::FromRows(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<int64_t>(rows.size());
  const int64_t c = r == 0 ? 0 : static_cast<int64_t>(rows.begin()->size());
  std::vector<double> data;
  data.reserve(static_cast<size_t>(r * c));
  for (const auto &row : rows) {
    SEQREP_CHECK_SHAPE(static_cast<int64_t>(row.size()) == c, "ragged rows in FromRows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::Identity(int64_t n) {
  Tensor t(n, n);
  for (int64_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor::ShapeString() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

double Tensor::item() const {
  SEQREP_CHECK_SHAPE(rows_ == 1 && cols_ == 1, "item() on non-scalar tensor " + ShapeString());
  return data_[0];
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::AddScaled(const Tensor &other, double alpha) {
  SEQREP_CHECK_SHAPE(SameShape(other), "AddScaled shape mismatch " + ShapeString() + " vs " +
                                           other.ShapeString());
  const size_t n = data_.size();
  const double *src = other.data_.data();
  double *dst = data_.data();
  for (size_t i = 0; i < n; ++i) dst[i] += alpha * src[i];
}

double Tensor::Sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::MaxAbs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor Tensor::RowSlice(int64_t begin, int64_t end) const {
  SEQREP_CHECK_SHAPE(0 <= begin && begin <= end && end <= rows_, "row slice out of range");
  return Tensor(end - begin, cols_,
                std::vector<double>(data_.begin() + begin * cols_, data_.begin() + end * cols_));
}

Tensor Tensor::ColSlice(int64_t begin, int64_t end) const {
  SEQREP_CHECK_SHAPE(0 <= begin && begin <= end && end <= cols_, "col slice out of range");
  Tensor out(rows_, end - begin);
  for (int64_t r = 0; r < rows_; ++r)
    std::copy(data_.begin() + r * cols_ + begin, data_.begin() + r * cols_ + end,
              out.data_.begin() + r * (end - begin));
  return out;
}

Tensor Tensor::Transposed() const {
  Tensor out(cols_, rows_);
  for (int64_t r = 0; r < rows_; ++r)
    for (int64_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

void Gemm(const Tensor &a, bool trans_a, const Tensor &b, bool trans_b, Tensor *c) {
  const int64_t m = trans_a ? a.cols() : a.rows();
  const int64_t n = trans_b ? b.rows() : b.cols();
  *c = Tensor(m, n);
  GemmAccumulate(a, trans_a, b, trans_b, c);
}

void GemmAccumulate(const Tensor &a, bool trans_a, const Tensor &b, bool trans_b, Tensor *c) {
  const int64_t m = trans_a ? a.cols() : a.rows();
  const int64_t k = trans_a ? a.rows() : a.cols();
  const int64_t kb = trans_b ? b.cols() : b.rows();
  const int64_t n = trans_b ? b.rows() : b.cols();
  SEQREP_CHECK_SHAPE(k == kb, "matmul inner dimension mismatch: " + a.ShapeString() +
                                  (trans_a ? "^T" : "") + " * " + b.ShapeString() +
                                  (trans_b ? "^T" : ""));
  SEQREP_CHECK_SHAPE(c->rows() == m && c->cols() == n, "matmul output shape mismatch");
  if (m == 0 || n == 0 || k == 0) return;
  ConstMap am(a.data(), a.rows(), a.cols());
  ConstMap bm(b.data(), b.rows(), b.cols());
  MutMap cm(c->data(), m, n);
  if (!trans_a && !trans_b) {
    cm.noalias() += am * bm;
  } else if (trans_a && !trans_b) {
    cm.noalias() += am.transpose() * bm;
  } else if (!trans_a && trans_b) {
    cm.noalias() += am * bm.transpose();
  } else {
    cm.noalias() += am.transpose() * bm.transpose();
  }
}

Tensor ConcatCols(const std::vector<const Tensor *> &parts) {
  SEQREP_CHECK_SHAPE(!parts.empty(), "ConcatCols of nothing");
  const int64_t rows = parts.front()->rows();
  int64_t cols = 0;
  for (const Tensor *p : parts) {
    SEQREP_CHECK_SHAPE(p->rows() == rows, "ConcatCols row mismatch");
    cols += p->cols();
  }
  Tensor out(rows, cols);
  for (int64_t r = 0; r < rows; ++r) {
    int64_t off = 0;
    for (const Tensor *p : parts) {
      auto src = p->row(r);
      std::copy(src.begin(), src.end(), out.data() + r * cols + off);
      off += p->cols();
    }
  }
  return out;
}

Tensor ConcatRows(const std::vector<const Tensor *> &parts) {
  SEQREP_CHECK_SHAPE(!parts.empty(), "ConcatRows of nothing");
  const int64_t cols = parts.front()->cols();
  int64_t rows = 0;
  for (const Tensor *p : parts) {
    SEQREP_CHECK_SHAPE(p->cols() == cols, "ConcatRows column mismatch");
    rows += p->rows();
  }
  std::vector<double> data;
  data.reserve(static_cast<size_t>(rows * cols));
  for (const Tensor *p : parts) data.insert(data.end(), p->values().begin(), p->values().end());
  return Tensor(rows, cols, std::move(data));
}

}  // namespace seqrep
