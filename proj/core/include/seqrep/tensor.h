// seqrep/tensor.h

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

#ifndef SEQREP_TENSOR_H_
#define SEQREP_TENSOR_H_

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace seqrep {

/// Dense row-major matrix of doubles.  Every value in the library is a
/// Tensor of rank 2: vectors are 1 x n rows, scalars are 1 x 1.  Sequences
/// are T x D with time along the rows.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int64_t rows, int64_t cols, double fill = 0.0);
  Tensor(int64_t rows, int64_t cols, std::vector<double> data);

  static Tensor Scalar(double v) { return Tensor(1, 1, v); }
  static Tensor Row(std::vector<double> values);
  static Tensor Column(const std::vector<double> &values);
  static Tensor FromRows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Identity(int64_t n);

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  int64_t size() const { return rows_ * cols_; }
  bool empty() const { return size() == 0; }
  std::vector<int64_t> shape() const { return {rows_, cols_}; }
  std::string ShapeString() const;

  double &operator()(int64_t r, int64_t c) { return data_[r * cols_ + c]; }
  double operator()(int64_t r, int64_t c) const { return data_[r * cols_ + c]; }
  double &operator[](int64_t i) { return data_[i]; }
  double operator[](int64_t i) const { return data_[i]; }

  double *data() { return data_.data(); }
  const double *data() const { return data_.data(); }
  const std::vector<double> &values() const { return data_; }
  std::vector<double> &values() { return data_; }

  std::span<double> row(int64_t r) { return {data_.data() + r * cols_, static_cast<size_t>(cols_)}; }
  std::span<const double> row(int64_t r) const {
    return {data_.data() + r * cols_, static_cast<size_t>(cols_)};
  }

  /// Value of a 1 x 1 tensor; throws ShapeError otherwise.
  double item() const;
  bool AllFinite() const;
  bool SameShape(const Tensor &o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  void Fill(double v);
  /// this += alpha * other (same shape).
  void AddScaled(const Tensor &other, double alpha = 1.0);
  double Sum() const;
  double MaxAbs() const;

  Tensor RowSlice(int64_t begin, int64_t end) const;
  Tensor ColSlice(int64_t begin, int64_t end) const;
  Tensor Transposed() const;

  bool operator==(const Tensor &o) const { return SameShape(o) && data_ == o.data_; }

 private:
  int64_t rows_ = 0;
  int64_t cols_ = 0;
  std::vector<double> data_;
};

/// C = op(A) * op(B), written into *c (resized).  Backed by Eigen.
void Gemm(const Tensor &a, bool trans_a, const Tensor &b, bool trans_b, Tensor *c);
/// C += op(A) * op(B); *c must already have the right shape.
void GemmAccumulate(const Tensor &a, bool trans_a, const Tensor &b, bool trans_b, Tensor *c);

Tensor ConcatCols(const std::vector<const Tensor *> &parts);
Tensor ConcatRows(const std::vector<const Tensor *> &parts);

}  // namespace seqrep

#endif  // SEQREP_TENSOR_H_
