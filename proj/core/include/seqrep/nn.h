// seqrep/nn.h

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

#ifndef SEQREP_NN_H_
#define SEQREP_NN_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "seqrep/distributions.h"
#include "seqrep/graph.h"
#include "seqrep/rng.h"

namespace seqrep {

/// Ordered, named collection of parameters.  Names are unique; iteration
/// order is insertion order, which fixes checkpoint layout and the order of
/// optimizer updates.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore &) = delete;
  ParamStore &operator=(const ParamStore &) = delete;

  /// Throws ConfigError if the name already exists.
  Parameter *Add(const std::string &name, Tensor init);
  Parameter *Get(const std::string &name) const;
  bool Has(const std::string &name) const { return index_.count(name) > 0; }
  const std::vector<Parameter *> &All() const { return order_; }
  /// Parameters whose name starts with `prefix`.
  std::vector<Parameter *> WithPrefix(const std::string &prefix) const;
  size_t size() const { return order_.size(); }
  int64_t NumValues() const;
  void ZeroGrad();

  /// Checkpoint: "SRC1" | u32 count | count x (u32 name_len | name | u32 rank = 2 |
  /// u32 rows | u32 cols | rows*cols float32), little-endian, in store order.
  void Save(const std::string &path) const;
  /// Loads every tensor of the file into the parameter of the same name.
  /// With `require_all` every store parameter must be present in the file;
  /// otherwise missing ones are left untouched (their names are returned).
  /// Tensors in the file with no matching parameter, and shape mismatches,
  /// are hard errors listing the offending names.
  std::vector<std::string> Load(const std::string &path, bool require_all = true);
  /// Copies values of same-named parameters from `other`; mismatched shapes
  /// throw.  Returns the number of parameters copied.
  int64_t CopyMatching(const ParamStore &other, const std::string &prefix = "");

 private:
  std::vector<std::unique_ptr<Parameter>> owned_;
  std::vector<Parameter *> order_;
  std::map<std::string, Parameter *> index_;
};

struct CheckpointTensor {
  std::string name;
  Tensor value;
};
std::vector<CheckpointTensor> ReadCheckpoint(const std::string &path);

enum class Activation { kTanh, kRelu, kSigmoid, kIdentity };
Var Activate(const Var &x, Activation act);
Activation ParseActivation(const std::string &s);
std::string ActivationName(Activation a);

/// Per-call context: dropout and noise are only applied in training mode.
struct RunMode {
  bool train = false;
  Rng *rng = nullptr;
};

class Linear {
 public:
  Linear() = default;
  /// Glorot-uniform weights, zero bias.
  Linear(ParamStore *store, const std::string &name, int64_t in, int64_t out, Rng &rng,
         bool bias = true);
  /// x (n x in) -> n x out.
  Var Forward(Graph &g, const Var &x) const;
  int64_t in() const { return in_; }
  int64_t out() const { return out_; }
  Parameter *weight() const { return w_; }
  Parameter *bias() const { return b_; }

 private:
  int64_t in_ = 0, out_ = 0;
  Parameter *w_ = nullptr;
  Parameter *b_ = nullptr;
};

/// Stack of Linear layers; the activation follows every layer except the
/// last unless `activate_last`.  Dropout (rate `dropout`) follows each
/// activation in training mode.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore *store, const std::string &name, int64_t in, const std::vector<int64_t> &widths,
      Activation act, Rng &rng, bool activate_last = false, double dropout = 0.0);
  Var Forward(Graph &g, const Var &x, const RunMode &mode = {}) const;
  int64_t in() const { return in_; }
  int64_t out() const { return layers_.empty() ? in_ : layers_.back().out(); }
  bool empty() const { return layers_.empty(); }
  const std::vector<Linear> &layers() const { return layers_; }

 private:
  int64_t in_ = 0;
  std::vector<Linear> layers_;
  Activation act_ = Activation::kTanh;
  bool activate_last_ = false;
  double dropout_ = 0.0;
};

/// Single-direction LSTM over a T x in sequence, zero initial state.
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParamStore *store, const std::string &name, int64_t in, int64_t hidden, Rng &rng);
  Var Forward(Graph &g, const Var &x, bool reverse = false) const;
  int64_t hidden() const { return hidden_; }

 private:
  int64_t hidden_ = 0;
  Parameter *wx_ = nullptr;  // in x 4H
  Parameter *b_ = nullptr;   // 1 x 4H, forget-gate slice initialised to 1
  Parameter *wh_ = nullptr;  // H x 4H
};

struct RecurrentStackConfig {
  int64_t layers = 1;
  int64_t hidden = 32;
  bool bidirectional = true;
  /// pyramid[i]: pair-concatenate the output of layer i (halving time).
  std::vector<bool> pyramid;
  double dropout = 0.0;
};

/// Stack of (bi)directional LSTM layers with optional pyramidal subsampling.
class RecurrentStack {
 public:
  RecurrentStack() = default;
  RecurrentStack(ParamStore *store, const std::string &name, int64_t in,
                 const RecurrentStackConfig &cfg, Rng &rng);
  Var Forward(Graph &g, const Var &x, const RunMode &mode = {}) const;
  /// Output width per time step.
  int64_t out() const { return out_; }
  /// Number of frames produced from `steps` input frames.
  int64_t OutSteps(int64_t steps) const;
  int64_t layers() const { return static_cast<int64_t>(fwd_.size()); }
  bool empty() const { return fwd_.empty(); }

 private:
  RecurrentStackConfig cfg_;
  std::vector<Lstm> fwd_, bwd_;
  int64_t out_ = 0;
};

/// Posterior head mapping n x in features to a diagonal Gaussian.
/// mu = Linear(h); logvar = Linear(h) or, if `nonlinear_logvar`,
/// Linear(tanh(Linear(h))).  logvar is clamped.
class GaussianHead {
 public:
  GaussianHead() = default;
  GaussianHead(ParamStore *store, const std::string &name, int64_t in, int64_t dim, Rng &rng,
               bool nonlinear_logvar = false);
  GaussianVar Forward(Graph &g, const Var &h) const;
  int64_t dim() const { return mu_.out(); }

 private:
  Linear mu_, lv_hidden_, lv_;
  bool nonlinear_ = false;
};

/// Samples a standard-normal noise matrix as a graph constant.
Var NoiseLike(Graph &g, int64_t rows, int64_t cols, Rng &rng);
/// mu + kappa * delta * sigma in training mode with an Rng, mu otherwise.
Var SampleLatent(Graph &g, const GaussianVar &q, const RunMode &mode, double kappa = 1.0);

}  // namespace seqrep

#endif  // SEQREP_NN_H_
