// core/src/nn.cc

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

#include "seqrep/nn.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "seqrep/binary-io.h"
#include "seqrep/error.h"
#include "seqrep/ops.h"

namespace seqrep {

Parameter *ParamStore::Add(const std::string &name, Tensor init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(init);
  p->ZeroGrad();
  Parameter *raw = p.get();
  owned_.push_back(std::move(p));
  order_.push_back(raw);
  index_[name] = raw;
  return raw;
}

Parameter *ParamStore::Get(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
  return it->second;
}

std::vector<Parameter *> ParamStore::WithPrefix(const std::string &prefix) const {
  std::vector<Parameter *> out;
  for (Parameter *p : order_)
    if (p->name.compare(0, prefix.size(), prefix) == 0) out.push_back(p);
  return out;
}

int64_t ParamStore::NumValues() const {
  int64_t n = 0;
  for (Parameter *p : order_) n += p->value.size();
  return n;
}

void ParamStore::ZeroGrad() {
  for (Parameter *p : order_) p->ZeroGrad();
}

void ParamStore::Save(const std::string &path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  binio::WriteMagic(os, "SRC1");
  binio::WriteU32(os, static_cast<uint32_t>(order_.size()));
  for (const Parameter *p : order_) {
    binio::WriteString(os, p->name);
    binio::WriteU32(os, 2);
    binio::WriteU32(os, static_cast<uint32_t>(p->value.rows()));
    binio::WriteU32(os, static_cast<uint32_t>(p->value.cols()));
    for (double v : p->value.values()) binio::WriteF32(os, static_cast<float>(v));
  }
  if (!os) throw IoError("write failed for " + path);
}

std::vector<CheckpointTensor> ReadCheckpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  const std::string what = "checkpoint " + path;
  binio::ExpectMagic(is, "SRC1", what);
  const uint32_t n = binio::ReadU32(is, what);
  std::vector<CheckpointTensor> out;
  for (uint32_t i = 0; i < n; ++i) {
    CheckpointTensor ct;
    ct.name = binio::ReadString(is, what);
    const uint32_t rank = binio::ReadU32(is, what);
    if (rank != 2) throw IoError("tensor " + ct.name + " in " + path + " has unsupported rank");
    const uint32_t r = binio::ReadU32(is, what);
    const uint32_t c = binio::ReadU32(is, what);
    ct.value = Tensor(r, c);
    for (auto &v : ct.value.values()) v = binio::ReadF32(is, what);
    out.push_back(std::move(ct));
  }
  return out;
}

std::vector<std::string> ParamStore::Load(const std::string &path, bool require_all) {
  std::vector<CheckpointTensor> tensors = ReadCheckpoint(path);
  std::vector<std::string> unknown, bad_shape, missing;
  std::set<std::string> seen;
  for (const auto &ct : tensors) {
    seen.insert(ct.name);
    auto it = index_.find(ct.name);
    if (it == index_.end()) {
      unknown.push_back(ct.name);
      continue;
    }
    if (!it->second->value.SameShape(ct.value))
      bad_shape.push_back(ct.name + " (file " + ct.value.ShapeString() + ", model " +
                          it->second->value.ShapeString() + ")");
  }
  for (const Parameter *p : order_)
    if (!seen.count(p->name)) missing.push_back(p->name);
  auto join = [](const std::vector<std::string> &v) {
    std::string s;
    for (const auto &x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!unknown.empty())
    throw ConfigError("checkpoint " + path + " has tensors with no matching parameter: " + join(unknown));
  if (!bad_shape.empty())
    throw ShapeError("checkpoint " + path + " shape mismatch: " + join(bad_shape));
  if (require_all && !missing.empty())
    throw ConfigError("checkpoint " + path + " lacks parameters: " + join(missing));
  for (auto &ct : tensors) index_[ct.name]->value = std::move(ct.value);
  return missing;
}

int64_t ParamStore::CopyMatching(const ParamStore &other, const std::string &prefix) {
  int64_t n = 0;
  for (Parameter *p : order_) {
    if (p->name.compare(0, prefix.size(), prefix) != 0 || !other.Has(p->name)) continue;
    const Parameter *q = other.Get(p->name);
    SEQREP_CHECK_SHAPE(p->value.SameShape(q->value), "cannot copy parameter " + p->name + ": " +
                                                         q->value.ShapeString() + " vs " +
                                                         p->value.ShapeString());
    p->value = q->value;
    ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------

Var Activate(const Var &x, Activation act) {
  switch (act) {
    case Activation::kTanh: return Tanh(x);
    case Activation::kRelu: return Relu(x);
    case Activation::kSigmoid: return Sigmoid(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

Activation ParseActivation(const std::string &s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string ActivationName(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Linear::Linear(ParamStore *store, const std::string &name, int64_t in, int64_t out, Rng &rng,
               bool bias)
    : in_(in), out_(out) {
  SEQREP_CHECK_CONFIG(in >= 1 && out >= 1, "linear layer " + name + " needs positive sizes");
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  w_ = store->Add(name + ".W", rng.UniformTensor(in, out, -a, a));
  if (bias) b_ = store->Add(name + ".b", Tensor(1, out));
}

Var Linear::Forward(Graph &g, const Var &x) const {
  SEQREP_CHECK_SHAPE(x.cols() == in_, "linear layer " + w_->name + " expects " +
                                          std::to_string(in_) + " inputs, got " +
                                          x.value().ShapeString());
  Var y = MatMul(x, g.Param(w_));
  return b_ ? Add(y, g.Param(b_)) : y;
}

Mlp::Mlp(ParamStore *store, const std::string &name, int64_t in,
         const std::vector<int64_t> &widths, Activation act, Rng &rng, bool activate_last,
         double dropout)
    : in_(in), act_(act), activate_last_(activate_last), dropout_(dropout) {
  SEQREP_CHECK_CONFIG(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  int64_t prev = in;
  for (size_t i = 0; i < widths.size(); ++i) {
    layers_.emplace_back(store, name + ".l" + std::to_string(i), prev, widths[i], rng);
    prev = widths[i];
  }
}

Var Mlp::Forward(Graph &g, const Var &x, const RunMode &mode) const {
  Var h = x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].Forward(g, h);
    if (i + 1 < layers_.size() || activate_last_) {
      h = Activate(h, act_);
      if (mode.train && dropout_ > 0.0 && mode.rng) h = Dropout(h, dropout_, *mode.rng);
    }
  }
  return h;
}

Lstm::Lstm(ParamStore *store, const std::string &name, int64_t in, int64_t hidden, Rng &rng)
    : hidden_(hidden) {
  SEQREP_CHECK_CONFIG(in >= 1 && hidden >= 1, "LSTM " + name + " needs positive sizes");
  const double a = 1.0 / std::sqrt(static_cast<double>(hidden));
  wx_ = store->Add(name + ".Wx", rng.UniformTensor(in, 4 * hidden, -a, a));
  Tensor b(1, 4 * hidden);
  for (int64_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  b_ = store->Add(name + ".b", std::move(b));
  wh_ = store->Add(name + ".Wh", rng.UniformTensor(hidden, 4 * hidden, -a, a));
}

Var Lstm::Forward(Graph &g, const Var &x, bool reverse) const {
  Var proj = Add(MatMul(x, g.Param(wx_)), g.Param(b_));
  return LstmScan(proj, g.Param(wh_), reverse);
}

RecurrentStack::RecurrentStack(ParamStore *store, const std::string &name, int64_t in,
                               const RecurrentStackConfig &cfg, Rng &rng)
    : cfg_(cfg) {
  SEQREP_CHECK_CONFIG(cfg.layers >= 0, "recurrent layer count must be >= 0");
  SEQREP_CHECK_CONFIG(cfg.pyramid.empty() || static_cast<int64_t>(cfg.pyramid.size()) == cfg.layers,
                      "pyramid flags must have one entry per recurrent layer");
  int64_t width = in;
  for (int64_t i = 0; i < cfg.layers; ++i) {
    const std::string ln = name + ".l" + std::to_string(i);
    fwd_.emplace_back(store, ln + ".fwd", width, cfg.hidden, rng);
    if (cfg.bidirectional) bwd_.emplace_back(store, ln + ".bwd", width, cfg.hidden, rng);
    width = cfg.hidden * (cfg.bidirectional ? 2 : 1);
    if (!cfg.pyramid.empty() && cfg.pyramid[i]) width *= 2;
  }
  out_ = width;
}

Var RecurrentStack::Forward(Graph &g, const Var &x, const RunMode &mode) const {
  Var h = x;
  for (size_t i = 0; i < fwd_.size(); ++i) {
    Var f = fwd_[i].Forward(g, h, false);
    h = cfg_.bidirectional ? ConcatCols({f, bwd_[i].Forward(g, h, true)}) : f;
    if (mode.train && cfg_.dropout > 0.0 && mode.rng) h = Dropout(h, cfg_.dropout, *mode.rng);
    if (!cfg_.pyramid.empty() && cfg_.pyramid[i]) {
      SEQREP_CHECK_SHAPE(h.rows() >= 2, "pyramidal layer needs at least two frames");
      h = PairConcat(h);
    }
  }
  return h;
}

int64_t RecurrentStack::OutSteps(int64_t steps) const {
  for (size_t i = 0; i < fwd_.size(); ++i)
    if (!cfg_.pyramid.empty() && cfg_.pyramid[i]) steps /= 2;
  return steps;
}

GaussianHead::GaussianHead(ParamStore *store, const std::string &name, int64_t in, int64_t dim,
                           Rng &rng, bool nonlinear_logvar)
    : nonlinear_(nonlinear_logvar) {
  mu_ = Linear(store, name + ".mu", in, dim, rng);
  if (nonlinear_) {
    lv_hidden_ = Linear(store, name + ".lv_hidden", in, dim, rng);
    lv_ = Linear(store, name + ".lv", dim, dim, rng);
  } else {
    lv_ = Linear(store, name + ".lv", in, dim, rng);
  }
}

GaussianVar GaussianHead::Forward(Graph &g, const Var &h) const {
  Var mu = mu_.Forward(g, h);
  Var lv = nonlinear_ ? lv_.Forward(g, Tanh(lv_hidden_.Forward(g, h))) : lv_.Forward(g, h);
  return {mu, ClampLogVar(lv)};
}

Var NoiseLike(Graph &g, int64_t rows, int64_t cols, Rng &rng) {
  return g.Constant(rng.NormalTensor(rows, cols), "noise");
}

Var SampleLatent(Graph &g, const GaussianVar &q, const RunMode &mode, double kappa) {
  if (!mode.train || mode.rng == nullptr || kappa == 0.0) return q.mu;
  return ReparamSample(q, NoiseLike(g, q.mu.rows(), q.mu.cols(), *mode.rng), kappa);
}

}  // namespace seqrep
