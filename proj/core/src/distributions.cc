// core/src/distributions.cc

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

#include "seqrep/distributions.h"

#include <cmath>
#include <fstream>
#include <numbers>

#include "seqrep/binary-io.h"
#include "seqrep/error.h"
#include "seqrep/ops.h"

namespace seqrep {

namespace {

void CheckSameShape(const Tensor &a, const Tensor &b, const char *what) {
  SEQREP_CHECK_SHAPE(a.SameShape(b), std::string(what) + ": dimension mismatch " +
                                         a.ShapeString() + " vs " + b.ShapeString());
}

}  // namespace

GaussianVar Bind(Graph &g, const DiagGaussian &q, bool requires_grad) {
  CheckSameShape(q.mu, q.logvar, "Bind");
  if (requires_grad) return {g.Input(q.mu, "mu"), g.Input(q.logvar, "logvar")};
  return {g.Constant(q.mu, "mu"), g.Constant(q.logvar, "logvar")};
}

Var ClampLogVar(const Var &logvar) { return Clamp(logvar, kLogVarMin, kLogVarMax); }

Var ReparamSample(const GaussianVar &q, const Var &noise, double kappa) {
  CheckSameShape(q.mu.value(), noise.value(), "ReparamSample");
  if (kappa == 0.0) return q.mu;
  Var sigma = Exp(Scale(q.logvar, 0.5));
  return Add(q.mu, Scale(Mul(noise, sigma), kappa));
}

Var KlToStandard(const GaussianVar &q) {
  CheckSameShape(q.mu.value(), q.logvar.value(), "KlToStandard");
  // 0.5 * sum(mu^2 + exp(lv) - lv - 1)
  Var inner = Sub(Add(Square(q.mu), Exp(q.logvar)), q.logvar);
  return Scale(AddScalar(SumCols(inner), -static_cast<double>(q.mu.cols())), 0.5);
}

Var KlVarianceTerm(const GaussianVar &q) {
  Var inner = Sub(Exp(q.logvar), q.logvar);
  return Scale(AddScalar(SumCols(inner), -static_cast<double>(q.logvar.cols())), 0.5);
}

Var KlDiagDiag(const GaussianVar &q, const GaussianVar &p) {
  CheckSameShape(q.mu.value(), p.mu.value(), "KlDiagDiag");
  CheckSameShape(q.logvar.value(), p.logvar.value(), "KlDiagDiag");
  // 0.5 * sum(lv_p - lv_q + (exp(lv_q) + (mu_q - mu_p)^2) / exp(lv_p) - 1)
  Var ratio = Div(Add(Exp(q.logvar), Square(Sub(q.mu, p.mu))), Exp(p.logvar));
  Var inner = Add(Sub(p.logvar, q.logvar), ratio);
  return Scale(AddScalar(SumCols(inner), -static_cast<double>(q.mu.cols())), 0.5);
}

Var GaussianLogLik(const Var &x, const Var &mean) {
  CheckSameShape(x.value(), mean.value(), "GaussianLogLik");
  return Scale(SumCols(Square(Sub(x, mean))), -0.5);
}

Tensor ReparamSample(const DiagGaussian &q, const Tensor &noise, double kappa) {
  CheckSameShape(q.mu, noise, "ReparamSample");
  CheckSameShape(q.mu, q.logvar, "ReparamSample");
  Tensor out = q.mu;
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] += kappa * noise[i] * std::exp(0.5 * q.logvar[i]);
  return out;
}

double KlToStandard(const DiagGaussian &q) {
  CheckSameShape(q.mu, q.logvar, "KlToStandard");
  double kl = 0.0;
  for (int64_t i = 0; i < q.mu.size(); ++i)
    kl += 0.5 * (q.mu[i] * q.mu[i] + std::exp(q.logvar[i]) - q.logvar[i] - 1.0);
  return kl;
}

double KlDiagDiag(const DiagGaussian &q, const DiagGaussian &p) {
  CheckSameShape(q.mu, p.mu, "KlDiagDiag");
  CheckSameShape(q.logvar, p.logvar, "KlDiagDiag");
  double kl = 0.0;
  for (int64_t i = 0; i < q.mu.size(); ++i) {
    const double d = q.mu[i] - p.mu[i];
    kl += 0.5 * (p.logvar[i] - q.logvar[i] + (std::exp(q.logvar[i]) + d * d) /
                 std::exp(p.logvar[i]) - 1.0);
  }
  return kl;
}

double GaussianLogLik(const Tensor &x, const Tensor &mean) {
  CheckSameShape(x, mean, "GaussianLogLik");
  double s = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    s += d * d;
  }
  return -0.5 * s;
}

double LogDensity(const DiagGaussian &q, int64_t r, std::span<const double> z) {
  const int64_t d = q.dim();
  SEQREP_CHECK_SHAPE(static_cast<int64_t>(z.size()) == d, "LogDensity dimension mismatch");
  double s = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
  for (int64_t i = 0; i < d; ++i) {
    const double lv = q.logvar(r, i);
    const double diff = z[i] - q.mu(r, i);
    s -= 0.5 * (lv + diff * diff / std::exp(lv));
  }
  return s;
}

// ---------------------------------------------------------------------------
// PriorStore

void PriorStore::Builder::Put(const std::string &id, int64_t t, std::vector<double> mu,
                              std::vector<double> logvar) {
  SEQREP_CHECK_SHAPE(mu.size() == logvar.size(), "prior entry mu/logvar size mismatch");
  auto [it, inserted] = entries_.try_emplace({id, t}, Entry{std::move(mu), std::move(logvar)});
  if (!inserted)
    throw ConfigError("prior store entry (" + id + ", " + std::to_string(t) +
                      ") written twice for epoch tag " + std::to_string(tag_));
}

void PriorStore::Builder::PutRows(const std::string &id, const DiagGaussian &q, int64_t first_t) {
  for (int64_t r = 0; r < q.count(); ++r) {
    auto mu = q.mu.row(r);
    auto lv = q.logvar.row(r);
    Put(id, first_t + r, {mu.begin(), mu.end()}, {lv.begin(), lv.end()});
  }
}

PriorStore PriorStore::Builder::Finish() && {
  PriorStore s;
  s.tag_ = tag_;
  s.entries_ = std::move(entries_);
  return s;
}

bool PriorStore::Contains(const std::string &id, int64_t t) const {
  return entries_.count({id, t}) > 0;
}

const PriorStore::Entry &PriorStore::Lookup(const std::string &id, int64_t t) const {
  auto it = entries_.find({id, t});
  if (it == entries_.end())
    throw Error("prior store miss for (" + id + ", " + std::to_string(t) + ") in epoch tag " +
                std::to_string(tag_));
  return it->second;
}

DiagGaussian PriorStore::LookupSequence(const std::string &id, int64_t steps) const {
  std::vector<std::pair<std::string, int64_t>> keys;
  keys.reserve(static_cast<size_t>(steps));
  for (int64_t t = 0; t < steps; ++t) keys.emplace_back(id, t);
  return LookupRows(keys);
}

DiagGaussian PriorStore::LookupRows(
    const std::vector<std::pair<std::string, int64_t>> &keys) const {
  SEQREP_CHECK_SHAPE(!keys.empty(), "LookupRows with no keys");
  const Entry &first = Lookup(keys.front().first, keys.front().second);
  const auto d = static_cast<int64_t>(first.mu.size());
  DiagGaussian out{Tensor(static_cast<int64_t>(keys.size()), d),
                   Tensor(static_cast<int64_t>(keys.size()), d)};
  for (size_t r = 0; r < keys.size(); ++r) {
    const Entry &e = Lookup(keys[r].first, keys[r].second);
    SEQREP_CHECK_SHAPE(static_cast<int64_t>(e.mu.size()) == d, "prior dimension mismatch");
    std::copy(e.mu.begin(), e.mu.end(), out.mu.row(static_cast<int64_t>(r)).begin());
    std::copy(e.logvar.begin(), e.logvar.end(), out.logvar.row(static_cast<int64_t>(r)).begin());
  }
  return out;
}

void PriorStore::Save(const std::string &path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  binio::WriteMagic(os, "SRP1");
  binio::WriteI64(os, tag_);
  binio::WriteU64(os, entries_.size());
  for (const auto &[key, e] : entries_) {
    binio::WriteString(os, key.first);
    binio::WriteU32(os, static_cast<uint32_t>(key.second));
    binio::WriteU32(os, static_cast<uint32_t>(e.mu.size()));
    for (double v : e.mu) binio::WriteF64(os, v);
    for (double v : e.logvar) binio::WriteF64(os, v);
  }
  if (!os) throw IoError("write failed for " + path);
}

PriorStore PriorStore::Load(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open prior store " + path);
  const std::string what = "prior store " + path;
  binio::ExpectMagic(is, "SRP1", what);
  Builder b(binio::ReadI64(is, what));
  const uint64_t count = binio::ReadU64(is, what);
  for (uint64_t k = 0; k < count; ++k) {
    std::string id = binio::ReadString(is, what);
    const uint32_t t = binio::ReadU32(is, what);
    const uint32_t d = binio::ReadU32(is, what);
    std::vector<double> mu(d), lv(d);
    for (auto &v : mu) v = binio::ReadF64(is, what);
    for (auto &v : lv) v = binio::ReadF64(is, what);
    b.Put(id, t, std::move(mu), std::move(lv));
  }
  return std::move(b).Finish();
}

bool PriorStore::operator==(const PriorStore &o) const {
  if (tag_ != o.tag_ || entries_.size() != o.entries_.size()) return false;
  auto it = o.entries_.begin();
  for (const auto &[key, e] : entries_) {
    if (key != it->first || e.mu != it->second.mu || e.logvar != it->second.logvar) return false;
    ++it;
  }
  return true;
}

}  // namespace seqrep
