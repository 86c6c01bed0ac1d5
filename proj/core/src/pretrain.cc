// core/src/pretrain.cc

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

#include "seqrep/pretrain.h"

#include <set>

#include "seqrep/error.h"
#include "seqrep/ops.h"

namespace seqrep {

namespace {

std::vector<int64_t> WithOutput(std::vector<int64_t> hidden, int64_t out) {
  hidden.push_back(out);
  return hidden;
}

Tensor Hadamard(const Tensor &a, const Tensor &b) {
  SEQREP_CHECK_SHAPE(a.SameShape(b), "mask shape " + b.ShapeString() + " does not match sequence " +
                                         a.ShapeString());
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor OneMinus(const Tensor &m) {
  Tensor out(m.rows(), m.cols());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 - m[i];
  return out;
}

std::string Join(const std::vector<std::string> &v) {
  std::string s;
  for (const auto &x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

// Scores of c against N row-gathered copies of z, n x N.
Var GatheredScores(const Var &c, const Var &z, const std::vector<std::vector<int64_t>> &index) {
  std::vector<Var> cols;
  cols.reserve(index.size());
  for (const auto &idx : index) cols.push_back(RowDot(c, GatherRows(z, idx)));
  return cols.size() == 1 ? cols[0] : ConcatCols(cols);
}

// N index vectors: row i gets a uniform index in [0, T) other than i.
std::vector<std::vector<int64_t>> OtherRows(int64_t T, int64_t N, Rng &rng) {
  std::vector<std::vector<int64_t>> out(static_cast<size_t>(N), std::vector<int64_t>(T));
  for (int64_t i = 0; i < T; ++i)
    for (auto &idx : out) {
      const int64_t j = rng.UniformInt(0, T - 2);
      idx[i] = j >= i ? j + 1 : j;
    }
  return out;
}

std::vector<std::vector<int64_t>> Shuffles(int64_t T, int64_t N, Rng &rng) {
  std::vector<std::vector<int64_t>> out;
  for (int64_t i = 0; i < N; ++i) out.push_back(DerangedShuffle(T, rng));
  return out;
}

}  // namespace

Var InfoNceSum(const Var &pos, const Var &neg) {
  SEQREP_CHECK_SHAPE(pos.cols() == 1 && neg.rows() == pos.rows() && neg.cols() >= 1,
                     "InfoNCE expects n x 1 positives and n x N negatives, got " +
                         pos.value().ShapeString() + " and " + neg.value().ShapeString());
  return Sum(Sub(LogSumExp(ConcatCols({pos, neg})), pos));
}

Var InfoNce(const Var &pos, const Var &neg) {
  return Scale(InfoNceSum(pos, neg), 1.0 / static_cast<double>(pos.rows()));
}

std::vector<int64_t> DerangedShuffle(int64_t n, Rng &rng) {
  SEQREP_CHECK_SHAPE(n >= 2, "a shuffle without fixed points needs at least two rows");
  std::vector<int64_t> p = rng.Permutation(n);
  for (int64_t i = 0; i < n; ++i)
    if (p[i] == i) std::swap(p[i], p[(i + 1) % n]);
  return p;
}

// ---------------------------------------------------------------------------
// CPC

std::string NegativeModeName(NegativeMode m) {
  return m == NegativeMode::kWithinUtterance ? "within" : "batch";
}

NegativeMode ParseNegativeMode(const std::string &s) {
  if (s == "within") return NegativeMode::kWithinUtterance;
  if (s == "batch") return NegativeMode::kBatch;
  throw ConfigError("unknown negative sampling mode '" + s + "' (expected within or batch)");
}

void CpcConfig::Check() const {
  SEQREP_CHECK_CONFIG(input_dim >= 1, "CPC input dimension must be positive");
  SEQREP_CHECK_CONFIG(K >= 1, "CPC needs K >= 1 future steps");
  SEQREP_CHECK_CONFIG(N >= 1, "CPC needs N >= 1 negatives");
  SEQREP_CHECK_CONFIG(latent_dim >= 1, "CPC latent dimension must be positive");
  SEQREP_CHECK_CONFIG(context.layers >= 1 && !context.bidirectional,
                      "CPC context network must be a unidirectional recurrent stack");
  for (bool p : context.pyramid) SEQREP_CHECK_CONFIG(!p, "CPC context network cannot subsample");
}

CpcModel::CpcModel(ParamStore *store, const std::string &name, const CpcConfig &cfg, Rng &rng)
    : cfg_((cfg.Check(), cfg)) {
  latent_ = Mlp(store, name + ".latent", cfg.input_dim, WithOutput(cfg.latent_hidden, cfg.latent_dim),
                cfg.act, rng);
  context_ = RecurrentStack(store, name + ".context", cfg.latent_dim, cfg.context, rng);
  for (int64_t k = 1; k <= cfg.K; ++k)
    w_.emplace_back(store, name + ".w" + std::to_string(k), context_.out(), cfg.latent_dim, rng,
                    false);
}

Var CpcModel::Latents(Graph &g, const Var &x, const RunMode &mode) const {
  return latent_.Forward(g, x, mode);
}

Var CpcModel::Context(Graph &g, const Var &z, const RunMode &mode) const {
  return context_.Forward(g, z, mode);
}

Var CpcModel::Predict(Graph &g, const Var &c, int64_t k) const {
  SEQREP_CHECK_CONFIG(k >= 1 && k <= cfg_.K, "prediction step out of range");
  return w_[static_cast<size_t>(k - 1)].Forward(g, c);
}

Tensor CpcModel::Features(const Tensor &frames) const {
  Graph g;
  g.set_accumulate_param_grads(false);
  return Context(g, Latents(g, g.Constant(frames))).value();
}

Var CpcLoss(Graph &g, const CpcModel &model, const Tensor &frames, Rng &rng, const RunMode &mode,
            const std::vector<const Tensor *> &others) {
  const CpcConfig &cfg = model.config();
  const int64_t T = frames.rows();
  if (T <= cfg.K)
    throw ShapeError("CPC needs more than K = " + std::to_string(cfg.K) + " frames, got " +
                     std::to_string(T));
  Var z = model.Latents(g, g.Constant(frames, "frames"), mode);
  Var c = model.Context(g, z, mode);
  Var pool = z;
  if (cfg.negatives == NegativeMode::kBatch && !others.empty()) {
    std::vector<Var> parts = {z};
    for (const Tensor *o : others) parts.push_back(model.Latents(g, g.Constant(*o), mode));
    pool = ConcatRows(parts);
  }
  const int64_t P = pool.rows();
  Var total;
  int64_t pairs = 0;
  for (int64_t k = 1; k <= cfg.K; ++k) {
    const int64_t n = T - k;
    Var pred = model.Predict(g, SliceRows(c, 0, n), k);
    Var pos = RowDot(pred, SliceRows(z, k, T));
    std::vector<std::vector<int64_t>> idx(static_cast<size_t>(cfg.N), std::vector<int64_t>(n));
    for (int64_t t = 0; t < n; ++t)
      for (auto &col : idx) {
        const int64_t j = rng.UniformInt(0, P - 2);
        col[t] = j >= t + k ? j + 1 : j;
      }
    Var term = InfoNceSum(pos, GatheredScores(pred, pool, idx));
    total = total.valid() ? Add(total, term) : term;
    pairs += n;
  }
  return Scale(total, 1.0 / static_cast<double>(pairs));
}

// ---------------------------------------------------------------------------
// Masked pretraining

std::string MaskedObjectiveName(MaskedObjective o) {
  switch (o) {
    case MaskedObjective::kBert: return "bert";
    case MaskedObjective::kBertHalf: return "bert_half";
    case MaskedObjective::kBicpc: return "bicpc";
    case MaskedObjective::kBicpcHalf: return "bicpc_half";
    case MaskedObjective::kMvMae: return "mv_mae";
    case MaskedObjective::kMvContrast: return "mv_contrast";
    case MaskedObjective::kCrossviewBert: return "crossview_bert";
  }
  return "?";
}

MaskedObjective ParseMaskedObjective(const std::string &s) {
  for (auto o : {MaskedObjective::kBert, MaskedObjective::kBertHalf, MaskedObjective::kBicpc,
                 MaskedObjective::kBicpcHalf, MaskedObjective::kMvMae, MaskedObjective::kMvContrast,
                 MaskedObjective::kCrossviewBert})
    if (MaskedObjectiveName(o) == s) return o;
  throw ConfigError("unknown masked objective '" + s + "'");
}

bool MaskedPretrainConfig::multiview() const {
  return objective == MaskedObjective::kMvMae || objective == MaskedObjective::kMvContrast ||
         objective == MaskedObjective::kCrossviewBert;
}

void MaskedPretrainConfig::Check() const {
  SEQREP_CHECK_CONFIG(input_dim >= 1, "masked pretraining input dimension must be positive");
  SEQREP_CHECK_CONFIG(mask.n_time_masks >= 0 && mask.n_channel_masks >= 0,
                      "mask counts must be >= 0");
  SEQREP_CHECK_CONFIG(mask.n_time_masks + mask.n_channel_masks >= 1,
                      "masked pretraining needs at least one time or channel mask");
  SEQREP_CHECK_CONFIG(mask.n_time_masks == 0 || mask.max_time_width >= 1,
                      "time masks need max_time_width >= 1");
  SEQREP_CHECK_CONFIG(mask.n_channel_masks == 0 || mask.max_channel_width >= 1,
                      "channel masks need max_channel_width >= 1");
  SEQREP_CHECK_CONFIG(mask.max_channel_width <= input_dim,
                      "max_channel_width exceeds the input dimension");
  SEQREP_CHECK_CONFIG(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
  SEQREP_CHECK_CONFIG(n_negatives >= 1, "contrastive objectives need n_negatives >= 1");
  SEQREP_CHECK_CONFIG(encoder.layers >= 1 && encoder.bidirectional,
                      "the masked-pretraining encoder must be a bidirectional recurrent stack");
  for (bool p : encoder.pyramid)
    SEQREP_CHECK_CONFIG(!p, "the masked-pretraining encoder cannot subsample");
  SEQREP_CHECK_CONFIG(epoch_multiplier >= 1, "epoch multiplier must be >= 1");
}

MaskedModel::MaskedModel(ParamStore *store, const std::string &name, const MaskedPretrainConfig &cfg,
                         Rng &rng)
    : cfg_((cfg.Check(), cfg)) {
  if (cfg.lin) lin_ = LinAdapt(store, name + ".lin", cfg.input_dim);
  enc_ = RecurrentStack(store, name + ".enc", cfg.input_dim, cfg.encoder, rng);
  const bool bicpc =
      cfg.objective == MaskedObjective::kBicpc || cfg.objective == MaskedObjective::kBicpcHalf;
  if (!bicpc)
    dec_ = Mlp(store, name + ".dec", enc_.out(), WithOutput(cfg.decoder_hidden, cfg.input_dim), cfg.act,
               rng);
  if (bicpc)
    zdnn_ = Mlp(store, name + ".latent", cfg.input_dim, WithOutput(cfg.latent_hidden, enc_.out()),
                cfg.act, rng);
  if (cfg.objective == MaskedObjective::kCrossviewBert)
    zrnn_ = RecurrentStack(store, name + ".latent", cfg.input_dim,
                           {1, cfg.encoder.hidden, true, {}, 0.0}, rng);
}

Var MaskedModel::Context(Graph &g, const Var &x, const RunMode &mode) const {
  return enc_.Forward(g, cfg_.lin ? lin_.Forward(g, x) : x, mode);
}

Var MaskedModel::Reconstruct(Graph &g, const Var &c, const RunMode &mode) const {
  SEQREP_CHECK_CONFIG(!dec_.empty(), "this masked objective has no decoder");
  return dec_.Forward(g, c, mode);
}

Var MaskedModel::Latent(Graph &g, const Var &x, const RunMode &mode) const {
  if (!zdnn_.empty()) return zdnn_.Forward(g, x, mode);
  SEQREP_CHECK_CONFIG(!zrnn_.empty(), "this masked objective has no latent network");
  return zrnn_.Forward(g, x, mode);
}

Tensor MaskedModel::Features(const Tensor &frames) const {
  Graph g;
  g.set_accumulate_param_grads(false);
  return Context(g, g.Constant(frames)).value();
}

Var MaskedReconLoss(Graph &g, const MaskedModel &model, const Tensor &frames, const MaskPair &m,
                    bool half, const RunMode &mode) {
  Var x = g.Constant(frames, "frames");
  Var c = model.Context(g, g.Constant(Hadamard(frames, m.mask), "masked"), mode);
  Var w = g.Constant(half ? m.central : OneMinus(m.mask), "loss_region");
  return Sum(Mul(Square(Sub(x, model.Reconstruct(g, c, mode))), w));
}

BicpcOut BicpcLoss(Graph &g, const MaskedModel &model, const Tensor &frames, const MaskPair &m,
                   bool half, Rng &rng, const RunMode &mode) {
  const int64_t T = frames.rows();
  SEQREP_CHECK_SHAPE(T >= 2, "BiCPC needs at least two frames for shuffled negatives");
  const Tensor region = half ? m.central : OneMinus(m.mask);
  BicpcOut out;
  out.degenerate = region.MaxAbs() == 0.0;
  Var zpos = model.Latent(g, g.Constant(Hadamard(frames, region), "missing"), mode);
  Var c = model.Context(g, g.Constant(Hadamard(frames, m.mask), "masked"), mode);
  // The latent network acts per frame, so DNN(shuffle(X)) = shuffle(DNN(X)).
  out.loss = InfoNceSum(RowDot(c, zpos),
                        GatheredScores(c, zpos, Shuffles(T, model.config().n_negatives, rng)));
  return out;
}

Var MultiviewMaskedLoss(Graph &g, const MaskedModel &model, const Tensor &frames, const MaskPair &m1,
                        const MaskPair &m2, Rng &rng, const RunMode &mode) {
  const MaskedPretrainConfig &cfg = model.config();
  SEQREP_CHECK_CONFIG(cfg.multiview(), "model objective " + MaskedObjectiveName(cfg.objective) +
                                           " is not a multi-view objective");
  const int64_t T = frames.rows();
  SEQREP_CHECK_SHAPE(T >= 2 || cfg.objective == MaskedObjective::kMvMae || cfg.alpha == 1.0,
                     "contrastive consistency needs at least two frames");
  Var x = g.Constant(frames, "frames");
  Var c1 = model.Context(g, g.Constant(Hadamard(frames, m1.mask), "masked1"), mode);
  Var c2 = model.Context(g, g.Constant(Hadamard(frames, m2.mask), "masked2"), mode);
  Var recon;
  if (cfg.alpha > 0.0) {
    auto term = [&](const Var &c, const MaskPair &m) {
      Var w = g.Constant(OneMinus(m.mask), "loss_region");
      return Sum(Mul(Square(Sub(x, model.Reconstruct(g, c, mode))), w));
    };
    recon = Add(term(c1, m1), term(c2, m2));
    if (cfg.alpha == 1.0) return recon;
  }
  Var cons;
  const int64_t N = cfg.n_negatives;
  switch (cfg.objective) {
    case MaskedObjective::kMvMae:
      cons = Mean(Abs(Sub(c1, c2)));
      break;
    case MaskedObjective::kMvContrast: {
      auto idx = OtherRows(T, N, rng);
      Var pos = RowDot(c1, c2);
      cons = Add(InfoNceSum(pos, GatheredScores(c1, c2, idx)),
                 InfoNceSum(pos, GatheredScores(c2, c1, idx)));
      break;
    }
    case MaskedObjective::kCrossviewBert: {
      Var z1 = model.Latent(g, g.Constant(Hadamard(frames, OneMinus(m1.mask)), "missing1"), mode);
      Var z2 = model.Latent(g, g.Constant(Hadamard(frames, OneMinus(m2.mask)), "missing2"), mode);
      auto perms = Shuffles(T, N, rng);
      cons = Add(InfoNceSum(RowDot(c1, z2), GatheredScores(c1, z2, perms)),
                 InfoNceSum(RowDot(c2, z1), GatheredScores(c2, z1, perms)));
      break;
    }
    default:
      break;
  }
  if (cfg.alpha == 0.0) return cons;
  return Add(Scale(recon, cfg.alpha), Scale(cons, 1.0 - cfg.alpha));
}

Var MaskedPretrainLoss(Graph &g, const MaskedModel &model, const Tensor &frames, Rng &rng,
                       const RunMode &mode) {
  const MaskedPretrainConfig &cfg = model.config();
  MaskPair m1 = GenMask(cfg.mask, frames.rows(), frames.cols(), rng);
  switch (cfg.objective) {
    case MaskedObjective::kBert: return MaskedReconLoss(g, model, frames, m1, false, mode);
    case MaskedObjective::kBertHalf: return MaskedReconLoss(g, model, frames, m1, true, mode);
    case MaskedObjective::kBicpc: return BicpcLoss(g, model, frames, m1, false, rng, mode).loss;
    case MaskedObjective::kBicpcHalf: return BicpcLoss(g, model, frames, m1, true, rng, mode).loss;
    default: break;
  }
  MaskPair m2 = GenMask(cfg.mask, frames.rows(), frames.cols(), rng);
  return MultiviewMaskedLoss(g, model, frames, m1, m2, rng, mode);
}

// ---------------------------------------------------------------------------
// Transfer

std::vector<std::string> FinetuneInit(ParamStore *dst, const std::string &dst_prefix,
                                      const std::vector<CheckpointTensor> &src,
                                      const std::string &src_prefix) {
  const std::string sp = src_prefix + ".", dp = dst_prefix + ".";
  std::vector<std::string> unknown, bad_shape;
  std::vector<std::pair<Parameter *, const Tensor *>> copies;
  for (const CheckpointTensor &ct : src) {
    if (ct.name.compare(0, sp.size(), sp) != 0) continue;
    const std::string target = dp + ct.name.substr(sp.size());
    if (!dst->Has(target)) {
      unknown.push_back(ct.name);
      continue;
    }
    Parameter *p = dst->Get(target);
    if (!p->value.SameShape(ct.value)) {
      bad_shape.push_back(ct.name + " " + ct.value.ShapeString() + " -> " + target + " " +
                          p->value.ShapeString());
      continue;
    }
    copies.emplace_back(p, &ct.value);
  }
  if (!bad_shape.empty()) throw ShapeError("pretrained encoder shape mismatch: " + Join(bad_shape));
  if (!unknown.empty())
    throw ConfigError("pretrained tensors with no counterpart under '" + dst_prefix +
                      "': " + Join(unknown));
  if (copies.empty())
    throw ConfigError("checkpoint has no tensors under '" + src_prefix + "'");
  std::set<const Parameter *> done;
  for (auto &[p, t] : copies) {
    p->value = *t;
    done.insert(p);
  }
  std::vector<std::string> untouched;
  for (Parameter *p : dst->WithPrefix(dp))
    if (!done.count(p)) untouched.push_back(p->name);
  return untouched;
}

}  // namespace seqrep
