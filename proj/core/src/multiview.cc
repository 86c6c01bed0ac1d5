// core/src/multiview.cc

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

#include "seqrep/multiview.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqrep/ctc.h"
#include "seqrep/error.h"
#include "seqrep/ops.h"

namespace seqrep {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<int64_t> Slice(const std::vector<int64_t> &v, size_t b, size_t e) {
  return std::vector<int64_t>(v.begin() + static_cast<std::ptrdiff_t>(b),
                              v.begin() + static_cast<std::ptrdiff_t>(e));
}

std::vector<int64_t> DecoderWidths(const std::vector<int64_t> &hidden, int64_t out) {
  std::vector<int64_t> w(hidden.rbegin(), hidden.rend());
  w.push_back(out);
  return w;
}

Var Sample(Graph &g, const GaussianVar &q, const RunMode &mode) { return SampleLatent(g, q, mode); }

Var Recon(const Var &pred, const Var &target) {
  return Scale(SquaredError(pred, target), 0.5 / static_cast<double>(target.rows()));
}

GaussianVar PriorSlice(Graph &g, const DiagGaussian &p, int64_t begin, int64_t end) {
  return {g.Constant(p.mu.ColSlice(begin, end), "prior_mu"),
          g.Constant(p.logvar.ColSlice(begin, end), "prior_logvar")};
}

Var Kl(Graph &g, const GaussianVar &q, const DiagGaussian *prior, int64_t begin) {
  if (prior == nullptr) return Sum(KlToStandard(q));
  return Sum(KlDiagDiag(q, PriorSlice(g, *prior, begin, begin + q.mu.cols())));
}

void CheckUnit(double v, const char *what) {
  SEQREP_CHECK_CONFIG(v >= 0.0 && v <= 1.0, std::string(what) + " must be in [0, 1]");
}

VccapLossOut VccapObjective(Graph &g, const VccapModel &model, const PairedBatch &batch,
                            const RunMode &mode, const DiagGaussian *prior, double beta) {
  batch.Check();
  const VccapConfig &cfg = model.config();
  SEQREP_CHECK_SHAPE(batch.x.cols() == cfg.x_dim && batch.y.cols() == cfg.y_dim,
                     "paired batch views " + batch.x.ShapeString() + " / " + batch.y.ShapeString() +
                         " do not match model dims " + std::to_string(cfg.x_dim) + " / " +
                         std::to_string(cfg.y_dim));
  Var x = g.Constant(batch.x, "view1");
  Var y = g.Constant(batch.y, "view2");
  VccapLossOut out;
  out.qz = model.EncodeZ(g, x, mode);
  Var z = Sample(g, out.qz, mode);
  Var h1, h2;
  if (cfg.private_x > 0) {
    out.qh1 = model.EncodeH1(g, x, mode);
    h1 = Sample(g, out.qh1, mode);
  }
  if (cfg.private_y > 0) {
    out.qh2 = model.EncodeH2(g, y, mode);
    h2 = Sample(g, out.qh2, mode);
  }
  out.recon_x = Recon(model.DecodeX(g, z, &h1, mode), x);
  out.recon_y = Recon(model.DecodeY(g, z, &h2, mode), y);
  Var kl = Kl(g, out.qz, prior, 0);
  if (cfg.private_x > 0) kl = Add(kl, Kl(g, out.qh1, prior, cfg.latent));
  if (cfg.private_y > 0) kl = Add(kl, Kl(g, out.qh2, prior, cfg.latent + cfg.private_x));
  out.kl = Scale(kl, 1.0 / static_cast<double>(batch.x.rows()));
  out.loss = Add(Add(out.recon_x, out.recon_y), Scale(out.kl, beta));
  return out;
}

// Dense helpers for the correlation op.
RowMat ToEigen(const Tensor &t) {
  return Eigen::Map<const RowMat>(t.data(), t.rows(), t.cols());
}

Tensor FromEigen(const RowMat &m) {
  Tensor t(m.rows(), m.cols());
  Eigen::Map<RowMat>(t.data(), m.rows(), m.cols()) = m;
  return t;
}

RowMat InverseSqrt(const RowMat &s, const char *which) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success || !es.eigenvalues().allFinite())
    throw NumericalError(std::string("non-finite covariance in CCA (") + which + ")");
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError(std::string("covariance is not positive definite in CCA (") + which +
                         "); increase the ridge");
  const Eigen::VectorXd inv = es.eigenvalues().array().rsqrt();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void PairedBatch::Check() const {
  SEQREP_CHECK_SHAPE(x.rows() == y.rows(), "paired views have " + std::to_string(x.rows()) +
                                               " and " + std::to_string(y.rows()) + " rows");
  SEQREP_CHECK_SHAPE(keys.empty() || static_cast<int64_t>(keys.size()) == x.rows(),
                     "paired batch has " + std::to_string(keys.size()) + " keys for " +
                         std::to_string(x.rows()) + " rows");
}

MlpGaussianEncoder::MlpGaussianEncoder(ParamStore *store, const std::string &name, int64_t in,
                                       const std::vector<int64_t> &hidden, int64_t dim,
                                       Activation act, Rng &rng)
    : body_(store, name + ".enc", in, hidden, act, rng, true),
      head_(store, name + ".head", body_.out(), dim, rng) {}

GaussianVar MlpGaussianEncoder::Forward(Graph &g, const Var &x, const RunMode &mode) const {
  return head_.Forward(g, body_.Forward(g, x, mode));
}

void VccapConfig::Check() const {
  SEQREP_CHECK_CONFIG(x_dim >= 1 && y_dim >= 1, "view dimensions must be positive");
  SEQREP_CHECK_CONFIG(latent >= 1, "shared latent dimension must be >= 1");
  SEQREP_CHECK_CONFIG(private_x >= 0 && private_y >= 0, "private dimensions must be >= 0");
  SEQREP_CHECK_CONFIG(beta >= 0.0, "beta must be >= 0");
  SEQREP_CHECK_CONFIG(split >= 0 && split <= static_cast<int64_t>(hidden.size()),
                      "split layer index out of range");
  for (int64_t w : hidden) SEQREP_CHECK_CONFIG(w >= 1, "hidden widths must be positive");
}

VccapModel::VccapModel(ParamStore *store, const std::string &name, const VccapConfig &cfg,
                       Rng &rng)
    : cfg_((cfg.Check(), cfg)) {
  const auto split = static_cast<size_t>(cfg.split);
  lower_ = Mlp(store, name + ".z.lower", cfg.x_dim, Slice(cfg.hidden, 0, split), cfg.act, rng, true);
  upper_ = Mlp(store, name + ".z.upper", lower_.out(), Slice(cfg.hidden, split, cfg.hidden.size()),
               cfg.act, rng, true);
  zhead_ = GaussianHead(store, name + ".z.head", upper_.out(), cfg.latent, rng);
  if (cfg.private_x > 0)
    h1_ = MlpGaussianEncoder(store, name + ".h1", cfg.x_dim, cfg.private_hidden, cfg.private_x,
                             cfg.act, rng);
  if (cfg.private_y > 0)
    h2_ = MlpGaussianEncoder(store, name + ".h2", cfg.y_dim, cfg.private_hidden, cfg.private_y,
                             cfg.act, rng);
  decx_ = Mlp(store, name + ".decx", cfg.latent + cfg.private_x, DecoderWidths(cfg.hidden, cfg.x_dim),
              cfg.act, rng);
  decy_ = Mlp(store, name + ".decy", cfg.latent + cfg.private_y, DecoderWidths(cfg.hidden, cfg.y_dim),
              cfg.act, rng);
}

Var VccapModel::EncodeLower(Graph &g, const Var &x, const RunMode &mode) const {
  return lower_.Forward(g, x, mode);
}

GaussianVar VccapModel::EncodeUpper(Graph &g, const Var &h, const RunMode &mode) const {
  SEQREP_CHECK_SHAPE(h.cols() == lower_.out(), "shared encoder input width mismatch");
  return zhead_.Forward(g, upper_.Forward(g, h, mode));
}

GaussianVar VccapModel::EncodeZ(Graph &g, const Var &x, const RunMode &mode) const {
  return EncodeUpper(g, EncodeLower(g, x, mode), mode);
}

GaussianVar VccapModel::EncodeH1(Graph &g, const Var &x, const RunMode &mode) const {
  SEQREP_CHECK_CONFIG(cfg_.private_x > 0, "model has no private variable for view 1");
  return h1_.Forward(g, x, mode);
}

GaussianVar VccapModel::EncodeH2(Graph &g, const Var &y, const RunMode &mode) const {
  SEQREP_CHECK_CONFIG(cfg_.private_y > 0, "model has no private variable for view 2");
  return h2_.Forward(g, y, mode);
}

Var VccapModel::DecodeX(Graph &g, const Var &z, const Var *h1, const RunMode &mode) const {
  if (cfg_.private_x == 0) return decx_.Forward(g, z, mode);
  return decx_.Forward(g, ConcatCols({z, *h1}), mode);
}

Var VccapModel::DecodeY(Graph &g, const Var &z, const Var *h2, const RunMode &mode) const {
  if (cfg_.private_y == 0) return decy_.Forward(g, z, mode);
  return decy_.Forward(g, ConcatCols({z, *h2}), mode);
}

Var VccaLoss(Graph &g, const VccapModel &model, const PairedBatch &batch, const RunMode &mode) {
  SEQREP_CHECK_CONFIG(model.config().private_x == 0 && model.config().private_y == 0,
                      "VCCA needs a model without private variables");
  batch.Check();
  Var x = g.Constant(batch.x, "view1");
  Var y = g.Constant(batch.y, "view2");
  GaussianVar q = model.EncodeZ(g, x, mode);
  Var z = Sample(g, q, mode);
  Var rx = Recon(model.DecodeX(g, z, nullptr, mode), x);
  Var ry = Recon(model.DecodeY(g, z, nullptr, mode), y);
  Var kl = Scale(Sum(KlToStandard(q)), 1.0 / static_cast<double>(batch.x.rows()));
  return Add(Add(rx, ry), Scale(kl, model.config().beta));
}

VccapLossOut VccapLoss(Graph &g, const VccapModel &model, const PairedBatch &batch,
                       const RunMode &mode) {
  return VccapObjective(g, model, batch, mode, nullptr, model.config().beta);
}

VccapLossOut PriorUpdatedLoss(Graph &g, const VccapModel &model, const PairedBatch &batch,
                              const PriorStore &store, double beta, const RunMode &mode) {
  SEQREP_CHECK_CONFIG(static_cast<int64_t>(batch.keys.size()) == batch.x.rows(),
                      "prior updating needs an (id, frame) key for every row");
  DiagGaussian prior = store.LookupRows(batch.keys);
  SEQREP_CHECK_SHAPE(prior.dim() == model.posterior_dim(),
                     "stored priors have dimension " + std::to_string(prior.dim()) +
                         ", model posterior has " + std::to_string(model.posterior_dim()));
  return VccapObjective(g, model, batch, mode, &prior, beta);
}

FFLossOut PriorUpdatedLoss(Graph &g, const FFModel &model, const Tensor &windows,
                           const std::vector<PriorKey> &keys, const PriorStore &store, double beta,
                           const RunMode &mode) {
  const FFEncoderConfig &cfg = model.config();
  SEQREP_CHECK_CONFIG(cfg.variant == FFVariant::kVae, "prior updating needs a VAE base model");
  SEQREP_CHECK_CONFIG(static_cast<int64_t>(keys.size()) == windows.rows(),
                      "prior updating needs an (id, frame) key for every row");
  DiagGaussian prior = store.LookupRows(keys);
  SEQREP_CHECK_SHAPE(prior.dim() == cfg.latent, "stored prior dimension " +
                                                    std::to_string(prior.dim()) +
                                                    " does not match latent " +
                                                    std::to_string(cfg.latent));
  const double n = static_cast<double>(windows.rows());
  Var x = g.Constant(windows, "windows");
  FFLossOut out;
  out.q = model.Encode(g, x, mode);
  Var recon;
  for (int32_t s = 0; s < cfg.samples; ++s) {
    Var z = Sample(g, out.q, mode);
    if (s == 0) out.z = z;
    Var r = Recon(model.Decode(g, z, mode), x);
    recon = s == 0 ? r : Add(recon, r);
  }
  out.recon = cfg.samples > 1 ? Scale(recon, 1.0 / cfg.samples) : recon;
  out.reg = Scale(Kl(g, out.q, &prior, 0), 1.0 / n);
  out.loss = Add(out.recon, Scale(out.reg, beta));
  return out;
}

DiagGaussian VccapPosteriors(const VccapModel &model, const PairedBatch &batch) {
  batch.Check();
  Graph g;
  g.set_accumulate_param_grads(false);
  Var x = g.Constant(batch.x), y = g.Constant(batch.y);
  GaussianVar qz = model.EncodeZ(g, x);
  std::vector<Var> mus = {qz.mu}, lvs = {qz.logvar};
  if (model.config().private_x > 0) {
    GaussianVar q = model.EncodeH1(g, x);
    mus.push_back(q.mu);
    lvs.push_back(q.logvar);
  }
  if (model.config().private_y > 0) {
    GaussianVar q = model.EncodeH2(g, y);
    mus.push_back(q.mu);
    lvs.push_back(q.logvar);
  }
  return {ConcatCols(mus).value(), ConcatCols(lvs).value()};
}

DiagGaussian FFPosteriors(const FFModel &model, const Tensor &windows) {
  Graph g;
  g.set_accumulate_param_grads(false);
  GaussianVar q = model.Encode(g, g.Constant(windows));
  return {q.mu.value(), q.logvar.value()};
}

// ---------------------------------------------------------------------------
// Cross-domain models

void CrossDomainConfig::Check() const {
  source.Check();
  SEQREP_CHECK_CONFIG(target_dim >= 1, "target input dimension must be positive");
  SEQREP_CHECK_CONFIG(target_private >= 0, "target private dimension must be >= 0");
  if (!partial || source.split == 0)
    SEQREP_CHECK_CONFIG(target_dim == source.x_dim,
                        "a fully shared encoder needs equal source and target input dimensions");
}

CrossDomainModel::CrossDomainModel(ParamStore *store, const std::string &name,
                                   const CrossDomainConfig &cfg, Rng &rng)
    : cfg_((cfg.Check(), cfg)), src_(store, name + ".src", cfg.source, rng) {
  const VccapConfig &s = cfg.source;
  if (cfg.partial)
    tgt_lower_ = Mlp(store, name + ".tgt.lower", cfg.target_dim,
                     Slice(s.hidden, 0, static_cast<size_t>(s.split)), s.act, rng, true);
  if (cfg.target_private > 0)
    tgt_h_ = MlpGaussianEncoder(store, name + ".tgt.h", cfg.target_dim, cfg.target_private_hidden,
                                cfg.target_private, s.act, rng);
  tgt_dec_ = Mlp(store, name + ".tgt.dec", s.latent + cfg.target_private,
                 DecoderWidths(s.hidden, cfg.target_dim), s.act, rng);
}

GaussianVar CrossDomainModel::EncodeTarget(Graph &g, const Var &x, const RunMode &mode) const {
  SEQREP_CHECK_SHAPE(x.cols() == cfg_.target_dim, "target input width mismatch");
  Var h = cfg_.partial ? tgt_lower_.Forward(g, x, mode) : src_.EncodeLower(g, x, mode);
  return src_.EncodeUpper(g, h, mode);
}

GaussianVar CrossDomainModel::EncodeTargetPrivate(Graph &g, const Var &x,
                                                  const RunMode &mode) const {
  SEQREP_CHECK_CONFIG(cfg_.target_private > 0, "model has no target private variable");
  return tgt_h_.Forward(g, x, mode);
}

Var CrossDomainModel::DecodeTarget(Graph &g, const Var &z, const Var *h, const RunMode &mode) const {
  if (cfg_.target_private == 0) return tgt_dec_.Forward(g, z, mode);
  return tgt_dec_.Forward(g, ConcatCols({z, *h}), mode);
}

Var VaepLoss(Graph &g, const CrossDomainModel &model, const Tensor &x_tgt, const RunMode &mode) {
  SEQREP_CHECK_SHAPE(x_tgt.rows() > 0, "empty target batch");
  Var x = g.Constant(x_tgt, "target");
  GaussianVar qz = model.EncodeTarget(g, x, mode);
  Var z = Sample(g, qz, mode);
  Var kl = Sum(KlToStandard(qz));
  Var h;
  if (model.config().target_private > 0) {
    GaussianVar qh = model.EncodeTargetPrivate(g, x, mode);
    h = Sample(g, qh, mode);
    kl = Add(kl, Sum(KlToStandard(qh)));
  }
  Var recon = Recon(model.DecodeTarget(g, z, &h, mode), x);
  return Add(recon, Scale(kl, model.config().source.beta / static_cast<double>(x_tgt.rows())));
}

Var CrossDomainLoss(Graph &g, const CrossDomainModel &model, const PairedBatch &src,
                    const Tensor &tgt, double beta_mix, const RunMode &mode) {
  CheckUnit(beta_mix, "domain mixing weight");
  if (src.x.rows() == 0) throw Error("cross-domain batch has no source rows");
  if (tgt.rows() == 0) throw Error("cross-domain batch has no target rows");
  if (beta_mix == 0.0) return VccapLoss(g, model.source(), src, mode).loss;
  if (beta_mix == 1.0) return VaepLoss(g, model, tgt, mode);
  Var s = VccapLoss(g, model.source(), src, mode).loss;
  Var t = VaepLoss(g, model, tgt, mode);
  return Add(Scale(s, 1.0 - beta_mix), Scale(t, beta_mix));
}

Var CrossDomainMultitaskLoss(Graph &g, const CrossDomainModel &model, const CtcRecognizer &rec,
                             const PairedBatch &src, const Tensor &tgt_windows,
                             const std::vector<int32_t> &transcript, double alpha, double beta_mix,
                             const RunMode &mode) {
  CheckUnit(alpha, "multitask weight alpha");
  Var unsup = CrossDomainLoss(g, model, src, tgt_windows, beta_mix, mode);
  if (alpha == 1.0) return unsup;
  Var feats = model.EncodeTarget(g, g.Constant(tgt_windows, "target"), mode).mu;
  Var ctc = rec.Loss(g, feats, transcript, mode);
  if (alpha == 0.0) return ctc;
  return Add(Scale(unsup, alpha), Scale(ctc, 1.0 - alpha));
}

SharedTopRecognizers::SharedTopRecognizers(ParamStore *store, const std::string &name,
                                           int64_t src_dim, int64_t tgt_dim, int64_t vocab,
                                           const RecurrentStackConfig &lower, int64_t top_hidden,
                                           Rng &rng) {
  SEQREP_CHECK_CONFIG(vocab >= 1, "vocabulary must be non-empty");
  lower_[0] = RecurrentStack(store, name + ".src.lower", src_dim, lower, rng);
  lower_[1] = RecurrentStack(store, name + ".tgt.lower", tgt_dim, lower, rng);
  RecurrentStackConfig top;
  top.layers = 1;
  top.hidden = top_hidden;
  top.bidirectional = lower.bidirectional;
  top_ = RecurrentStack(store, name + ".top", lower_[0].out(), top, rng);
  out_[0] = Linear(store, name + ".src.out", top_.out(), vocab + 1, rng);
  out_[1] = Linear(store, name + ".tgt.out", top_.out(), vocab + 1, rng);
}

Var SharedTopRecognizers::Lattice(Graph &g, int domain, const Var &x, const RunMode &mode) const {
  SEQREP_CHECK_CONFIG(domain == 0 || domain == 1, "domain must be 0 (source) or 1 (target)");
  Var h = top_.Forward(g, lower_[domain].Forward(g, x, mode), mode);
  return LogSoftmax(out_[domain].Forward(g, h));
}

Var SharedTopRecognizers::Loss(Graph &g, int domain, const Var &x,
                               const std::vector<int32_t> &transcript, const RunMode &mode) const {
  return CtcLoss(Lattice(g, domain, x, mode), ToCtcTokens(transcript));
}

// ---------------------------------------------------------------------------
// Similarity losses

std::string SimilarityKindName(SimilarityKind k) {
  switch (k) {
    case SimilarityKind::kL2: return "l2";
    case SimilarityKind::kCosine: return "cosine";
    case SimilarityKind::kContrastive: return "contrastive";
    case SimilarityKind::kCca: return "cca";
  }
  return "?";
}

SimilarityKind ParseSimilarityKind(const std::string &s) {
  for (auto k : {SimilarityKind::kL2, SimilarityKind::kCosine, SimilarityKind::kContrastive,
                 SimilarityKind::kCca})
    if (SimilarityKindName(k) == s) return k;
  throw ConfigError("unknown similarity loss '" + s + "' (expected l2, cosine, contrastive or cca)");
}

void SimilarityLossConfig::Check() const {
  SEQREP_CHECK_CONFIG(margin >= 0.0, "contrastive margin must be >= 0");
  SEQREP_CHECK_CONFIG(rx > 0.0 && ry > 0.0, "CCA ridge terms must be positive");
  SEQREP_CHECK_CONFIG(lambda >= 0.0, "CCA penalty weight must be >= 0");
  SEQREP_CHECK_CONFIG(n_negatives >= 1, "need at least one negative");
}

Var CosineRows(const Var &a, const Var &b) {
  Var norms = Mul(Sqrt(RowDot(a, a)), Sqrt(RowDot(b, b)));
  return Div(RowDot(a, b), norms);
}

Var CcaCorrelation(const Var &a, const Var &b, double rx, double ry) {
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  SEQREP_CHECK_SHAPE(av.rows() == bv.rows(), "CCA views need equal row counts");
  SEQREP_CHECK_SHAPE(av.rows() >= 2, "CCA needs at least two rows");
  const auto n = static_cast<double>(av.rows());
  RowMat h1 = ToEigen(av), h2 = ToEigen(bv);
  h1.rowwise() -= h1.colwise().mean();
  h2.rowwise() -= h2.colwise().mean();
  RowMat s11 = h1.transpose() * h1 / n;
  RowMat s22 = h2.transpose() * h2 / n;
  s11.diagonal().array() += rx;
  s22.diagonal().array() += ry;
  const RowMat s12 = h1.transpose() * h2 / n;
  const RowMat i11 = InverseSqrt(s11, "view 1");
  const RowMat i22 = InverseSqrt(s22, "view 2");
  const Eigen::MatrixXd t = i11 * s12 * i22;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd d = svd.singularValues();
  const RowMat &u = svd.matrixU();
  const RowMat &v = svd.matrixV();
  // Derivatives of the trace norm with respect to the three covariances.
  RowMat d12 = i11 * u * v.transpose() * i22;
  RowMat d11 = -0.5 * i11 * u * d.asDiagonal() * u.transpose() * i11;
  RowMat d22 = -0.5 * i22 * v * d.asDiagonal() * v.transpose() * i22;
  RowMat g1 = (2.0 * h1 * d11 + h2 * d12.transpose()) / n;
  RowMat g2 = (2.0 * h2 * d22 + h1 * d12) / n;

  Graph &g = a.graph();
  const int32_t ia = a.id(), ib = b.id();
  Tensor ga = FromEigen(g1), gb = FromEigen(g2);
  return g.Record("cca_correlation", Tensor::Scalar(d.sum()), {ia, ib},
                  [ia, ib, ga = std::move(ga), gb = std::move(gb)](Graph &gr, int32_t self) {
                    const double up = gr.grad(self).item();
                    if (Tensor *t1 = gr.grad_if_needed(ia)) t1->AddScaled(ga, up);
                    if (Tensor *t2 = gr.grad_if_needed(ib)) t2->AddScaled(gb, up);
                  });
}

namespace {

Var ConstraintResidual(const Var &h, double ridge) {
  const auto n = static_cast<double>(h.rows());
  Var centred = Sub(h, Scale(SumRows(h), 1.0 / n));
  Var cov = Scale(MatMul(Transpose(centred), centred), 1.0 / n);
  Tensor shift = Tensor::Identity(h.cols());
  for (double &e : shift.values()) e *= (ridge - 1.0);
  return Sum(Square(Add(cov, h.graph().Constant(std::move(shift), "ridge_minus_identity"))));
}

}  // namespace

Var SimilarityLoss(const Var &a, const Var &b, const SimilarityLossConfig &cfg,
                   const std::vector<Var> *negatives, Rng *rng) {
  cfg.Check();
  SEQREP_CHECK_SHAPE(a.value().SameShape(b.value()),
                     "similarity loss operands differ: " + a.value().ShapeString() + " vs " +
                         b.value().ShapeString());
  const auto n = static_cast<double>(a.rows());
  switch (cfg.kind) {
    case SimilarityKind::kL2:
      return Scale(SquaredError(a, b), 1.0 / n);
    case SimilarityKind::kCosine:
      return Neg(Mean(CosineRows(a, b)));
    case SimilarityKind::kContrastive: {
      std::vector<Var> negs;
      if (negatives != nullptr) {
        negs = *negatives;
      } else {
        Rng local(0);
        Rng &r = rng != nullptr ? *rng : local;
        for (int32_t k = 0; k < cfg.n_negatives; ++k)
          negs.push_back(GatherRows(b, r.Permutation(a.rows())));
      }
      SEQREP_CHECK_CONFIG(!negs.empty(), "contrastive loss needs negatives");
      Var pos = CosineRows(a, b);
      Var total;
      for (size_t k = 0; k < negs.size(); ++k) {
        Var hinge = Mean(Relu(AddScalar(Sub(CosineRows(a, negs[k]), pos), cfg.margin)));
        total = k == 0 ? hinge : Add(total, hinge);
      }
      return negs.size() == 1 ? total : Scale(total, 1.0 / static_cast<double>(negs.size()));
    }
    case SimilarityKind::kCca: {
      Var loss = Neg(CcaCorrelation(a, b, cfg.rx, cfg.ry));
      if (cfg.lambda > 0.0)
        loss = Add(loss, Scale(Add(ConstraintResidual(a, cfg.rx), ConstraintResidual(b, cfg.ry)),
                               cfg.lambda));
      return loss;
    }
  }
  throw ConfigError("unhandled similarity loss kind");
}

// ---------------------------------------------------------------------------
// Label embedding

LabelWindows MakeLabelWindows(const std::vector<int32_t> &labels, int64_t vocab, int64_t window) {
  SEQREP_CHECK_CONFIG(window >= 1 && window % 2 == 1, "label window width must be odd and >= 1");
  SEQREP_CHECK_CONFIG(vocab >= 1, "label vocabulary must be non-empty");
  const auto T = static_cast<int64_t>(labels.size());
  const int64_t k = (window - 1) / 2;
  LabelWindows out;
  out.window = window;
  out.labels = vocab;
  out.onehot = Tensor(T, window * vocab);
  out.targets.reserve(static_cast<size_t>(T * window));
  for (int64_t t = 0; t < T; ++t)
    for (int64_t j = -k; j <= k; ++j) {
      const int64_t s = std::clamp<int64_t>(t + j, 0, T - 1);
      const int32_t l = labels[static_cast<size_t>(s)];
      SEQREP_CHECK_SHAPE(l >= 0 && l < vocab, "label " + std::to_string(l) + " out of range");
      out.onehot(t, (j + k) * vocab + l) = 1.0;
      out.targets.push_back(l);
    }
  return out;
}

void LabelEmbeddingConfig::Check() const {
  SEQREP_CHECK_CONFIG(frame_dim >= 1 && labels >= 1, "frame and label dimensions must be positive");
  SEQREP_CHECK_CONFIG(window >= 1 && window % 2 == 1, "window width must be odd and >= 1");
  SEQREP_CHECK_CONFIG(latent >= 1, "latent dimension must be >= 1");
  SEQREP_CHECK_CONFIG(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha1 + alpha2 <= 1.0 + 1e-12,
                      "label embedding weights need alpha1, alpha2 >= 0 and alpha1 + alpha2 <= 1");
  sim.Check();
}

LabelEmbeddingModel::LabelEmbeddingModel(ParamStore *store, const std::string &name,
                                         const LabelEmbeddingConfig &cfg, Rng &rng)
    : cfg_((cfg.Check(), cfg)),
      ac_(store, name + ".acoustic", cfg.frame_dim * cfg.window, cfg.hidden, cfg.latent, cfg.act, rng),
      lab_(store, name + ".label", cfg.labels * cfg.window, cfg.hidden, cfg.latent, cfg.act, rng),
      dec_(store, name + ".dec", cfg.latent, DecoderWidths(cfg.hidden, cfg.labels * cfg.window),
           cfg.act, rng) {}

GaussianVar LabelEmbeddingModel::EncodeAcoustic(Graph &g, const Var &x, const RunMode &mode) const {
  return ac_.Forward(g, x, mode);
}

GaussianVar LabelEmbeddingModel::EncodeLabels(Graph &g, const Var &onehot,
                                              const RunMode &mode) const {
  return lab_.Forward(g, onehot, mode);
}

Var LabelEmbeddingModel::DecodeLogProbs(Graph &g, const Var &z, const RunMode &mode) const {
  Var logits = dec_.Forward(g, z, mode);
  return LogSoftmax(Reshape(logits, z.rows() * cfg_.window, cfg_.labels));
}

Tensor LabelEmbeddingModel::PredictProbs(const Tensor &windows) const {
  Graph g;
  g.set_accumulate_param_grads(false);
  Var mu = EncodeAcoustic(g, g.Constant(windows)).mu;
  Tensor lp = DecodeLogProbs(g, mu).value();
  for (double &v : lp.values()) v = std::exp(v);
  return Tensor(windows.rows(), cfg_.window * cfg_.labels, lp.values());
}

LabelEmbeddingLossOut LabelEmbeddingLoss(Graph &g, const LabelEmbeddingModel &model,
                                         const Tensor &windows, const LabelWindows &labels,
                                         const RunMode &mode) {
  const LabelEmbeddingConfig &cfg = model.config();
  const int64_t n = windows.rows(), W = cfg.window, L = cfg.labels;
  SEQREP_CHECK_SHAPE(windows.cols() == cfg.frame_dim * W, "acoustic window width mismatch");
  SEQREP_CHECK_SHAPE(labels.onehot.rows() == n && labels.window == W && labels.labels == L,
                     "label windows do not match the acoustic batch");
  const double inv_n = 1.0 / static_cast<double>(n);

  auto branch = [&](const GaussianVar &q) {
    Var z = Sample(g, q, mode);
    Var nll = Neg(Sum(PickPerRow(model.DecodeLogProbs(g, z, mode), labels.targets)));
    return Scale(Add(nll, Scale(Sum(KlToStandard(q)), cfg.beta)), inv_n);
  };

  GaussianVar qa = model.EncodeAcoustic(g, g.Constant(windows, "acoustic"), mode);
  GaussianVar ql = model.EncodeLabels(g, g.Constant(labels.onehot, "labels"), mode);
  LabelEmbeddingLossOut out;
  out.acoustic = branch(qa);
  out.label = branch(ql);
  if (cfg.sim.kind == SimilarityKind::kContrastive) {
    Rng local(0);
    Rng &r = mode.rng != nullptr ? *mode.rng : local;
    std::vector<Var> negs;
    for (int32_t k = 0; k < cfg.sim.n_negatives; ++k) {
      Tensor shuffled(n, W * L);
      for (int64_t row = 0; row < n; ++row) {
        const auto perm = r.Permutation(W);
        for (int64_t p = 0; p < W; ++p)
          std::copy_n(labels.onehot.data() + row * W * L + perm[p] * L, L,
                      shuffled.data() + row * W * L + p * L);
      }
      negs.push_back(model.EncodeLabels(g, g.Constant(std::move(shuffled), "negative_labels"), mode).mu);
    }
    out.similarity = SimilarityLoss(qa.mu, ql.mu, cfg.sim, &negs);
  } else {
    out.similarity = SimilarityLoss(qa.mu, ql.mu, cfg.sim);
  }
  const double a3 = std::max(0.0, 1.0 - cfg.alpha1 - cfg.alpha2);
  out.loss = Add(Add(Scale(out.acoustic, cfg.alpha1), Scale(out.similarity, cfg.alpha2)),
                 Scale(out.label, a3));
  return out;
}

GeometricMeanResult GeometricMeanPredict(const Tensor &probs, int64_t window, int64_t labels) {
  SEQREP_CHECK_CONFIG(window >= 1 && window % 2 == 1, "window width must be odd and >= 1");
  SEQREP_CHECK_SHAPE(probs.cols() == window * labels,
                     "prediction width " + std::to_string(probs.cols()) + " is not window x labels");
  constexpr double kFloor = 1e-30;
  const int64_t T = probs.rows(), k = (window - 1) / 2;
  GeometricMeanResult out;
  out.log_mean = Tensor(T, labels);
  out.labels.resize(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) {
    int64_t count = 0;
    for (int64_t c = std::max<int64_t>(0, t - k); c <= std::min(T - 1, t + k); ++c) {
      const int64_t pos = t - c + k;
      for (int64_t l = 0; l < labels; ++l) {
        double p = probs(c, pos * labels + l);
        SEQREP_CHECK_SHAPE(p >= 0.0, "negative probability in window predictions");
        if (p < kFloor) {
          p = kFloor;
          ++out.floored;
        }
        out.log_mean(t, l) += std::log(p);
      }
      ++count;
    }
    int64_t best = 0;
    for (int64_t l = 0; l < labels; ++l) {
      out.log_mean(t, l) /= static_cast<double>(count);
      if (out.log_mean(t, l) > out.log_mean(t, best)) best = l;
    }
    out.labels[static_cast<size_t>(t)] = static_cast<int32_t>(best);
  }
  return out;
}

MonteCarloEstimate WindowMixturePriorKl(const DiagGaussian &q,
                                        const std::vector<DiagGaussian> &neighbours,
                                        int64_t samples, Rng &rng) {
  SEQREP_CHECK_CONFIG(!neighbours.empty(), "mixture prior needs at least one neighbour");
  SEQREP_CHECK_CONFIG(samples >= 2, "need at least two Monte Carlo samples");
  SEQREP_CHECK_SHAPE(q.count() == 1, "posterior must be a single row");
  for (const auto &nb : neighbours)
    SEQREP_CHECK_SHAPE(nb.count() == 1 && nb.dim() == q.dim(), "neighbour shape mismatch");
  const int64_t d = q.dim();
  const double log_k = std::log(static_cast<double>(neighbours.size()));
  std::vector<double> z(static_cast<size_t>(d));
  std::vector<double> lp(neighbours.size());
  double sum = 0.0, sum_sq = 0.0;
  for (int64_t s = 0; s < samples; ++s) {
    for (int64_t i = 0; i < d; ++i)
      z[static_cast<size_t>(i)] = q.mu[i] + std::exp(0.5 * q.logvar[i]) * rng.Normal();
    for (size_t k = 0; k < neighbours.size(); ++k) lp[k] = LogDensity(neighbours[k], 0, z);
    const double m = *std::max_element(lp.begin(), lp.end());
    double acc = 0.0;
    for (double v : lp) acc += std::exp(v - m);
    const double f = LogDensity(q, 0, z) - (m + std::log(acc) - log_k);
    sum += f;
    sum_sq += f * f;
  }
  const auto S = static_cast<double>(samples);
  MonteCarloEstimate est;
  est.value = sum / S;
  const double var = std::max(0.0, (sum_sq - S * est.value * est.value) / (S - 1.0));
  est.std_error = std::sqrt(var / S);
  return est;
}

}  // namespace seqrep
