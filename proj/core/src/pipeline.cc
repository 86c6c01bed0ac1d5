// core/src/pipeline.cc

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

#include "seqrep/pipeline.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "seqrep/ctc.h"
#include "seqrep/error.h"
#include "seqrep/ffmodels.h"
#include "seqrep/multiview.h"
#include "seqrep/ops.h"
#include "seqrep/pretrain.h"
#include "seqrep/recognizer.h"
#include "seqrep/recrep.h"

namespace fs = std::filesystem;

namespace seqrep {

namespace {

const char *kPre = "pre";
const char *kRec = "rec";

// ---------------------------------------------------------------------------
// Corpus helpers

Dataset SampleSplit(const DataOptions &opts, const SyntheticModel &model, int32_t n,
                    const char *prefix, uint64_t seed) {
  SyntheticConfig c = opts.synth;
  c.n_utterances = n;
  c.id_prefix = prefix;
  return SampleSynthetic(c, model, seed);
}

std::vector<PriorKey> FrameKeys(const Utterance &u, int64_t rows) {
  std::vector<PriorKey> keys;
  keys.reserve(static_cast<size_t>(rows));
  for (int64_t t = 0; t < rows; ++t) keys.emplace_back(u.id, t);
  return keys;
}

double MeanRowKl(const DiagGaussian &q, double *rows) {
  *rows += static_cast<double>(q.count());
  return KlToStandard(q);
}

RecurrentStackConfig StackConfig(const ModelOptions &o, bool bidirectional, double dropout) {
  return RecurrentStackConfig{o.rnn_layers, o.rnn_hidden, bidirectional, {}, dropout};
}

// ---------------------------------------------------------------------------
// Feedforward models on windows of frames.

class FFPretrain : public PretrainModel {
 public:
  FFPretrain(const ModelOptions &o, int64_t dim, ParamStore *store, Rng &rng)
      : PretrainModel(o.type), window_(o.window), model_(store, kPre, Config(o, dim), rng) {}

  Var Loss(Graph &g, const Utterance &u, const RunMode &mode, const LossContext &ctx) const override {
    Tensor w = WindowStack(u.frames, window_);
    if (ctx.priors != nullptr)
      return PriorUpdatedLoss(g, model_, w, FrameKeys(u, w.rows()), *ctx.priors,
                              model_.config().beta, mode)
          .loss;
    return model_.Loss(g, g.Constant(std::move(w), "windows"), mode).loss;
  }
  Tensor Features(const Tensor &frames) const override {
    return ExtractFeatures(frames, model_, window_);
  }
  int64_t feature_dim() const override { return model_.config().latent; }
  bool supports_priors() const override { return model_.config().variant == FFVariant::kVae; }
  PriorStore BuildPriors(const Dataset &data, int64_t tag) const override {
    PriorStore::Builder b(tag);
    for (const auto &u : data) b.PutRows(u.id, FFPosteriors(model_, WindowStack(u.frames, window_)));
    return std::move(b).Finish();
  }
  double AverageKl(const Dataset &data) const override {
    double kl = 0.0, rows = 0.0;
    for (const auto &u : data) kl += MeanRowKl(FFPosteriors(model_, WindowStack(u.frames, window_)), &rows);
    return rows > 0.0 ? kl / rows : 0.0;
  }

 private:
  static FFEncoderConfig Config(const ModelOptions &o, int64_t dim) {
    FFEncoderConfig c;
    c.input_dim = dim * o.window;
    c.hidden = o.hidden;
    c.latent = o.latent;
    if (o.type == "ae") c.variant = FFVariant::kAE;
    else if (o.type == "nae") c.variant = FFVariant::kNae;
    else if (o.type == "vae") c.variant = FFVariant::kVae;
    else c.variant = o.corruption == "gaussian" ? FFVariant::kDaeGaussian : FFVariant::kDaeBernoulli;
    c.p = o.p;
    c.gamma = o.gamma;
    c.beta = o.beta;
    c.act = ParseActivation(o.act);
    c.samples = o.samples;
    return c;
  }

  int64_t window_;
  FFModel model_;
};

// ---------------------------------------------------------------------------
// Two-view models: view 1 is the first half of each frame, view 2 the rest.

class VccaPretrain : public PretrainModel {
 public:
  VccaPretrain(const ModelOptions &o, int64_t dim, ParamStore *store, Rng &rng)
      : PretrainModel(o.type), window_(o.window), split_(dim / 2),
        model_(store, kPre, Config(o, dim), rng) {
    SEQREP_CHECK_CONFIG(dim >= 2, "two-view models need at least two feature dimensions");
  }

  Var Loss(Graph &g, const Utterance &u, const RunMode &mode, const LossContext &ctx) const override {
    PairedBatch b = Views(u);
    if (ctx.priors != nullptr)
      return PriorUpdatedLoss(g, model_, b, *ctx.priors, model_.config().beta, mode).loss;
    return VccapLoss(g, model_, b, mode).loss;
  }
  Tensor Features(const Tensor &frames) const override {
    Graph g;
    g.set_accumulate_param_grads(false);
    return model_.EncodeZ(g, g.Constant(WindowStack(frames.ColSlice(0, split_), window_))).mu.value();
  }
  int64_t feature_dim() const override { return model_.config().latent; }
  bool supports_priors() const override { return true; }
  PriorStore BuildPriors(const Dataset &data, int64_t tag) const override {
    PriorStore::Builder b(tag);
    for (const auto &u : data) b.PutRows(u.id, VccapPosteriors(model_, Views(u)));
    return std::move(b).Finish();
  }
  double AverageKl(const Dataset &data) const override {
    double kl = 0.0, rows = 0.0;
    for (const auto &u : data) kl += MeanRowKl(VccapPosteriors(model_, Views(u)), &rows);
    return rows > 0.0 ? kl / rows : 0.0;
  }

 private:
  static VccapConfig Config(const ModelOptions &o, int64_t dim) {
    VccapConfig c;
    c.x_dim = (dim / 2) * o.window;
    c.y_dim = (dim - dim / 2) * o.window;
    c.hidden = o.hidden;
    c.private_hidden = o.private_hidden;
    c.latent = o.latent;
    c.private_x = o.type == "vccap" ? o.private_x : 0;
    c.private_y = o.type == "vccap" ? o.private_y : 0;
    c.beta = o.beta;
    c.act = ParseActivation(o.act);
    return c;
  }
  PairedBatch Views(const Utterance &u) const {
    PairedBatch b;
    b.x = WindowStack(u.frames.ColSlice(0, split_), window_);
    b.y = WindowStack(u.frames.ColSlice(split_, u.frames.cols()), window_);
    b.keys = FrameKeys(u, b.x.rows());
    return b;
  }

  int64_t window_, split_;
  VccapModel model_;
};

// ---------------------------------------------------------------------------
// Recurrent variational models, optionally pyramidal and supervised.

class RecRepPretrain : public PretrainModel {
 public:
  RecRepPretrain(const ModelOptions &o, int64_t dim, int32_t vocab, double dropout,
                 ParamStore *store, Rng &rng)
      : PretrainModel(o.type), model_(store, kPre, Config(o, dim, vocab, dropout), rng) {}

  Var Loss(Graph &g, const Utterance &u, const RunMode &mode, const LossContext &ctx) const override {
    const RecRepConfig &c = model_.config();
    DiagGaussian prior;
    const DiagGaussian *p = nullptr;
    if (ctx.priors != nullptr) {
      prior = LookupPriors(*ctx.priors, u, u.frames.rows() / c.Reduction());
      p = &prior;
    }
    if (c.supervision != Supervision::kNone && u.has_labels())
      return RecRepJointLoss(g, model_, u, mode, p).loss;
    RecRepOut out = RecRepElbo(g, model_, u.frames, mode, p);
    return c.supervision == Supervision::kNone ? out.loss : Scale(out.neg_elbo, c.alpha);
  }
  Tensor Features(const Tensor &frames) const override { return model_.Posteriors(frames).mu; }
  std::vector<int32_t> FeatureLabels(const std::vector<int32_t> &labels) const override {
    return model_.StepLabels(labels);
  }
  int64_t feature_dim() const override { return model_.config().latent; }
  bool supports_priors() const override { return true; }
  PriorStore BuildPriors(const Dataset &data, int64_t tag) const override {
    return BuildSelfPriors(model_, data, tag);
  }
  double AverageKl(const Dataset &data) const override { return AverageKlToStandard(model_, data); }
  std::map<std::string, double> ExtraMetrics(const Dataset &dev) const override {
    if (model_.config().supervision != Supervision::kFramewise) return {};
    double loss = 0.0;
    int64_t correct = 0, total = 0;
    for (const auto &u : dev) {
      SEQREP_CHECK_CONFIG(u.has_labels(), "dev utterance " + u.id + " has no labels");
      Graph g;
      g.set_accumulate_param_grads(false);
      Var h = model_.Encode(g, g.Constant(u.frames, "frames"));
      Var lp = model_.HeadLogProbs(g, model_.Posterior(g, h).mu);
      const std::vector<int32_t> labels = model_.StepLabels(u.labels);
      loss += CrossEntropy(lp, labels).value().item();
      const Tensor &v = lp.value();
      for (int64_t r = 0; r < v.rows(); ++r) {
        auto row = v.row(r);
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        correct += best == labels[static_cast<size_t>(r)];
      }
      total += v.rows();
    }
    return {{"framewise_loss", loss / static_cast<double>(dev.size())},
            {"framewise_acc", static_cast<double>(correct) / static_cast<double>(total)}};
  }
  std::optional<FinetuneSpec> finetune() const override {
    return FinetuneSpec{model_.config().encoder, std::string(kPre) + ".enc", ""};
  }
  std::string select_metric() const override {
    return model_.config().supervision == Supervision::kFramewise ? "framewise_loss" : "loss";
  }

 private:
  static RecRepConfig Config(const ModelOptions &o, int64_t dim, int32_t vocab, double dropout) {
    RecRepConfig c;
    c.input_dim = dim;
    c.encoder = StackConfig(o, o.bidirectional, dropout);
    if (o.type == "recrep-pyramid") {
      SEQREP_CHECK_CONFIG(o.rnn_layers >= 2, "recrep-pyramid needs model.rnn_layers >= 2");
      c.encoder.pyramid.assign(static_cast<size_t>(o.rnn_layers), true);
      c.encoder.pyramid.back() = false;
    }
    c.latent = o.latent;
    c.aux = ParseAuxMode(o.aux);
    c.aux_latent = o.aux_latent;
    c.decoder_hidden = o.decoder_hidden;
    c.decoder_act = ParseActivation(o.act);
    c.pyramid_window = o.pyramid_window;
    c.beta = o.beta;
    c.alpha = o.alpha;
    c.kappa = o.kappa;
    c.supervision = ParseSupervision(o.supervision);
    c.classes = vocab;
    c.private_rnn = RecurrentStackConfig{1, o.rnn_hidden, true, {}, dropout};
    c.classifier_hidden = o.classifier_hidden;
    c.normalize_supervised = o.normalize_supervised;
    return c;
  }

  RecRepModel model_;
};

// ---------------------------------------------------------------------------

class FBPretrain : public PretrainModel {
 public:
  FBPretrain(const ModelOptions &o, int64_t dim, ParamStore *store, Rng &rng)
      : PretrainModel(o.type), model_(store, kPre, Config(o, dim), rng) {}

  Var Loss(Graph &g, const Utterance &u, const RunMode &mode, const LossContext &) const override {
    return FBLoss(g, model_, u.frames, mode);
  }
  Tensor Features(const Tensor &frames) const override { return model_.Features(frames); }
  int64_t feature_dim() const override { return model_.config().FeatureDim(); }

 private:
  static FBConfig Config(const ModelOptions &o, int64_t dim) {
    FBConfig c;
    c.input_dim = dim;
    c.hidden = o.rnn_hidden;
    c.d_f = o.d_f;
    c.d_b = o.d_b;
    c.d_zf = o.d_zf;
    c.d_zb = o.d_zb;
    c.decoder_hidden = o.decoder_hidden;
    c.decoder_act = ParseActivation(o.act);
    c.beta = o.beta;
    return c;
  }

  FBModel model_;
};

// ---------------------------------------------------------------------------

class CpcPretrain : public PretrainModel {
 public:
  CpcPretrain(const ModelOptions &o, int64_t dim, double dropout, ParamStore *store, Rng &rng)
      : PretrainModel(o.type), model_(store, kPre, Config(o, dim, dropout), rng) {}

  Var Loss(Graph &g, const Utterance &u, const RunMode &mode, const LossContext &ctx) const override {
    SEQREP_CHECK_CONFIG(mode.rng != nullptr, "CPC loss needs a random source for negatives");
    std::vector<const Tensor *> others;
    if (model_.config().negatives == NegativeMode::kBatch && ctx.pool != nullptr &&
        ctx.pool->size() > 1) {
      const int64_t n = static_cast<int64_t>(ctx.pool->size());
      for (int k = 0; k < kBatchPartners; ++k) {
        const Utterance &o = (*ctx.pool)[static_cast<size_t>(mode.rng->UniformInt(0, n - 1))];
        if (o.id != u.id) others.push_back(&o.frames);
      }
    }
    return CpcLoss(g, model_, u.frames, *mode.rng, mode, others);
  }
  Tensor Features(const Tensor &frames) const override { return model_.Features(frames); }
  int64_t feature_dim() const override { return model_.config().context.hidden; }

 private:
  static constexpr int kBatchPartners = 3;

  static CpcConfig Config(const ModelOptions &o, int64_t dim, double dropout) {
    CpcConfig c;
    c.input_dim = dim;
    c.K = o.cpc_k;
    c.N = o.cpc_n;
    c.latent_hidden = o.hidden;
    c.latent_dim = o.latent;
    c.act = ParseActivation(o.act);
    c.context = StackConfig(o, false, dropout);
    c.negatives = ParseNegativeMode(o.negatives);
    return c;
  }

  CpcModel model_;
};

// ---------------------------------------------------------------------------

class MaskedPretrain : public PretrainModel {
 public:
  MaskedPretrain(const ModelOptions &o, int64_t dim, double dropout, ParamStore *store, Rng &rng)
      : PretrainModel(o.type), model_(store, kPre, Config(o, dim, dropout), rng) {}

  Var Loss(Graph &g, const Utterance &u, const RunMode &mode, const LossContext &) const override {
    SEQREP_CHECK_CONFIG(mode.rng != nullptr, "masked pretraining needs a random source for masks");
    return MaskedPretrainLoss(g, model_, u.frames, *mode.rng, mode);
  }
  Tensor Features(const Tensor &frames) const override { return model_.Features(frames); }
  int64_t feature_dim() const override {
    const RecurrentStackConfig &e = model_.config().encoder;
    return e.hidden * (e.bidirectional ? 2 : 1);
  }
  std::optional<FinetuneSpec> finetune() const override {
    return FinetuneSpec{model_.config().encoder, std::string(kPre) + ".enc",
                        model_.config().lin ? std::string(kPre) + ".lin" : ""};
  }

 private:
  static MaskedPretrainConfig Config(const ModelOptions &o, int64_t dim, double dropout) {
    MaskedPretrainConfig c;
    c.input_dim = dim;
    c.mask = MaskSpec{o.n_time_masks, o.max_time_width, o.n_channel_masks, o.max_channel_width, 0};
    std::string name = o.type;
    std::replace(name.begin(), name.end(), '-', '_');
    c.objective = ParseMaskedObjective(name);
    c.alpha = o.mask_alpha;
    c.n_negatives = o.n_negatives;
    c.lin = o.lin;
    c.encoder = StackConfig(o, o.bidirectional, dropout);
    c.decoder_hidden = o.decoder_hidden;
    c.act = ParseActivation(o.act);
    c.latent_hidden = o.hidden;
    c.epoch_multiplier = o.epoch_multiplier;
    return c;
  }

  MaskedModel model_;
};

// ---------------------------------------------------------------------------

class LabelEmbedPretrain : public PretrainModel {
 public:
  LabelEmbedPretrain(const ModelOptions &o, int64_t dim, int32_t vocab, ParamStore *store, Rng &rng)
      : PretrainModel(o.type), model_(store, kPre, Config(o, dim, vocab), rng) {}

  Var Loss(Graph &g, const Utterance &u, const RunMode &mode, const LossContext &) const override {
    SEQREP_CHECK_CONFIG(u.has_labels(), "label embedding needs labels for utterance " + u.id);
    const LabelEmbeddingConfig &c = model_.config();
    return LabelEmbeddingLoss(g, model_, WindowStack(u.frames, c.window),
                              MakeLabelWindows(u.labels, c.labels, c.window), mode)
        .loss;
  }
  Tensor Features(const Tensor &frames) const override {
    Graph g;
    g.set_accumulate_param_grads(false);
    return model_.EncodeAcoustic(g, g.Constant(WindowStack(frames, model_.config().window))).mu.value();
  }
  int64_t feature_dim() const override { return model_.config().latent; }
  bool needs_labels() const override { return true; }

 private:
  static LabelEmbeddingConfig Config(const ModelOptions &o, int64_t dim, int32_t vocab) {
    LabelEmbeddingConfig c;
    c.frame_dim = dim;
    c.labels = vocab;
    c.window = o.window;
    c.hidden = o.hidden;
    c.latent = o.latent;
    c.beta = o.beta;
    c.alpha1 = o.alpha1;
    c.alpha2 = o.alpha2;
    c.act = ParseActivation(o.act);
    c.sim.kind = ParseSimilarityKind(o.similarity);
    c.sim.margin = o.margin;
    return c;
  }

  LabelEmbeddingModel model_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Corpus

int64_t Corpus::dim() const {
  for (const Dataset *d : {&unlabeled, &labeled, &dev})
    if (!d->empty()) return d->front().dim();
  return 0;
}

Dataset Corpus::Pool() const {
  Dataset out = unlabeled;
  out.insert(out.end(), labeled.begin(), labeled.end());
  return out;
}

Corpus GenerateCorpus(const DataOptions &opts) {
  opts.synth.Check();
  const SyntheticModel model = MakeSyntheticModel(opts.synth, opts.seed);
  Rng seeds(opts.seed);
  Corpus c;
  c.vocab = opts.synth.n_states;
  c.unlabeled = SampleSplit(opts, model, opts.synth.n_utterances, "unl", seeds.NextSeed());
  for (auto &u : c.unlabeled) {
    u.labels.clear();
    u.transcript.clear();
  }
  c.labeled = SampleSplit(opts, model, opts.n_labeled, "lab", seeds.NextSeed());
  c.dev = SampleSplit(opts, model, opts.n_dev, "dev", seeds.NextSeed());
  return c;
}

void SaveCorpus(const std::string &dir, const Corpus &corpus) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  nlohmann::ordered_json meta;
  meta["vocab"] = corpus.vocab;
  meta["dim"] = corpus.dim();
  const std::pair<const char *, const Dataset *> splits[] = {
      {"unlabeled", &corpus.unlabeled}, {"labeled", &corpus.labeled}, {"dev", &corpus.dev}};
  for (const auto &[name, data] : splits) {
    SaveDataset((fs::path(dir) / name).string(), *data, corpus.vocab);
    meta["splits"][name] = std::string(name) + "/manifest.json";
  }
  const std::string path = (fs::path(dir) / "corpus.json").string();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << meta.dump(1) << "\n";
}

Corpus LoadCorpus(const std::string &dir) {
  const std::string path = (fs::path(dir) / "corpus.json").string();
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path + " (expected a directory written by gen-data)");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(is);
    Corpus c;
    c.vocab = meta.at("vocab").get<int32_t>();
    c.unlabeled = LoadDataset((fs::path(dir) / meta.at("splits").at("unlabeled").get<std::string>()).string());
    c.labeled = LoadDataset((fs::path(dir) / meta.at("splits").at("labeled").get<std::string>()).string());
    c.dev = LoadDataset((fs::path(dir) / meta.at("splits").at("dev").get<std::string>()).string());
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw IoError("malformed " + path + ": " + e.what());
  }
}

void NormalizeCorpus(Corpus *corpus) {
  const NormStats stats = ComputeNormStats(corpus->unlabeled.empty() ? corpus->labeled : corpus->unlabeled);
  ApplyNorm(stats, &corpus->unlabeled);
  ApplyNorm(stats, &corpus->labeled);
  ApplyNorm(stats, &corpus->dev);
}

Corpus PrepareCorpus(const RunConfig &cfg) {
  Corpus c = GenerateCorpus(cfg.data);
  if (cfg.data.normalize) NormalizeCorpus(&c);
  return c;
}

Corpus PrepareCorpus(const RunConfig &cfg, const std::string &dir) {
  Corpus c = LoadCorpus(dir);
  if (cfg.data.normalize) NormalizeCorpus(&c);
  return c;
}

// ---------------------------------------------------------------------------
// Pretraining

PriorStore PretrainModel::BuildPriors(const Dataset &, int64_t) const {
  throw ConfigError("model type '" + type_ + "' does not support prior updating");
}

double PretrainModel::AverageKl(const Dataset &) const {
  throw ConfigError("model type '" + type_ + "' has no Gaussian posterior");
}

std::unique_ptr<PretrainModel> PretrainModel::Create(const ModelOptions &o, int64_t dim,
                                                     int32_t vocab, double dropout,
                                                     ParamStore *store, Rng &rng) {
  SEQREP_CHECK_CONFIG(dim >= 1, "input dimension must be positive");
  const std::string &t = o.type;
  if (t == "ae" || t == "dae" || t == "nae" || t == "vae")
    return std::make_unique<FFPretrain>(o, dim, store, rng);
  if (t == "vcca" || t == "vccap") return std::make_unique<VccaPretrain>(o, dim, store, rng);
  if (t == "recrep" || t == "recrep-pyramid")
    return std::make_unique<RecRepPretrain>(o, dim, vocab, dropout, store, rng);
  if (t == "fb") return std::make_unique<FBPretrain>(o, dim, store, rng);
  if (t == "cpc") return std::make_unique<CpcPretrain>(o, dim, dropout, store, rng);
  if (t == "label-embed") return std::make_unique<LabelEmbedPretrain>(o, dim, vocab, store, rng);
  if (t == "bert" || t == "bert-half" || t == "bicpc" || t == "mv-mae" || t == "mv-contrast" ||
      t == "crossview-bert")
    return std::make_unique<MaskedPretrain>(o, dim, dropout, store, rng);
  throw ConfigError("unknown model.type '" + t + "'");
}

std::map<std::string, double> PretrainDevMetrics(const RunConfig &cfg, const PretrainModel &model,
                                                 const Dataset &dev) {
  Rng rng(cfg.pretrain.seed + 0x5eed);
  const LossContext ctx{nullptr, &dev};
  std::map<std::string, double> out = model.ExtraMetrics(dev);
  if (model.supports_priors()) out["kl"] = model.AverageKl(dev);
  out["loss"] = EvaluateLoss(
                    dev,
                    [&](Graph &g, const Utterance &u) { return model.Loss(g, u, RunMode{false, &rng}, ctx); },
                    cfg.eval.batch_size)
                    .value;
  return out;
}

PretrainOutcome RunPretrain(const RunConfig &cfg, const Corpus &corpus, PretrainModel &model,
                            ParamStore *store) {
  const Dataset pool = model.needs_labels() ? corpus.labeled : corpus.Pool();
  SEQREP_CHECK_CONFIG(!pool.empty(), "pretraining pool is empty");
  SEQREP_CHECK_CONFIG(!cfg.pretrain.prior_update.enabled || model.supports_priors(),
                      "model type '" + model.type() + "' does not support prior updating");
  const int64_t mult = std::max<int64_t>(1, cfg.model.epoch_multiplier);
  PretrainOutcome out;
  TrainTask task;
  task.params = store;
  task.n_train = static_cast<int64_t>(pool.size()) * mult;
  task.loss = [&](Graph &g, int64_t i, const RunMode &mode) {
    const LossContext ctx{out.priors ? &*out.priors : nullptr, &pool};
    return model.Loss(g, pool[static_cast<size_t>(i % static_cast<int64_t>(pool.size()))], mode, ctx);
  };
  if (!corpus.dev.empty()) {
    task.evaluate = [&] { return PretrainDevMetrics(cfg, model, corpus.dev); };
    task.select_metric = model.select_metric();
  }
  if (cfg.pretrain.prior_update.enabled)
    task.prior_update = [&](int32_t epoch) { out.priors = model.BuildPriors(pool, epoch); };
  out.result = Train(task, cfg.pretrain);
  return out;
}

// ---------------------------------------------------------------------------
// Recognizer

struct RecognizerModel::Impl {
  const PretrainModel *pre = nullptr;
  std::string features;
  std::optional<FinetuneSpec> spec;
  CtcRecognizer ctc;
  // Framewise recognizer: [LIN] -> [recurrent stack] -> classifier.
  bool use_lin = false, use_rnn = false;
  Linear lin;
  RecurrentStack rnn;
  FramewiseClassifier cls;

  Var Hidden(Graph &g, const Tensor &x, const RunMode &mode) const {
    Var h = g.Constant(x, "input");
    if (use_lin) h = lin.Forward(g, h);
    if (use_rnn) h = rnn.Forward(g, h, mode);
    return h;
  }
};

RecognizerModel::RecognizerModel(const RunConfig &cfg, int64_t input_dim, int32_t vocab,
                                 const PretrainModel *pre, ParamStore *store, Rng &rng)
    : impl_(std::make_unique<Impl>()) {
  const TrainOptions &t = cfg.train;
  Impl &m = *impl_;
  m.pre = pre;
  m.features = t.features;
  ctc_ = t.recognizer == "ctc";
  SEQREP_CHECK_CONFIG(vocab >= 1, "recognizer needs at least one label");
  SEQREP_CHECK_CONFIG(t.features == "raw" || pre != nullptr,
                      "train.features = " + t.features + " needs a pretrained checkpoint (--init)");
  int64_t in = input_dim;
  RecurrentStackConfig rnn{t.rnn_layers, t.rnn_hidden, t.bidirectional, {}, t.loop.dropout};
  bool lin = t.lin;
  std::vector<int64_t> ff = t.ff_widths;
  if (t.features == "frozen") {
    in = pre->feature_dim();
  } else if (t.features == "finetune") {
    m.spec = pre->finetune();
    SEQREP_CHECK_CONFIG(m.spec.has_value(),
                        "model type '" + pre->type() +
                            "' cannot be fine-tuned; use train.features = frozen");
    rnn = m.spec->rnn;
    rnn.dropout = t.loop.dropout;
    lin = lin || !m.spec->lin_prefix.empty();
    SEQREP_CHECK_CONFIG(ff.empty(), "train.ff_widths must be empty when fine-tuning an encoder");
  }
  if (ctc_) {
    RecognizerConfig rc;
    rc.input_dim = in;
    rc.vocab = vocab;
    rc.rnn = rnn;
    rc.ff_widths = ff;
    rc.lin = lin;
    m.ctc = CtcRecognizer(store, kRec, rc, rng);
    return;
  }
  const std::string name = kRec;
  if (lin) {
    m.use_lin = true;
    m.lin = LinAdapt(store, name + ".lin", in);
  }
  int64_t width = in;
  if (rnn.layers > 0) {
    m.use_rnn = true;
    m.rnn = RecurrentStack(store, name + ".rnn", in, rnn, rng);
    width = m.rnn.out();
  }
  m.cls = FramewiseClassifier(store, name + ".cls", width, ff, vocab, rng);
}

RecognizerModel::~RecognizerModel() = default;

std::vector<std::string> RecognizerModel::InitFromPretrained(ParamStore *store) const {
  const Impl &m = *impl_;
  SEQREP_CHECK_CONFIG(m.spec.has_value(), "recognizer is not configured for fine-tuning");
  std::vector<CheckpointTensor> src;
  for (const Parameter *p : store->WithPrefix(std::string(kPre) + "."))
    src.push_back(CheckpointTensor{p->name, p->value});
  std::vector<std::string> fresh = FinetuneInit(store, std::string(kRec) + ".rnn", src, m.spec->enc_prefix);
  if (!m.spec->lin_prefix.empty())
    FinetuneInit(store, std::string(kRec) + ".lin", src, m.spec->lin_prefix);
  std::vector<std::string> out;
  for (const Parameter *p : store->WithPrefix(std::string(kRec) + "."))
    if (p->name.rfind(std::string(kRec) + ".rnn.", 0) != 0 && p->name.rfind(std::string(kRec) + ".lin.", 0) != 0)
      out.push_back(p->name);
  out.insert(out.end(), fresh.begin(), fresh.end());
  if (m.spec->lin_prefix.empty())
    for (const Parameter *p : store->WithPrefix(std::string(kRec) + ".lin.")) out.push_back(p->name);
  return out;
}

Dataset RecognizerModel::Inputs(const Dataset &data) const {
  const Impl &m = *impl_;
  Dataset out;
  out.reserve(data.size());
  for (const auto &u : data) {
    Utterance v = u;
    if (m.features == "frozen") v.frames = m.pre->Features(u.frames);
    if (m.features != "raw" && u.has_labels()) v.labels = m.pre->FeatureLabels(u.labels);
    out.push_back(std::move(v));
  }
  return out;
}

Var RecognizerModel::Loss(Graph &g, const Utterance &input, const RunMode &mode) const {
  SEQREP_CHECK_CONFIG(input.has_labels(), "utterance " + input.id + " has no labels");
  if (ctc_) return impl_->ctc.Loss(g, g.Constant(input.frames, "input"), input.transcript, mode);
  return impl_->cls.Loss(g, impl_->Hidden(g, input.frames, mode), input.labels, mode);
}

Tensor RecognizerModel::LogProbs(const Utterance &input) const {
  Graph g;
  g.set_accumulate_param_grads(false);
  if (ctc_) return impl_->ctc.Lattice(g, g.Constant(input.frames, "input")).value();
  return impl_->cls.LogProbs(g, impl_->Hidden(g, input.frames, RunMode{})).value();
}

EvalResult RecognizerModel::Evaluate(const Dataset &inputs, const std::string &metric,
                                     int64_t batch_size) const {
  if (metric == "loss")
    return EvaluateLoss(
        inputs, [&](Graph &g, const Utterance &u) { return Loss(g, u, RunMode{}); }, batch_size);
  if (metric == "per") {
    SEQREP_CHECK_CONFIG(ctc_, "metric 'per' needs a CTC recognizer (train.recognizer = ctc)");
    return EvaluateErrorRate(inputs, [&](const Utterance &u) { return LogProbs(u); });
  }
  if (metric == "framewise-acc") {
    SEQREP_CHECK_CONFIG(!ctc_,
                        "metric 'framewise-acc' needs a framewise recognizer (train.recognizer = framewise)");
    return EvaluateFramewise(
        inputs, [&](const Utterance &u) { return LogProbs(u); },
        [](const Utterance &u) { return u.labels; });
  }
  throw ConfigError("unknown metric '" + metric + "' (expected loss, framewise-acc or per)");
}

std::map<std::string, double> RecognizerModel::DevMetrics(const Dataset &inputs,
                                                          int64_t batch_size) const {
  std::map<std::string, double> out;
  out["loss"] = Evaluate(inputs, "loss", batch_size).value;
  if (ctc_) out["per"] = Evaluate(inputs, "per", batch_size).value;
  else out["framewise_acc"] = Evaluate(inputs, "framewise-acc", batch_size).value;
  return out;
}

TrainResult RunRecognizerTraining(const RunConfig &cfg, const Corpus &corpus,
                                  const RecognizerModel &rec, ParamStore *store) {
  SEQREP_CHECK_CONFIG(!corpus.labeled.empty(), "no labeled utterances to train on");
  const Dataset train = rec.Inputs(corpus.labeled);
  const Dataset dev = rec.Inputs(corpus.dev);
  TrainTask task;
  task.params = store;
  task.n_train = static_cast<int64_t>(train.size());
  task.loss = [&](Graph &g, int64_t i, const RunMode &mode) {
    return rec.Loss(g, train[static_cast<size_t>(i)], mode);
  };
  if (!dev.empty()) task.evaluate = [&] { return rec.DevMetrics(dev, cfg.eval.batch_size); };
  return Train(task, cfg.train.loop);
}

// ---------------------------------------------------------------------------
// Checkpoints

void SaveCheckpoint(const std::string &path, const ParamStore &store, const RunConfig &cfg) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  store.Save(path);
  std::ofstream os(path + ".ini");
  if (!os) throw IoError("cannot write " + path + ".ini");
  os << cfg.Print();
  if (!os) throw IoError("write failed for " + path + ".ini");
}

RunConfig LoadCheckpointConfig(const std::string &path) {
  if (!fs::exists(path)) throw IoError("checkpoint " + path + " does not exist");
  if (!fs::exists(path + ".ini"))
    throw IoError("checkpoint " + path + " has no configuration file " + path + ".ini");
  return RunConfig::Load(path + ".ini");
}

bool IsRecognizerCheckpoint(const std::string &path) {
  for (const CheckpointTensor &t : ReadCheckpoint(path))
    if (t.name.rfind(std::string(kRec) + ".", 0) == 0) return true;
  return false;
}

}  // namespace seqrep
