// tools/seqrep.cc

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

// Command-line entry point: seqrep <command> [options].  Exit status is 0 on
// success, 1 on invalid input (flags, configuration, files, shapes) and 2 on
// numerical failure (divergence or a failed verification).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "seqrep/error.h"
#include "seqrep/pipeline.h"
#include "seqrep/runconfig.h"
#include "seqrep/verify.h"

namespace fs = std::filesystem;
using namespace seqrep;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNumerical = 2;

RunConfig ReadConfig(const std::string &path) {
  RunConfig cfg = path.empty() ? RunConfig() : RunConfig::Load(path);
  if (const char *env = std::getenv("SEQREP_SEED")) {
    char *end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    if (*env == '\0' || *end != '\0' || *env == '-')
      throw ConfigError(std::string("SEQREP_SEED must be a non-negative integer, got '") + env + "'");
    cfg.OverrideSeed(seed);
  }
  return cfg;
}

void WriteText(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

void MakeDir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void WriteRunOutputs(const std::string &out, const TrainResult &r, const TrainConfig &loop) {
  r.log.WriteCsv((fs::path(out) / "metrics.csv").string());
  WriteText(fs::path(out) / "summary.json", TrainSummaryJson(r, loop) + "\n");
}

int Finish(const TrainResult &r) {
  if (r.diverged) {
    std::cerr << "seqrep: training diverged (" << r.divergence
              << "); the checkpoint holds the last good parameters\n";
    return kExitNumerical;
  }
  return kExitOk;
}

const Dataset &Split(const Corpus &c, const std::string &name) {
  if (name == "unlabeled") return c.unlabeled;
  if (name == "labeled") return c.labeled;
  if (name == "dev") return c.dev;
  throw ConfigError("unknown split '" + name + "' (expected unlabeled, labeled or dev)");
}

// Rebuilds the pretrained model (if any) and the recognizer described by a
// checkpoint's configuration, then loads its values.
struct LoadedModels {
  RunConfig cfg;
  ParamStore store;
  std::unique_ptr<PretrainModel> pre;
  std::unique_ptr<RecognizerModel> rec;
};

void BuildModels(LoadedModels *m, const Corpus &corpus, bool with_pre, bool with_rec) {
  Rng rng(m->cfg.pretrain.seed);
  if (with_pre)
    m->pre = PretrainModel::Create(m->cfg.model, corpus.dim(), corpus.vocab, 0.0, &m->store, rng);
  if (with_rec) {
    Rng rrng(m->cfg.train.loop.seed);
    m->rec = std::make_unique<RecognizerModel>(m->cfg, corpus.dim(), corpus.vocab, m->pre.get(),
                                               &m->store, rrng);
  }
}

void LoadModels(LoadedModels *m, const std::string &ckpt, const Corpus &corpus) {
  const bool rec = IsRecognizerCheckpoint(ckpt);
  BuildModels(m, corpus, !rec || m->cfg.train.features != "raw", rec);
  m->store.Load(ckpt, /*require_all=*/true);
}

// ---------------------------------------------------------------------------

int GenData(const std::string &config, const std::string &out) {
  const RunConfig cfg = ReadConfig(config);
  const Corpus c = GenerateCorpus(cfg.data);
  SaveCorpus(out, c);
  std::cout << "wrote " << c.unlabeled.size() << " unlabeled, " << c.labeled.size()
            << " labeled and " << c.dev.size() << " dev utterances to " << out << "\n";
  return kExitOk;
}

int Pretrain(const std::string &config, const std::string &data, const std::string &out) {
  const RunConfig cfg = ReadConfig(config);
  const Corpus corpus = PrepareCorpus(cfg, data);
  ParamStore store;
  Rng rng(cfg.pretrain.seed);
  auto model = PretrainModel::Create(cfg.model, corpus.dim(), corpus.vocab, cfg.pretrain.dropout,
                                     &store, rng);
  MakeDir(out);
  const PretrainOutcome res = RunPretrain(cfg, corpus, *model, &store);
  SaveCheckpoint((fs::path(out) / "model.ckpt").string(), store, cfg);
  if (res.priors) res.priors->Save((fs::path(out) / "priors.srp").string());
  WriteRunOutputs(out, res.result, cfg.pretrain);
  std::cout << TrainSummaryJson(res.result, cfg.pretrain) << "\n";
  return Finish(res.result);
}

int TrainCmd(const std::string &config, const std::string &data, const std::string &out,
             const std::string &init, bool lin) {
  RunConfig cfg = ReadConfig(config);
  if (lin) cfg.train.lin = true;
  if (!init.empty()) {
    const RunConfig pre = LoadCheckpointConfig(init);
    cfg.model = pre.model;
    if (cfg.train.features == "raw") cfg.train.features = "finetune";
  }
  cfg.Check();
  const Corpus corpus = PrepareCorpus(cfg, data);
  ParamStore store;
  std::unique_ptr<PretrainModel> pre;
  if (cfg.train.features != "raw") {
    if (init.empty())
      throw ConfigError("train.features = " + cfg.train.features + " needs --init <checkpoint>");
    Rng prng(cfg.pretrain.seed);
    pre = PretrainModel::Create(cfg.model, corpus.dim(), corpus.vocab, 0.0, &store, prng);
    const std::vector<CheckpointTensor> tensors = ReadCheckpoint(init);
    for (const CheckpointTensor &t : tensors)
      if (t.name.rfind("pre.", 0) == 0) {
        if (!store.Has(t.name))
          throw ConfigError("checkpoint tensor " + t.name + " does not belong to model.type " +
                            cfg.model.type);
        Parameter *p = store.Get(t.name);
        if (!p->value.SameShape(t.value))
          throw ShapeError("checkpoint tensor " + t.name + " has shape " + t.value.ShapeString() +
                           ", model expects " + p->value.ShapeString());
        p->value = t.value;
      }
  }
  Rng rng(cfg.train.loop.seed);
  RecognizerModel rec(cfg, corpus.dim(), corpus.vocab, pre.get(), &store, rng);
  if (cfg.train.features == "finetune") rec.InitFromPretrained(&store);
  MakeDir(out);
  const TrainResult r = RunRecognizerTraining(cfg, corpus, rec, &store);
  SaveCheckpoint((fs::path(out) / "model.ckpt").string(), store, cfg);
  WriteRunOutputs(out, r, cfg.train.loop);
  std::cout << TrainSummaryJson(r, cfg.train.loop) << "\n";
  return Finish(r);
}

int Extract(const std::string &ckpt, const std::string &data, const std::string &out) {
  LoadedModels m;
  m.cfg = LoadCheckpointConfig(ckpt);
  const Corpus corpus = PrepareCorpus(m.cfg, data);
  LoadModels(&m, ckpt, corpus);
  if (!m.pre) throw ConfigError("checkpoint " + ckpt + " holds no pretrained representation");
  Corpus feats;
  feats.vocab = corpus.vocab;
  for (auto [src, dst] : {std::pair{&corpus.unlabeled, &feats.unlabeled},
                          std::pair{&corpus.labeled, &feats.labeled}, std::pair{&corpus.dev, &feats.dev}}) {
    for (const Utterance &u : *src) {
      Utterance v = u;
      v.frames = m.pre->Features(u.frames);
      if (u.has_labels()) {
        v.labels = m.pre->FeatureLabels(u.labels);
        v.transcript = RunCollapse(v.labels);
      }
      dst->push_back(std::move(v));
    }
  }
  SaveCorpus(out, feats);
  std::cout << "wrote " << m.pre->feature_dim() << "-dimensional features to " << out << "\n";
  return kExitOk;
}

int Eval(const std::string &ckpt, const std::string &config, const std::string &data,
         std::string metric, const std::string &split, const std::string &csv) {
  LoadedModels m;
  m.cfg = ckpt.empty() ? ReadConfig(config) : LoadCheckpointConfig(ckpt);
  // With a checkpoint, --config only supplies the evaluation settings.
  if (!ckpt.empty() && !config.empty()) m.cfg.eval = ReadConfig(config).eval;
  if (metric.empty()) metric = m.cfg.eval.metric;
  const Corpus corpus = PrepareCorpus(m.cfg, data);
  const Dataset &set = Split(corpus, split);
  EvalResult res;
  if (ckpt.empty()) {
    if (m.cfg.train.features != "raw")
      throw ConfigError("an untrained recognizer can only read raw features");
    BuildModels(&m, corpus, false, true);
  } else {
    LoadModels(&m, ckpt, corpus);
  }
  if (m.rec) {
    res = m.rec->Evaluate(m.rec->Inputs(set), metric, m.cfg.eval.batch_size);
  } else {
    if (metric != "loss")
      throw ConfigError("metric '" + metric + "' needs a recognizer checkpoint; pretrained models support 'loss'");
    Rng rng(m.cfg.pretrain.seed + 0x5eed);
    const LossContext ctx{nullptr, &set};
    res = EvaluateLoss(
        set, [&](Graph &g, const Utterance &u) { return m.pre->Loss(g, u, RunMode{false, &rng}, ctx); },
        m.cfg.eval.batch_size);
  }
  if (!csv.empty()) {
    std::string text = "id,value\n";
    char buf[64];
    for (const auto &[id, v] : res.per_utterance) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      text += id + "," + buf + "\n";
    }
    WriteText(csv, text);
  }
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["split"] = split;
  j["utterances"] = set.size();
  j["value"] = res.value;
  std::cout << j.dump(1) << "\n";
  return kExitOk;
}

int Verify(const std::string &suite) {
  const std::vector<VerifyCheck> checks = RunVerifySuite(suite);
  bool ok = true;
  for (const VerifyCheck &c : checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.suite << " " << c.name << " value=" << c.value
              << " tol=" << c.tolerance << "\n";
    ok = ok && c.pass;
  }
  std::cout << (ok ? "all " : "some ") << checks.size() << " checks " << (ok ? "passed" : "failed")
            << "\n";
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Sequence representation learning toolkit"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  std::string config, data, out, init, ckpt, metric, split = "dev", csv, suite = "all";
  bool lin = false;
  app.add_flag("--print-config", print_config,
               "print the effective configuration (defaults plus --config) and exit");
  app.add_option("--config", config, "configuration file (INI)")->check(CLI::ExistingFile);

  auto *gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("--config", config, "configuration file")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "output directory")->required();

  auto *pre = app.add_subcommand("pretrain", "pretrain a representation model");
  pre->add_option("--config", config, "configuration file")->check(CLI::ExistingFile);
  pre->add_option("--data", data, "corpus directory from gen-data")->required();
  pre->add_option("--out", out, "output directory")->required();

  auto *train = app.add_subcommand("train", "train a recognizer");
  train->add_option("--config", config, "configuration file")->check(CLI::ExistingFile);
  train->add_option("--data", data, "corpus directory from gen-data")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--init", init, "pretrained checkpoint")->check(CLI::ExistingFile);
  train->add_flag("--lin", lin, "prepend an identity-initialised input transform");

  auto *ext = app.add_subcommand("extract", "write posterior-mean features");
  ext->add_option("--checkpoint", ckpt, "pretrained checkpoint")->required()->check(CLI::ExistingFile);
  ext->add_option("--data", data, "corpus directory from gen-data")->required();
  ext->add_option("--out", out, "output corpus directory")->required();

  auto *ev = app.add_subcommand("eval", "evaluate a checkpoint or an untrained recognizer");
  ev->add_option("--checkpoint", ckpt, "checkpoint to evaluate")->check(CLI::ExistingFile);
  ev->add_option("--config", config, "configuration of an untrained recognizer, or evaluation settings with --checkpoint")->check(CLI::ExistingFile);
  ev->add_option("--data", data, "corpus directory from gen-data")->required();
  ev->add_option("--metric", metric, "loss | framewise-acc | per (default: eval.metric)");
  ev->add_option("--split", split, "unlabeled | labeled | dev");
  ev->add_option("--out", csv, "per-utterance CSV file");

  auto *ver = app.add_subcommand("verify", "run the built-in oracle suites");
  ver->add_option("--suite", suite, "gradcheck | oracles | identities | all")
      ->check(CLI::IsMember({"gradcheck", "oracles", "identities", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (print_config) {
      std::cout << ReadConfig(config).Print();
      return kExitOk;
    }
    if (*gen) return GenData(config, out);
    if (*pre) return Pretrain(config, data, out);
    if (*train) return TrainCmd(config, data, out, init, lin);
    if (*ext) return Extract(ckpt, data, out);
    if (*ev) return Eval(ckpt, config, data, metric, split, csv);
    if (*ver) return Verify(suite);
    std::cout << app.help();
    return kExitInvalid;
  } catch (const NumericalError &e) {
    std::cerr << "seqrep: numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception &e) {
    std::cerr << "seqrep: " << e.what() << "\n";
    return kExitInvalid;
  }
}
