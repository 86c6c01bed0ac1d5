// core/src/runconfig.cc

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

#include "seqrep/runconfig.h"

#include <charconv>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "seqrep/error.h"
#include "seqrep/multiview.h"
#include "seqrep/nn.h"
#include "seqrep/pretrain.h"
#include "seqrep/recrep.h"

namespace seqrep {

namespace {

const std::vector<std::string> kModelTypes = {
    "ae",   "dae",      "nae",  "vae",       "vcca",   "vccap",  "recrep",
    "recrep-pyramid",   "fb",   "cpc",       "bert",   "bert-half", "bicpc",
    "mv-mae", "mv-contrast", "crossview-bert", "label-embed"};

std::string Format(int64_t v) { return std::to_string(v); }
std::string Format(int32_t v) { return std::to_string(v); }
std::string Format(uint64_t v) { return std::to_string(v); }
std::string Format(bool v) { return v ? "true" : "false"; }
std::string Format(const std::string &v) { return v; }
std::string Format(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}
std::string Format(const std::vector<int64_t> &v) {
  std::string s;
  for (int64_t x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

[[noreturn]] void BadValue(const std::string &key, const std::string &text, const char *want) {
  throw ConfigError("bad value '" + text + "' for " + key + " (expected " + want + ")");
}

int64_t ParseInt(const std::string &key, const std::string &text) {
  errno = 0;
  char *end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno != 0) BadValue(key, text, "an integer");
  return v;
}

void Parse(const std::string &key, const std::string &text, int64_t *out) { *out = ParseInt(key, text); }
void Parse(const std::string &key, const std::string &text, int32_t *out) {
  const int64_t v = ParseInt(key, text);
  if (v < std::numeric_limits<int32_t>::min() || v > std::numeric_limits<int32_t>::max())
    BadValue(key, text, "a 32-bit integer");
  *out = static_cast<int32_t>(v);
}
void Parse(const std::string &key, const std::string &text, uint64_t *out) {
  errno = 0;
  char *end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || text[0] == '-' || *end != '\0' || errno != 0)
    BadValue(key, text, "a non-negative integer");
  *out = v;
}
void Parse(const std::string &key, const std::string &text, double *out) {
  errno = 0;
  char *end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || errno != 0) BadValue(key, text, "a number");
  *out = v;
}
void Parse(const std::string &key, const std::string &text, bool *out) {
  if (text == "true" || text == "1") *out = true;
  else if (text == "false" || text == "0") *out = false;
  else BadValue(key, text, "true or false");
}
void Parse(const std::string &, const std::string &text, std::string *out) { *out = text; }
void Parse(const std::string &key, const std::string &text, std::vector<int64_t> *out) {
  out->clear();
  if (text.empty()) return;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out->push_back(ParseInt(key, item));
}

struct Field {
  std::string section, key, doc;
  std::function<std::string(const RunConfig &)> get;
  std::function<void(RunConfig &, const std::string &)> set;
};

template <class Access>
Field Make(const char *section, const char *key, const char *doc, Access access) {
  Field f;
  f.section = section;
  f.key = key;
  f.doc = doc;
  f.get = [access](const RunConfig &c) { return Format(access(const_cast<RunConfig &>(c))); };
  const std::string full = std::string(section) + "." + key;
  f.set = [access, full](RunConfig &c, const std::string &text) { Parse(full, text, &access(c)); };
  return f;
}

#define SEQREP_FIELD(sec, key, doc, expr) \
  Make(sec, key, doc, [](RunConfig &c) -> auto & { return expr; })

using LoopAccess = TrainConfig &(*)(RunConfig &);

void AddLoopFields(std::vector<Field> *fields, const char *sec, LoopAccess loop) {
  auto add = [&](const char *key, const char *doc, auto member) {
    fields->push_back(Make(sec, key, doc, [loop, member](RunConfig &c) -> auto & {
      return member(loop(c));
    }));
  };
  add("lr", "Adam learning rate", [](TrainConfig &t) -> auto & { return t.adam.lr; });
  add("beta1", "Adam first-moment decay", [](TrainConfig &t) -> auto & { return t.adam.beta1; });
  add("beta2", "Adam second-moment decay", [](TrainConfig &t) -> auto & { return t.adam.beta2; });
  add("eps", "Adam epsilon", [](TrainConfig &t) -> auto & { return t.adam.eps; });
  add("batch_size", "utterances per update", [](TrainConfig &t) -> auto & { return t.batch_size; });
  add("max_epochs", "maximum epochs", [](TrainConfig &t) -> auto & { return t.max_epochs; });
  add("patience", "early-stopping patience in epochs", [](TrainConfig &t) -> auto & { return t.patience; });
  add("seed", "seed for initialisation, batching and sampling",
      [](TrainConfig &t) -> auto & { return t.seed; });
  add("decay_factor", "learning-rate decay factor", [](TrainConfig &t) -> auto & { return t.decay_factor; });
  add("decay_start", "first epoch with decay (0: never)", [](TrainConfig &t) -> auto & { return t.decay_start; });
  add("dropout", "dropout rate of recurrent stacks", [](TrainConfig &t) -> auto & { return t.dropout; });
  add("clip", "global gradient-norm bound (0: off)", [](TrainConfig &t) -> auto & { return t.clip; });
  add("eval_every", "dev evaluation cadence in epochs", [](TrainConfig &t) -> auto & { return t.eval_every; });
  add("prior_update", "enable prior updating", [](TrainConfig &t) -> auto & { return t.prior_update.enabled; });
  add("prior_start", "first prior-update epoch", [](TrainConfig &t) -> auto & { return t.prior_update.start_epoch; });
  add("prior_every", "prior-update frequency in epochs",
      [](TrainConfig &t) -> auto & { return t.prior_update.frequency; });
  add("prior_save_best", "update only after improving epochs",
      [](TrainConfig &t) -> auto & { return t.prior_update.save_best; });
}

const std::vector<Field> &Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    // [data]
    f.push_back(SEQREP_FIELD("data", "n_states", "number of hidden states K", c.data.synth.n_states));
    f.push_back(SEQREP_FIELD("data", "dim", "feature dimension D", c.data.synth.dim));
    f.push_back(SEQREP_FIELD("data", "min_segment", "shortest state segment", c.data.synth.min_segment));
    f.push_back(SEQREP_FIELD("data", "max_segment", "longest state segment", c.data.synth.max_segment));
    f.push_back(SEQREP_FIELD("data", "n_unlabeled", "unlabeled utterances", c.data.synth.n_utterances));
    f.push_back(SEQREP_FIELD("data", "n_labeled", "labeled training utterances", c.data.n_labeled));
    f.push_back(SEQREP_FIELD("data", "n_dev", "labeled dev utterances", c.data.n_dev));
    f.push_back(SEQREP_FIELD("data", "min_length", "shortest utterance", c.data.synth.min_length));
    f.push_back(SEQREP_FIELD("data", "max_length", "longest utterance", c.data.synth.max_length));
    f.push_back(SEQREP_FIELD("data", "emission_noise", "emission noise std-dev", c.data.synth.emission_noise));
    f.push_back(SEQREP_FIELD("data", "mean_scale", "state-mean scale", c.data.synth.mean_scale));
    f.push_back(SEQREP_FIELD("data", "n_speakers", "speakers (0: none)", c.data.synth.n_speakers));
    f.push_back(SEQREP_FIELD("data", "speaker_scale", "speaker distortion scale", c.data.synth.speaker_scale));
    f.push_back(SEQREP_FIELD("data", "seed", "generator seed", c.data.seed));
    f.push_back(SEQREP_FIELD("data", "normalize", "mean/variance normalisation", c.data.normalize));
    // [model]
    f.push_back(SEQREP_FIELD("model", "type", "pretraining model", c.model.type));
    f.push_back(SEQREP_FIELD("model", "act", "hidden activation", c.model.act));
    f.push_back(SEQREP_FIELD("model", "window", "frames per feedforward window", c.model.window));
    f.push_back(SEQREP_FIELD("model", "hidden", "encoder hidden widths", c.model.hidden));
    f.push_back(SEQREP_FIELD("model", "latent", "latent dimension", c.model.latent));
    f.push_back(SEQREP_FIELD("model", "beta", "KL weight", c.model.beta));
    f.push_back(SEQREP_FIELD("model", "corruption", "dae noise: bernoulli|gaussian", c.model.corruption));
    f.push_back(SEQREP_FIELD("model", "p", "Bernoulli drop rate", c.model.p));
    f.push_back(SEQREP_FIELD("model", "gamma", "Gaussian noise std-dev", c.model.gamma));
    f.push_back(SEQREP_FIELD("model", "samples", "posterior samples per datum", c.model.samples));
    f.push_back(SEQREP_FIELD("model", "decoder_hidden", "decoder hidden widths", c.model.decoder_hidden));
    f.push_back(SEQREP_FIELD("model", "private_x", "private latent of view 1", c.model.private_x));
    f.push_back(SEQREP_FIELD("model", "private_y", "private latent of view 2", c.model.private_y));
    f.push_back(SEQREP_FIELD("model", "private_hidden", "private encoder widths", c.model.private_hidden));
    f.push_back(SEQREP_FIELD("model", "rnn_layers", "recurrent encoder layers", c.model.rnn_layers));
    f.push_back(SEQREP_FIELD("model", "rnn_hidden", "recurrent units per direction", c.model.rnn_hidden));
    f.push_back(SEQREP_FIELD("model", "bidirectional", "bidirectional recurrent encoder", c.model.bidirectional));
    f.push_back(SEQREP_FIELD("model", "aux", "auxiliary latent: none|flat|hierarchical", c.model.aux));
    f.push_back(SEQREP_FIELD("model", "aux_latent", "auxiliary latent dimension", c.model.aux_latent));
    f.push_back(SEQREP_FIELD("model", "pyramid_window", "frames per pyramid target (0: R)", c.model.pyramid_window));
    f.push_back(SEQREP_FIELD("model", "supervision", "none|framewise|ctc", c.model.supervision));
    f.push_back(SEQREP_FIELD("model", "alpha", "weight of the generative term", c.model.alpha));
    f.push_back(SEQREP_FIELD("model", "kappa", "noise scale of the discriminative sample", c.model.kappa));
    f.push_back(SEQREP_FIELD("model", "normalize_supervised", "average the supervised term per step",
                             c.model.normalize_supervised));
    f.push_back(SEQREP_FIELD("model", "classifier_hidden", "framewise head widths", c.model.classifier_hidden));
    f.push_back(SEQREP_FIELD("model", "d_f", "forward prediction latent", c.model.d_f));
    f.push_back(SEQREP_FIELD("model", "d_b", "backward prediction latent", c.model.d_b));
    f.push_back(SEQREP_FIELD("model", "d_zf", "forward reconstruction latent", c.model.d_zf));
    f.push_back(SEQREP_FIELD("model", "d_zb", "backward reconstruction latent", c.model.d_zb));
    f.push_back(SEQREP_FIELD("model", "cpc_k", "CPC future steps K", c.model.cpc_k));
    f.push_back(SEQREP_FIELD("model", "cpc_n", "CPC negatives N", c.model.cpc_n));
    f.push_back(SEQREP_FIELD("model", "negatives", "CPC negatives: within|batch", c.model.negatives));
    f.push_back(SEQREP_FIELD("model", "n_time_masks", "time masks per draw", c.model.n_time_masks));
    f.push_back(SEQREP_FIELD("model", "max_time_width", "widest time mask", c.model.max_time_width));
    f.push_back(SEQREP_FIELD("model", "n_channel_masks", "channel masks per draw", c.model.n_channel_masks));
    f.push_back(SEQREP_FIELD("model", "max_channel_width", "widest channel mask", c.model.max_channel_width));
    f.push_back(SEQREP_FIELD("model", "mask_alpha", "reconstruction weight of multi-view losses", c.model.mask_alpha));
    f.push_back(SEQREP_FIELD("model", "n_negatives", "negatives of masked contrastive losses", c.model.n_negatives));
    f.push_back(SEQREP_FIELD("model", "lin", "identity-initialised input transform", c.model.lin));
    f.push_back(SEQREP_FIELD("model", "epoch_multiplier", "mask draws per utterance and epoch",
                             c.model.epoch_multiplier));
    f.push_back(SEQREP_FIELD("model", "alpha1", "acoustic-branch weight", c.model.alpha1));
    f.push_back(SEQREP_FIELD("model", "alpha2", "similarity weight", c.model.alpha2));
    f.push_back(SEQREP_FIELD("model", "similarity", "l2|cosine|contrastive|cca", c.model.similarity));
    f.push_back(SEQREP_FIELD("model", "margin", "contrastive margin", c.model.margin));
    AddLoopFields(&f, "pretrain", [](RunConfig &c) -> TrainConfig & { return c.pretrain; });
    AddLoopFields(&f, "train", [](RunConfig &c) -> TrainConfig & { return c.train.loop; });
    f.push_back(SEQREP_FIELD("train", "recognizer", "ctc|framewise", c.train.recognizer));
    f.push_back(SEQREP_FIELD("train", "features", "raw|frozen|finetune", c.train.features));
    f.push_back(SEQREP_FIELD("train", "lin", "identity-initialised input transform", c.train.lin));
    f.push_back(SEQREP_FIELD("train", "rnn_layers", "recognizer recurrent layers", c.train.rnn_layers));
    f.push_back(SEQREP_FIELD("train", "rnn_hidden", "recognizer units per direction", c.train.rnn_hidden));
    f.push_back(SEQREP_FIELD("train", "bidirectional", "bidirectional recognizer", c.train.bidirectional));
    f.push_back(SEQREP_FIELD("train", "ff_widths", "feedforward widths ahead of the recurrent stack",
                             c.train.ff_widths));
    // [eval]
    f.push_back(SEQREP_FIELD("eval", "metric", "loss|framewise-acc|per", c.eval.metric));
    f.push_back(SEQREP_FIELD("eval", "batch_size", "utterances per evaluation graph", c.eval.batch_size));
    return f;
  }();
  return fields;
}

void CheckOneOf(const std::string &key, const std::string &v, const std::vector<std::string> &allowed) {
  for (const auto &a : allowed)
    if (a == v) return;
  std::string list;
  for (const auto &a : allowed) list += (list.empty() ? "" : "|") + a;
  throw ConfigError("bad value '" + v + "' for " + key + " (expected " + list + ")");
}

}  // namespace

RunConfig::RunConfig() {
  pretrain.adam.lr = 1e-3;
  pretrain.max_epochs = 10;
  pretrain.patience = 3;
  train.loop.adam.lr = 1e-3;
  train.loop.max_epochs = 10;
  train.loop.patience = 3;
}

void RunConfig::Check() const {
  data.synth.Check();
  SEQREP_CHECK_CONFIG(data.n_labeled >= 1 && data.n_dev >= 1,
                      "data.n_labeled and data.n_dev must be >= 1");
  SEQREP_CHECK_CONFIG(data.synth.n_utterances >= 1, "data.n_unlabeled must be >= 1");
  CheckOneOf("model.type", model.type, kModelTypes);
  ParseActivation(model.act);
  CheckOneOf("model.corruption", model.corruption, {"bernoulli", "gaussian"});
  ParseAuxMode(model.aux);
  ParseSupervision(model.supervision);
  ParseNegativeMode(model.negatives);
  ParseSimilarityKind(model.similarity);
  SEQREP_CHECK_CONFIG(model.window >= 1 && model.window % 2 == 1, "model.window must be odd");
  SEQREP_CHECK_CONFIG(model.latent >= 1, "model.latent must be >= 1");
  SEQREP_CHECK_CONFIG(model.rnn_layers >= 1 && model.rnn_hidden >= 1,
                      "model.rnn_layers and model.rnn_hidden must be >= 1");
  SEQREP_CHECK_CONFIG(model.alpha >= 0.0 && model.alpha <= 1.0, "model.alpha must be in [0, 1]");
  SEQREP_CHECK_CONFIG(model.kappa >= 0.0 && model.kappa <= 1.0, "model.kappa must be in [0, 1]");
  SEQREP_CHECK_CONFIG(model.mask_alpha >= 0.0 && model.mask_alpha <= 1.0,
                      "model.mask_alpha must be in [0, 1]");
  pretrain.Check();
  train.loop.Check();
  CheckOneOf("train.recognizer", train.recognizer, {"ctc", "framewise"});
  CheckOneOf("train.features", train.features, {"raw", "frozen", "finetune"});
  SEQREP_CHECK_CONFIG(train.rnn_layers >= 0 && train.rnn_hidden >= 1,
                      "train.rnn_layers must be >= 0 and train.rnn_hidden >= 1");
  CheckOneOf("eval.metric", eval.metric, {"loss", "framewise-acc", "per"});
  SEQREP_CHECK_CONFIG(eval.batch_size >= 1, "eval.batch_size must be >= 1");
}

std::string RunConfig::Print() const {
  std::string out;
  std::string section;
  for (const Field &f : Fields()) {
    if (f.section != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + f.section + "]\n";
      section = f.section;
    }
    out += "; " + f.doc + "\n" + f.key + " = " + f.get(*this) + "\n";
  }
  return out;
}

RunConfig RunConfig::Parse(const std::string &text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error &e) {
    throw ConfigError(std::string("malformed configuration: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  std::set<std::string> sections;
  for (const Field &f : Fields()) sections.insert(f.section);
  for (const auto &[name, sec] : tree) {
    if (!sections.count(name)) {
      if (sec.empty())
        throw ConfigError("key '" + name + "' appears outside a section");
      throw ConfigError("unknown section [" + name + "] (expected data, model, pretrain, train or eval)");
    }
    for (const auto &[key, value] : sec) {
      const Field *field = nullptr;
      for (const Field &f : Fields())
        if (f.section == name && f.key == key) field = &f;
      if (field == nullptr)
        throw ConfigError("unknown key '" + key + "' in section [" + name +
                          "]; run with --print-config to list valid keys");
      std::string v = value.get_value<std::string>();
      while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.pop_back();
      field->set(cfg, v);
    }
  }
  cfg.Check();
  return cfg;
}

RunConfig RunConfig::Load(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open configuration file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return Parse(ss.str());
}

void RunConfig::OverrideSeed(uint64_t seed) {
  data.seed = seed;
  pretrain.seed = seed;
  train.loop.seed = seed;
}

std::vector<std::string> RunConfigKeys() {
  std::vector<std::string> out;
  for (const Field &f : Fields()) out.push_back(f.section + "." + f.key);
  return out;
}

}  // namespace seqrep
