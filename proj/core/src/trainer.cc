// core/src/trainer.cc

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

#include "seqrep/trainer.h"

#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "seqrep/ctc.h"
#include "seqrep/error.h"
#include "seqrep/ops.h"

namespace seqrep {

namespace {

std::vector<Tensor> Snapshot(const std::vector<Parameter *> &params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter *p : params) out.push_back(p->value);
  return out;
}

void Restore(const std::vector<Parameter *> &params, const std::vector<Tensor> &values) {
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::Check() const {
  adam.Check();
  SEQREP_CHECK_CONFIG(batch_size >= 1, "batch size must be >= 1");
  SEQREP_CHECK_CONFIG(max_epochs >= 1, "max_epochs must be >= 1");
  SEQREP_CHECK_CONFIG(patience >= 1, "patience must be >= 1");
  SEQREP_CHECK_CONFIG(decay_factor > 0.0 && decay_factor <= 1.0, "lr decay factor must be in (0, 1]");
  SEQREP_CHECK_CONFIG(decay_start >= 0, "lr decay start epoch must be >= 0");
  SEQREP_CHECK_CONFIG(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  SEQREP_CHECK_CONFIG(clip >= 0.0, "gradient clip must be >= 0");
  SEQREP_CHECK_CONFIG(eval_every >= 1, "eval_every must be >= 1");
  prior_update.Check();
}

void MetricLog::Add(int32_t epoch, const std::string &split, const std::string &metric,
                    double value) {
  records_.push_back({epoch, split, metric, value});
}

std::vector<double> MetricLog::Series(const std::string &split, const std::string &metric) const {
  std::vector<double> out;
  for (const auto &r : records_)
    if (r.split == split && r.metric == metric) out.push_back(r.value);
  return out;
}

std::string MetricLog::Csv() const {
  std::string s = "epoch,split,metric,value\n";
  for (const auto &r : records_)
    s += std::to_string(r.epoch) + "," + r.split + "," + r.metric + "," + FormatDouble(r.value) + "\n";
  return s;
}

void MetricLog::WriteCsv(const std::string &path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << Csv();
  if (!os) throw IoError("write failed for " + path);
}

TrainResult Train(const TrainTask &task, const TrainConfig &cfg) {
  cfg.Check();
  SEQREP_CHECK_CONFIG(task.params != nullptr && task.loss, "training task needs parameters and a loss");
  SEQREP_CHECK_CONFIG(task.n_train >= 1, "training set is empty");
  const std::vector<Parameter *> &params = task.params->All();
  Rng rng(cfg.seed);
  Adam opt(cfg.adam);
  TrainResult res;
  MetricLog &log = res.log;
  std::vector<Tensor> best = Snapshot(params), last_good = best;
  bool have_best = false;
  double best_value = std::numeric_limits<double>::infinity();
  int32_t stale = 0;

  for (int32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.decay_start > 0 && epoch >= cfg.decay_start) opt.set_lr(opt.lr() * cfg.decay_factor);
    log.Add(epoch, "train", "lr", opt.lr());
    const std::vector<int64_t> order = rng.Permutation(task.n_train);
    std::vector<double> item_loss(static_cast<size_t>(task.n_train), 0.0);
    try {
      for (int64_t b = 0; b < task.n_train; b += cfg.batch_size) {
        const int64_t e = std::min(task.n_train, b + cfg.batch_size);
        task.params->ZeroGrad();
        Graph g;
        Var sum;
        for (int64_t i = b; i < e; ++i) {
          const int64_t item = order[static_cast<size_t>(i)];
          Var l = task.loss(g, item, RunMode{true, &rng});
          item_loss[static_cast<size_t>(item)] = l.value().item();
          sum = sum.valid() ? Add(sum, l) : l;
        }
        Var mean = Scale(sum, 1.0 / static_cast<double>(e - b));
        g.Backward(mean);
        if (cfg.clip > 0.0) ClipGradNorm(params, cfg.clip);
        opt.Step(params);
        for (const Parameter *p : params)
          if (!p->value.AllFinite())
            throw NumericalError("parameter " + p->name + " became non-finite");
      }
    } catch (const NumericalError &err) {
      Restore(params, have_best ? best : last_good);
      res.diverged = true;
      res.divergence = err.what();
      res.epochs_run = epoch;
      log.Add(epoch, "train", "diverged", 1.0);
      return res;
    }
    last_good = Snapshot(params);
    res.epochs_run = epoch;
    double total = 0.0;
    for (double v : item_loss) total += v;
    const double train_loss = total / static_cast<double>(task.n_train);
    log.Add(epoch, "train", "loss", train_loss);

    bool improved = false;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs) {
      double selected = train_loss;
      if (task.evaluate) {
        const std::map<std::string, double> metrics = task.evaluate();
        for (const auto &[name, value] : metrics) log.Add(epoch, "dev", name, value);
        auto it = metrics.find(task.select_metric);
        if (it == metrics.end())
          throw ConfigError("dev evaluation did not report selection metric '" +
                            task.select_metric + "'");
        selected = it->second;
      }
      if (selected < best_value) {
        improved = true;
        have_best = true;
        best_value = selected;
        res.best_epoch = epoch;
        best = last_good;
        stale = 0;
      } else {
        ++stale;
      }
    }
    if (task.prior_update && cfg.prior_update.ShouldUpdate(epoch, improved)) {
      task.prior_update(epoch);
      res.prior_updates.push_back(epoch);
      log.Add(epoch, "prior", "update", 1.0);
    }
    if (task.on_epoch) task.on_epoch(epoch, log);
    if (stale >= cfg.patience) break;
  }
  if (have_best) Restore(params, best);
  res.best_metric = best_value;
  return res;
}

std::string TrainSummaryJson(const TrainResult &r, const TrainConfig &cfg) {
  nlohmann::ordered_json j;
  j["epochs_run"] = r.epochs_run;
  j["best_epoch"] = r.best_epoch;
  j["best_metric"] = r.best_epoch > 0 ? nlohmann::ordered_json(r.best_metric) : nullptr;
  j["diverged"] = r.diverged;
  if (r.diverged) j["divergence"] = r.divergence;
  j["prior_updates"] = r.prior_updates;
  j["config"] = {{"lr", cfg.adam.lr},
                 {"beta1", cfg.adam.beta1},
                 {"beta2", cfg.adam.beta2},
                 {"eps", cfg.adam.eps},
                 {"batch_size", cfg.batch_size},
                 {"max_epochs", cfg.max_epochs},
                 {"patience", cfg.patience},
                 {"seed", cfg.seed},
                 {"decay_factor", cfg.decay_factor},
                 {"decay_start", cfg.decay_start},
                 {"clip", cfg.clip}};
  nlohmann::ordered_json last = nlohmann::ordered_json::object();
  for (const auto &rec : r.log.records())
    last[rec.split + "/" + rec.metric] = rec.value;
  j["last"] = last;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Evaluation

EvalResult EvaluateLoss(const Dataset &data, const std::function<Var(Graph &, const Utterance &)> &loss,
                        int64_t batch_size) {
  SEQREP_CHECK_CONFIG(!data.empty(), "cannot evaluate on an empty dataset");
  SEQREP_CHECK_CONFIG(batch_size >= 1, "evaluation batch size must be >= 1");
  EvalResult out;
  const auto n = static_cast<int64_t>(data.size());
  for (int64_t b = 0; b < n; b += batch_size) {
    Graph g;
    g.set_accumulate_param_grads(false);
    for (int64_t i = b; i < std::min(n, b + batch_size); ++i) {
      const Utterance &u = data[static_cast<size_t>(i)];
      out.per_utterance.emplace_back(u.id, loss(g, u).value().item());
    }
  }
  double sum = 0.0;
  for (const auto &[id, v] : out.per_utterance) sum += v;
  out.value = sum / static_cast<double>(n);
  return out;
}

EvalResult EvaluateFramewise(const Dataset &data,
                             const std::function<Tensor(const Utterance &)> &log_probs,
                             const std::function<std::vector<int32_t>(const Utterance &)> &labels) {
  SEQREP_CHECK_CONFIG(!data.empty(), "cannot evaluate on an empty dataset");
  EvalResult out;
  int64_t correct = 0, total = 0;
  for (const Utterance &u : data) {
    const std::vector<int32_t> y = labels(u);
    if (y.empty()) throw ConfigError("framewise accuracy needs frame labels (utterance " + u.id + ")");
    const Tensor lp = log_probs(u);
    SEQREP_CHECK_SHAPE(lp.rows() == static_cast<int64_t>(y.size()),
                       "utterance " + u.id + ": " + std::to_string(lp.rows()) + " outputs for " +
                           std::to_string(y.size()) + " labels");
    int64_t c = 0;
    for (int64_t t = 0; t < lp.rows(); ++t) {
      int64_t arg = 0;
      for (int64_t k = 1; k < lp.cols(); ++k)
        if (lp(t, k) > lp(t, arg)) arg = k;
      if (arg == y[static_cast<size_t>(t)]) ++c;
    }
    correct += c;
    total += lp.rows();
    out.per_utterance.emplace_back(u.id, static_cast<double>(c) / static_cast<double>(lp.rows()));
  }
  out.value = static_cast<double>(correct) / static_cast<double>(total);
  return out;
}

EvalResult EvaluateErrorRate(const Dataset &data,
                             const std::function<Tensor(const Utterance &)> &lattice) {
  SEQREP_CHECK_CONFIG(!data.empty(), "cannot evaluate on an empty dataset");
  EvalResult out;
  int64_t errors = 0, length = 0;
  for (const Utterance &u : data) {
    if (u.transcript.empty())
      throw ConfigError("error rate needs a transcript (utterance " + u.id + ")");
    const std::vector<int32_t> hyp = FromCtcTokens(GreedyDecode(lattice(u)));
    const int64_t e = EditDistance(hyp, u.transcript);
    errors += e;
    length += static_cast<int64_t>(u.transcript.size());
    out.per_utterance.emplace_back(u.id, static_cast<double>(e) /
                                             static_cast<double>(u.transcript.size()));
  }
  out.value = static_cast<double>(errors) / static_cast<double>(length);
  return out;
}

EvalResult EvaluateCtcLoss(const Dataset &data, const CtcRecognizer &rec,
                           const std::function<Tensor(const Utterance &)> &features) {
  return EvaluateLoss(data, [&](Graph &g, const Utterance &u) {
    return rec.Loss(g, g.Constant(features(u)), u.transcript);
  });
}

}  // namespace seqrep
