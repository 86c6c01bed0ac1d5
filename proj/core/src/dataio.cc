// core/src/dataio.cc

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

#include "seqrep/dataio.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"
#include "seqrep/binary-io.h"
#include "seqrep/error.h"

namespace seqrep {

namespace fs = std::filesystem;

std::vector<int32_t> RunCollapse(const std::vector<int32_t> &labels) {
  std::vector<int32_t> out;
  for (size_t i = 0; i < labels.size(); ++i)
    if (i == 0 || labels[i] != labels[i - 1]) out.push_back(labels[i]);
  return out;
}

void SyntheticConfig::Check() const {
  SEQREP_CHECK_CONFIG(n_states >= 2, "synthetic data needs at least 2 states");
  SEQREP_CHECK_CONFIG(dim >= 1, "synthetic frame dimension must be >= 1");
  SEQREP_CHECK_CONFIG(min_segment >= 1 && max_segment >= min_segment,
                      "segment length range must satisfy 1 <= min <= max");
  SEQREP_CHECK_CONFIG(min_length >= 1 && max_length >= min_length,
                      "utterance length range must satisfy 1 <= min <= max");
  SEQREP_CHECK_CONFIG(n_utterances >= 0, "number of utterances must be >= 0");
  SEQREP_CHECK_CONFIG(emission_noise >= 0.0, "emission noise must be >= 0");
  SEQREP_CHECK_CONFIG(n_speakers >= 0, "number of speakers must be >= 0");
}

SyntheticModel MakeSyntheticModel(const SyntheticConfig &cfg, uint64_t seed) {
  cfg.Check();
  Rng rng(seed);
  SyntheticModel m;
  m.means = rng.NormalTensor(cfg.n_states, cfg.dim);
  for (auto &v : m.means.values()) v *= cfg.mean_scale;
  const double s = cfg.speaker_scale / std::sqrt(static_cast<double>(cfg.dim));
  for (int32_t k = 0; k < cfg.n_speakers; ++k) {
    Tensor a = Tensor::Identity(cfg.dim);
    for (auto &v : a.values()) v += s * rng.Normal();
    Tensor b = rng.NormalTensor(1, cfg.dim);
    for (auto &v : b.values()) v *= cfg.speaker_scale;
    m.speaker_a.push_back(std::move(a));
    m.speaker_b.push_back(std::move(b));
  }
  return m;
}

Dataset SampleSynthetic(const SyntheticConfig &cfg, const SyntheticModel &model, uint64_t seed) {
  cfg.Check();
  SEQREP_CHECK_SHAPE(model.means.rows() == cfg.n_states && model.means.cols() == cfg.dim,
                     "synthetic model does not match config");
  Rng rng(seed);
  Dataset data;
  data.reserve(static_cast<size_t>(cfg.n_utterances));
  const int width = std::max<int>(4, static_cast<int>(std::to_string(cfg.n_utterances).size()));
  for (int32_t n = 0; n < cfg.n_utterances; ++n) {
    Utterance u;
    std::string num = std::to_string(n);
    u.id = cfg.id_prefix + std::string(static_cast<size_t>(std::max(0, width - static_cast<int>(num.size()))), '0') + num;
    const int64_t T = rng.UniformInt(cfg.min_length, cfg.max_length);
    u.labels.reserve(static_cast<size_t>(T));
    int32_t state = static_cast<int32_t>(rng.UniformInt(0, cfg.n_states - 1));
    while (static_cast<int64_t>(u.labels.size()) < T) {
      const int64_t len = rng.UniformInt(cfg.min_segment, cfg.max_segment);
      for (int64_t i = 0; i < len && static_cast<int64_t>(u.labels.size()) < T; ++i)
        u.labels.push_back(state);
      int32_t next = static_cast<int32_t>(rng.UniformInt(0, cfg.n_states - 2));
      if (next >= state) ++next;
      state = next;
    }
    u.frames = Tensor(T, cfg.dim);
    for (int64_t t = 0; t < T; ++t)
      for (int32_t d = 0; d < cfg.dim; ++d)
        u.frames(t, d) = model.means(u.labels[t], d) + cfg.emission_noise * rng.Normal();
    if (cfg.n_speakers > 0) {
      u.speaker = static_cast<int32_t>(rng.UniformInt(0, cfg.n_speakers - 1));
      const Tensor &a = model.speaker_a[u.speaker];
      const Tensor &b = model.speaker_b[u.speaker];
      Tensor out(T, cfg.dim);
      Gemm(u.frames, false, a, true, &out);
      for (int64_t t = 0; t < T; ++t)
        for (int32_t d = 0; d < cfg.dim; ++d) out(t, d) += b[d];
      u.frames = std::move(out);
    }
    u.transcript = RunCollapse(u.labels);
    data.push_back(std::move(u));
  }
  return data;
}

Dataset GenSynthetic(const SyntheticConfig &cfg, uint64_t seed) {
  Rng seeds(seed);
  const uint64_t model_seed = seeds.NextSeed();
  const uint64_t sample_seed = seeds.NextSeed();
  return SampleSynthetic(cfg, MakeSyntheticModel(cfg, model_seed), sample_seed);
}

// ---------------------------------------------------------------------------

namespace {

inline int64_t ClampIndex(int64_t t, int64_t steps, bool *clamped) {
  if (t < 0 || t >= steps) {
    if (clamped) *clamped = true;
    return t < 0 ? 0 : steps - 1;
  }
  return t;
}

void CheckDistribution(const std::vector<double> &w, int64_t n, const char *what) {
  SEQREP_CHECK_CONFIG(static_cast<int64_t>(w.size()) == n,
                      std::string(what) + " must have 2K+1 = " + std::to_string(n) + " entries");
  double s = 0.0;
  for (double v : w) {
    SEQREP_CHECK_CONFIG(v >= 0.0, std::string(what) + " must be non-negative");
    s += v;
  }
  SEQREP_CHECK_CONFIG(std::abs(s - 1.0) <= 1e-12, std::string(what) + " must sum to one");
}

}  // namespace

Tensor WindowStack(const Tensor &frames, int64_t window) {
  SEQREP_CHECK_CONFIG(window >= 1 && window % 2 == 1, "window width must be odd and >= 1");
  const int64_t T = frames.rows(), D = frames.cols(), K = (window - 1) / 2;
  Tensor out(T, window * D);
  for (int64_t t = 0; t < T; ++t)
    for (int64_t j = -K; j <= K; ++j) {
      auto src = frames.row(ClampIndex(t + j, T, nullptr));
      std::copy(src.begin(), src.end(), out.data() + t * window * D + (j + K) * D);
    }
  return out;
}

std::string ReconKindName(ReconKind k) {
  switch (k) {
    case ReconKind::kCurrent: return "current";
    case ReconKind::kNext: return "next";
    case ReconKind::kPrev: return "prev";
    case ReconKind::kWindowConcat: return "window_concat";
    case ReconKind::kWindowMean: return "window_mean";
    case ReconKind::kWindowWeighted: return "window_weighted";
    case ReconKind::kRandomStep: return "random_step";
  }
  return "?";
}

ReconKind ParseReconKind(const std::string &s) {
  for (ReconKind k : {ReconKind::kCurrent, ReconKind::kNext, ReconKind::kPrev,
                      ReconKind::kWindowConcat, ReconKind::kWindowMean,
                      ReconKind::kWindowWeighted, ReconKind::kRandomStep})
    if (ReconKindName(k) == s) return k;
  throw ConfigError("unknown reconstruction target kind '" + s + "'");
}

void ReconTargetSpec::Check() const {
  SEQREP_CHECK_CONFIG(half_width >= 0, "reconstruction half-width must be >= 0");
  if (kind == ReconKind::kWindowWeighted) CheckDistribution(weights, 2 * half_width + 1, "window weights");
  if (kind == ReconKind::kRandomStep) CheckDistribution(probs, 2 * half_width + 1, "random-step probabilities");
}

int64_t ReconTargetSpec::TargetDim(int64_t d) const {
  return kind == ReconKind::kWindowConcat ? (2 * half_width + 1) * d : d;
}

ReconTarget BuildReconTarget(const Tensor &frames, int64_t t, const ReconTargetSpec &spec,
                             Rng *rng) {
  spec.Check();
  const int64_t T = frames.rows(), D = frames.cols(), K = spec.half_width;
  SEQREP_CHECK_SHAPE(t >= 0 && t < T, "target index " + std::to_string(t) + " outside [0, " +
                                          std::to_string(T) + ")");
  ReconTarget out;
  auto frame = [&](int64_t i) { return frames.row(ClampIndex(i, T, &out.clamped)); };
  auto assign = [&](std::span<const double> r) { out.value.assign(r.begin(), r.end()); };
  switch (spec.kind) {
    case ReconKind::kCurrent: assign(frame(t)); break;
    case ReconKind::kNext: assign(frame(t + 1)); break;
    case ReconKind::kPrev: assign(frame(t - 1)); break;
    case ReconKind::kWindowConcat:
      for (int64_t j = -K; j <= K; ++j) {
        auto r = frame(t + j);
        out.value.insert(out.value.end(), r.begin(), r.end());
      }
      break;
    case ReconKind::kWindowMean:
    case ReconKind::kWindowWeighted: {
      out.value.assign(static_cast<size_t>(D), 0.0);
      for (int64_t j = -K; j <= K; ++j) {
        const double w = spec.kind == ReconKind::kWindowMean
                             ? 1.0 / static_cast<double>(2 * K + 1)
                             : spec.weights[static_cast<size_t>(j + K)];
        auto r = frame(t + j);
        for (int64_t d = 0; d < D; ++d) out.value[d] += w * r[d];
      }
      break;
    }
    case ReconKind::kRandomStep: {
      SEQREP_CHECK_CONFIG(rng != nullptr, "random_step targets need a random generator");
      double u = rng->Uniform(), acc = 0.0;
      int64_t pick = 2 * K;
      for (int64_t j = 0; j <= 2 * K; ++j) {
        acc += spec.probs[static_cast<size_t>(j)];
        if (u < acc) {
          pick = j;
          break;
        }
      }
      assign(frame(t + pick - K));
      break;
    }
  }
  return out;
}

Tensor BuildReconTargets(const Tensor &frames, const ReconTargetSpec &spec, Rng *rng) {
  const int64_t T = frames.rows();
  Tensor out(T, spec.TargetDim(frames.cols()));
  for (int64_t t = 0; t < T; ++t) {
    ReconTarget r = BuildReconTarget(frames, t, spec, rng);
    std::copy(r.value.begin(), r.value.end(), out.row(t).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------

MaskPair GenMask(const MaskSpec &spec, int64_t steps, int64_t dim) {
  Rng rng(spec.seed);
  return GenMask(spec, steps, dim, rng);
}

MaskPair GenMask(const MaskSpec &spec, int64_t steps, int64_t dim, Rng &rng) {
  SEQREP_CHECK_CONFIG(spec.n_time_masks >= 0 && spec.n_channel_masks >= 0,
                      "mask counts must be >= 0");
  if (spec.n_time_masks > 0)
    SEQREP_CHECK_CONFIG(spec.max_time_width >= 1 && spec.max_time_width <= steps,
                        "time mask width " + std::to_string(spec.max_time_width) +
                            " impossible for " + std::to_string(steps) + " frames");
  if (spec.n_channel_masks > 0)
    SEQREP_CHECK_CONFIG(spec.max_channel_width >= 1 && spec.max_channel_width <= dim,
                        "channel mask width " + std::to_string(spec.max_channel_width) +
                            " impossible for " + std::to_string(dim) + " channels");
  MaskPair m{Tensor(steps, dim, 1.0), Tensor(steps, dim, 0.0)};
  std::vector<std::pair<int64_t, int64_t>> time_runs, chan_runs;
  for (int32_t i = 0; i < spec.n_time_masks; ++i) {
    const int64_t w = rng.UniformInt(1, spec.max_time_width);
    time_runs.emplace_back(rng.UniformInt(0, steps - w), w);
  }
  for (int32_t i = 0; i < spec.n_channel_masks; ++i) {
    const int64_t w = rng.UniformInt(1, spec.max_channel_width);
    chan_runs.emplace_back(rng.UniformInt(0, dim - w), w);
  }
  for (auto [s, w] : time_runs)
    for (int64_t t = s; t < s + w; ++t)
      for (int64_t d = 0; d < dim; ++d) m.mask(t, d) = 0.0;
  for (auto [s, w] : chan_runs)
    for (int64_t t = 0; t < steps; ++t)
      for (int64_t d = s; d < s + w; ++d) m.mask(t, d) = 0.0;
  for (auto [s, w] : time_runs) {
    const int64_t half = (w + 1) / 2, off = s + (w - half) / 2;
    for (int64_t t = off; t < off + half; ++t)
      for (int64_t d = 0; d < dim; ++d) m.central(t, d) = 1.0;
  }
  for (auto [s, w] : chan_runs) {
    const int64_t half = (w + 1) / 2, off = s + (w - half) / 2;
    for (int64_t t = 0; t < steps; ++t)
      for (int64_t d = off; d < off + half; ++d) m.central(t, d) = 1.0;
  }
  return m;
}

// ---------------------------------------------------------------------------

Utterance StackFrames(const Utterance &u, int64_t n) {
  SEQREP_CHECK_CONFIG(n >= 1, "stacking factor must be >= 1");
  const int64_t T = u.num_frames() / n, D = u.dim();
  Utterance out;
  out.id = u.id;
  out.speaker = u.speaker;
  out.frames = Tensor(T, n * D);
  for (int64_t t = 0; t < T; ++t)
    std::copy_n(u.frames.data() + t * n * D, n * D, out.frames.data() + t * n * D);
  if (u.has_labels()) {
    for (int64_t t = 0; t < T; ++t) out.labels.push_back(u.labels[static_cast<size_t>(t * n)]);
    out.transcript = RunCollapse(out.labels);
  } else {
    out.transcript = u.transcript;
  }
  return out;
}

NormStats ComputeNormStats(const Dataset &data) {
  SEQREP_CHECK_CONFIG(!data.empty(), "cannot compute statistics of an empty dataset");
  const int64_t D = data.front().dim();
  std::vector<double> sum(static_cast<size_t>(D), 0.0), sq(static_cast<size_t>(D), 0.0);
  double n = 0.0;
  for (const auto &u : data) {
    SEQREP_CHECK_SHAPE(u.dim() == D, "utterance " + u.id + " has inconsistent dimension");
    for (int64_t t = 0; t < u.num_frames(); ++t)
      for (int64_t d = 0; d < D; ++d) {
        sum[d] += u.frames(t, d);
        sq[d] += u.frames(t, d) * u.frames(t, d);
      }
    n += static_cast<double>(u.num_frames());
  }
  NormStats s;
  for (int64_t d = 0; d < D; ++d) {
    const double m = sum[d] / n;
    s.mean.push_back(m);
    s.stddev.push_back(std::sqrt(std::max(0.0, sq[d] / n - m * m)));
  }
  return s;
}

void ApplyNorm(const NormStats &stats, Dataset *data) {
  for (auto &u : *data) {
    SEQREP_CHECK_SHAPE(u.dim() == static_cast<int64_t>(stats.mean.size()),
                       "normalisation statistics do not match utterance " + u.id);
    for (int64_t t = 0; t < u.num_frames(); ++t)
      for (int64_t d = 0; d < u.dim(); ++d) {
        double v = u.frames(t, d) - stats.mean[d];
        if (stats.stddev[d] > 0.0) v /= stats.stddev[d];
        u.frames(t, d) = v;
      }
  }
}

void SpeakerMeanNormalize(Dataset *data) {
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < data->size(); ++i) {
    const Utterance &u = (*data)[i];
    groups[u.speaker >= 0 ? "spk" + std::to_string(u.speaker) : "utt:" + u.id].push_back(i);
  }
  for (const auto &[key, idx] : groups) {
    const int64_t D = (*data)[idx.front()].dim();
    std::vector<double> mean(static_cast<size_t>(D), 0.0);
    double n = 0.0;
    for (size_t i : idx) {
      const Utterance &u = (*data)[i];
      for (int64_t t = 0; t < u.num_frames(); ++t)
        for (int64_t d = 0; d < D; ++d) mean[d] += u.frames(t, d);
      n += static_cast<double>(u.num_frames());
    }
    for (auto &m : mean) m /= n;
    for (size_t i : idx) {
      Utterance &u = (*data)[i];
      for (int64_t t = 0; t < u.num_frames(); ++t)
        for (int64_t d = 0; d < D; ++d) u.frames(t, d) -= mean[d];
    }
  }
}

// ---------------------------------------------------------------------------

void WriteFeatures(const std::string &path, const Tensor &frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  binio::WriteMagic(os, "SRF1");
  binio::WriteU32(os, static_cast<uint32_t>(frames.rows()));
  binio::WriteU32(os, static_cast<uint32_t>(frames.cols()));
  binio::WriteU32(os, 0);
  for (double v : frames.values()) binio::WriteF32(os, static_cast<float>(v));
  if (!os) throw IoError("write failed for " + path);
}

Tensor ReadFeatures(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file " + path);
  const std::string what = "feature file " + path;
  binio::ExpectMagic(is, "SRF1", what);
  const uint32_t T = binio::ReadU32(is, what);
  const uint32_t D = binio::ReadU32(is, what);
  binio::ReadU32(is, what);
  Tensor out(T, D);
  for (auto &v : out.values()) v = binio::ReadF32(is, what);
  return out;
}

void WriteLabels(const std::string &path, const std::vector<int32_t> &labels, int32_t vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  binio::WriteMagic(os, "SRL1");
  binio::WriteU32(os, static_cast<uint32_t>(labels.size()));
  binio::WriteU32(os, static_cast<uint32_t>(vocab));
  binio::WriteU32(os, 0);
  for (int32_t l : labels) binio::WriteI32(os, l);
  if (!os) throw IoError("write failed for " + path);
}

std::vector<int32_t> ReadLabels(const std::string &path, int32_t *vocab) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open label file " + path);
  const std::string what = "label file " + path;
  binio::ExpectMagic(is, "SRL1", what);
  const uint32_t T = binio::ReadU32(is, what);
  const uint32_t V = binio::ReadU32(is, what);
  binio::ReadU32(is, what);
  std::vector<int32_t> out(T);
  for (auto &l : out) {
    l = binio::ReadI32(is, what);
    if (l < 0 || static_cast<uint32_t>(l) >= V)
      throw IoError("label " + std::to_string(l) + " outside vocabulary in " + path);
  }
  if (vocab) *vocab = static_cast<int32_t>(V);
  return out;
}

std::string SaveDataset(const std::string &dir, const Dataset &data, int32_t vocab) {
  fs::create_directories(fs::path(dir) / "feats");
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto &u : data) {
    nlohmann::json e;
    e["id"] = u.id;
    const std::string feat = "feats/" + u.id + ".srf";
    WriteFeatures((fs::path(dir) / feat).string(), u.frames);
    e["feature_path"] = feat;
    if (u.has_labels()) {
      const std::string lab = "feats/" + u.id + ".srl";
      WriteLabels((fs::path(dir) / lab).string(), u.labels, vocab);
      e["label_path"] = lab;
    }
    if (!u.transcript.empty()) e["transcript"] = u.transcript;
    if (u.speaker >= 0) e["speaker"] = u.speaker;
    manifest.push_back(std::move(e));
  }
  const std::string path = (fs::path(dir) / "manifest.json").string();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << manifest.dump(1) << "\n";
  return path;
}

Dataset LoadDataset(const std::string &manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open manifest " + manifest_path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception &e) {
    throw IoError("malformed manifest " + manifest_path + ": " + e.what());
  }
  if (!manifest.is_array()) throw IoError("manifest " + manifest_path + " is not a JSON array");
  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string &p) {
    fs::path q(p);
    return (q.is_absolute() ? q : base / q).string();
  };
  Dataset data;
  for (const auto &e : manifest) {
    if (!e.contains("id") || !e.contains("feature_path"))
      throw IoError("manifest entry without id or feature_path in " + manifest_path);
    Utterance u;
    u.id = e["id"].get<std::string>();
    u.frames = ReadFeatures(resolve(e["feature_path"].get<std::string>()));
    if (e.contains("label_path")) {
      u.labels = ReadLabels(resolve(e["label_path"].get<std::string>()));
      if (static_cast<int64_t>(u.labels.size()) != u.num_frames())
        throw IoError("label count does not match frame count for " + u.id);
    }
    if (e.contains("transcript")) u.transcript = e["transcript"].get<std::vector<int32_t>>();
    else if (u.has_labels()) u.transcript = RunCollapse(u.labels);
    if (e.contains("speaker")) u.speaker = e["speaker"].get<int32_t>();
    data.push_back(std::move(u));
  }
  return data;
}

}  // namespace seqrep
