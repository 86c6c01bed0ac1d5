// seqrep/dataio.h

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

#ifndef SEQREP_DATAIO_H_
#define SEQREP_DATAIO_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqrep/rng.h"
#include "seqrep/tensor.h"

namespace seqrep {

/// One sequence.  `labels` are framewise state ids in [0, vocab) and may be
/// empty; `transcript` is the run-collapsed label sequence.
struct Utterance {
  std::string id;
  Tensor frames;  // T x D
  std::vector<int32_t> labels;
  std::vector<int32_t> transcript;
  int32_t speaker = -1;

  int64_t num_frames() const { return frames.rows(); }
  int64_t dim() const { return frames.cols(); }
  bool has_labels() const { return !labels.empty(); }
};

using Dataset = std::vector<Utterance>;

/// Collapses runs of equal labels: [3 3 1 1 1 3] -> [3 1 3].
std::vector<int32_t> RunCollapse(const std::vector<int32_t> &labels);

// ---------------------------------------------------------------------------
// Synthetic segmental HMM data.

struct SyntheticConfig {
  int32_t n_states = 5;
  int32_t dim = 20;
  int32_t min_segment = 3;
  int32_t max_segment = 8;
  int32_t n_utterances = 100;
  int32_t min_length = 30;
  int32_t max_length = 60;
  double emission_noise = 0.5;
  double mean_scale = 1.0;
  /// Number of speakers; 0 disables the per-speaker affine distortion.
  int32_t n_speakers = 0;
  double speaker_scale = 0.2;
  std::string id_prefix = "utt";

  void Check() const;
};

/// State means and per-speaker affine maps behind a synthetic corpus.
struct SyntheticModel {
  Tensor means;                  // K x D
  std::vector<Tensor> speaker_a;  // D x D each
  std::vector<Tensor> speaker_b;  // 1 x D each
};

SyntheticModel MakeSyntheticModel(const SyntheticConfig &cfg, uint64_t seed);
/// Samples utterances from `model`.  Each utterance is a run of state
/// segments whose lengths are uniform in [min_segment, max_segment]; the
/// next state is uniform over the states other than the current one.
Dataset SampleSynthetic(const SyntheticConfig &cfg, const SyntheticModel &model, uint64_t seed);
/// MakeSyntheticModel(cfg, seed) followed by SampleSynthetic.
Dataset GenSynthetic(const SyntheticConfig &cfg, uint64_t seed);

// ---------------------------------------------------------------------------
// Windowing and targets.  Out-of-range frame indices are clamped to the
// first or last frame.

/// Row t is [x_{t-K}, ..., x_{t+K}] with K = (W - 1) / 2.  W must be odd.
Tensor WindowStack(const Tensor &frames, int64_t window);

enum class ReconKind { kCurrent, kNext, kPrev, kWindowConcat, kWindowMean, kWindowWeighted, kRandomStep };

struct ReconTargetSpec {
  ReconKind kind = ReconKind::kCurrent;
  int64_t half_width = 0;       // K
  std::vector<double> weights;  // 2K + 1 entries, window_weighted
  std::vector<double> probs;    // 2K + 1 entries, random_step

  void Check() const;
  /// Width of the produced target given frame dimension d.
  int64_t TargetDim(int64_t d) const;
};

std::string ReconKindName(ReconKind k);
ReconKind ParseReconKind(const std::string &s);

struct ReconTarget {
  std::vector<double> value;
  /// True if any referenced frame index had to be clamped.
  bool clamped = false;
};

/// Target u_t.  `rng` is only consulted for kRandomStep.
ReconTarget BuildReconTarget(const Tensor &frames, int64_t t, const ReconTargetSpec &spec,
                             Rng *rng = nullptr);
/// All T targets stacked as rows.
Tensor BuildReconTargets(const Tensor &frames, const ReconTargetSpec &spec, Rng *rng = nullptr);

// ---------------------------------------------------------------------------
// Masks.

struct MaskSpec {
  int32_t n_time_masks = 0;
  int32_t max_time_width = 0;
  int32_t n_channel_masks = 0;
  int32_t max_channel_width = 0;
  uint64_t seed = 0;
};

/// mask is 1 for observed cells and 0 for masked ones.  central is 1 on the
/// central ceil(w/2) indices of each masked run (rows for time runs, columns
/// for channel runs) and 0 elsewhere, so central * mask == 0.
struct MaskPair {
  Tensor mask;
  Tensor central;
};

/// Each run has a width uniform in [1, max_width] and a uniform start.
/// Throws ConfigError if a maximum width exceeds its axis.
MaskPair GenMask(const MaskSpec &spec, int64_t steps, int64_t dim);
MaskPair GenMask(const MaskSpec &spec, int64_t steps, int64_t dim, Rng &rng);

// ---------------------------------------------------------------------------
// Stacking and normalisation.

/// T' = floor(T / n) frames of n * D; labels keep the first label of each
/// group and the transcript is recomputed from them.
Utterance StackFrames(const Utterance &u, int64_t n);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

NormStats ComputeNormStats(const Dataset &data);
/// (x - mean) / stddev per dimension; zero-variance dimensions are only
/// centred.
void ApplyNorm(const NormStats &stats, Dataset *data);
/// Subtracts each speaker's mean frame.  Utterances without a speaker are
/// treated as their own speaker.
void SpeakerMeanNormalize(Dataset *data);

// ---------------------------------------------------------------------------
// Files.
//
// Feature file: "SRF1" | u32 T | u32 D | u32 flags | T*D float32, row-major.
// Label file:   "SRL1" | u32 T | u32 vocab | u32 flags | T int32.
// All integers and floats little-endian.  Manifest: JSON array of objects
// {id, feature_path, label_path?, transcript?, speaker?}; relative paths are
// resolved against the manifest's directory.

void WriteFeatures(const std::string &path, const Tensor &frames);
Tensor ReadFeatures(const std::string &path);
void WriteLabels(const std::string &path, const std::vector<int32_t> &labels, int32_t vocab);
std::vector<int32_t> ReadLabels(const std::string &path, int32_t *vocab = nullptr);

/// Writes <dir>/manifest.json plus one .srf (and .srl if labelled) per
/// utterance.  Returns the manifest path.
std::string SaveDataset(const std::string &dir, const Dataset &data, int32_t vocab);
Dataset LoadDataset(const std::string &manifest_path);

}  // namespace seqrep

#endif  // SEQREP_DATAIO_H_
