// include/spkd/eval.hpp

// Copyright 2026  The spkd Authors

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

#ifndef SPKD_EVAL_HPP_
#define SPKD_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spkd/audio.hpp"
#include "spkd/matrix.hpp"
#include "spkd/trainer.hpp"

namespace spkd::eval {

// ---------------------------------------------------------------------------
// Linear probes

struct ProbeOptions {
  int n_folds = 5;
  int hidden_dim = 16;
  int max_epochs = 400;
  double lr = 1e-2;
  double tolerance = 1e-6;  // stop when |loss delta| falls below
  std::uint64_t seed = 1;
};

struct ProbeResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample std over folds
  std::vector<double> fold_accuracies;
  int n_folds = 0;
  int n_classes = 0;
  double chance = 0.0;  // majority-class rate
  int hidden_dim = 0;
};

/// Fold id per sample; every class is spread round-robin over the folds
/// after a seeded shuffle.
std::vector<int> StratifiedFolds(const std::vector<int>& labels, int n_folds,
                                 std::uint64_t seed);

/// k-fold probe with two affine layers (no nonlinearity between them)
/// trained full-batch by Adam on standardized inputs. Throws ConfigError when
/// N < n_folds and StratificationError when a class is missing from a
/// training fold.
ProbeResult LinearProbe(const Matrix& embeddings, const std::vector<int>& labels,
                        const ProbeOptions& opts);

// ---------------------------------------------------------------------------
// Clean / noisy separability

struct SeparabilityRecord {
  std::string id;
  std::string condition;  // "clean" or a noise class name
  Matrix frames;          // T x B features
  std::vector<int> units; // raw units of `frames`
};

struct SeparabilityOptions {
  double l2 = 1e-2;
  int iterations = 500;
  double lr = 0.5;
};

struct SeparabilityResult {
  double f_score = 0.0;  // noisy is the positive class
  double precision = 0.0;
  double recall = 0.0;
  std::string held_out;
};

/// Mean frame concatenated with the normalized unit histogram.
RowVector SeparabilityFeatures(const Matrix& frames, const std::vector<int>& units,
                               int n_units);

/// Trains a class-balanced, L2-regularized logistic regression on clean
/// records of the training split plus every noisy condition except
/// `held_out`, and scores clean test records plus the held-out condition.
/// Clean records are split by a hash of their id, so the result does not
/// depend on record order. Throws ConfigError with fewer than two noisy
/// conditions, no clean records, or an unknown `held_out`.
SeparabilityResult NoiseSeparability(const std::vector<SeparabilityRecord>& records,
                                     int n_units, const std::string& held_out,
                                     const SeparabilityOptions& opts = {});

/// Noise conditions of the separability experiment: babble (mixed corpus
/// talkers), white, pink and brown noise.
const std::vector<std::string>& SeparabilityConditions();

/// Clean features of every record plus one noisy copy per record at
/// `snr_db`, conditions assigned round-robin over SeparabilityConditions().
/// Babble is built from `corpus` itself.
std::vector<SeparabilityRecord> BuildSeparabilitySet(const audio::Corpus& corpus,
                                                     const trainer::FrontEnd& fe,
                                                     double snr_db, std::uint64_t seed);

/// One result per noisy condition, in sorted condition order.
std::vector<SeparabilityResult> LeaveOneConditionOut(
    const std::vector<SeparabilityRecord>& records, int n_units,
    const SeparabilityOptions& opts = {});

// ---------------------------------------------------------------------------
// Cross-condition similarity

struct EmbeddedRecord {
  std::string id;  // pairs with the same id across conditions are skipped
  int speaker_id = 0;
  RowVector embedding;
};

struct SimilarityResult {
  double same_mean = 0.0;
  double diff_mean = 0.0;
  double gap = 0.0;  // same_mean - diff_mean
  double same_std = 0.0;
  double diff_std = 0.0;
  double eer = 0.0;
  std::map<int, double> per_speaker_same;
  std::vector<double> same_scores;
  std::vector<double> diff_scores;
};

/// Cosine scores of every clean x noisy pair. Throws ManifestError when a
/// speaker appears in one condition only.
SimilarityResult CrossConditionSimilarity(const std::vector<EmbeddedRecord>& clean,
                                          const std::vector<EmbeddedRecord>& noisy);

/// Equal error rate of target vs non-target scores.
double EqualErrorRate(const std::vector<double>& target,
                      const std::vector<double>& nontarget);

// ---------------------------------------------------------------------------
// Run evaluation

using MetricList = std::vector<std::pair<std::string, double>>;

/// Student-encoder embedding of each waveform.
Matrix EmbedWaves(const trainer::LoadedRun& run,
                  const std::vector<audio::Waveform>& waves);

/// Noisy copy of every record at `snr_db`; the noise class alternates over
/// the classes in `bank`, record by record. The class name of each copy goes
/// to `conditions` when given.
std::vector<audio::Waveform> NoisyCopies(const audio::Corpus& corpus,
                                         const audio::NoiseBank& bank,
                                         double snr_db, std::uint64_t seed,
                                         std::vector<std::string>* conditions = nullptr);

/// Style and speaker probes, clean/noisy similarity and separability of a
/// trained run on `corpus`. Deterministic in the run config.
MetricList EvaluateRun(const trainer::LoadedRun& run, const audio::Corpus& corpus);

void WriteMetricList(const MetricList& metrics, const std::filesystem::path& file);
MetricList ReadMetricList(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Reports

/// Collates run directories (each with metrics.csv and optionally eval.csv)
/// into out_dir/comparison.csv (run_id,metric,value),
/// out_dir/training_curves.csv, out_dir/summary.txt and, if `svg`, one SVG
/// per training-curve column. Throws IoError on a missing metrics.csv.
void WriteReport(const std::vector<std::filesystem::path>& run_dirs,
                 const std::filesystem::path& out_dir, bool svg = true);

}  // namespace spkd::eval

#endif  // SPKD_EVAL_HPP_
