// include/spkd/trainer.hpp

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

#ifndef SPKD_TRAINER_HPP_
#define SPKD_TRAINER_HPP_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spkd/audio.hpp"
#include "spkd/grad.hpp"
#include "spkd/speaker.hpp"
#include "spkd/synth.hpp"
#include "spkd/units.hpp"

namespace spkd::trainer {

enum class SpeakerLoss { kDino, kAamSoftmax, kNone };

const char* SpeakerLossName(SpeakerLoss m);
SpeakerLoss ParseSpeakerLoss(const std::string& name);

/// Every knob of a run. Serialized as one flat JSON object; every field is a
/// key and unknown keys are rejected.
struct TrainConfig {
  std::uint64_t seed = 1;
  int batch_size = 16;
  int stage1_steps = 500;
  int stage2_steps = 2000;
  double lambda = 1.0;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  SpeakerLoss speaker_loss = SpeakerLoss::kDino;
  bool augment = true;
  /// Augment x_a1 and x_a2 independently; false augments x_a1 only.
  bool augment_both_crops = true;
  audio::AugmentPolicy policy;
  double segment_cap_s = 5.0;

  // DINO.
  double teacher_temp = 0.04;
  double student_temp = 0.1;
  bool single_temperature = false;
  double teacher_momentum = 0.996;
  double center_momentum = 0.9;
  int dino_out_dim = 256;
  int dino_hidden_dim = 64;
  bool symmetrize = false;

  // AAM-Softmax.
  double aam_margin = 0.2;
  double aam_scale = 30.0;

  // Units and features.
  int n_units = 64;
  int kmeans_iters = 50;
  int kmeans_max_frames = 20000;
  int n_bands = 20;
  double win_s = 0.025;
  double hop_s = 0.010;

  // Networks.
  int enc_hidden_dim = 64;
  int enc_hidden_layers = 2;
  int embedding_dim = 32;
  int unit_dim = 16;
  int latent_dim = 8;
  int synth_hidden_dim = 64;
  double beta = 1.0;
  double beta_warmup_fraction = 0.1;

  // Noise bank built from the training corpus.
  int noise_entries_per_class = 8;
  double noise_duration_s = 2.0;

  // Noisy-content mode: this fraction of records is mixed with noise at
  // noisy_content_snr_db before cropping, so reference and target are both
  // noisy. 0 keeps every target clean.
  double noisy_content_fraction = 0.0;
  double noisy_content_snr_db = 0.0;

  int checkpoint_interval = 0;  // 0: final checkpoint only
  int checkpoint_value_bytes = 8;

  // Synthetic corpora.
  int corpus_n_speakers = 16;
  int corpus_utterances_per_speaker = 10;
  int corpus_phone_alphabet_size = 8;
  double corpus_style_probability = 0.5;
  double corpus_min_duration_s = 0.8;
  double corpus_max_duration_s = 1.6;
  int eval_n_speakers = 8;
  int eval_utterances_per_speaker = 15;
  std::uint64_t eval_seed = 1001;
  double eval_noisy_snr_db = 5.0;
  double separability_snr_db = 0.0;
  int probe_folds = 5;
  int probe_hidden_dim = 16;
  int probe_max_epochs = 400;

  int TotalSteps() const { return stage1_steps + stage2_steps; }
  /// Throws ConfigError when a field is out of range.
  void Validate() const;

  std::string ToJson() const;
  /// Throws ConfigError on malformed text, unknown keys or wrong types.
  static TrainConfig FromJson(const std::string& text);
  /// Applies the keys present in `text` on top of `*this`.
  void MergeJson(const std::string& text);

  audio::CorpusSpec TrainCorpusSpec() const;
  audio::CorpusSpec EvalCorpusSpec() const;
  audio::FilterbankOptions Filterbank() const;
  speaker::EncoderConfig Encoder() const;
  speaker::HeadConfig Head() const;
  speaker::DinoConfig Dino() const;
  synth::SynthConfig Synth() const;
  grad::AdamOptions Adam() const;
};

/// Per-band standardization applied to log filterbank features before they
/// reach any network or the codebook.
struct FeatureNorm {
  RowVector mean;
  RowVector stddev;

  Matrix Apply(const Matrix& frames) const;
};

/// Front-end shared by training and evaluation: filterbank, normalization
/// and codebook.
struct FrontEnd {
  audio::Filterbank filterbank;
  FeatureNorm norm;
  units::Codebook codebook;

  /// Normalized features of `w`.
  Matrix Features(const audio::Waveform& w) const;
};

/// Fits the feature normalization and codebook on clean features of every
/// record (frames subsampled to at most cfg.kmeans_max_frames). Centroids are
/// rounded to codebook file precision.
FrontEnd FitFrontEnd(const TrainConfig& cfg, const audio::Corpus& corpus);

void SaveFrontEnd(const FrontEnd& fe, const std::filesystem::path& dir);
FrontEnd LoadFrontEnd(const TrainConfig& cfg, const std::filesystem::path& dir);

/// One training record after cropping, augmentation and feature extraction.
struct AlignedItem {
  std::size_t record = 0;
  int speaker_id = 0;
  std::vector<int> units;  // frame-synchronous raw units of the target
  Matrix target;           // clean x_a1 features (noisy in noisy-content mode)
  Matrix reference;        // augmented x_a1 features
  Matrix second_crop;      // augmented x_a2 features
  bool ref_augmented = false;
  std::optional<double> ref_snr;
  bool noisy_content = false;
};

struct AlignedBatch {
  std::int64_t step = 0;
  double segment_s = 0.0;
  std::vector<AlignedItem> items;
  Eigen::Index FramesPerItem() const {
    return items.empty() ? 0 : items.front().target.rows();
  }
};

using LogFn = std::function<void(const std::string&)>;

/// Draws cfg.batch_size records for `step`, crops every record to
/// min(shortest selected duration, segment cap), augments, extracts features
/// and raw units. Records shorter than one analysis window are skipped with a
/// warning through `log`. Deterministic in (cfg.seed, step).
AlignedBatch AssembleBatch(const audio::Corpus& corpus,
                           const audio::NoiseBank& bank, const TrainConfig& cfg,
                           const FrontEnd& fe, std::int64_t step,
                           const LogFn& log = {});

/// Record indices chosen for `step`.
std::vector<std::size_t> SampleBatchRecords(std::size_t n_records, int batch_size,
                                            std::uint64_t seed, std::int64_t step);

/// Speaker labels 0..S-1 for AAM-Softmax, in order of first appearance.
std::vector<int> SpeakerLabelMap(const audio::Corpus& corpus, int* n_classes);

struct StepMetrics {
  std::int64_t step = 0;
  int stage = 1;
  double loss_total = 0.0;
  double loss_recon = 0.0;
  double loss_kl = 0.0;
  double loss_speaker = 0.0;
  double teacher_entropy = 0.0;
  double grad_norm = 0.0;
  std::uint64_t seed = 0;
};

enum class UpdateEvent { kStudentStep, kTeacherEma, kCenterEma };

/// Everything that changes during training.
struct RunState {
  std::int64_t step = 0;
  grad::ParamSet student;  // encoder + DINO head or AAM class weights
  grad::ParamSet synth;
  grad::AdamState adam_student;
  grad::AdamState adam_synth;
  std::optional<speaker::DinoState> dino;
  std::deque<StepMetrics> recent;  // ring buffer of the last kRecent steps
  std::function<void(UpdateEvent)> observer;

  static constexpr std::size_t kRecent = 256;
};

/// Network definitions derived from a config.
struct Model {
  explicit Model(const TrainConfig& cfg, int n_speaker_classes);
  speaker::EncoderNet encoder;
  speaker::DinoHead head;
  synth::SynthNet synth;
  int n_speaker_classes;
};

/// Fresh parameters, optimizer and DINO state from cfg.seed.
RunState InitRunState(const TrainConfig& cfg, const Model& model);

/// Freezes the encoder body in stage 1 (step < stage1_steps) and unfreezes
/// it afterwards.
void ApplyStageFreeze(RunState& state, const TrainConfig& cfg);

/// beta after linear warm-up over the first beta_warmup_fraction of steps.
double EffectiveBeta(const TrainConfig& cfg, std::int64_t step);

/// One optimizer step of the joint objective:
///   total = vae(e = SE(x_a1)) + lambda * speaker_loss
/// followed by the teacher EMA and the center EMA (DINO mode only).
StepMetrics TrainStep(RunState& state, const AlignedBatch& batch,
                      const TrainConfig& cfg, const Model& model,
                      const std::vector<int>& speaker_labels);

/// The scalar objective TrainStep differentiates, recorded on `g`.
grad::Var JointObjective(grad::Graph& g, RunState& state, const AlignedBatch& batch,
                         const TrainConfig& cfg, const Model& model,
                         const std::vector<int>& speaker_labels);

/// Forward-only evaluation of the joint loss for the batch, with the same
/// reparameterization noise TrainStep would draw.
StepMetrics EvaluateStep(RunState& state, const AlignedBatch& batch,
                         const TrainConfig& cfg, const Model& model,
                         const std::vector<int>& speaker_labels);

// Checkpoints.
grad::Archive MakeCheckpoint(const RunState& state, const TrainConfig& cfg,
                             const FrontEnd& fe);
void SaveCheckpoint(const RunState& state, const TrainConfig& cfg,
                    const FrontEnd& fe, const std::filesystem::path& file);

struct LoadedRun {
  TrainConfig config;
  FrontEnd front_end;
  RunState state;
  int n_speaker_classes = 0;
};
LoadedRun RestoreCheckpoint(const grad::Archive& archive);
LoadedRun LoadCheckpoint(const std::filesystem::path& file);

// Metrics log.
constexpr const char* kMetricsHeader =
    "step,stage,loss_total,loss_recon,loss_kl,loss_speaker,teacher_entropy,"
    "grad_norm,seed";
std::string FormatMetricsRow(const StepMetrics& m);

struct ScheduleOptions {
  /// Directory receiving metrics.csv and checkpoints/; empty writes nothing.
  std::filesystem::path out_dir;
  /// Stop after this step (exclusive); -1 runs to the end of the schedule.
  std::int64_t stop_at = -1;
  LogFn log;
  std::function<void(const StepMetrics&)> on_step;
};

/// Runs stage 1 (encoder body frozen) then stage 2 (all trainable) from
/// state.step until the schedule ends, appending to out_dir/metrics.csv.
void RunSchedule(RunState& state, const TrainConfig& cfg, const Model& model,
                 const FrontEnd& fe, const audio::Corpus& corpus,
                 const audio::NoiseBank& bank, const ScheduleOptions& opts);

// Gradient checks.
struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
};
struct GradCheckReport {
  std::vector<GradCheckCase> cases;  // worst case per name
  double max_rel_error = 0.0;
  int configurations = 0;
  int checks = 0;
};

/// Central-difference check of every differentiable primitive (two-point,
/// step `h`) and of the joint objective (DINO and AAM-Softmax variants;
/// five-point, step `joint_h`) over `configurations` random shapes and values.
GradCheckReport RunGradCheckSuite(int configurations, std::uint64_t seed,
                                  double h = 1e-5, double joint_h = 1e-4);

/// Noise bank used for training, derived from cfg.seed and the corpus.
audio::NoiseBank TrainingNoiseBank(const TrainConfig& cfg,
                                   const audio::Corpus& corpus);

}  // namespace spkd::trainer

#endif  // SPKD_TRAINER_HPP_
