// include/spkd/audio.hpp

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

#ifndef SPKD_AUDIO_HPP_
#define SPKD_AUDIO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spkd/matrix.hpp"
#include "spkd/rng.hpp"

namespace spkd::audio {

constexpr int kDefaultSampleRate = 16000;

/// Mono sampled audio. Amplitudes are nominally in [-1, 1]; the range is
/// enforced (by clamping) only when writing PCM16 files.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  double Duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  std::size_t size() const { return samples.size(); }
};

double Rms(std::span<const double> samples);
inline double Rms(const Waveform& w) { return Rms(w.samples); }

/// Scales `w` by one positive factor so its RMS equals `target_rms`.
/// Throws SilentInput for an all-zero wave.
Waveform NormalizeLoudness(const Waveform& w, double target_rms);

/// Gain applied to `noise` by MixAtSnr, after `noise` has been tiled or
/// truncated to `signal_length` samples.
double SnrNoiseGain(const Waveform& signal, const Waveform& fitted_noise,
                    double snr_db);

/// Repeats `noise` cyclically (or truncates it) to exactly `length` samples.
Waveform FitNoiseLength(const Waveform& noise, std::size_t length);

/// signal + alpha * noise, alpha chosen so the full-utterance power ratio is
/// `snr_db`. Noise is tiled cyclically when shorter than the signal.
Waveform MixAtSnr(const Waveform& signal, const Waveform& noise,
                  double snr_db);

/// Two crops of min(segment_s, duration) seconds with independent uniform
/// start offsets. Returns copies of `w` when it is not longer than a segment.
std::pair<Waveform, Waveform> RandomCropPair(const Waveform& w,
                                             double segment_s, Rng& rng);

/// Sample count of a crop of `segment_s` seconds taken from `w`.
std::size_t CropLength(const Waveform& w, double segment_s);

// ---------------------------------------------------------------------------
// Augmentation

enum class NoiseClass { kBabble, kMusic, kGeneric };

const char* NoiseClassName(NoiseClass c);
NoiseClass ParseNoiseClass(const std::string& name);

struct SnrRange {
  double low = 0.0;
  double high = 0.0;
};

struct AugmentPolicy {
  double apply_probability = 0.5;
  SnrRange babble{16.0, 25.0};
  SnrRange music{6.0, 20.0};
  SnrRange generic{3.0, 20.0};

  const SnrRange& RangeFor(NoiseClass c) const;
  /// Throws ConfigError on a probability outside [0,1] or low > high.
  void Validate() const;
};

struct NoiseEntry {
  NoiseClass noise_class = NoiseClass::kGeneric;
  Waveform wave;
};
using NoiseBank = std::vector<NoiseEntry>;

struct AugmentResult {
  Waveform wave;
  bool applied = false;
  std::optional<double> snr_used;
  std::optional<NoiseClass> noise_class;
};

/// With probability policy.apply_probability, mixes in a noise drawn from
/// `bank`: a class uniformly among those present, an entry uniformly within
/// the class, an SNR uniformly from the class range.
AugmentResult AugmentReference(const Waveform& w, const NoiseBank& bank,
                               const AugmentPolicy& policy, Rng& rng);

// ---------------------------------------------------------------------------
// Features

/// Frame-major log filterbank energies, T x B.
struct FeatureSequence {
  Matrix frames;
  double frame_hop_s = 0.0;
  std::string source_id;

  Eigen::Index NumFrames() const { return frames.rows(); }
  Eigen::Index NumBands() const { return frames.cols(); }
};

constexpr double kLogFloor = 1e-8;

struct FilterbankOptions {
  int n_bands = 20;
  double win_s = 0.025;
  double hop_s = 0.010;
  double low_hz = 0.0;
  /// Upper band edge; values <= 0 select the Nyquist frequency.
  double high_hz = 0.0;
};

/// Hann-windowed power spectrum pooled by triangular filters whose corner
/// frequencies are equally spaced on the mel scale; value = log(1e-8 + E).
class Filterbank {
 public:
  Filterbank(const FilterbankOptions& opts, int sample_rate);

  FeatureSequence Compute(const Waveform& w) const;

  /// Number of frames produced for a wave of `num_samples` samples, or 0
  /// when it is shorter than one window.
  std::size_t NumFrames(std::size_t num_samples) const;

  const std::vector<double>& CenterHz() const { return center_hz_; }
  int WindowSamples() const { return win_; }
  int HopSamples() const { return hop_; }
  int sample_rate() const { return sample_rate_; }
  const FilterbankOptions& options() const { return opts_; }

 private:
  struct Band {
    int first_bin = 0;
    std::vector<double> weights;
  };

  FilterbankOptions opts_;
  int sample_rate_;
  int win_;
  int hop_;
  int nfft_;
  std::vector<double> window_;
  std::vector<Band> bands_;
  std::vector<double> center_hz_;
};

double HzToMel(double hz);
double MelToHz(double mel);

FeatureSequence LogFilterbank(const Waveform& w, int n_bands, double win_s,
                              double hop_s);

// ---------------------------------------------------------------------------
// Synthetic corpus

struct CorpusSpec {
  int n_speakers = 16;
  int utterances_per_speaker = 10;
  int phone_alphabet_size = 8;
  double style_flag_probability = 0.5;
  std::vector<NoiseClass> noise_classes{NoiseClass::kBabble,
                                        NoiseClass::kGeneric};
  std::uint64_t seed = 1;
  /// Seeds the phone inventory separately so corpora with different speaker
  /// seeds share one "language".
  std::uint64_t phone_seed = 7;
  int sample_rate = kDefaultSampleRate;
  double min_duration_s = 0.8;
  double max_duration_s = 1.6;
  double target_rms = 0.05;
  double vibrato_depth = 0.04;
  double vibrato_rate_hz = 5.5;

  /// Throws ConfigError on any count < 1 or an empty duration range.
  void Validate() const;
};

struct Utterance {
  std::string path;  // relative to the corpus directory
  int speaker_id = 0;
  bool style_flag = false;
  std::string noise_label = "clean";
  std::vector<int> phones;
  Waveform wave;
};

struct Corpus {
  std::vector<Utterance> records;
};

/// Generates the corpus in memory. Identical specs give bit-identical output.
Corpus SynthCorpus(const CorpusSpec& spec);

/// Quantizes every record to PCM16, as if written and read back.
void QuantizeToPcm16(Corpus& corpus);

/// Writes wav/ files and manifest.tsv under `dir`. Throws IoError.
void WriteCorpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus LoadCorpus(const std::filesystem::path& dir);

constexpr const char* kManifestName = "manifest.tsv";

void WriteManifest(const Corpus& corpus, const std::filesystem::path& file);
/// Reads manifest rows; waveforms are left empty.
Corpus ReadManifest(const std::filesystem::path& file);

// WAV, PCM16, mono.
void WriteWav(const std::filesystem::path& file, const Waveform& w);
Waveform ReadWav(const std::filesystem::path& file);

/// Babble from mixtures of 1-6 corpus utterances plus white and pink noise.
/// Only the classes listed in `classes` are produced.
NoiseBank BuildNoiseBank(const Corpus& corpus,
                         const std::vector<NoiseClass>& classes,
                         int entries_per_class, double duration_s,
                         std::uint64_t seed);

Waveform WhiteNoise(std::size_t n, int sample_rate, Rng& rng);
Waveform PinkNoise(std::size_t n, int sample_rate, Rng& rng);
/// Leaky-integrated white noise (1/f^2 below a few Hz of cutoff).
Waveform BrownNoise(std::size_t n, int sample_rate, Rng& rng);

}  // namespace spkd::audio

#endif  // SPKD_AUDIO_HPP_
