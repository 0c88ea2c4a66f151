// src/audio/waveform.cpp

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

#include <algorithm>
#include <cmath>
#include <string>

#include "spkd/audio.hpp"
#include "spkd/errors.hpp"

namespace spkd::audio {

namespace {

void CheckNonEmpty(const Waveform& w, const char* what) {
  if (w.samples.empty()) throw SilentInput(std::string(what) + " is empty");
  if (w.sample_rate <= 0) throw ConfigError("sample_rate must be positive");
}

}  // namespace

double Rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

Waveform NormalizeLoudness(const Waveform& w, double target_rms) {
  if (!(target_rms > 0.0)) throw ConfigError("target_rms must be positive");
  CheckNonEmpty(w, "input");
  const double rms = Rms(w);
  if (rms == 0.0) throw SilentInput("cannot normalize an all-zero wave");
  Waveform out = w;
  const double gain = target_rms / rms;
  for (double& s : out.samples) s *= gain;
  return out;
}

Waveform FitNoiseLength(const Waveform& noise, std::size_t length) {
  CheckNonEmpty(noise, "noise");
  Waveform out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(length);
  const std::size_t n = noise.samples.size();
  for (std::size_t i = 0; i < length; ++i) out.samples[i] = noise.samples[i % n];
  return out;
}

double SnrNoiseGain(const Waveform& signal, const Waveform& fitted_noise,
                    double snr_db) {
  const double rs = Rms(signal);
  const double rn = Rms(fitted_noise);
  if (rs == 0.0) throw SilentInput("signal is silent");
  if (rn == 0.0) throw SilentInput("noise is silent");
  return (rs / rn) * std::pow(10.0, -snr_db / 20.0);
}

Waveform MixAtSnr(const Waveform& signal, const Waveform& noise,
                  double snr_db) {
  CheckNonEmpty(signal, "signal");
  CheckNonEmpty(noise, "noise");
  if (signal.sample_rate != noise.sample_rate) {
    throw RateMismatch(std::to_string(signal.sample_rate) + " vs " +
                       std::to_string(noise.sample_rate));
  }
  const Waveform fitted = FitNoiseLength(noise, signal.size());
  const double alpha = SnrNoiseGain(signal, fitted, snr_db);
  Waveform out = signal;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] += alpha * fitted.samples[i];
  }
  return out;
}

std::size_t CropLength(const Waveform& w, double segment_s) {
  if (!(segment_s > 0.0)) throw ConfigError("segment_s must be positive");
  const auto want = static_cast<std::size_t>(
      std::llround(segment_s * static_cast<double>(w.sample_rate)));
  return std::clamp<std::size_t>(want, 1, w.size());
}

std::pair<Waveform, Waveform> RandomCropPair(const Waveform& w,
                                             double segment_s, Rng& rng) {
  CheckNonEmpty(w, "input");
  const std::size_t len = CropLength(w, segment_s);
  if (len >= w.size()) return {w, w};
  const std::size_t span = w.size() - len + 1;
  auto crop = [&](std::size_t start) {
    Waveform c;
    c.sample_rate = w.sample_rate;
    c.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     w.samples.begin() +
                         static_cast<std::ptrdiff_t>(start + len));
    return c;
  };
  const std::size_t first = rng.Index(span);
  const std::size_t second = rng.Index(span);
  return {crop(first), crop(second)};
}

const char* NoiseClassName(NoiseClass c) {
  switch (c) {
    case NoiseClass::kBabble:
      return "babble";
    case NoiseClass::kMusic:
      return "music";
    case NoiseClass::kGeneric:
      return "generic";
  }
  return "?";
}

NoiseClass ParseNoiseClass(const std::string& name) {
  if (name == "babble") return NoiseClass::kBabble;
  if (name == "music") return NoiseClass::kMusic;
  if (name == "generic") return NoiseClass::kGeneric;
  throw ConfigError("unknown noise class '" + name + "'");
}

const SnrRange& AugmentPolicy::RangeFor(NoiseClass c) const {
  switch (c) {
    case NoiseClass::kBabble:
      return babble;
    case NoiseClass::kMusic:
      return music;
    case NoiseClass::kGeneric:
      break;
  }
  return generic;
}

void AugmentPolicy::Validate() const {
  if (!(apply_probability >= 0.0 && apply_probability <= 1.0)) {
    throw ConfigError("apply_probability must lie in [0, 1]");
  }
  for (const SnrRange* r : {&babble, &music, &generic}) {
    if (!(r->low <= r->high)) throw ConfigError("SNR range has low > high");
  }
}

AugmentResult AugmentReference(const Waveform& w, const NoiseBank& bank,
                               const AugmentPolicy& policy, Rng& rng) {
  policy.Validate();
  if (bank.empty() && policy.apply_probability > 0.0) {
    throw ConfigError("empty noise bank with a non-zero apply probability");
  }
  AugmentResult result;
  if (!rng.Bernoulli(policy.apply_probability)) {
    result.wave = w;
    return result;
  }
  // Classes in first-appearance order so the draw does not depend on how the
  // bank is sorted within a class.
  std::vector<NoiseClass> classes;
  for (const NoiseEntry& e : bank) {
    if (std::find(classes.begin(), classes.end(), e.noise_class) ==
        classes.end()) {
      classes.push_back(e.noise_class);
    }
  }
  const NoiseClass cls = classes[rng.Index(classes.size())];
  std::vector<const NoiseEntry*> members;
  for (const NoiseEntry& e : bank) {
    if (e.noise_class == cls) members.push_back(&e);
  }
  const NoiseEntry& chosen = *members[rng.Index(members.size())];
  const SnrRange& range = policy.RangeFor(cls);
  const double snr = rng.Uniform(range.low, range.high);
  result.wave = MixAtSnr(w, chosen.wave, snr);
  result.applied = true;
  result.snr_used = snr;
  result.noise_class = cls;
  return result;
}

}  // namespace spkd::audio
