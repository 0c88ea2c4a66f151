// src/audio/corpus.cpp

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
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "spkd/audio.hpp"
#include "spkd/errors.hpp"

namespace spkd::audio {

namespace {

constexpr int kMaxHarmonics = 40;
constexpr double kTransitionS = 0.015;
constexpr double kRampS = 0.010;
constexpr double kAspiration = 0.004;

// Stream tags for StreamSeed.
enum : std::uint64_t {
  kTagSpeaker = 0x5350,
  kTagPhone = 0x5048,
  kTagUtterance = 0x5554,
  kTagNoise = 0x4e53,
};

struct Formant {
  double hz;
  double bandwidth;
  double gain;
};

struct PhoneShape {
  std::vector<Formant> formants;
};

struct SpeakerVoice {
  double f0 = 120.0;
  double tilt = 1.0;
  double formant_scale = 1.0;
  std::vector<double> harmonic_gain;  // kMaxHarmonics entries
};

PhoneShape MakePhone(std::uint64_t seed, int p) {
  Rng rng(StreamSeed({seed, kTagPhone, static_cast<std::uint64_t>(p)}));
  PhoneShape shape;
  const double base_gain[3] = {1.0, 0.6, 0.3};
  const double lo[3] = {300.0, 900.0, 2400.0};
  const double hi[3] = {900.0, 2400.0, 3600.0};
  for (int k = 0; k < 3; ++k) {
    Formant f;
    f.hz = rng.Uniform(lo[k], hi[k]);
    f.bandwidth = rng.Uniform(60.0, 160.0);
    f.gain = base_gain[k] * rng.Uniform(0.7, 1.3);
    shape.formants.push_back(f);
  }
  return shape;
}

SpeakerVoice MakeVoice(std::uint64_t seed, int s) {
  Rng rng(StreamSeed({seed, kTagSpeaker, static_cast<std::uint64_t>(s)}));
  SpeakerVoice v;
  v.f0 = std::exp(rng.Uniform(std::log(90.0), std::log(260.0)));
  v.tilt = rng.Uniform(0.5, 1.5);
  v.formant_scale = rng.Uniform(0.85, 1.15);
  v.harmonic_gain.resize(kMaxHarmonics);
  for (double& g : v.harmonic_gain) g = std::exp(0.3 * rng.Normal());
  return v;
}

double Envelope(const PhoneShape& phone, double scale, double hz) {
  double e = 0.02;
  for (const Formant& f : phone.formants) {
    const double d = (hz - scale * f.hz) / f.bandwidth;
    e += f.gain * std::exp(-0.5 * d * d);
  }
  return e;
}

Utterance MakeUtterance(const CorpusSpec& spec,
                        const std::vector<PhoneShape>& phones,
                        const SpeakerVoice& voice, int s, int u) {
  Rng rng(StreamSeed({spec.seed, kTagUtterance, static_cast<std::uint64_t>(s),
                      static_cast<std::uint64_t>(u)}));
  Utterance utt;
  utt.speaker_id = s;
  char name[64];
  std::snprintf(name, sizeof(name), "wav/s%03d_u%03d.wav", s, u);
  utt.path = name;
  utt.style_flag = rng.Bernoulli(spec.style_flag_probability);

  const int sr = spec.sample_rate;
  const double duration = rng.Uniform(spec.min_duration_s, spec.max_duration_s);
  const auto n = static_cast<std::size_t>(std::llround(duration * sr));
  const double f0 = voice.f0 * rng.Uniform(0.95, 1.05);
  const double vib_phase = rng.Uniform(0.0, 2.0 * std::numbers::pi);

  // Phone segmentation, no immediate repeats.
  std::vector<std::size_t> starts;
  std::size_t pos = 0;
  while (pos < n) {
    int p = static_cast<int>(rng.Index(phones.size()));
    if (!utt.phones.empty() && phones.size() > 1) {
      while (p == utt.phones.back()) p = static_cast<int>(rng.Index(phones.size()));
    }
    utt.phones.push_back(p);
    starts.push_back(pos);
    pos += static_cast<std::size_t>(std::llround(rng.Uniform(0.06, 0.16) * sr));
  }

  const int n_harm = std::clamp(
      static_cast<int>(0.45 * sr / (f0 * (1.0 + spec.vibrato_depth) * 1.06)), 1,
      kMaxHarmonics);
  // Harmonic amplitudes per phone in this utterance.
  std::vector<std::vector<double>> amps(utt.phones.size(),
                                        std::vector<double>(n_harm));
  for (std::size_t i = 0; i < utt.phones.size(); ++i) {
    const PhoneShape& shape = phones[utt.phones[i]];
    for (int h = 0; h < n_harm; ++h) {
      const double hz = (h + 1) * f0;
      amps[i][h] = voice.harmonic_gain[h] * std::pow(h + 1.0, -voice.tilt) *
                   Envelope(shape, voice.formant_scale, hz);
    }
  }

  utt.wave.sample_rate = sr;
  utt.wave.samples.resize(n);
  const auto trans = static_cast<std::size_t>(kTransitionS * sr);
  const auto ramp = static_cast<std::size_t>(kRampS * sr);
  std::vector<double> cur(n_harm);
  std::size_t seg = 0;
  double phase = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    while (seg + 1 < starts.size() && t >= starts[seg + 1]) ++seg;
    const double time = static_cast<double>(t) / sr;
    double inst = f0 * (1.0 - 0.05 * time / duration);
    if (utt.style_flag) {
      inst *= 1.0 + spec.vibrato_depth *
                        std::sin(2.0 * std::numbers::pi * spec.vibrato_rate_hz *
                                     time + vib_phase);
    }
    phase += 2.0 * std::numbers::pi * inst / sr;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;

    const std::size_t since = t - starts[seg];
    if (seg > 0 && since < trans) {
      const double a = static_cast<double>(since) / trans;
      for (int h = 0; h < n_harm; ++h) {
        cur[h] = (1.0 - a) * amps[seg - 1][h] + a * amps[seg][h];
      }
    } else {
      std::copy(amps[seg].begin(), amps[seg].end(), cur.begin());
    }
    // sin(h * phase) by the Chebyshev recurrence.
    const double c2 = 2.0 * std::cos(phase);
    double s_prev = 0.0, s_cur = std::sin(phase), acc = 0.0;
    for (int h = 0; h < n_harm; ++h) {
      acc += cur[h] * s_cur;
      const double s_next = c2 * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = s_next;
    }
    double env = 1.0;
    if (t < ramp) env = static_cast<double>(t) / ramp;
    if (n - 1 - t < ramp) env = std::min(env, static_cast<double>(n - 1 - t) / ramp);
    utt.wave.samples[t] = env * (acc + kAspiration * rng.Normal());
  }
  utt.wave = NormalizeLoudness(utt.wave, spec.target_rms);
  return utt;
}

std::string JoinInts(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

void CorpusSpec::Validate() const {
  if (n_speakers < 1 || utterances_per_speaker < 1 || phone_alphabet_size < 1) {
    throw ConfigError("corpus counts must be >= 1");
  }
  if (!(style_flag_probability >= 0.0 && style_flag_probability <= 1.0)) {
    throw ConfigError("style_flag_probability must lie in [0, 1]");
  }
  if (!(min_duration_s > 0.0 && min_duration_s <= max_duration_s)) {
    throw ConfigError("need 0 < min_duration_s <= max_duration_s");
  }
  if (sample_rate <= 0 || !(target_rms > 0.0)) {
    throw ConfigError("sample_rate and target_rms must be positive");
  }
  if (noise_classes.empty()) throw ConfigError("noise_classes is empty");
}

Corpus SynthCorpus(const CorpusSpec& spec) {
  spec.Validate();
  std::vector<PhoneShape> phones;
  for (int p = 0; p < spec.phone_alphabet_size; ++p) {
    phones.push_back(MakePhone(spec.phone_seed, p));
  }
  Corpus corpus;
  for (int s = 0; s < spec.n_speakers; ++s) {
    const SpeakerVoice voice = MakeVoice(spec.seed, s);
    for (int u = 0; u < spec.utterances_per_speaker; ++u) {
      corpus.records.push_back(MakeUtterance(spec, phones, voice, s, u));
    }
  }
  return corpus;
}

void WriteManifest(const Corpus& corpus, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os << "path\tspeaker_id\tstyle_flag\tnoise_label\tphone_sequence\n";
  for (const Utterance& u : corpus.records) {
    os << u.path << '\t' << u.speaker_id << '\t' << (u.style_flag ? 1 : 0)
       << '\t' << u.noise_label << '\t' << JoinInts(u.phones) << '\n';
  }
  if (!os) throw IoError("write failed: " + file.string());
}

Corpus ReadManifest(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open " + file.string());
  Corpus corpus;
  std::string line;
  if (!std::getline(is, line) ||
      line != "path\tspeaker_id\tstyle_flag\tnoise_label\tphone_sequence") {
    throw ManifestError(file.string() + ": missing or unexpected header");
  }
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() == 4 && !line.empty() && line.back() == '\t') {
      fields.emplace_back();
    }
    if (fields.size() != 5) {
      throw ManifestError(file.string() + ":" + std::to_string(line_no) +
                          ": expected 5 fields");
    }
    Utterance u;
    u.path = fields[0];
    try {
      u.speaker_id = std::stoi(fields[1]);
      u.style_flag = std::stoi(fields[2]) != 0;
      std::stringstream ps(fields[4]);
      std::string tok;
      while (std::getline(ps, tok, ',')) {
        if (!tok.empty()) u.phones.push_back(std::stoi(tok));
      }
    } catch (const std::logic_error&) {
      throw ManifestError(file.string() + ":" + std::to_string(line_no) +
                          ": malformed integer field");
    }
    u.noise_label = fields[3];
    corpus.records.push_back(std::move(u));
  }
  return corpus;
}

void WriteCorpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "wav", ec);
  if (ec) throw IoError("cannot create " + (dir / "wav").string() + ": " + ec.message());
  for (const Utterance& u : corpus.records) WriteWav(dir / u.path, u.wave);
  WriteManifest(corpus, dir / kManifestName);
}

Corpus LoadCorpus(const std::filesystem::path& dir) {
  Corpus corpus = ReadManifest(dir / kManifestName);
  for (Utterance& u : corpus.records) u.wave = ReadWav(dir / u.path);
  return corpus;
}

Waveform WhiteNoise(std::size_t n, int sample_rate, Rng& rng) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  for (double& s : w.samples) s = rng.Normal();
  return w;
}

Waveform PinkNoise(std::size_t n, int sample_rate, Rng& rng) {
  // Paul Kellet's refined pinking filter.
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (double& s : w.samples) {
    const double white = rng.Normal();
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    s = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
    b6 = white * 0.115926;
  }
  return w;
}

Waveform BrownNoise(std::size_t n, int sample_rate, Rng& rng) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  double y = 0.0;
  for (double& s : w.samples) {
    y = 0.995 * y + rng.Normal();
    s = y;
  }
  return w;
}

NoiseBank BuildNoiseBank(const Corpus& corpus,
                         const std::vector<NoiseClass>& classes,
                         int entries_per_class, double duration_s,
                         std::uint64_t seed) {
  if (entries_per_class < 1) throw ConfigError("entries_per_class must be >= 1");
  if (corpus.records.empty()) throw ConfigError("noise bank needs a corpus");
  const int sr = corpus.records.front().wave.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sr));
  NoiseBank bank;
  for (NoiseClass cls : classes) {
    for (int i = 0; i < entries_per_class; ++i) {
      Rng rng(StreamSeed({seed, kTagNoise, static_cast<std::uint64_t>(cls),
                          static_cast<std::uint64_t>(i)}));
      NoiseEntry entry;
      entry.noise_class = cls;
      switch (cls) {
        case NoiseClass::kBabble: {
          entry.wave.sample_rate = sr;
          entry.wave.samples.assign(n, 0.0);
          const int talkers = 1 + static_cast<int>(rng.Index(6));
          for (int k = 0; k < talkers; ++k) {
            const Utterance& u = corpus.records[rng.Index(corpus.records.size())];
            const Waveform fitted =
                FitNoiseLength(NormalizeLoudness(u.wave, 1.0), n);
            for (std::size_t j = 0; j < n; ++j) entry.wave.samples[j] += fitted.samples[j];
          }
          break;
        }
        case NoiseClass::kGeneric:
          entry.wave = (i % 2 == 0) ? WhiteNoise(n, sr, rng) : PinkNoise(n, sr, rng);
          break;
        case NoiseClass::kMusic:
          throw ConfigError("music noise has no synthetic generator");
      }
      entry.wave = NormalizeLoudness(entry.wave, 0.05);
      bank.push_back(std::move(entry));
    }
  }
  return bank;
}

}  // namespace spkd::audio
