// src/trainer/batch.cpp

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
#include <map>
#include <numeric>

#include "spkd/errors.hpp"
#include "spkd/trainer.hpp"

namespace spkd::trainer {

namespace {

enum : std::uint64_t {
  kTagBatch = 0x4241,
  kTagItem = 0x4954,
  kTagNoisyContent = 0x4e43,
  kTagBank = 0x424b,
};

}  // namespace

audio::NoiseBank TrainingNoiseBank(const TrainConfig& cfg,
                                   const audio::Corpus& corpus) {
  return audio::BuildNoiseBank(
      corpus, {audio::NoiseClass::kBabble, audio::NoiseClass::kGeneric},
      cfg.noise_entries_per_class, cfg.noise_duration_s,
      StreamSeed({cfg.seed, kTagBank}));
}

std::vector<std::size_t> SampleBatchRecords(std::size_t n_records, int batch_size,
                                            std::uint64_t seed, std::int64_t step) {
  std::vector<std::size_t> idx(n_records);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take = std::min<std::size_t>(n_records, batch_size);
  Rng rng(StreamSeed({seed, kTagBatch, static_cast<std::uint64_t>(step)}));
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(idx[i], idx[i + rng.Index(n_records - i)]);
  }
  idx.resize(take);
  return idx;
}

std::vector<int> SpeakerLabelMap(const audio::Corpus& corpus, int* n_classes) {
  std::map<int, int> ids;
  std::vector<int> labels;
  labels.reserve(corpus.records.size());
  for (const audio::Utterance& u : corpus.records) {
    auto it = ids.try_emplace(u.speaker_id, static_cast<int>(ids.size())).first;
    labels.push_back(it->second);
  }
  if (n_classes) *n_classes = static_cast<int>(ids.size());
  return labels;
}

AlignedBatch AssembleBatch(const audio::Corpus& corpus,
                           const audio::NoiseBank& bank, const TrainConfig& cfg,
                           const FrontEnd& fe, std::int64_t step,
                           const LogFn& log) {
  if (corpus.records.empty()) throw ConfigError("empty training manifest");
  std::vector<std::size_t> chosen;
  std::size_t min_samples = SIZE_MAX;
  const std::size_t window = static_cast<std::size_t>(fe.filterbank.WindowSamples());
  for (std::size_t r : SampleBatchRecords(corpus.records.size(), cfg.batch_size,
                                          cfg.seed, step)) {
    const audio::Utterance& u = corpus.records[r];
    if (u.wave.size() < window) {
      if (log) log("warning: skipping " + u.path + " (shorter than one analysis window)");
      continue;
    }
    chosen.push_back(r);
    min_samples = std::min(min_samples, u.wave.size());
  }
  if (chosen.empty()) throw ConfigError("no usable record in batch");

  const int sr = corpus.records[chosen.front()].wave.sample_rate;
  const auto cap_samples = static_cast<std::size_t>(std::llround(cfg.segment_cap_s * sr));
  const std::size_t seg_samples = std::min(min_samples, cap_samples);

  AlignedBatch batch;
  batch.step = step;
  batch.segment_s = static_cast<double>(seg_samples) / sr;
  for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
    const std::size_t r = chosen[slot];
    const audio::Utterance& u = corpus.records[r];
    AlignedItem item;
    item.record = r;
    item.speaker_id = u.speaker_id;

    audio::Waveform source = u.wave;
    if (cfg.noisy_content_fraction > 0.0) {
      // Designation is a property of the record, not of the step.
      Rng pick(StreamSeed({cfg.seed, kTagNoisyContent, r}));
      if (pick.Bernoulli(cfg.noisy_content_fraction)) {
        if (bank.empty()) throw ConfigError("noisy-content mode needs a noise bank");
        source = audio::MixAtSnr(source, bank[pick.Index(bank.size())].wave,
                                 cfg.noisy_content_snr_db);
        item.noisy_content = true;
      }
    }

    Rng rng(StreamSeed({cfg.seed, kTagItem, static_cast<std::uint64_t>(step), slot, r}));
    auto [a1, a2] = audio::RandomCropPair(source, batch.segment_s, rng);
    item.target = fe.Features(a1);
    item.units = units::Quantize(item.target, fe.codebook);
    if (cfg.augment) {
      audio::AugmentResult ref = audio::AugmentReference(a1, bank, cfg.policy, rng);
      item.ref_augmented = ref.applied;
      item.ref_snr = ref.snr_used;
      item.reference = ref.applied ? fe.Features(ref.wave) : item.target;
      if (cfg.augment_both_crops) {
        a2 = audio::AugmentReference(a2, bank, cfg.policy, rng).wave;
      }
    } else {
      item.reference = item.target;
    }
    item.second_crop = fe.Features(a2);
    batch.items.push_back(std::move(item));
  }
  return batch;
}

}  // namespace spkd::trainer
