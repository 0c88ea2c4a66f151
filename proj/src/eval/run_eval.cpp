// src/eval/run_eval.cpp

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

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spkd/errors.hpp"
#include "spkd/eval.hpp"

namespace spkd::eval {

namespace {

enum : std::uint64_t {
  kTagEvalBank = 0x4542,
  kTagNoisyCopy = 0x4e43,
  kTagSepCopy = 0x5343,
};

std::vector<EmbeddedRecord> Embedded(const audio::Corpus& corpus, const Matrix& emb) {
  std::vector<EmbeddedRecord> out;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    out.push_back({corpus.records[i].path, corpus.records[i].speaker_id,
                   emb.row(static_cast<Eigen::Index>(i))});
  }
  return out;
}

void AddProbe(MetricList& m, const std::string& name, const ProbeResult& r) {
  m.emplace_back("probe_" + name + "_acc", r.mean_accuracy);
  m.emplace_back("probe_" + name + "_std", r.std_accuracy);
  m.emplace_back("probe_" + name + "_chance", r.chance);
}

}  // namespace

Matrix EmbedWaves(const trainer::LoadedRun& run,
                  const std::vector<audio::Waveform>& waves) {
  const speaker::EncoderNet encoder(run.config.Encoder());
  Matrix out(static_cast<Eigen::Index>(waves.size()), run.config.embedding_dim);
  for (std::size_t i = 0; i < waves.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        encoder.Encode(run.state.student, run.front_end.Features(waves[i]));
  }
  return out;
}

std::vector<audio::Waveform> NoisyCopies(const audio::Corpus& corpus,
                                         const audio::NoiseBank& bank,
                                         double snr_db, std::uint64_t seed,
                                         std::vector<std::string>* conditions) {
  std::vector<audio::NoiseClass> classes;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto it = std::find(classes.begin(), classes.end(), bank[i].noise_class);
    if (it == classes.end()) {
      classes.push_back(bank[i].noise_class);
      members.emplace_back();
      it = classes.end() - 1;
    }
    members[static_cast<std::size_t>(it - classes.begin())].push_back(i);
  }
  if (classes.empty()) throw ConfigError("noisy copies need a non-empty noise bank");
  std::vector<audio::Waveform> out;
  if (conditions) conditions->clear();
  for (std::size_t r = 0; r < corpus.records.size(); ++r) {
    const std::size_t c = r % classes.size();
    Rng rng(StreamSeed({seed, kTagNoisyCopy, r}));
    const audio::NoiseEntry& e = bank[members[c][rng.Index(members[c].size())]];
    out.push_back(audio::MixAtSnr(corpus.records[r].wave, e.wave, snr_db));
    if (conditions) conditions->push_back(audio::NoiseClassName(classes[c]));
  }
  return out;
}

MetricList EvaluateRun(const trainer::LoadedRun& run, const audio::Corpus& corpus) {
  const trainer::TrainConfig& cfg = run.config;
  if (corpus.records.empty()) throw ConfigError("empty evaluation corpus");
  std::vector<audio::Waveform> clean;
  std::vector<int> style, spk;
  for (const audio::Utterance& u : corpus.records) {
    clean.push_back(u.wave);
    style.push_back(u.style_flag ? 1 : 0);
    spk.push_back(u.speaker_id);
  }
  const Matrix emb = EmbedWaves(run, clean);

  MetricList m;
  ProbeOptions po;
  po.n_folds = cfg.probe_folds;
  po.hidden_dim = cfg.probe_hidden_dim;
  po.max_epochs = cfg.probe_max_epochs;
  po.seed = cfg.eval_seed;
  AddProbe(m, "style", LinearProbe(emb, style, po));
  AddProbe(m, "speaker", LinearProbe(emb, spk, po));

  const audio::NoiseBank bank = audio::BuildNoiseBank(
      corpus, {audio::NoiseClass::kBabble, audio::NoiseClass::kGeneric},
      cfg.noise_entries_per_class, cfg.noise_duration_s,
      StreamSeed({cfg.eval_seed, kTagEvalBank}));

  const Matrix noisy_emb =
      EmbedWaves(run, NoisyCopies(corpus, bank, cfg.eval_noisy_snr_db,
                                  StreamSeed({cfg.eval_seed, kTagNoisyCopy})));
  const SimilarityResult sim =
      CrossConditionSimilarity(Embedded(corpus, emb), Embedded(corpus, noisy_emb));
  m.emplace_back("sim_same_mean", sim.same_mean);
  m.emplace_back("sim_diff_mean", sim.diff_mean);
  m.emplace_back("sim_gap", sim.gap);
  m.emplace_back("sim_eer", sim.eer);

  const std::vector<SeparabilityRecord> recs = BuildSeparabilitySet(
      corpus, run.front_end, cfg.separability_snr_db, StreamSeed({cfg.eval_seed, kTagSepCopy}));
  double worst = 1.0;
  for (const SeparabilityResult& r : LeaveOneConditionOut(recs, cfg.n_units)) {
    m.emplace_back("sep_f1_" + r.held_out, r.f_score);
    worst = std::min(worst, r.f_score);
  }
  m.emplace_back("sep_f1_min", worst);
  return m;
}

void WriteMetricList(const MetricList& metrics, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << "metric,value\n";
  char buf[40];
  for (const auto& [name, v] : metrics) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << name << ',' << buf << '\n';
  }
}

MetricList ReadMetricList(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  if (line != "metric,value") throw FormatError(file.string() + ": bad header");
  MetricList out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(file.string() + ": bad row");
    out.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
  }
  return out;
}

}  // namespace spkd::eval
