// src/trainer/config.cpp

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

#include <set>
#include <string>

#include "json.hpp"
#include "spkd/errors.hpp"
#include "spkd/trainer.hpp"

namespace spkd::trainer {

namespace {

using Json = nlohmann::ordered_json;

// Calls v(key, field) for every config field, in file order.
template <class C, class V>
void VisitFields(C& c, V&& v) {
  v("seed", c.seed);
  v("batch_size", c.batch_size);
  v("stage1_steps", c.stage1_steps);
  v("stage2_steps", c.stage2_steps);
  v("lambda", c.lambda);
  v("lr", c.lr);
  v("adam_beta1", c.adam_beta1);
  v("adam_beta2", c.adam_beta2);
  v("adam_eps", c.adam_eps);
  v("speaker_loss", c.speaker_loss);
  v("augment", c.augment);
  v("augment_both_crops", c.augment_both_crops);
  v("apply_probability", c.policy.apply_probability);
  v("snr_babble_low", c.policy.babble.low);
  v("snr_babble_high", c.policy.babble.high);
  v("snr_music_low", c.policy.music.low);
  v("snr_music_high", c.policy.music.high);
  v("snr_generic_low", c.policy.generic.low);
  v("snr_generic_high", c.policy.generic.high);
  v("segment_cap_s", c.segment_cap_s);
  v("teacher_temp", c.teacher_temp);
  v("student_temp", c.student_temp);
  v("single_temperature", c.single_temperature);
  v("teacher_momentum", c.teacher_momentum);
  v("center_momentum", c.center_momentum);
  v("dino_out_dim", c.dino_out_dim);
  v("dino_hidden_dim", c.dino_hidden_dim);
  v("symmetrize", c.symmetrize);
  v("aam_margin", c.aam_margin);
  v("aam_scale", c.aam_scale);
  v("n_units", c.n_units);
  v("kmeans_iters", c.kmeans_iters);
  v("kmeans_max_frames", c.kmeans_max_frames);
  v("n_bands", c.n_bands);
  v("win_s", c.win_s);
  v("hop_s", c.hop_s);
  v("enc_hidden_dim", c.enc_hidden_dim);
  v("enc_hidden_layers", c.enc_hidden_layers);
  v("embedding_dim", c.embedding_dim);
  v("unit_dim", c.unit_dim);
  v("latent_dim", c.latent_dim);
  v("synth_hidden_dim", c.synth_hidden_dim);
  v("beta", c.beta);
  v("beta_warmup_fraction", c.beta_warmup_fraction);
  v("noise_entries_per_class", c.noise_entries_per_class);
  v("noise_duration_s", c.noise_duration_s);
  v("noisy_content_fraction", c.noisy_content_fraction);
  v("noisy_content_snr_db", c.noisy_content_snr_db);
  v("checkpoint_interval", c.checkpoint_interval);
  v("checkpoint_value_bytes", c.checkpoint_value_bytes);
  v("corpus_n_speakers", c.corpus_n_speakers);
  v("corpus_utterances_per_speaker", c.corpus_utterances_per_speaker);
  v("corpus_phone_alphabet_size", c.corpus_phone_alphabet_size);
  v("corpus_style_probability", c.corpus_style_probability);
  v("corpus_min_duration_s", c.corpus_min_duration_s);
  v("corpus_max_duration_s", c.corpus_max_duration_s);
  v("eval_n_speakers", c.eval_n_speakers);
  v("eval_utterances_per_speaker", c.eval_utterances_per_speaker);
  v("eval_seed", c.eval_seed);
  v("eval_noisy_snr_db", c.eval_noisy_snr_db);
  v("separability_snr_db", c.separability_snr_db);
  v("probe_folds", c.probe_folds);
  v("probe_hidden_dim", c.probe_hidden_dim);
  v("probe_max_epochs", c.probe_max_epochs);
}

struct Writer {
  Json& j;
  void operator()(const char* key, const SpeakerLoss& m) { j[key] = SpeakerLossName(m); }
  template <class T>
  void operator()(const char* key, const T& value) { j[key] = value; }
};

struct Reader {
  const Json& j;
  std::set<std::string>& seen;

  const Json* Lookup(const char* key) {
    auto it = j.find(key);
    if (it == j.end()) return nullptr;
    seen.insert(key);
    return &*it;
  }
  [[noreturn]] static void Bad(const char* key, const char* want) {
    throw ConfigError(std::string("key '") + key + "' must be " + want);
  }
  void operator()(const char* key, SpeakerLoss& m) {
    if (const Json* v = Lookup(key)) {
      if (!v->is_string()) Bad(key, "a string");
      m = ParseSpeakerLoss(v->get<std::string>());
    }
  }
  void operator()(const char* key, bool& b) {
    if (const Json* v = Lookup(key)) {
      if (!v->is_boolean()) Bad(key, "true or false");
      b = v->get<bool>();
    }
  }
  void operator()(const char* key, int& i) {
    if (const Json* v = Lookup(key)) {
      if (!v->is_number_integer()) Bad(key, "an integer");
      const auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) Bad(key, "a 32-bit integer");
      i = static_cast<int>(x);
    }
  }
  void operator()(const char* key, std::uint64_t& u) {
    if (const Json* v = Lookup(key)) {
      if (!v->is_number_unsigned()) Bad(key, "a non-negative integer");
      u = v->get<std::uint64_t>();
    }
  }
  void operator()(const char* key, double& d) {
    if (const Json* v = Lookup(key)) {
      if (!v->is_number()) Bad(key, "a number");
      d = v->get<double>();
    }
  }
};

}  // namespace

const char* SpeakerLossName(SpeakerLoss m) {
  switch (m) {
    case SpeakerLoss::kDino:
      return "dino";
    case SpeakerLoss::kAamSoftmax:
      return "aam_softmax";
    case SpeakerLoss::kNone:
      return "none";
  }
  return "?";
}

SpeakerLoss ParseSpeakerLoss(const std::string& name) {
  if (name == "dino") return SpeakerLoss::kDino;
  if (name == "aam_softmax" || name == "aam") return SpeakerLoss::kAamSoftmax;
  if (name == "none") return SpeakerLoss::kNone;
  throw ConfigError("unknown speaker loss '" + name + "' (dino, aam_softmax, none)");
}

std::string TrainConfig::ToJson() const {
  Json j = Json::object();
  VisitFields(*this, Writer{j});
  return j.dump(2) + "\n";
}

void TrainConfig::MergeJson(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::set<std::string> seen;
  VisitFields(*this, Reader{j, seen});
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!seen.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
  }
}

TrainConfig TrainConfig::FromJson(const std::string& text) {
  TrainConfig c;
  c.MergeJson(text);
  return c;
}

void TrainConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(batch_size >= 1, "batch_size must be >= 1");
  require(stage1_steps >= 0 && stage2_steps >= 0, "stage step counts must be >= 0");
  require(lambda >= 0.0, "lambda must be >= 0");
  require(lr > 0.0, "lr must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  policy.Validate();
  require(segment_cap_s > 0.0, "segment_cap_s must be positive");
  require(teacher_temp > 0.0 && student_temp > 0.0, "temperatures must be positive");
  require(teacher_momentum >= 0.0 && teacher_momentum <= 1.0 &&
              center_momentum >= 0.0 && center_momentum <= 1.0,
          "momenta must lie in [0, 1]");
  require(dino_out_dim >= 1 && dino_hidden_dim >= 1, "DINO head dims must be >= 1");
  require(aam_margin >= 0.0 && aam_scale > 0.0, "need aam_margin >= 0, aam_scale > 0");
  require(n_units >= 1 && kmeans_iters >= 1 && kmeans_max_frames >= n_units,
          "need n_units >= 1, kmeans_iters >= 1, kmeans_max_frames >= n_units");
  require(n_bands >= 1 && hop_s > 0.0 && win_s >= hop_s, "need n_bands >= 1, win_s >= hop_s > 0");
  require(enc_hidden_dim >= 1 && enc_hidden_layers >= 1 && embedding_dim >= 1 &&
              unit_dim >= 1 && latent_dim >= 1 && synth_hidden_dim >= 1,
          "network dims must be >= 1 (and at least one encoder body layer)");
  require(beta >= 0.0 && beta_warmup_fraction >= 0.0 && beta_warmup_fraction <= 1.0,
          "need beta >= 0 and beta_warmup_fraction in [0, 1]");
  require(noise_entries_per_class >= 1 && noise_duration_s > 0.0, "bad noise bank size");
  require(noisy_content_fraction >= 0.0 && noisy_content_fraction <= 1.0,
          "noisy_content_fraction must lie in [0, 1]");
  require(checkpoint_interval >= 0, "checkpoint_interval must be >= 0");
  require(checkpoint_value_bytes == 4 || checkpoint_value_bytes == 8,
          "checkpoint_value_bytes must be 4 or 8");
  require(eval_n_speakers >= 2 && eval_utterances_per_speaker >= 2,
          "evaluation needs >= 2 speakers with >= 2 utterances");
  require(probe_folds >= 2 && probe_hidden_dim >= 1 && probe_max_epochs >= 1,
          "need probe_folds >= 2, probe_hidden_dim >= 1, probe_max_epochs >= 1");
  TrainCorpusSpec().Validate();
  EvalCorpusSpec().Validate();
}

audio::CorpusSpec TrainConfig::TrainCorpusSpec() const {
  audio::CorpusSpec s;
  s.n_speakers = corpus_n_speakers;
  s.utterances_per_speaker = corpus_utterances_per_speaker;
  s.phone_alphabet_size = corpus_phone_alphabet_size;
  s.style_flag_probability = corpus_style_probability;
  s.min_duration_s = corpus_min_duration_s;
  s.max_duration_s = corpus_max_duration_s;
  s.seed = seed;
  return s;
}

audio::CorpusSpec TrainConfig::EvalCorpusSpec() const {
  audio::CorpusSpec s = TrainCorpusSpec();
  s.n_speakers = eval_n_speakers;
  s.utterances_per_speaker = eval_utterances_per_speaker;
  s.seed = eval_seed;
  return s;
}

audio::FilterbankOptions TrainConfig::Filterbank() const {
  audio::FilterbankOptions o;
  o.n_bands = n_bands;
  o.win_s = win_s;
  o.hop_s = hop_s;
  return o;
}

speaker::EncoderConfig TrainConfig::Encoder() const {
  return {n_bands, enc_hidden_dim, enc_hidden_layers, embedding_dim};
}

speaker::HeadConfig TrainConfig::Head() const {
  return {embedding_dim, dino_hidden_dim, dino_out_dim};
}

speaker::DinoConfig TrainConfig::Dino() const {
  speaker::DinoConfig d;
  d.teacher_temp = teacher_temp;
  d.student_temp = student_temp;
  d.single_temperature = single_temperature;
  d.teacher_momentum = teacher_momentum;
  d.center_momentum = center_momentum;
  d.out_dim = dino_out_dim;
  d.symmetrize = symmetrize;
  return d;
}

synth::SynthConfig TrainConfig::Synth() const {
  return {n_units, n_bands, embedding_dim, unit_dim, latent_dim, synth_hidden_dim};
}

grad::AdamOptions TrainConfig::Adam() const {
  return {lr, adam_beta1, adam_beta2, adam_eps};
}

}  // namespace spkd::trainer
