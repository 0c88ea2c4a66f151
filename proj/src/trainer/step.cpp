// src/trainer/step.cpp

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

#include <cmath>

#include "spkd/errors.hpp"
#include "spkd/trainer.hpp"

namespace spkd::trainer {

namespace {

enum : std::uint64_t {
  kTagEncoder = 0x454e,
  kTagHead = 0x4844,
  kTagAam = 0x414d,
  kTagSynth = 0x5359,
  kTagEps = 0x4550,
};

constexpr const char* kAamWeights = "aam.w";

Matrix Stack(const AlignedBatch& batch, Matrix AlignedItem::*field) {
  const Eigen::Index t = batch.FramesPerItem();
  const Eigen::Index b = (batch.items.front().*field).cols();
  Matrix out(t * static_cast<Eigen::Index>(batch.items.size()), b);
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const Matrix& m = batch.items[i].*field;
    if (m.rows() != t || m.cols() != b) throw ShapeError("ragged batch");
    out.middleRows(static_cast<Eigen::Index>(i) * t, t) = m;
  }
  return out;
}

struct Objective {
  grad::Var total;
  StepMetrics metrics;
  grad::Tensor teacher_logits;  // empty outside DINO mode
};

Objective BuildObjective(grad::Graph& g, RunState& state, const AlignedBatch& batch,
                       const TrainConfig& cfg, const Model& model,
                       const std::vector<int>& speaker_labels) {
  if (batch.items.empty()) throw ConfigError("empty batch");
  const auto n = static_cast<Eigen::Index>(batch.items.size());
  const Eigen::Index t = batch.FramesPerItem();

  std::vector<int> units;
  units.reserve(static_cast<std::size_t>(n * t));
  for (const AlignedItem& it : batch.items) {
    units.insert(units.end(), it.units.begin(), it.units.end());
  }

  grad::Var ref = g.Constant(Stack(batch, &AlignedItem::reference));
  grad::Var e = model.encoder.Forward(g, state.student, ref, n);
  grad::Var e_rep = grad::RepeatRows(e, t);

  Rng eps_rng(StreamSeed({cfg.seed, kTagEps, static_cast<std::uint64_t>(batch.step)}));
  grad::Tensor eps(n * t, cfg.latent_dim);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = eps_rng.Normal();

  const double beta = EffectiveBeta(cfg, batch.step);
  synth::VaeTerms vae =
      model.synth.Loss(g, state.synth, units,
                       g.Constant(Stack(batch, &AlignedItem::target)), e_rep, eps, beta);

  Objective out;
  out.metrics.step = batch.step;
  out.metrics.stage = batch.step < cfg.stage1_steps ? 1 : 2;
  out.metrics.seed = cfg.seed;
  out.metrics.loss_recon = vae.recon.scalar();
  out.metrics.loss_kl = vae.kl.scalar();

  std::optional<grad::Var> speaker_loss;
  switch (cfg.speaker_loss) {
    case SpeakerLoss::kDino: {
      if (!state.dino) throw StateError("DINO mode without DINO state");
      speaker::DinoState& dino = *state.dino;
      grad::Var second = g.Constant(Stack(batch, &AlignedItem::second_crop));
      // Teacher parameters are frozen leaves, so nothing flows back into them.
      auto teacher = [&](grad::Var x) {
        return model.head.Forward(g, dino.teacher,
                                  model.encoder.Forward(g, dino.teacher, x, n));
      };
      grad::Var t1 = teacher(ref);
      grad::Var s2 = model.head.Forward(
          g, state.student, model.encoder.Forward(g, state.student, second, n));
      grad::Var loss = speaker::DinoLoss(t1, s2, dino);
      out.teacher_logits = t1.value();
      if (cfg.symmetrize) {
        grad::Var t2 = teacher(second);
        grad::Var s1 = model.head.Forward(g, state.student, e);
        loss = grad::Scale(grad::Add(loss, speaker::DinoLoss(t2, s1, dino)), 0.5);
        grad::Tensor both(2 * n, t1.cols());
        both << t1.value(), t2.value();
        out.teacher_logits = std::move(both);
      }
      out.metrics.teacher_entropy =
          speaker::TeacherEntropy(out.teacher_logits, dino);
      speaker_loss = loss;
      break;
    }
    case SpeakerLoss::kAamSoftmax: {
      std::vector<int> labels;
      labels.reserve(batch.items.size());
      for (const AlignedItem& it : batch.items) {
        if (it.record >= speaker_labels.size()) {
          throw LabelError("record " + std::to_string(it.record) + " has no speaker label");
        }
        labels.push_back(speaker_labels[it.record]);
      }
      grad::Var w = g.Parameter(state.student.Get(kAamWeights));
      speaker_loss = speaker::AamSoftmaxLoss(e, labels, w, cfg.aam_margin, cfg.aam_scale);
      break;
    }
    case SpeakerLoss::kNone:
      break;
  }

  out.total = vae.total;
  if (speaker_loss) {
    out.metrics.loss_speaker = speaker_loss->scalar();
    if (cfg.lambda > 0.0) {
      out.total = grad::Add(out.total, grad::Scale(*speaker_loss, cfg.lambda));
    }
  }
  out.metrics.loss_total = out.total.scalar();
  return out;
}

void Notify(const RunState& state, UpdateEvent e) {
  if (state.observer) state.observer(e);
}

}  // namespace

Model::Model(const TrainConfig& cfg, int n_classes)
    : encoder(cfg.Encoder()),
      head(cfg.Head()),
      synth(cfg.Synth()),
      n_speaker_classes(n_classes) {}

RunState InitRunState(const TrainConfig& cfg, const Model& model) {
  RunState s;
  {
    Rng rng(StreamSeed({cfg.seed, kTagEncoder}));
    model.encoder.InitParams(s.student, rng);
  }
  switch (cfg.speaker_loss) {
    case SpeakerLoss::kDino: {
      Rng rng(StreamSeed({cfg.seed, kTagHead}));
      model.head.InitParams(s.student, rng);
      break;
    }
    case SpeakerLoss::kAamSoftmax: {
      if (model.n_speaker_classes < 2) {
        throw ConfigError("AAM-Softmax needs at least two speaker classes");
      }
      Rng rng(StreamSeed({cfg.seed, kTagAam}));
      grad::Tensor w(model.n_speaker_classes, cfg.embedding_dim);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.Normal();
      s.student.Add(kAamWeights, std::move(w));
      break;
    }
    case SpeakerLoss::kNone:
      break;
  }
  {
    Rng rng(StreamSeed({cfg.seed, kTagSynth}));
    model.synth.InitParams(s.synth, rng);
  }
  s.adam_student = grad::InitAdam(s.student);
  s.adam_synth = grad::InitAdam(s.synth);
  if (cfg.speaker_loss == SpeakerLoss::kDino) {
    s.dino = speaker::MakeDinoState(cfg.Dino(), s.student);
    s.dino->Validate();
  }
  ApplyStageFreeze(s, cfg);
  return s;
}

void ApplyStageFreeze(RunState& state, const TrainConfig& cfg) {
  state.student.SetTrainable(speaker::EncoderNet::kBodyPrefix,
                             state.step >= cfg.stage1_steps);
}

double EffectiveBeta(const TrainConfig& cfg, std::int64_t step) {
  const double warm = cfg.beta_warmup_fraction * cfg.TotalSteps();
  if (warm <= 0.0) return cfg.beta;
  return cfg.beta * std::min(1.0, static_cast<double>(step) / warm);
}

StepMetrics TrainStep(RunState& state, const AlignedBatch& batch,
                      const TrainConfig& cfg, const Model& model,
                      const std::vector<int>& speaker_labels) {
  if (batch.step != state.step) {
    throw StateError("batch for step " + std::to_string(batch.step) +
                     " applied at step " + std::to_string(state.step));
  }
  ApplyStageFreeze(state, cfg);
  state.student.ZeroGrad();
  state.synth.ZeroGrad();

  Objective f;
  {
    grad::Graph g;
    f = BuildObjective(g, state, batch, cfg, model, speaker_labels);
    g.Backward(f.total);
  }
  const double gs = state.student.GradNorm();
  const double gy = state.synth.GradNorm();
  f.metrics.grad_norm = std::sqrt(gs * gs + gy * gy);
  if (!std::isfinite(f.metrics.grad_norm)) throw NumericsError("non-finite gradient");

  const grad::AdamOptions adam = cfg.Adam();
  grad::AdamStep(state.student, state.adam_student, adam);
  grad::AdamStep(state.synth, state.adam_synth, adam);
  Notify(state, UpdateEvent::kStudentStep);
  if (state.dino) {
    speaker::UpdateTeacher(*state.dino, state.student);
    Notify(state, UpdateEvent::kTeacherEma);
    speaker::UpdateCenter(*state.dino, f.teacher_logits);
    Notify(state, UpdateEvent::kCenterEma);
  }

  state.recent.push_back(f.metrics);
  if (state.recent.size() > RunState::kRecent) state.recent.pop_front();
  ++state.step;
  return f.metrics;
}

grad::Var JointObjective(grad::Graph& g, RunState& state, const AlignedBatch& batch,
                         const TrainConfig& cfg, const Model& model,
                         const std::vector<int>& speaker_labels) {
  return BuildObjective(g, state, batch, cfg, model, speaker_labels).total;
}

StepMetrics EvaluateStep(RunState& state, const AlignedBatch& batch,
                         const TrainConfig& cfg, const Model& model,
                         const std::vector<int>& speaker_labels) {
  grad::Graph g;
  return BuildObjective(g, state, batch, cfg, model, speaker_labels).metrics;
}

}  // namespace spkd::trainer
