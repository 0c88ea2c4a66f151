// src/speaker/speaker.cpp

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
#include <string>

#include "spkd/errors.hpp"
#include "spkd/speaker.hpp"

namespace spkd::speaker {

void AddLinear(ParamSet& params, const std::string& name, int in, int out,
               Rng& rng, bool trainable) {
  Tensor w(out, in);
  const double sd = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.Normal(0.0, sd);
  params.Add(name + ".w", std::move(w), trainable);
  params.Add(name + ".b", Tensor::Zero(1, out), trainable);
}

Var ApplyLinear(Graph& g, ParamSet& params, const std::string& name, Var x) {
  return grad::Linear(x, g.Parameter(params.Get(name + ".w")),
                      g.Parameter(params.Get(name + ".b")));
}

// ---------------------------------------------------------------------------

EncoderNet::EncoderNet(const EncoderConfig& cfg) : cfg_(cfg) {
  if (cfg.input_dim < 1 || cfg.hidden_dim < 1 || cfg.hidden_layers < 0 ||
      cfg.embedding_dim < 1) {
    throw ConfigError("invalid encoder dimensions");
  }
}

void EncoderNet::InitParams(ParamSet& params, Rng& rng) const {
  int in = cfg_.input_dim;
  for (int i = 0; i < cfg_.hidden_layers; ++i) {
    AddLinear(params, std::string(kBodyPrefix) + std::to_string(i), in,
              cfg_.hidden_dim, rng);
    in = cfg_.hidden_dim;
  }
  AddLinear(params, kLastLayerPrefix, in, cfg_.embedding_dim, rng);
}

Var EncoderNet::Forward(Graph& g, ParamSet& params, Var frames,
                        Eigen::Index items) const {
  if (frames.cols() != cfg_.input_dim) {
    throw ShapeError("encoder expects " + std::to_string(cfg_.input_dim) +
                     " feature bands, got " + std::to_string(frames.cols()));
  }
  Var h = frames;
  for (int i = 0; i < cfg_.hidden_layers; ++i) {
    h = grad::Tanh(ApplyLinear(g, params, std::string(kBodyPrefix) + std::to_string(i), h));
  }
  return ApplyLinear(g, params, kLastLayerPrefix, grad::SegmentMean(h, items));
}

SpeakerEmbedding EncoderNet::Encode(const ParamSet& params,
                                    const Matrix& frames) const {
  Graph g;
  // Forward only: the graph never writes back into the parameters.
  Var out = Forward(g, const_cast<ParamSet&>(params), g.Constant(frames), 1);
  return out.value().row(0);
}

// ---------------------------------------------------------------------------

DinoHead::DinoHead(const HeadConfig& cfg) : cfg_(cfg) {
  if (cfg.embedding_dim < 1 || cfg.hidden_dim < 1 || cfg.out_dim < 1) {
    throw ConfigError("invalid DINO head dimensions");
  }
}

void DinoHead::InitParams(ParamSet& params, Rng& rng) const {
  AddLinear(params, "head.l0", cfg_.embedding_dim, cfg_.hidden_dim, rng);
  AddLinear(params, "head.l1", cfg_.hidden_dim, cfg_.hidden_dim, rng);
  AddLinear(params, "head.l2", cfg_.hidden_dim, cfg_.out_dim, rng);
}

Var DinoHead::Forward(Graph& g, ParamSet& params, Var embeddings) const {
  Var h = grad::Tanh(ApplyLinear(g, params, "head.l0", embeddings));
  h = grad::Tanh(ApplyLinear(g, params, "head.l1", h));
  return ApplyLinear(g, params, "head.l2", h);
}

// ---------------------------------------------------------------------------

void DinoState::Validate() const {
  if (!(config.teacher_temp > 0.0) || !(config.student_temp > 0.0)) {
    throw ConfigError("DINO temperatures must be positive");
  }
  for (double m : {config.teacher_momentum, config.center_momentum}) {
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("DINO momenta must lie in [0, 1]");
  }
  if (center.size() != config.out_dim) throw ConfigError("center size != out_dim");
  if (!center.allFinite()) throw NumericsError("non-finite DINO center");
}

DinoState MakeDinoState(const DinoConfig& cfg, const ParamSet& student) {
  DinoState state;
  state.config = cfg;
  state.center = RowVector::Zero(cfg.out_dim);
  for (const grad::Param& p : student.params()) {
    state.teacher.Add(p.name, p.value, /*trainable=*/false);
  }
  state.Validate();
  return state;
}

Tensor TeacherProbabilities(const Tensor& teacher_logits, const DinoState& state) {
  if (teacher_logits.cols() != state.center.size()) {
    throw ShapeError("teacher logits have " + std::to_string(teacher_logits.cols()) +
                     " entries, center has " + std::to_string(state.center.size()));
  }
  const double tau = state.config.TeacherTemp();
  Tensor p(teacher_logits.rows(), teacher_logits.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const RowVector z = (teacher_logits.row(i) - state.center) / tau;
    const double mx = z.maxCoeff();
    p.row(i) = (z.array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Var DinoLoss(Var teacher_logits, Var student_logits, const DinoState& state) {
  if (teacher_logits.rows() != student_logits.rows() ||
      teacher_logits.cols() != student_logits.cols() ||
      student_logits.cols() != state.config.out_dim) {
    throw ShapeError("DINO logits must both be N x " +
                     std::to_string(state.config.out_dim));
  }
  Graph& g = *student_logits.graph;
  const Var fixed = grad::StopGradient(teacher_logits);
  const Var p_t = g.Constant(TeacherProbabilities(fixed.value(), state));
  const Var log_q = grad::LogSoftmaxRows(
      grad::Scale(student_logits, 1.0 / state.config.student_temp));
  return grad::CrossEntropyFromProbs(p_t, log_q);
}

double TeacherEntropy(const Tensor& teacher_logits, const DinoState& state) {
  const Tensor p = TeacherProbabilities(teacher_logits, state);
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = p.data()[i];
    if (v > 0.0) h -= v * std::log(v);
  }
  return h / static_cast<double>(p.rows());
}

void UpdateCenter(DinoState& state, const Tensor& batch_teacher_logits) {
  if (batch_teacher_logits.rows() < 1) throw ShapeError("empty teacher batch");
  if (batch_teacher_logits.cols() != state.center.size()) {
    throw ShapeError("teacher batch width does not match the center");
  }
  const double m = state.config.center_momentum;
  const RowVector mean = batch_teacher_logits.colwise().mean();
  state.center = m * state.center + (1.0 - m) * mean;
}

void UpdateTeacher(DinoState& state, const ParamSet& student) {
  grad::EmaUpdate(state.teacher, student, state.config.teacher_momentum);
}

Var AamSoftmaxLoss(Var embeddings, const std::vector<int>& labels,
                   Var class_weights, double margin, double scale) {
  if (!(margin >= 0.0)) throw ConfigError("AAM margin must be >= 0");
  if (!(scale > 0.0)) throw ConfigError("AAM scale must be positive");
  if (embeddings.cols() != class_weights.cols()) {
    throw ShapeError("embedding and class-weight widths differ");
  }
  for (int l : labels) {
    if (l < 0 || l >= class_weights.rows()) {
      throw LabelError("label " + std::to_string(l) + " outside [0, " +
                       std::to_string(class_weights.rows()) + ")");
    }
  }
  const Var cosines = grad::MatMulTransposed(grad::L2NormalizeRows(embeddings),
                                             grad::L2NormalizeRows(class_weights));
  const Var logits = grad::Scale(grad::AngularMargin(cosines, labels, margin), scale);
  const Var picked = grad::Pick(grad::LogSoftmaxRows(logits), labels);
  return grad::Scale(grad::Mean(picked), -1.0);
}

}  // namespace spkd::speaker
