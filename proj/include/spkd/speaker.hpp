// include/spkd/speaker.hpp

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

#ifndef SPKD_SPEAKER_HPP_
#define SPKD_SPEAKER_HPP_

#include <vector>

#include "spkd/grad.hpp"
#include "spkd/matrix.hpp"
#include "spkd/rng.hpp"

namespace spkd::speaker {

using grad::Graph;
using grad::ParamSet;
using grad::Tensor;
using grad::Var;

/// Fixed-dimension speaker vector (1 x d). Not unit-normalized.
using SpeakerEmbedding = RowVector;

struct EncoderConfig {
  int input_dim = 20;
  int hidden_dim = 64;
  int hidden_layers = 2;
  int embedding_dim = 32;
};

/// Frame-wise linear+tanh stack, mean pooling over time, and a final linear
/// projection. The final projection is the "last layer" that stays trainable
/// while the body is frozen.
///
/// Parameters: enc.h<i>.w / enc.h<i>.b (body), enc.out.w / enc.out.b.
class EncoderNet {
 public:
  static constexpr const char* kBodyPrefix = "enc.h";
  static constexpr const char* kLastLayerPrefix = "enc.out";

  explicit EncoderNet(const EncoderConfig& cfg);

  void InitParams(ParamSet& params, Rng& rng) const;

  /// `frames` stacks `items` equally long sequences row-wise
  /// ((items * T) x input_dim). Returns items x embedding_dim.
  Var Forward(Graph& g, ParamSet& params, Var frames, Eigen::Index items) const;

  /// Embedding of one feature matrix (T x input_dim). Throws ShapeError on a
  /// width mismatch.
  SpeakerEmbedding Encode(const ParamSet& params, const Matrix& frames) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
};

struct HeadConfig {
  int embedding_dim = 32;
  int hidden_dim = 64;
  int out_dim = 256;
};

/// Three affine layers with tanh between them; head.l0..head.l2.
class DinoHead {
 public:
  explicit DinoHead(const HeadConfig& cfg);
  void InitParams(ParamSet& params, Rng& rng) const;
  Var Forward(Graph& g, ParamSet& params, Var embeddings) const;
  const HeadConfig& config() const { return cfg_; }

 private:
  HeadConfig cfg_;
};

struct DinoConfig {
  double teacher_temp = 0.04;
  double student_temp = 0.1;
  /// Use student_temp for the teacher as well (one temperature).
  bool single_temperature = false;
  double teacher_momentum = 0.996;
  double center_momentum = 0.9;
  int out_dim = 256;
  /// Average the x_a1->x_a2 term with the x_a2->x_a1 term.
  bool symmetrize = false;

  double TeacherTemp() const {
    return single_temperature ? student_temp : teacher_temp;
  }
};

/// Teacher parameters (an EMA of the student encoder + head) and the center.
struct DinoState {
  DinoConfig config;
  ParamSet teacher;
  RowVector center;

  /// Throws ConfigError on non-positive temperatures, momenta outside [0,1],
  /// or a non-finite center.
  void Validate() const;
};

DinoState MakeDinoState(const DinoConfig& cfg, const ParamSet& student);

/// Row-wise softmax((teacher - C) / tau_t), treated as a constant.
Tensor TeacherProbabilities(const Tensor& teacher_logits, const DinoState& state);

/// Mean over rows of -sum_i p_t,i log softmax(student / tau_s)_i. Gradients
/// reach only `student_logits`; `teacher_logits` passes through StopGradient.
Var DinoLoss(Var teacher_logits, Var student_logits, const DinoState& state);

/// Mean entropy of the teacher distributions; a collapse diagnostic.
double TeacherEntropy(const Tensor& teacher_logits, const DinoState& state);

/// C <- m C + (1 - m) mean_rows(batch_teacher_logits).
void UpdateCenter(DinoState& state, const Tensor& batch_teacher_logits);

/// teacher <- m teacher + (1 - m) student, over every parameter.
void UpdateTeacher(DinoState& state, const ParamSet& student);

/// Additive angular margin softmax. Embedding rows and class-weight rows are
/// L2-normalized; the true-class logit is scale * cos(theta + margin), other
/// logits scale * cos(theta). Mean cross-entropy over the batch.
Var AamSoftmaxLoss(Var embeddings, const std::vector<int>& labels,
                   Var class_weights, double margin, double scale);

/// Initializes an out x in weight with N(0, 1/in) entries and a zero bias.
void AddLinear(ParamSet& params, const std::string& name, int in, int out,
               Rng& rng, bool trainable = true);
Var ApplyLinear(Graph& g, ParamSet& params, const std::string& name, Var x);

}  // namespace spkd::speaker

#endif  // SPKD_SPEAKER_HPP_
