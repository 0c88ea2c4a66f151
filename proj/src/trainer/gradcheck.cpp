// src/trainer/gradcheck.cpp

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

#include "spkd/errors.hpp"
#include "spkd/trainer.hpp"

namespace spkd::trainer {

namespace {

using grad::Graph;
using grad::ParamSet;
using grad::Tensor;
using grad::Var;

using OpFn = std::function<Var(Graph&, ParamSet&)>;

Tensor Uniform(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Tensor t(r, c);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.Uniform(lo, hi);
  return t;
}

// Values bounded away from zero, for ops with a kink there.
Tensor AwayFromZero(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Tensor t = Uniform(rng, r, c, 0.1, 1.0);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (rng.Bernoulli(0.5)) t.data()[i] = -t.data()[i];
  }
  return t;
}

class Suite {
 public:
  Suite(Rng& rng, double h, double joint_h) : rng_(rng), h_(h), joint_h_(joint_h) {}

  // Checks sum(op(params) .* R) for a fixed random R.
  void Check(const std::string& name, ParamSet& ps, const OpFn& op) {
    Tensor r;
    {
      Graph g;
      const Tensor& out = op(g, ps).value();
      r = Uniform(rng_, out.rows(), out.cols(), -1.0, 1.0);
    }
    const double err = grad::GradCheck(
        [&](Graph& g) { return grad::Sum(grad::Mul(op(g, ps), g.Constant(r))); },
        {&ps}, h_);
    Record(name, err);
  }

  void CheckScalar(const std::string& name, std::vector<ParamSet*> sets,
                   const std::function<Var(Graph&)>& fn) {
    Record(name, grad::GradCheck(fn, sets, joint_h_, 4));
  }

  GradCheckReport& report() { return report_; }

 private:
  void Record(const std::string& name, double err) {
    ++report_.checks;
    double& worst = worst_[name];
    worst = std::max(worst, err);
    report_.max_rel_error = std::max(report_.max_rel_error, err);
    report_.cases.clear();
    for (const auto& [n, e] : worst_) report_.cases.push_back({n, e});
  }

  Rng& rng_;
  double h_;
  double joint_h_;
  std::map<std::string, double> worst_;
  GradCheckReport report_;
};

Var P(Graph& g, ParamSet& ps, const char* name) { return g.Parameter(ps.Get(name)); }

void CheckPrimitives(Suite& s, Rng& rng) {
  auto dim = [&] { return static_cast<Eigen::Index>(1 + rng.Index(4)); };
  const Eigen::Index n = dim(), k = dim(), m = dim();
  auto u = [&](Eigen::Index r, Eigen::Index c) { return Uniform(rng, r, c, -1.0, 1.0); };

  {
    ParamSet ps;
    ps.Add("a", u(n, k));
    ps.Add("b", u(k, m));
    s.Check("MatMul", ps, [](Graph& g, ParamSet& p) { return grad::MatMul(P(g, p, "a"), P(g, p, "b")); });
  }
  {
    ParamSet ps;
    ps.Add("a", u(n, k));
    ps.Add("b", u(m, k));
    s.Check("MatMulTransposed", ps, [](Graph& g, ParamSet& p) {
      return grad::MatMulTransposed(P(g, p, "a"), P(g, p, "b"));
    });
  }
  {
    ParamSet ps;
    ps.Add("x", u(n, k));
    ps.Add("w", u(m, k));
    ps.Add("b", u(1, m));
    s.Check("Linear", ps, [](Graph& g, ParamSet& p) {
      return grad::Linear(P(g, p, "x"), P(g, p, "w"), P(g, p, "b"));
    });
  }
  {
    ParamSet ps;
    ps.Add("x", u(n, k));
    ps.Add("r", u(1, k));
    s.Check("AddRow", ps, [](Graph& g, ParamSet& p) { return grad::AddRow(P(g, p, "x"), P(g, p, "r")); });
  }
  {
    ParamSet ps;
    ps.Add("a", u(n, k));
    ps.Add("b", u(n, k));
    s.Check("Add", ps, [](Graph& g, ParamSet& p) { return grad::Add(P(g, p, "a"), P(g, p, "b")); });
    s.Check("Sub", ps, [](Graph& g, ParamSet& p) { return grad::Sub(P(g, p, "a"), P(g, p, "b")); });
    s.Check("Mul", ps, [](Graph& g, ParamSet& p) { return grad::Mul(P(g, p, "a"), P(g, p, "b")); });
    s.Check("Mse", ps, [](Graph& g, ParamSet& p) { return grad::Mse(P(g, p, "a"), P(g, p, "b")); });
    s.Check("ConcatCols", ps, [](Graph& g, ParamSet& p) {
      return grad::ConcatCols(P(g, p, "a"), P(g, p, "b"));
    });
  }
  {
    ParamSet ps;
    ps.Add("x", u(n, k));
    const double c = rng.Uniform(-2.0, 2.0);
    s.Check("Scale", ps, [c](Graph& g, ParamSet& p) { return grad::Scale(P(g, p, "x"), c); });
    s.Check("Tanh", ps, [](Graph& g, ParamSet& p) { return grad::Tanh(P(g, p, "x")); });
    s.Check("Exp", ps, [](Graph& g, ParamSet& p) { return grad::Exp(P(g, p, "x")); });
    s.Check("SoftmaxRows", ps, [](Graph& g, ParamSet& p) { return grad::SoftmaxRows(P(g, p, "x")); });
    s.Check("LogSoftmaxRows", ps, [](Graph& g, ParamSet& p) { return grad::LogSoftmaxRows(P(g, p, "x")); });
    s.Check("Sum", ps, [](Graph& g, ParamSet& p) { return grad::Sum(P(g, p, "x")); });
    s.Check("Mean", ps, [](Graph& g, ParamSet& p) { return grad::Mean(P(g, p, "x")); });
    s.Check("MeanRows", ps, [](Graph& g, ParamSet& p) { return grad::MeanRows(P(g, p, "x")); });
    const Eigen::Index start = static_cast<Eigen::Index>(rng.Index(static_cast<std::uint64_t>(k)));
    const Eigen::Index count = 1 + static_cast<Eigen::Index>(rng.Index(static_cast<std::uint64_t>(k - start)));
    s.Check("SliceCols", ps, [=](Graph& g, ParamSet& p) { return grad::SliceCols(P(g, p, "x"), start, count); });
    const Eigen::Index rs = static_cast<Eigen::Index>(rng.Index(static_cast<std::uint64_t>(n)));
    const Eigen::Index rc = 1 + static_cast<Eigen::Index>(rng.Index(static_cast<std::uint64_t>(n - rs)));
    s.Check("SliceRows", ps, [=](Graph& g, ParamSet& p) { return grad::SliceRows(P(g, p, "x"), rs, rc); });
    const Eigen::Index times = dim();
    s.Check("RepeatRows", ps, [=](Graph& g, ParamSet& p) { return grad::RepeatRows(P(g, p, "x"), times); });
    std::vector<int> ids(static_cast<std::size_t>(dim() + 1));
    for (int& i : ids) i = static_cast<int>(rng.Index(static_cast<std::uint64_t>(n)));
    s.Check("GatherRows", ps, [ids](Graph& g, ParamSet& p) { return grad::GatherRows(P(g, p, "x"), ids); });
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int& l : labels) l = static_cast<int>(rng.Index(static_cast<std::uint64_t>(k)));
    s.Check("Pick", ps, [labels](Graph& g, ParamSet& p) { return grad::Pick(P(g, p, "x"), labels); });
  }
  {
    ParamSet ps;
    ps.Add("x", AwayFromZero(rng, n, k));
    s.Check("Relu", ps, [](Graph& g, ParamSet& p) { return grad::Relu(P(g, p, "x")); });
  }
  {
    // A one-wide row normalizes to the constant +-1; nothing to check there.
    ParamSet ps;
    ps.Add("x", AwayFromZero(rng, n, std::max<Eigen::Index>(k, 2)));
    s.Check("L2NormalizeRows", ps, [](Graph& g, ParamSet& p) { return grad::L2NormalizeRows(P(g, p, "x")); });
  }
  {
    const Eigen::Index segments = dim();
    ParamSet ps;
    ps.Add("x", u(segments * dim(), k));
    s.Check("SegmentMean", ps, [=](Graph& g, ParamSet& p) { return grad::SegmentMean(P(g, p, "x"), segments); });
  }
  {
    ParamSet ps;
    ps.Add("p", Uniform(rng, n, k, 0.05, 1.0));
    ps.Add("q", u(n, k));
    s.Check("CrossEntropyFromProbs", ps, [](Graph& g, ParamSet& p) {
      return grad::CrossEntropyFromProbs(P(g, p, "p"), grad::LogSoftmaxRows(P(g, p, "q")));
    });
  }
  {
    ParamSet ps;
    ps.Add("mu1", u(n, k));
    ps.Add("ls1", u(n, k));
    ps.Add("mu2", u(n, k));
    ps.Add("ls2", u(n, k));
    s.Check("DiagGaussianKl", ps, [](Graph& g, ParamSet& p) {
      return grad::DiagGaussianKl(P(g, p, "mu1"), P(g, p, "ls1"), P(g, p, "mu2"), P(g, p, "ls2"));
    });
  }
  {
    ParamSet ps;
    ps.Add("c", Uniform(rng, n, k, -0.8, 0.8));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int& l : labels) l = static_cast<int>(rng.Index(static_cast<std::uint64_t>(k)));
    const double margin = rng.Uniform(0.05, 0.5);
    s.Check("AngularMargin", ps, [=](Graph& g, ParamSet& p) {
      return grad::AngularMargin(P(g, p, "c"), labels, margin);
    });
  }
}

TrainConfig TinyConfig(SpeakerLoss mode, Rng& rng) {
  TrainConfig cfg;
  cfg.speaker_loss = mode;
  cfg.stage1_steps = 0;  // body trainable
  cfg.stage2_steps = 10;
  cfg.beta_warmup_fraction = 0.0;
  cfg.beta = rng.Uniform(0.5, 1.5);
  cfg.lambda = rng.Uniform(0.5, 1.5);
  cfg.n_bands = 3;
  cfg.n_units = 4;
  cfg.enc_hidden_dim = 4;
  cfg.enc_hidden_layers = 1 + static_cast<int>(rng.Index(2));
  cfg.embedding_dim = 3;
  cfg.dino_hidden_dim = 4;
  cfg.dino_out_dim = 5;
  cfg.unit_dim = 2;
  cfg.latent_dim = 2;
  cfg.synth_hidden_dim = 4;
  cfg.symmetrize = rng.Bernoulli(0.5);
  // A scale of 30 saturates the softmax of a random tiny batch; the resulting
  // 1e-9 gradients sit below central-difference roundoff. Scale is a plain
  // multiplier, so moderate values exercise the same derivative code.
  cfg.aam_scale = std::exp(rng.Uniform(0.0, std::log(8.0)));
  cfg.aam_margin = rng.Uniform(0.1, 0.5);
  cfg.seed = rng.NextU64();
  return cfg;
}

void CheckJoint(Suite& s, Rng& rng, SpeakerLoss mode) {
  TrainConfig cfg = TinyConfig(mode, rng);
  const int n_classes = 3;
  const Model model(cfg, n_classes);
  RunState state = InitRunState(cfg, model);
  if (state.dino) {
    for (Eigen::Index i = 0; i < state.dino->center.size(); ++i) {
      state.dino->center(i) = rng.Uniform(-0.5, 0.5);
    }
    // A teacher that differs from the student.
    for (grad::Param& p : state.dino->teacher.params()) {
      p.value += Uniform(rng, p.value.rows(), p.value.cols(), -0.1, 0.1);
    }
  }
  AlignedBatch batch;
  batch.step = static_cast<std::int64_t>(rng.Index(10));
  const int items = 2 + static_cast<int>(rng.Index(2));
  const Eigen::Index frames = 2 + static_cast<Eigen::Index>(rng.Index(3));
  std::vector<int> labels;
  for (int i = 0; i < items; ++i) {
    AlignedItem it;
    it.record = static_cast<std::size_t>(i);
    it.target = Uniform(rng, frames, cfg.n_bands, -1.0, 1.0);
    it.reference = Uniform(rng, frames, cfg.n_bands, -1.0, 1.0);
    it.second_crop = Uniform(rng, frames, cfg.n_bands, -1.0, 1.0);
    for (Eigen::Index t = 0; t < frames; ++t) {
      it.units.push_back(static_cast<int>(rng.Index(cfg.n_units)));
    }
    labels.push_back(i % n_classes);
    batch.items.push_back(std::move(it));
  }
  s.CheckScalar(mode == SpeakerLoss::kDino ? "JointDino" : "JointAamSoftmax",
                {&state.student, &state.synth}, [&](Graph& g) {
                  return JointObjective(g, state, batch, cfg, model, labels);
                });
}

}  // namespace

GradCheckReport RunGradCheckSuite(int configurations, std::uint64_t seed, double h,
                                  double joint_h) {
  if (configurations < 1) throw ConfigError("need at least one configuration");
  Rng rng(StreamSeed({seed, 0x4743}));
  Suite suite(rng, h, joint_h);
  for (int c = 0; c < configurations; ++c) {
    CheckPrimitives(suite, rng);
    CheckJoint(suite, rng, SpeakerLoss::kDino);
    CheckJoint(suite, rng, SpeakerLoss::kAamSoftmax);
  }
  suite.report().configurations = configurations;
  return suite.report();
}

}  // namespace spkd::trainer
