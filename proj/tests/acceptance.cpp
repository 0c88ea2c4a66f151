// tests/acceptance.cpp

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

// Acceptance suite: one PASS/FAIL line per criterion.
//
//   spkd_acceptance            run every criterion
//   spkd_acceptance 3 6 10     run a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spkd/audio.hpp"
#include "spkd/errors.hpp"
#include "spkd/eval.hpp"
#include "spkd/grad.hpp"
#include "spkd/speaker.hpp"
#include "spkd/trainer.hpp"
#include "spkd/units.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace spkd;
using spkd::testing::RandomMatrix;
using trainer::TrainConfig;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double Median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string List(const std::vector<double>& v, const char* f = "%.4f") {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + Fmt(f, v[i]);
  return s + "]";
}

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared data: the training corpus, its front end and the evaluation corpus,
// all derived from the default config exactly as datagen/fit-units do.
struct World {
  TrainConfig base;
  audio::Corpus train;
  audio::Corpus evalc;
  trainer::FrontEnd fe;
  audio::NoiseBank bank;
};

const World& GetWorld() {
  static std::optional<World> w;
  if (!w) {
    TrainConfig base;
    audio::Corpus train = audio::SynthCorpus(base.TrainCorpusSpec());
    audio::Corpus evalc = audio::SynthCorpus(base.EvalCorpusSpec());
    audio::QuantizeToPcm16(train);  // as stored on disk
    audio::QuantizeToPcm16(evalc);
    trainer::FrontEnd fe = trainer::FitFrontEnd(base, train);
    audio::NoiseBank bank = trainer::TrainingNoiseBank(base, train);
    w.emplace(World{base, std::move(train), std::move(evalc), std::move(fe), std::move(bank)});
  }
  return *w;
}

// Trains `cfg` on the shared corpus up to `stop_at` (-1: full schedule).
trainer::LoadedRun Train(const TrainConfig& cfg, std::int64_t stop_at = -1,
                         const std::function<void(const trainer::StepMetrics&)>& on_step = {}) {
  const World& w = GetWorld();
  int n_classes = 0;
  trainer::SpeakerLabelMap(w.train, &n_classes);
  if (cfg.speaker_loss != trainer::SpeakerLoss::kAamSoftmax) n_classes = 0;
  const trainer::Model model(cfg, n_classes);
  trainer::RunState state = trainer::InitRunState(cfg, model);
  // The noise bank depends on cfg.seed.
  const audio::NoiseBank bank = trainer::TrainingNoiseBank(cfg, w.train);
  trainer::ScheduleOptions opts;
  opts.stop_at = stop_at;
  opts.on_step = on_step;
  trainer::RunSchedule(state, cfg, model, w.fe, w.train, bank, opts);
  return trainer::LoadedRun{cfg, w.fe, std::move(state), n_classes};
}

double Metric(const eval::MetricList& m, const std::string& key) {
  for (const auto& [k, v] : m) {
    if (k == key) return v;
  }
  throw std::runtime_error("missing metric " + key);
}

// Shortened two-stage schedule used by the direction-of-effect runs.
TrainConfig ShortRun(std::uint64_t seed) {
  TrainConfig c = GetWorld().base;
  c.seed = seed;
  c.stage1_steps = 100;
  c.stage2_steps = 400;
  return c;
}

// Evaluation results of the short DINO+aug runs, shared by 7 and 8.
const std::vector<eval::MetricList>& DinoAugRuns() {
  static std::vector<eval::MetricList> runs;
  if (runs.empty()) {
    for (std::uint64_t s = 1; s <= 3; ++s) {
      runs.push_back(eval::EvaluateRun(Train(ShortRun(s)), GetWorld().evalc));
    }
  }
  return runs;
}

// 1 ----------------------------------------------------------------------------

Outcome GradientCorrectness() {
  const auto t0 = std::chrono::steady_clock::now();
  const trainer::GradCheckReport r = trainer::RunGradCheckSuite(100, 1);
  const double secs = Seconds(t0);
  std::string worst;
  double wv = -1.0;
  bool joint_dino = false, joint_aam = false;
  for (const auto& c : r.cases) {
    if (c.max_rel_error > wv) wv = c.max_rel_error, worst = c.name;
    joint_dino |= c.name == "JointDino";
    joint_aam |= c.name == "JointAamSoftmax";
  }
  Outcome o;
  o.pass = r.max_rel_error < 1e-4 && r.configurations >= 100 && joint_dino && joint_aam &&
           secs < 120.0;
  o.detail = "max rel error " + Fmt("%.3g", r.max_rel_error) + " (" + worst + ") over " +
             std::to_string(r.checks) + " checks, " + std::to_string(r.configurations) +
             " configurations, " + std::to_string(r.cases.size()) + " op kinds; " +
             Fmt("%.1f", secs) + " s";
  return o;
}

// 2 ----------------------------------------------------------------------------

Outcome DinoMechanics() {
  // Direct evaluation of the loss on random inputs.
  double worst_loss = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(StreamSeed({static_cast<std::uint64_t>(trial), 0xacc2}));
    const int k = 2 + static_cast<int>(rng.Index(63));
    const int n = 1 + static_cast<int>(rng.Index(8));
    speaker::DinoConfig dc;
    dc.out_dim = k;
    dc.teacher_temp = rng.Uniform(0.02, 0.5);
    dc.student_temp = rng.Uniform(0.05, 1.0);
    speaker::DinoState st = speaker::MakeDinoState(dc, grad::ParamSet{});
    st.center = RandomMatrix(1, k, rng);
    const Matrix t = RandomMatrix(n, k, rng, 2.0), s = RandomMatrix(n, k, rng, 2.0);
    grad::Graph g;
    const double got = speaker::DinoLoss(g.Constant(t), g.Constant(s), st).scalar();
    const double want = spkd::testing::OracleDino(t, s, st.center, dc.teacher_temp, dc.student_temp);
    worst_loss = std::max(worst_loss, std::abs(got - want));
  }

  // Full training steps: no gradient reaches the teacher, and the teacher and
  // center follow the closed-form EMA.
  TrainConfig cfg = GetWorld().base;
  cfg.stage1_steps = 1;  // cover a stage-1 and a stage-2 step
  cfg.stage2_steps = 2;
  const World& w = GetWorld();
  const trainer::Model model(cfg, 0);
  trainer::RunState state = trainer::InitRunState(cfg, model);
  const std::vector<int> labels = trainer::SpeakerLabelMap(w.train, nullptr);
  bool teacher_grad_zero = true, teacher_exact = true;
  for (std::int64_t step = 0; step < 3; ++step) {
    const trainer::AlignedBatch b = trainer::AssembleBatch(w.train, w.bank, cfg, w.fe, step);
    {
      grad::Graph g;
      state.student.ZeroGrad();
      state.dino->teacher.ZeroGrad();
      g.Backward(trainer::JointObjective(g, state, b, cfg, model, labels));
      for (const auto& p : state.dino->teacher.params()) teacher_grad_zero &= p.grad.isZero();
    }
    const grad::ParamSet before = state.dino->teacher;
    trainer::TrainStep(state, b, cfg, model, labels);
    const double m = cfg.teacher_momentum;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const Matrix& old = before.params()[i].value;
      const Matrix& stu = state.student.params()[i].value;
      const Matrix& now = state.dino->teacher.params()[i].value;
      for (Eigen::Index j = 0; j < old.size(); ++j) {
        teacher_exact &= now.data()[j] == m * old.data()[j] + (1.0 - m) * stu.data()[j];
      }
    }
  }

  // Center EMA on exactly representable batches (means are exact in any
  // summation order).
  bool center_exact = true;
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(StreamSeed({static_cast<std::uint64_t>(trial), 0xacc3}));
    speaker::DinoConfig dc;
    dc.out_dim = 5;
    dc.center_momentum = rng.Uniform();
    speaker::DinoState st = speaker::MakeDinoState(dc, grad::ParamSet{});
    st.center = RandomMatrix(1, 5, rng);
    Matrix batch(4, 5);
    for (Eigen::Index j = 0; j < batch.size(); ++j) {
      batch.data()[j] = static_cast<double>(static_cast<int>(rng.Index(64)) - 32) / 8.0;
    }
    const RowVector old = st.center;
    speaker::UpdateCenter(st, batch);
    for (Eigen::Index j = 0; j < 5; ++j) {
      const double mean = (batch(0, j) + batch(1, j) + batch(2, j) + batch(3, j)) / 4.0;
      center_exact &= st.center(j) ==
                      dc.center_momentum * old(j) + (1.0 - dc.center_momentum) * mean;
    }
  }

  Outcome o;
  o.pass = worst_loss < 1e-10 && teacher_grad_zero && teacher_exact && center_exact;
  o.detail = "max |loss - direct| " + Fmt("%.2g", worst_loss) + " over 50 inputs; teacher grad " +
             (teacher_grad_zero ? "zero" : "NONZERO") + "; teacher EMA " +
             (teacher_exact ? "exact" : "MISMATCH") + "; center EMA " +
             (center_exact ? "exact" : "MISMATCH");
  return o;
}

// 3 ----------------------------------------------------------------------------

Outcome SnrFidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng(StreamSeed({static_cast<std::uint64_t>(trial), 0xacc3}));
    const std::size_t n = 400 + rng.Index(16000);
    const std::size_t m = 100 + rng.Index(16000);
    audio::Waveform s = spkd::testing::RandomWave(n, rng, std::exp(rng.Uniform(-5.0, 0.0)));
    audio::Waveform z = spkd::testing::RandomWave(m, rng, std::exp(rng.Uniform(-5.0, 0.0)));
    if (rng.Bernoulli(0.5)) z = audio::PinkNoise(m, 16000, rng);
    const double snr = rng.Uniform(-10.0, 30.0);
    const audio::Waveform mix = audio::MixAtSnr(s, z, snr);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = mix.samples[i] - s.samples[i];
    worst = std::max(worst, std::abs(spkd::testing::PowerRatioDb(s.samples, resid) - snr));
  }
  const double secs = Seconds(t0);
  return {worst <= 0.1 && secs < 10.0,
          "max |achieved - requested| " + Fmt("%.3g", worst) + " dB over 1000 triples; " +
              Fmt("%.2f", secs) + " s"};
}

// 4 ----------------------------------------------------------------------------

Outcome UnitPipeline() {
  int monotone = 0;
  for (int inst = 0; inst < 100; ++inst) {
    Rng rng(StreamSeed({static_cast<std::uint64_t>(inst), 0xacc4}));
    const int n = 30 + static_cast<int>(rng.Index(300));
    const int k = 1 + static_cast<int>(rng.Index(12));
    const Matrix x = RandomMatrix(n, 1 + static_cast<int>(rng.Index(8)), rng);
    const units::Codebook cb = units::KMeansFit(x, k, 50, static_cast<std::uint64_t>(inst));
    bool ok = !cb.inertia_history.empty();
    for (std::size_t i = 1; i < cb.inertia_history.size(); ++i) {
      ok &= cb.inertia_history[i] <= cb.inertia_history[i - 1];
    }
    monotone += ok;
  }

  Rng rng(0xacc4);
  units::Codebook cb;
  cb.centroids = RandomMatrix(64, 20, rng);
  const Matrix frames = RandomMatrix(1000, 20, rng, 1.3);
  const std::vector<int> q = units::Quantize(frames, cb);
  int agree = 0;
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < cb.centroids.rows(); ++c) {
      const double d = (frames.row(i) - cb.centroids.row(c)).squaredNorm();
      if (d < bd) bd = d, best = static_cast<int>(c);
    }
    agree += q[i] == best;
  }

  int props = 0;
  const int cases = 1000;
  for (int t = 0; t < cases; ++t) {
    Rng r(StreamSeed({static_cast<std::uint64_t>(t), 0xacc5}));
    std::vector<int> raw(r.Index(60));
    for (int& v : raw) v = static_cast<int>(r.Index(1 + t % 6));
    const std::vector<int> d = units::DedupRuns(raw).units;
    bool ok = units::DedupRuns(d).units == d && d.size() <= raw.size();
    // Order preservation: d is raw with runs collapsed, in order.
    std::vector<int> expect;
    for (int v : raw) {
      if (expect.empty() || expect.back() != v) expect.push_back(v);
    }
    ok &= d == expect;
    props += ok;
  }

  return {monotone == 100 && agree == 1000 && props == cases,
          "inertia non-increasing " + std::to_string(monotone) + "/100; quantize = brute force " +
              std::to_string(agree) + "/1000; dedup properties " + std::to_string(props) + "/" +
              std::to_string(cases)};
}

// 5 ----------------------------------------------------------------------------

Outcome FreezeContract() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainConfig cfg = GetWorld().base;  // stage 1 = 500 steps
  const trainer::Model model(cfg, 0);
  const trainer::RunState init = trainer::InitRunState(cfg, model);
  const trainer::LoadedRun run = Train(cfg, cfg.stage1_steps);
  int body = 0, body_same = 0;
  bool last_changed = false;
  for (const auto& p : init.student.params()) {
    const Matrix& now = run.state.student.Get(p.name).value;
    if (p.name.rfind(speaker::EncoderNet::kBodyPrefix, 0) == 0) {
      ++body;
      body_same += now == p.value;
    } else if (p.name.rfind(speaker::EncoderNet::kLastLayerPrefix, 0) == 0) {
      last_changed |= now != p.value;
    }
  }
  const double secs = Seconds(t0);
  return {run.state.step == 500 && body > 0 && body_same == body && last_changed && secs < 300.0,
          std::to_string(run.state.step) + " stage-1 steps; body tensors bit-identical " +
              std::to_string(body_same) + "/" + std::to_string(body) + "; last layer " +
              (last_changed ? "changed" : "UNCHANGED") + "; " + Fmt("%.1f", secs) + " s"};
}

// 6 ----------------------------------------------------------------------------

Outcome Separability() {
  const auto t0 = std::chrono::steady_clock::now();
  const World& w = GetWorld();
  audio::CorpusSpec spec = w.base.EvalCorpusSpec();
  spec.n_speakers = 16;
  spec.utterances_per_speaker = 13;
  audio::Corpus c = audio::SynthCorpus(spec);
  audio::QuantizeToPcm16(c);
  const auto records = eval::BuildSeparabilitySet(c, w.fe, 0.0, w.base.eval_seed);
  int clean = 0, noisy = 0;
  for (const auto& r : records) (r.condition == "clean" ? clean : noisy)++;
  const auto results = eval::LeaveOneConditionOut(records, w.fe.codebook.K());
  double min_f = 1.0;
  std::string per;
  for (const auto& r : results) {
    min_f = std::min(min_f, r.f_score);
    per += " " + r.held_out + "=" + Fmt("%.3f", r.f_score) + "(P" + Fmt("%.2f", r.precision) +
           "/R" + Fmt("%.2f", r.recall) + ")";
  }
  const double secs = Seconds(t0);
  return {clean >= 200 && noisy >= 200 && min_f >= 0.9 && secs < 300.0,
          std::to_string(clean) + " clean / " + std::to_string(noisy) +
              " noisy records at 0 dB; held-out F:" + per + "; min " + Fmt("%.3f", min_f) +
              " (need >= 0.9); " + Fmt("%.1f", secs) + " s"};
}

// 7 ----------------------------------------------------------------------------

Outcome ProbeDirection() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> joint, frozen;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    joint.push_back(Metric(DinoAugRuns()[s - 1], "probe_style_acc"));
    // Reconstruction only, encoder body frozen for the whole run.
    TrainConfig b = ShortRun(s);
    b.speaker_loss = trainer::SpeakerLoss::kNone;
    b.stage1_steps = b.TotalSteps();
    b.stage2_steps = 0;
    frozen.push_back(Metric(eval::EvaluateRun(Train(b), GetWorld().evalc), "probe_style_acc"));
  }
  const double secs = Seconds(t0);
  const double margin = Median3(joint) - Median3(frozen);
  return {margin > 0.0 && secs < 1800.0,
          "style probe joint " + List(joint) + " median " + Fmt("%.4f", Median3(joint)) +
              " vs frozen-body recon " + List(frozen) + " median " +
              Fmt("%.4f", Median3(frozen)) + "; margin " + Fmt("%+.4f", margin) + "; " +
              Fmt("%.0f", secs) + " s"};
}

// 8 ----------------------------------------------------------------------------

Outcome AblationDirection() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail;
  for (auto mode : {trainer::SpeakerLoss::kDino, trainer::SpeakerLoss::kAamSoftmax}) {
    std::vector<double> on, off;
    for (std::uint64_t s = 1; s <= 3; ++s) {
      TrainConfig c = ShortRun(s);
      c.speaker_loss = mode;
      if (mode == trainer::SpeakerLoss::kDino) {
        on.push_back(Metric(DinoAugRuns()[s - 1], "sim_gap"));
      } else {
        on.push_back(Metric(eval::EvaluateRun(Train(c), GetWorld().evalc), "sim_gap"));
      }
      c.augment = false;
      off.push_back(Metric(eval::EvaluateRun(Train(c), GetWorld().evalc), "sim_gap"));
    }
    const bool ok = Median3(on) > Median3(off);
    pass &= ok;
    detail += std::string(mode == trainer::SpeakerLoss::kDino ? "dino" : "aam") + " gap on " +
              List(on) + " > off " + List(off) + (ok ? " ok; " : " VIOLATED; ");
  }
  const double secs = Seconds(t0);
  return {pass && secs < 2700.0, detail + Fmt("%.0f", secs) + " s"};
}

// 9 ----------------------------------------------------------------------------

bool SameParams(const grad::ParamSet& a, const grad::ParamSet& b) {
  if (!a.SameSchema(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.params()[i].value != b.params()[i].value) return false;
  }
  return true;
}

bool SameAdam(const grad::AdamState& a, const grad::AdamState& b) {
  if (a.slots.size() != b.slots.size()) return false;
  for (std::size_t i = 0; i < a.slots.size(); ++i) {
    if (a.slots[i].m != b.slots[i].m || a.slots[i].v != b.slots[i].v ||
        a.slots[i].steps != b.slots[i].steps) {
      return false;
    }
  }
  return true;
}

Outcome TrainingSanity() {
  std::vector<double> at50, at2000;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    TrainConfig c = GetWorld().base;
    c.seed = s;
    Train(c, 2001, [&](const trainer::StepMetrics& m) {
      if (m.step == 50) at50.push_back(m.loss_total);
      if (m.step == 2000) at2000.push_back(m.loss_total);
    });
  }
  const bool decreased = Median3(at2000) < Median3(at50);

  // Resume across the stage boundary against an uninterrupted run.
  TrainConfig c = GetWorld().base;
  c.stage1_steps = 20;
  c.stage2_steps = 20;
  const World& w = GetWorld();
  const trainer::Model model(c, 0);
  std::vector<std::string> full_rows, resumed_rows;
  trainer::RunState full = trainer::InitRunState(c, model);
  trainer::ScheduleOptions o;
  o.on_step = [&](const trainer::StepMetrics& m) { full_rows.push_back(trainer::FormatMetricsRow(m)); };
  trainer::RunSchedule(full, c, model, w.fe, w.train, w.bank, o);

  trainer::RunState part = trainer::InitRunState(c, model);
  o.on_step = [&](const trainer::StepMetrics& m) { resumed_rows.push_back(trainer::FormatMetricsRow(m)); };
  o.stop_at = 13;
  trainer::RunSchedule(part, c, model, w.fe, w.train, w.bank, o);
  const std::string bytes = trainer::MakeCheckpoint(part, c, w.fe).Serialize();
  trainer::LoadedRun back = trainer::RestoreCheckpoint(grad::Archive::Deserialize(bytes));
  o.stop_at = -1;
  trainer::RunSchedule(back.state, back.config, model, back.front_end, w.train, w.bank, o);
  const bool bitwise = SameParams(full.student, back.state.student) &&
                       SameParams(full.synth, back.state.synth) &&
                       SameParams(full.dino->teacher, back.state.dino->teacher) &&
                       full.dino->center == back.state.dino->center &&
                       SameAdam(full.adam_student, back.state.adam_student) &&
                       SameAdam(full.adam_synth, back.state.adam_synth) &&
                       full_rows == resumed_rows;

  return {decreased && bitwise,
          "loss_total step 50 " + List(at50) + " median " + Fmt("%.4f", Median3(at50)) +
              ", step 2000 " + List(at2000) + " median " + Fmt("%.4f", Median3(at2000)) +
              "; resume at 13 of 40 " + (bitwise ? "bitwise identical" : "DIVERGED")};
}

// 10 ---------------------------------------------------------------------------

int Cli(const std::string& args) {
  const std::string cmd = "'" SPKD_CLI_PATH "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome Determinism() {
  const fs::path root = fs::temp_directory_path() / "spkd_acceptance_det";
  fs::remove_all(root);
  std::vector<std::string> metrics, evals;
  bool ran = true;
  for (const char* rep : {"a", "b"}) {
    const std::string d = (root / rep).string();
    ran &= Cli("datagen --seed 1 --out '" + d + "/data'") == 0;
    ran &= Cli("fit-units --seed 1 --corpus '" + d + "/data/train' --out '" + d + "/units'") == 0;
    ran &= Cli("train --seed 1 --stage1-steps 50 --stage2-steps 150 --corpus '" + d +
               "/data/train' --units '" + d + "/units' --out '" + d + "/run'") == 0;
    ran &= Cli("eval --run '" + d + "/run' --corpus '" + d + "/data/eval'") == 0;
    metrics.push_back(spkd::testing::ReadBytes(root / rep / "run" / "metrics.csv"));
    evals.push_back(spkd::testing::ReadBytes(root / rep / "run" / "eval.csv"));
  }
  int rows = -1;
  for (char ch : metrics[0]) rows += ch == '\n';
  const bool same = ran && !metrics[0].empty() && metrics[0] == metrics[1] &&
                    !evals[0].empty() && evals[0] == evals[1];
  Outcome o{same && rows == 200,
            std::string("two datagen -> fit-units -> train(200) -> eval pipelines: ") +
                (ran ? "all exit 0" : "A STAGE FAILED") + "; metrics.csv " +
                std::to_string(rows) + " rows " + (metrics[0] == metrics[1] ? "identical" : "DIFFER") +
                "; eval.csv " + (evals[0] == evals[1] ? "identical" : "DIFFER")};
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", GradientCorrectness},
      {"DINO mechanics", DinoMechanics},
      {"SNR fidelity", SnrFidelity},
      {"unit pipeline", UnitPipeline},
      {"freeze contract", FreezeContract},
      {"noise separability", Separability},
      {"style probe direction", ProbeDirection},
      {"augmentation ablation direction", AblationDirection},
      {"training sanity and resume", TrainingSanity},
      {"pipeline determinism", Determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
