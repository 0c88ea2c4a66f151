// src/trainer/schedule.cpp

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
#include "spkd/trainer.hpp"

namespace spkd::trainer {

namespace {

constexpr const char* kAamWeights = "aam.w";

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path CheckpointPath(const std::filesystem::path& dir,
                                     std::int64_t step) {
  char name[40];
  std::snprintf(name, sizeof name, "step_%08lld.ckpt", static_cast<long long>(step));
  return dir / "checkpoints" / name;
}

// Opens metrics.csv for a run starting at `step`: a fresh file with a header
// at step 0, otherwise the existing rows before `step` are kept so that a
// resumed run does not duplicate steps.
std::ofstream OpenMetrics(const std::filesystem::path& file, std::int64_t step) {
  std::vector<std::string> keep;
  if (step > 0) {
    std::ifstream in(file);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (line.empty()) continue;
      if (std::stoll(line.substr(0, line.find(','))) < step) keep.push_back(line);
    }
  }
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << kMetricsHeader << '\n';
  for (const std::string& l : keep) out << l << '\n';
  return out;
}

}  // namespace

std::string FormatMetricsRow(const StepMetrics& m) {
  std::ostringstream os;
  os << m.step << ',' << m.stage << ',' << Num(m.loss_total) << ','
     << Num(m.loss_recon) << ',' << Num(m.loss_kl) << ',' << Num(m.loss_speaker)
     << ',' << Num(m.teacher_entropy) << ',' << Num(m.grad_norm) << ',' << m.seed;
  return os.str();
}

grad::Archive MakeCheckpoint(const RunState& state, const TrainConfig& cfg,
                             const FrontEnd& fe) {
  grad::Archive a(cfg.checkpoint_value_bytes);
  a.PutText("config", cfg.ToJson());
  a.PutInt("step", state.step);
  // Every random draw is keyed by (seed, step), so the step is the cursor.
  a.PutInt("rng_cursor", state.step);
  a.PutInt("n_speaker_classes",
           state.student.Has(kAamWeights) ? state.student.Get(kAamWeights).value.rows() : 0);
  a.PutParams("student/", state.student);
  a.PutParams("synth/", state.synth);
  a.PutAdam("adam_student/", state.adam_student);
  a.PutAdam("adam_synth/", state.adam_synth);
  if (state.dino) {
    a.PutParams("teacher/", state.dino->teacher);
    a.PutTensor("dino/center", state.dino->center);
  }
  a.PutTensor("fe/codebook", fe.codebook.centroids);
  a.PutTensor("fe/norm_mean", fe.norm.mean);
  a.PutTensor("fe/norm_std", fe.norm.stddev);
  a.PutInt("fe/sample_rate", fe.filterbank.sample_rate());
  return a;
}

void SaveCheckpoint(const RunState& state, const TrainConfig& cfg,
                    const FrontEnd& fe, const std::filesystem::path& file) {
  std::error_code ec;
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
  MakeCheckpoint(state, cfg, fe).Save(file.string());
}

LoadedRun RestoreCheckpoint(const grad::Archive& a) {
  TrainConfig cfg = TrainConfig::FromJson(a.GetText("config"));
  cfg.Validate();
  const int n_classes = static_cast<int>(a.GetInt("n_speaker_classes"));
  const Model model(cfg, n_classes);
  RunState s = InitRunState(cfg, model);
  a.GetParams("student/", s.student);
  a.GetParams("synth/", s.synth);
  a.GetAdam("adam_student/", s.student, s.adam_student);
  a.GetAdam("adam_synth/", s.synth, s.adam_synth);
  if (s.dino) {
    a.GetParams("teacher/", s.dino->teacher);
    const grad::Tensor& c = a.GetTensor("dino/center");
    if (c.rows() != 1 || c.cols() != s.dino->center.size()) {
      throw FormatError("DINO center has the wrong shape");
    }
    s.dino->center = c.row(0);
    s.dino->Validate();
  }
  s.step = a.GetInt("step");
  if (a.GetInt("rng_cursor") != s.step) throw FormatError("rng cursor does not match step");
  ApplyStageFreeze(s, cfg);

  FrontEnd fe{audio::Filterbank(cfg.Filterbank(),
                                static_cast<int>(a.GetInt("fe/sample_rate"))),
              {a.GetTensor("fe/norm_mean").row(0), a.GetTensor("fe/norm_std").row(0)},
              {a.GetTensor("fe/codebook"), {}}};
  return LoadedRun{std::move(cfg), std::move(fe), std::move(s), n_classes};
}

LoadedRun LoadCheckpoint(const std::filesystem::path& file) {
  return RestoreCheckpoint(grad::Archive::Load(file.string()));
}

void RunSchedule(RunState& state, const TrainConfig& cfg, const Model& model,
                 const FrontEnd& fe, const audio::Corpus& corpus,
                 const audio::NoiseBank& bank, const ScheduleOptions& opts) {
  const std::vector<int> labels = SpeakerLabelMap(corpus, nullptr);
  const bool write = !opts.out_dir.empty();
  std::ofstream metrics;
  if (write) {
    std::filesystem::create_directories(opts.out_dir);
    metrics = OpenMetrics(opts.out_dir / "metrics.csv", state.step);
  }
  const std::int64_t end = opts.stop_at >= 0
                               ? std::min<std::int64_t>(opts.stop_at, cfg.TotalSteps())
                               : cfg.TotalSteps();
  while (state.step < end) {
    if (write && cfg.checkpoint_interval > 0 && state.step % cfg.checkpoint_interval == 0) {
      SaveCheckpoint(state, cfg, fe, CheckpointPath(opts.out_dir, state.step));
    }
    const AlignedBatch batch = AssembleBatch(corpus, bank, cfg, fe, state.step, opts.log);
    const StepMetrics m = TrainStep(state, batch, cfg, model, labels);
    if (write) metrics << FormatMetricsRow(m) << '\n' << std::flush;
    if (opts.on_step) opts.on_step(m);
    if (opts.log && (m.step % 100 == 0 || state.step == end)) {
      opts.log("step " + std::to_string(m.step) + " stage " + std::to_string(m.stage) +
               " total " + Num(m.loss_total) + " speaker " + Num(m.loss_speaker));
    }
  }
  if (write) {
    SaveCheckpoint(state, cfg, fe, CheckpointPath(opts.out_dir, state.step));
    SaveCheckpoint(state, cfg, fe, opts.out_dir / "final.ckpt");
  }
}

}  // namespace spkd::trainer
