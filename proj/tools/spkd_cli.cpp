// tools/spkd_cli.cpp

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

// spkd: corpus generation, codebook fitting, training, evaluation, gradient
// checking and reporting.
//
// Exit codes: 0 success, 1 invalid input (bad flags, config or manifest),
// 2 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "spkd/errors.hpp"
#include "spkd/eval.hpp"
#include "spkd/trainer.hpp"

namespace fs = std::filesystem;
using spkd::trainer::TrainConfig;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> augment;
  std::optional<int> stage1_steps;
  std::optional<int> stage2_steps;
  std::optional<double> lambda;
};

struct Common {
  Overrides ov;
  std::string out;
  bool verbose = false;
};

void AddConfigFlags(CLI::App* cmd, Common& c, bool training_flags) {
  cmd->add_option("--config", c.ov.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.ov.seed, "seed override");
  cmd->add_flag("-v,--verbose", c.verbose, "progress on standard error");
  if (!training_flags) return;
  cmd->add_option("--mode", c.ov.mode, "speaker loss")
      ->check(CLI::IsMember({"dino", "aam", "aam_softmax", "none"}));
  cmd->add_option("--augment", c.ov.augment, "reference augmentation")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--stage1-steps", c.ov.stage1_steps, "steps with the encoder body frozen");
  cmd->add_option("--stage2-steps", c.ov.stage2_steps, "joint steps");
  cmd->add_option("--lambda", c.ov.lambda, "speaker-loss weight");
}

std::string ReadText(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw spkd::IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw spkd::IoError("cannot write " + p.string());
  out << text;
}

TrainConfig Resolve(const Overrides& ov, TrainConfig cfg = {}) {
  if (!ov.config_path.empty()) cfg.MergeJson(ReadText(ov.config_path));
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.mode) cfg.speaker_loss = spkd::trainer::ParseSpeakerLoss(*ov.mode);
  if (ov.augment) cfg.augment = *ov.augment == "on";
  if (ov.stage1_steps) cfg.stage1_steps = *ov.stage1_steps;
  if (ov.stage2_steps) cfg.stage2_steps = *ov.stage2_steps;
  if (ov.lambda) cfg.lambda = *ov.lambda;
  cfg.Validate();
  return cfg;
}

fs::path OutDir(const std::string& flag, const char* subcommand) {
  if (!flag.empty()) return flag;
  const char* root = std::getenv("SPKD_OUT_ROOT");
  return fs::path(root && *root ? root : "spkd_out") / subcommand;
}

fs::path Prepare(const std::string& flag, const char* subcommand, const TrainConfig& cfg) {
  const fs::path dir = OutDir(flag, subcommand);
  fs::create_directories(dir);
  WriteText(dir / "resolved_config.json", cfg.ToJson());
  return dir;
}

spkd::trainer::LogFn Logger(bool verbose) {
  return [verbose](const std::string& msg) {
    if (verbose || msg.rfind("warning", 0) == 0) std::cerr << msg << '\n';
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale noise-robust speaker encoder pipeline", "spkd"};
  app.require_subcommand(1);

  Common datagen_c, fit_c, train_c, eval_c, grad_c, report_c;
  std::string corpus_dir, units_dir, resume, run_dir;
  std::int64_t stop_at = -1;
  int gc_configs = 100;
  double gc_h = 1e-5;
  double gc_joint_h = 1e-4;
  std::vector<std::string> report_runs;
  bool no_svg = false;

  CLI::App* datagen = app.add_subcommand("datagen", "write train/ and eval/ synthetic corpora");
  AddConfigFlags(datagen, datagen_c, false);

  CLI::App* fit = app.add_subcommand("fit-units", "fit feature normalization and the unit codebook");
  AddConfigFlags(fit, fit_c, false);
  fit->add_option("--corpus", corpus_dir, "training corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI::App* train = app.add_subcommand("train", "two-stage joint training");
  AddConfigFlags(train, train_c, true);
  train->add_option("--corpus", corpus_dir, "training corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train->add_option("--units", units_dir, "fit-units output directory")
      ->check(CLI::ExistingDirectory);
  train->add_option("--resume", resume, "checkpoint to resume from")->check(CLI::ExistingFile);
  train->add_option("--stop-at", stop_at, "stop before this step");

  CLI::App* ev = app.add_subcommand("eval", "probes, similarity and separability of a run");
  AddConfigFlags(ev, eval_c, false);
  ev->add_option("--run", run_dir, "training output directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--corpus", corpus_dir, "evaluation corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of every primitive and the joint losses");
  AddConfigFlags(gc, grad_c, false);
  gc->add_option("--configs", gc_configs, "random configurations")->check(CLI::PositiveNumber);
  gc->add_option("--fd-step", gc_h, "two-point step for primitives")->check(CLI::PositiveNumber);
  gc->add_option("--joint-fd-step", gc_joint_h, "five-point step for the joint losses")
      ->check(CLI::PositiveNumber);

  CLI::App* rep = app.add_subcommand("report", "collate run directories");
  AddConfigFlags(rep, report_c, false);
  rep->add_option("runs", report_runs, "run directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  rep->add_flag("--no-svg", no_svg, "skip SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*datagen) {
      const TrainConfig cfg = Resolve(datagen_c.ov);
      const fs::path dir = Prepare(datagen_c.out, "datagen", cfg);
      spkd::audio::WriteCorpus(spkd::audio::SynthCorpus(cfg.TrainCorpusSpec()), dir / "train");
      spkd::audio::WriteCorpus(spkd::audio::SynthCorpus(cfg.EvalCorpusSpec()), dir / "eval");
    } else if (*fit) {
      const TrainConfig cfg = Resolve(fit_c.ov);
      const fs::path dir = Prepare(fit_c.out, "fit-units", cfg);
      const auto corpus = spkd::audio::LoadCorpus(corpus_dir);
      const auto fe = spkd::trainer::FitFrontEnd(cfg, corpus);
      spkd::trainer::SaveFrontEnd(fe, dir);
      if (fit_c.verbose) {
        std::cerr << "codebook: " << fe.codebook.K() << " units, inertia "
                  << fe.codebook.inertia_history.back() << '\n';
      }
    } else if (*train) {
      // Validate flags before touching any input.
      std::optional<TrainConfig> fresh;
      if (resume.empty()) {
        if (units_dir.empty()) throw spkd::ConfigError("train needs --units or --resume");
        fresh = Resolve(train_c.ov);
      }
      const auto corpus = spkd::audio::LoadCorpus(corpus_dir);
      int n_classes = 0;
      spkd::trainer::SpeakerLabelMap(corpus, &n_classes);
      std::optional<spkd::trainer::LoadedRun> run;
      if (!resume.empty()) {
        run = spkd::trainer::LoadCheckpoint(resume);
        if (!train_c.ov.config_path.empty() || train_c.ov.seed || train_c.ov.mode) {
          std::cerr << "warning: --resume uses the checkpoint's config; overrides ignored\n";
        }
      } else {
        const TrainConfig& cfg = *fresh;
        auto fe = spkd::trainer::LoadFrontEnd(cfg, units_dir);
        const spkd::trainer::Model model(cfg, n_classes);
        auto state = spkd::trainer::InitRunState(cfg, model);
        run = spkd::trainer::LoadedRun{cfg, std::move(fe), std::move(state), n_classes};
      }
      const fs::path dir = Prepare(train_c.out, "train", run->config);
      const spkd::trainer::Model model(run->config, n_classes);
      const auto bank = spkd::trainer::TrainingNoiseBank(run->config, corpus);
      spkd::trainer::ScheduleOptions opts;
      opts.out_dir = dir;
      opts.stop_at = stop_at;
      opts.log = Logger(train_c.verbose);
      spkd::trainer::RunSchedule(run->state, run->config, model, run->front_end, corpus,
                                 bank, opts);
    } else if (*ev) {
      const auto run = spkd::trainer::LoadCheckpoint(fs::path(run_dir) / "final.ckpt");
      const fs::path dir = eval_c.out.empty() ? fs::path(run_dir) : fs::path(eval_c.out);
      fs::create_directories(dir);
      if (dir != fs::path(run_dir)) WriteText(dir / "resolved_config.json", run.config.ToJson());
      const auto corpus = spkd::audio::LoadCorpus(corpus_dir);
      const auto metrics = spkd::eval::EvaluateRun(run, corpus);
      spkd::eval::WriteMetricList(metrics, dir / "eval.csv");
      if (eval_c.verbose) {
        for (const auto& [k, v] : metrics) std::cerr << k << " = " << v << '\n';
      }
    } else if (*gc) {
      const TrainConfig cfg = Resolve(grad_c.ov);
      const auto report = spkd::trainer::RunGradCheckSuite(gc_configs, cfg.seed, gc_h, gc_joint_h);
      std::ostringstream os;
      for (const auto& c : report.cases) os << c.name << ' ' << c.max_rel_error << '\n';
      os << "max_rel_error " << report.max_rel_error << " over " << report.checks
         << " checks, " << report.configurations << " configurations\n";
      if (!grad_c.out.empty()) {
        fs::create_directories(grad_c.out);
        WriteText(fs::path(grad_c.out) / "resolved_config.json", cfg.ToJson());
        WriteText(fs::path(grad_c.out) / "gradcheck.txt", os.str());
      }
      if (grad_c.verbose) std::cerr << os.str();
      std::cout << "max relative error " << report.max_rel_error
                << (report.max_rel_error < 1e-4 ? " PASS" : " FAIL") << '\n';
      return report.max_rel_error < 1e-4 ? 0 : 2;
    } else if (*rep) {
      const fs::path dir = OutDir(report_c.out, "report");
      std::vector<fs::path> runs(report_runs.begin(), report_runs.end());
      spkd::eval::WriteReport(runs, dir, !no_svg);
    }
  } catch (const spkd::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}
