// src/trainer/front_end.cpp

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
#include <numeric>

#include "spkd/errors.hpp"
#include "spkd/trainer.hpp"

namespace spkd::trainer {

namespace {

constexpr std::uint64_t kTagFrameSample = 0x4653;
constexpr std::uint64_t kTagKMeans = 0x4b4d;
constexpr double kMinStd = 1e-3;

}  // namespace

Matrix FeatureNorm::Apply(const Matrix& frames) const {
  if (frames.cols() != mean.size()) {
    throw ShapeError("feature width " + std::to_string(frames.cols()) +
                     " does not match normalization width " +
                     std::to_string(mean.size()));
  }
  Matrix out = frames;
  out.rowwise() -= mean;
  out.array().rowwise() /= stddev.array();
  return out;
}

Matrix FrontEnd::Features(const audio::Waveform& w) const {
  return norm.Apply(filterbank.Compute(w).frames);
}

FrontEnd FitFrontEnd(const TrainConfig& cfg, const audio::Corpus& corpus) {
  if (corpus.records.empty()) throw ConfigError("cannot fit units on an empty corpus");
  FrontEnd fe{audio::Filterbank(cfg.Filterbank(),
                                corpus.records.front().wave.sample_rate),
              {}, {}};
  std::vector<Matrix> feats;
  Eigen::Index total = 0;
  for (const audio::Utterance& u : corpus.records) {
    if (fe.filterbank.NumFrames(u.wave.size()) == 0) continue;
    feats.push_back(fe.filterbank.Compute(u.wave).frames);
    total += feats.back().rows();
  }
  if (total == 0) throw InsufficientData("no record is longer than one window");
  Matrix all(total, cfg.n_bands);
  Eigen::Index at = 0;
  for (const Matrix& f : feats) {
    all.middleRows(at, f.rows()) = f;
    at += f.rows();
  }
  fe.norm.mean = all.colwise().mean();
  fe.norm.stddev =
      ((all.rowwise() - fe.norm.mean).array().square().colwise().mean().sqrt())
          .max(kMinStd)
          .matrix();
  Matrix normalized = fe.norm.Apply(all);

  if (normalized.rows() > cfg.kmeans_max_frames) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(normalized.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(StreamSeed({cfg.seed, kTagFrameSample}));
    for (int i = 0; i < cfg.kmeans_max_frames; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.Index(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(cfg.kmeans_max_frames);
    std::sort(idx.begin(), idx.end());
    Matrix sub(cfg.kmeans_max_frames, normalized.cols());
    for (int i = 0; i < cfg.kmeans_max_frames; ++i) sub.row(i) = normalized.row(idx[i]);
    normalized = std::move(sub);
  }
  fe.codebook = units::KMeansFit(normalized, cfg.n_units, cfg.kmeans_iters,
                                 StreamSeed({cfg.seed, kTagKMeans}));
  units::RoundToStoragePrecision(fe.codebook);
  // Kept at float precision too, so a 4-byte checkpoint restores it exactly.
  fe.norm.mean = fe.norm.mean.cast<float>().cast<double>();
  fe.norm.stddev = fe.norm.stddev.cast<float>().cast<double>();
  return fe;
}

void SaveFrontEnd(const FrontEnd& fe, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  units::SaveCodebook(fe.codebook, dir / "codebook.bin");
  grad::Archive a(8);
  a.PutTensor("norm/mean", fe.norm.mean);
  a.PutTensor("norm/stddev", fe.norm.stddev);
  a.PutInt("filterbank/n_bands", fe.filterbank.options().n_bands);
  a.PutReal("filterbank/win_s", fe.filterbank.options().win_s);
  a.PutReal("filterbank/hop_s", fe.filterbank.options().hop_s);
  a.PutInt("filterbank/sample_rate", fe.filterbank.sample_rate());
  a.Save((dir / "feature_norm.bin").string());
}

FrontEnd LoadFrontEnd(const TrainConfig& cfg, const std::filesystem::path& dir) {
  const grad::Archive a = grad::Archive::Load((dir / "feature_norm.bin").string());
  if (a.GetInt("filterbank/n_bands") != cfg.n_bands ||
      a.GetReal("filterbank/win_s") != cfg.win_s ||
      a.GetReal("filterbank/hop_s") != cfg.hop_s) {
    throw ConfigError("front end in " + dir.string() +
                      " was fitted with different filterbank settings");
  }
  FrontEnd fe{audio::Filterbank(cfg.Filterbank(),
                                static_cast<int>(a.GetInt("filterbank/sample_rate"))),
              {a.GetTensor("norm/mean"), a.GetTensor("norm/stddev")},
              units::LoadCodebook(dir / "codebook.bin")};
  if (fe.codebook.K() != cfg.n_units || fe.codebook.Width() != cfg.n_bands) {
    throw ConfigError("codebook shape does not match n_units / n_bands");
  }
  return fe;
}

}  // namespace spkd::trainer
