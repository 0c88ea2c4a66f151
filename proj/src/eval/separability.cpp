// src/eval/separability.cpp

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
#include <numeric>
#include <set>

#include "spkd/errors.hpp"
#include "spkd/eval.hpp"

namespace spkd::eval {

namespace {

constexpr const char* kClean = "clean";

std::uint64_t Fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

bool CleanTestSplit(const std::string& id) { return (Fnv1a(id) >> 17) & 1u; }

}  // namespace

RowVector SeparabilityFeatures(const Matrix& frames, const std::vector<int>& units,
                               int n_units) {
  if (frames.rows() == 0) throw ShapeError("record has no frames");
  RowVector out = RowVector::Zero(frames.cols() + n_units);
  out.head(frames.cols()) = frames.colwise().mean();
  for (int u : units) {
    if (u < 0 || u >= n_units) throw UnitError("unit " + std::to_string(u) + " out of range");
    out(frames.cols() + u) += 1.0;
  }
  if (!units.empty()) out.tail(n_units) /= static_cast<double>(units.size());
  return out;
}

SeparabilityResult NoiseSeparability(const std::vector<SeparabilityRecord>& records,
                                     int n_units, const std::string& held_out,
                                     const SeparabilityOptions& opts) {
  std::set<std::string> noisy;
  for (const SeparabilityRecord& r : records) {
    if (r.condition != kClean) noisy.insert(r.condition);
  }
  if (noisy.size() < 2) {
    throw ConfigError("separability needs at least two noisy conditions");
  }
  if (!noisy.count(held_out)) throw ConfigError("held-out condition '" + held_out + "' absent");

  // Canonical order makes every floating-point reduction order-independent.
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(records[a].id, records[a].condition) <
           std::tie(records[b].id, records[b].condition);
  });

  std::vector<RowVector> xtr, xte;
  std::vector<int> ytr, yte;
  int clean_train = 0, clean_test = 0;
  for (std::size_t i : order) {
    const SeparabilityRecord& r = records[i];
    RowVector f = SeparabilityFeatures(r.frames, r.units, n_units);
    if (r.condition == kClean) {
      if (CleanTestSplit(r.id)) {
        xte.push_back(std::move(f)), yte.push_back(0), ++clean_test;
      } else {
        xtr.push_back(std::move(f)), ytr.push_back(0), ++clean_train;
      }
    } else if (r.condition == held_out) {
      xte.push_back(std::move(f)), yte.push_back(1);
    } else {
      xtr.push_back(std::move(f)), ytr.push_back(1);
    }
  }
  if (clean_train == 0 || clean_test == 0) {
    throw ConfigError("too few clean records to split");
  }

  const Eigen::Index d = xtr.front().size();
  Matrix x(static_cast<Eigen::Index>(xtr.size()), d);
  for (std::size_t i = 0; i < xtr.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = xtr[i];
  const RowVector mean = x.colwise().mean();
  RowVector sd = ((x.rowwise() - mean).array().square().colwise().mean().sqrt()).matrix();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  }
  x.rowwise() -= mean;
  x.array().rowwise() /= sd.array();

  // Class-balanced weights: each class contributes half of the loss.
  const double n1 = static_cast<double>(std::count(ytr.begin(), ytr.end(), 1));
  const double n0 = static_cast<double>(ytr.size()) - n1;
  Eigen::VectorXd y(static_cast<Eigen::Index>(ytr.size())), wt(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y(i) = ytr[i];
    wt(i) = ytr[i] ? 0.5 / n1 : 0.5 / n0;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  for (int it = 0; it < opts.iterations; ++it) {
    Eigen::VectorXd z = (x * w).array() + b;
    Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    Eigen::VectorXd r = wt.cwiseProduct(p - y);
    w -= opts.lr * (x.transpose() * r + opts.l2 * w);
    b -= opts.lr * r.sum();
  }

  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < xte.size(); ++i) {
    RowVector z = (xte[i] - mean).array() / sd.array();
    const bool pred = z.dot(w) + b > 0.0;
    if (pred && yte[i]) ++tp;
    if (pred && !yte[i]) ++fp;
    if (!pred && yte[i]) ++fn;
  }
  SeparabilityResult res;
  res.held_out = held_out;
  res.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  res.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  res.f_score = res.precision + res.recall > 0
                    ? 2 * res.precision * res.recall / (res.precision + res.recall)
                    : 0.0;
  return res;
}

const std::vector<std::string>& SeparabilityConditions() {
  static const std::vector<std::string> kConditions{"babble", "white", "pink", "brown"};
  return kConditions;
}

std::vector<SeparabilityRecord> BuildSeparabilitySet(const audio::Corpus& corpus,
                                                     const trainer::FrontEnd& fe,
                                                     double snr_db, std::uint64_t seed) {
  if (corpus.records.empty()) throw ConfigError("separability needs records");
  const int sr = corpus.records.front().wave.sample_rate;
  const audio::NoiseBank babble = audio::BuildNoiseBank(
      corpus, {audio::NoiseClass::kBabble}, 8, 2.0, StreamSeed({seed, 0x4242}));
  const auto& conditions = SeparabilityConditions();
  std::vector<SeparabilityRecord> out;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const audio::Utterance& u = corpus.records[i];
    Matrix f = fe.Features(u.wave);
    std::vector<int> units = units::Quantize(f, fe.codebook);
    out.push_back({u.path, kClean, std::move(f), std::move(units)});

    const std::string& c = conditions[i % conditions.size()];
    Rng rng(StreamSeed({seed, 0x5345, i}));
    const std::size_t n = u.wave.size();
    audio::Waveform noise;
    if (c == "babble") {
      noise = babble[rng.Index(babble.size())].wave;
    } else if (c == "white") {
      noise = audio::WhiteNoise(n, sr, rng);
    } else if (c == "pink") {
      noise = audio::PinkNoise(n, sr, rng);
    } else {
      noise = audio::BrownNoise(n, sr, rng);
    }
    f = fe.Features(audio::MixAtSnr(u.wave, noise, snr_db));
    units = units::Quantize(f, fe.codebook);
    out.push_back({u.path, c, std::move(f), std::move(units)});
  }
  return out;
}

std::vector<SeparabilityResult> LeaveOneConditionOut(
    const std::vector<SeparabilityRecord>& records, int n_units,
    const SeparabilityOptions& opts) {
  std::set<std::string> noisy;
  for (const SeparabilityRecord& r : records) {
    if (r.condition != kClean) noisy.insert(r.condition);
  }
  if (noisy.size() < 2) throw ConfigError("separability needs at least two noisy conditions");
  std::vector<SeparabilityResult> out;
  for (const std::string& c : noisy) out.push_back(NoiseSeparability(records, n_units, c, opts));
  return out;
}

}  // namespace spkd::eval
