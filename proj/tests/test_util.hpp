// tests/test_util.hpp

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

#ifndef SPKD_TESTS_TEST_UTIL_HPP_
#define SPKD_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "spkd/audio.hpp"
#include "spkd/grad.hpp"
#include "spkd/matrix.hpp"
#include "spkd/rng.hpp"

namespace spkd::testing {

inline Matrix RandomMatrix(Eigen::Index r, Eigen::Index c, Rng& rng,
                           double sd = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal(0.0, sd);
  return m;
}

inline audio::Waveform RandomWave(std::size_t n, Rng& rng, double sd = 1.0) {
  audio::Waveform w;
  w.samples.resize(n);
  for (double& s : w.samples) s = rng.Normal(0.0, sd);
  return w;
}

inline audio::Waveform Tone(double hz, double seconds, int sr = 16000,
                            double amp = 0.5) {
  audio::Waveform w;
  w.sample_rate = sr;
  w.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = amp * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / sr);
  }
  return w;
}

inline double PowerRatioDb(const std::vector<double>& s,
                           const std::vector<double>& n) {
  double ps = 0.0, pn = 0.0;
  for (double v : s) ps += v * v;
  for (double v : n) pn += v * v;
  return 10.0 * std::log10(ps / pn);
}

inline std::string ReadBytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Oracles below use plain arithmetic on parameter values only.

inline Matrix Affine(const Matrix& x, const grad::ParamSet& ps,
                     const std::string& name) {
  const Matrix& w = ps.Get(name + ".w").value;
  const Matrix& b = ps.Get(name + ".b").value;
  Matrix y = x * w.transpose();
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) += b.row(0);
  return y;
}

inline Matrix TanhOf(Matrix m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::tanh(m.data()[i]);
  return m;
}

/// Frame-wise tanh layers, per-item mean, last affine layer.
inline Matrix OracleEncode(const grad::ParamSet& ps, const Matrix& frames,
                           Eigen::Index items, int hidden_layers) {
  Matrix h = frames;
  for (int l = 0; l < hidden_layers; ++l) {
    h = TanhOf(Affine(h, ps, "enc.h" + std::to_string(l)));
  }
  const Eigen::Index t = h.rows() / items;
  Matrix pooled(items, h.cols());
  for (Eigen::Index i = 0; i < items; ++i) {
    RowVector acc = RowVector::Zero(h.cols());
    for (Eigen::Index r = 0; r < t; ++r) acc += h.row(i * t + r);
    pooled.row(i) = acc / static_cast<double>(t);
  }
  return Affine(pooled, ps, "enc.out");
}

inline Matrix OracleHead(const grad::ParamSet& ps, const Matrix& e) {
  Matrix h = TanhOf(Affine(e, ps, "head.l0"));
  h = TanhOf(Affine(h, ps, "head.l1"));
  return Affine(h, ps, "head.l2");
}

inline RowVector OracleSoftmax(const RowVector& z) {
  RowVector p(z.size());
  const double mx = z.maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += std::exp(z(i) - mx);
  for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = std::exp(z(i) - mx) / s;
  return p;
}

/// Mean over rows of -sum_i softmax((t - c)/tt)_i * log softmax(s/ts)_i.
inline double OracleDino(const Matrix& t, const Matrix& s, const RowVector& c,
                         double tt, double ts) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    const RowVector p = OracleSoftmax((t.row(r) - c) / tt);
    const RowVector z = s.row(r) / ts;
    const double mx = z.maxCoeff();
    double lse = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) lse += std::exp(z(i) - mx);
    lse = mx + std::log(lse);
    for (Eigen::Index i = 0; i < z.size(); ++i) total -= p(i) * (z(i) - lse);
  }
  return total / static_cast<double>(t.rows());
}

/// Autocorrelation F0 estimate over [fmin, fmax] on the middle of `w`.
inline double AutocorrF0(const audio::Waveform& w, double fmin = 60.0,
                         double fmax = 400.0) {
  const int sr = w.sample_rate;
  const std::size_t len = std::min<std::size_t>(w.size(), sr * 4 / 10);
  const std::size_t off = (w.size() - len) / 2;
  const int lo = static_cast<int>(sr / fmax);
  const int hi = static_cast<int>(sr / fmin);
  std::vector<double> r(hi + 1, 0.0);
  for (int lag = 0; lag <= hi; ++lag) {
    for (std::size_t i = off; i + lag < off + len; ++i) {
      r[lag] += w.samples[i] * w.samples[i + lag];
    }
  }
  const double best = *std::max_element(r.begin() + lo, r.end());
  // First lag reaching 90% of the best peak: avoids octave-down errors.
  for (int lag = lo; lag <= hi; ++lag) {
    const bool peak = lag > lo && lag < hi && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
    if (peak && r[lag] >= 0.9 * best) return static_cast<double>(sr) / lag;
  }
  return static_cast<double>(sr) /
         static_cast<double>(std::max_element(r.begin() + lo, r.end()) - r.begin());
}

}  // namespace spkd::testing

#endif  // SPKD_TESTS_TEST_UTIL_HPP_
