// src/audio/filterbank.cpp

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
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "spkd/audio.hpp"
#include "spkd/errors.hpp"

namespace spkd::audio {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Filterbank::Filterbank(const FilterbankOptions& opts, int sample_rate)
    : opts_(opts), sample_rate_(sample_rate) {
  if (opts.n_bands < 1) throw ConfigError("n_bands must be >= 1");
  if (!(opts.hop_s > 0.0) || !(opts.win_s >= opts.hop_s)) {
    throw ConfigError("need win_s >= hop_s > 0");
  }
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  win_ = static_cast<int>(std::lround(opts.win_s * sample_rate));
  hop_ = static_cast<int>(std::lround(opts.hop_s * sample_rate));
  if (win_ < 2 || hop_ < 1) throw ConfigError("window shorter than 2 samples");
  nfft_ = 1;
  while (nfft_ < win_) nfft_ *= 2;

  window_.resize(win_);
  for (int i = 0; i < win_; ++i) {
    window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (win_ - 1));
  }

  const double nyquist = 0.5 * sample_rate;
  const double high = opts.high_hz > 0.0 ? std::min(opts.high_hz, nyquist)
                                         : nyquist;
  if (!(opts.low_hz >= 0.0 && opts.low_hz < high)) {
    throw ConfigError("filterbank band edges out of order");
  }
  const double mel_lo = HzToMel(opts.low_hz);
  const double mel_hi = HzToMel(high);
  std::vector<double> edges(opts.n_bands + 2);
  for (int i = 0; i < opts.n_bands + 2; ++i) {
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (opts.n_bands + 1));
  }
  const int n_bins = nfft_ / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / nfft_;
  bands_.resize(opts.n_bands);
  center_hz_.resize(opts.n_bands);
  for (int b = 0; b < opts.n_bands; ++b) {
    const double left = edges[b], center = edges[b + 1], right = edges[b + 2];
    center_hz_[b] = center;
    Band& band = bands_[b];
    band.first_bin = -1;
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double wgt = 0.0;
      if (f > left && f <= center) {
        wgt = (f - left) / (center - left);
      } else if (f > center && f < right) {
        wgt = (right - f) / (right - center);
      }
      if (wgt > 0.0) {
        if (band.first_bin < 0) band.first_bin = k;
        band.weights.resize(k - band.first_bin + 1, 0.0);
        band.weights.back() = wgt;
      }
    }
    if (band.first_bin < 0) band.first_bin = 0;  // band narrower than a bin
  }
}

std::size_t Filterbank::NumFrames(std::size_t num_samples) const {
  if (num_samples < static_cast<std::size_t>(win_)) return 0;
  return (num_samples - win_) / hop_ + 1;
}

FeatureSequence Filterbank::Compute(const Waveform& w) const {
  if (w.sample_rate != sample_rate_) {
    throw RateMismatch("filterbank built for " + std::to_string(sample_rate_) +
                       " Hz, wave is " + std::to_string(w.sample_rate) + " Hz");
  }
  const std::size_t n_frames = NumFrames(w.size());
  if (n_frames == 0) {
    throw TooShort("wave of " + std::to_string(w.size()) +
                   " samples is shorter than one window of " +
                   std::to_string(win_));
  }
  // Plan caches inside Eigen::FFT are mutated on use.
  thread_local Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);

  FeatureSequence out;
  out.frame_hop_s = static_cast<double>(hop_) / sample_rate_;
  out.frames.resize(static_cast<Eigen::Index>(n_frames), opts_.n_bands);
  std::vector<double> buf(nfft_, 0.0);
  std::vector<std::complex<double>> spec;
  std::vector<double> power(nfft_ / 2 + 1);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* src = w.samples.data() + t * hop_;
    for (int i = 0; i < win_; ++i) buf[i] = src[i] * window_[i];
    std::fill(buf.begin() + win_, buf.end(), 0.0);
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(spec[k]);
    for (int b = 0; b < opts_.n_bands; ++b) {
      const Band& band = bands_[b];
      double e = 0.0;
      for (std::size_t j = 0; j < band.weights.size(); ++j) {
        e += band.weights[j] * power[band.first_bin + j];
      }
      out.frames(static_cast<Eigen::Index>(t), b) = std::log(kLogFloor + e);
    }
  }
  return out;
}

FeatureSequence LogFilterbank(const Waveform& w, int n_bands, double win_s,
                              double hop_s) {
  FilterbankOptions opts;
  opts.n_bands = n_bands;
  opts.win_s = win_s;
  opts.hop_s = hop_s;
  return Filterbank(opts, w.sample_rate).Compute(w);
}

}  // namespace spkd::audio
