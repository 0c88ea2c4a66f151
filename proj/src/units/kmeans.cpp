// src/units/kmeans.cpp

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
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "spkd/errors.hpp"
#include "spkd/rng.hpp"
#include "spkd/units.hpp"

namespace spkd::units {

namespace {

int CountDistinctRows(const Matrix& frames, int stop_at) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(frames.rows()));
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < frames.cols(); ++c) {
      if (frames(a, c) != frames(b, c)) return frames(a, c) < frames(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  int distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size() && distinct < stop_at; ++i) {
    if (less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

// Returns nearest centroid and its squared distance.
std::pair<int, double> Nearest(const Matrix& frames, Eigen::Index row,
                               const Matrix& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
    const double d = (frames.row(row) - centroids.row(k)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return {best, best_d};
}

Matrix KMeansPlusPlus(const Matrix& frames, int K, Rng& rng) {
  const Eigen::Index n = frames.rows();
  Matrix centroids(K, frames.cols());
  centroids.row(0) = frames.row(static_cast<Eigen::Index>(rng.Index(n)));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    d2[i] = (frames.row(i) - centroids.row(0)).squaredNorm();
  }
  for (int k = 1; k < K; ++k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index pick = n - 1;
    double target = rng.Uniform() * total;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      target -= d2[i];
      if (target < 0.0) break;
    }
    centroids.row(k) = frames.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (frames.row(i) - centroids.row(k)).squaredNorm());
    }
  }
  return centroids;
}

}  // namespace

double Inertia(const Matrix& frames, const Matrix& centroids,
               const std::vector<int>& assignment) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    total += (frames.row(i) - centroids.row(assignment[i])).squaredNorm();
  }
  return total;
}

Codebook KMeansFit(const Matrix& frames, int K, int max_iters,
                   std::uint64_t seed) {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!frames.allFinite()) throw NumericsError("non-finite frame value");
  if (CountDistinctRows(frames, K) < K) {
    throw InsufficientData("fewer than " + std::to_string(K) +
                           " distinct frames");
  }
  Rng rng(seed);
  Codebook cb;
  cb.centroids = KMeansPlusPlus(frames, K, rng);

  const Eigen::Index n = frames.rows();
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int k = Nearest(frames, i, cb.centroids).first;
      if (k != assignment[i]) {
        assignment[i] = k;
        changed = true;
      }
    }
    if (!changed) break;
    // Update; an empty cluster keeps its previous centroid.
    Matrix sums = Matrix::Zero(K, frames.cols());
    std::vector<Eigen::Index> counts(K, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[i]) += frames.row(i);
      ++counts[assignment[i]];
    }
    for (int k = 0; k < K; ++k) {
      if (counts[k] > 0) cb.centroids.row(k) = sums.row(k) / counts[k];
    }
    cb.inertia_history.push_back(Inertia(frames, cb.centroids, assignment));
  }
  if (cb.inertia_history.empty()) {
    cb.inertia_history.push_back(Inertia(frames, cb.centroids, assignment));
  }
  return cb;
}

std::vector<int> Quantize(const Matrix& frames, const Codebook& cb) {
  if (frames.cols() != cb.centroids.cols()) {
    throw ShapeError("frame width " + std::to_string(frames.cols()) +
                     " does not match codebook width " +
                     std::to_string(cb.centroids.cols()));
  }
  std::vector<int> out(static_cast<std::size_t>(frames.rows()));
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    out[i] = Nearest(frames, i, cb.centroids).first;
  }
  return out;
}

std::vector<int> Quantize(const audio::FeatureSequence& f, const Codebook& cb) {
  return Quantize(f.frames, cb);
}

UnitSequence DedupRuns(const std::vector<int>& raw) {
  UnitSequence seq;
  for (int u : raw) {
    if (seq.units.empty() || seq.units.back() != u) seq.units.push_back(u);
  }
  return seq;
}

void RoundToStoragePrecision(Codebook& cb) {
  for (Eigen::Index i = 0; i < cb.centroids.size(); ++i) {
    cb.centroids.data()[i] = static_cast<float>(cb.centroids.data()[i]);
  }
}

namespace {

constexpr char kMagic[4] = {'S', 'P', 'K', 'C'};

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t GetU32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

void SaveCodebook(const Codebook& cb, const std::filesystem::path& file) {
  std::string bytes(kMagic, 4);
  PutU32(bytes, kCodebookVersion);
  PutU32(bytes, static_cast<std::uint32_t>(cb.K()));
  PutU32(bytes, static_cast<std::uint32_t>(cb.Width()));
  for (Eigen::Index i = 0; i < cb.centroids.size(); ++i) {
    PutU32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(cb.centroids.data()[i])));
  }
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + file.string());
}

Codebook LoadCodebook(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(file.string() + ": not a codebook file");
  }
  if (GetU32(bytes, 4) != kCodebookVersion) {
    throw FormatError(file.string() + ": unsupported codebook version " +
                      std::to_string(GetU32(bytes, 4)));
  }
  const std::uint32_t K = GetU32(bytes, 8), B = GetU32(bytes, 12);
  if (K == 0 || B == 0 || bytes.size() != 16 + 4ull * K * B) {
    throw FormatError(file.string() + ": size does not match header");
  }
  Codebook cb;
  cb.centroids.resize(K, B);
  for (std::size_t i = 0; i < std::size_t{K} * B; ++i) {
    cb.centroids.data()[i] = std::bit_cast<float>(GetU32(bytes, 16 + 4 * i));
  }
  if (!cb.centroids.allFinite()) throw FormatError(file.string() + ": non-finite centroid");
  return cb;
}

}  // namespace spkd::units
