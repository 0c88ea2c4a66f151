// include/spkd/units.hpp

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

#ifndef SPKD_UNITS_HPP_
#define SPKD_UNITS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spkd/audio.hpp"
#include "spkd/matrix.hpp"

namespace spkd::units {

/// K x B centroids plus the inertia after every Lloyd iteration.
struct Codebook {
  Matrix centroids;
  std::vector<double> inertia_history;

  int K() const { return static_cast<int>(centroids.rows()); }
  int Width() const { return static_cast<int>(centroids.cols()); }
};

/// Deduplicated unit ids: no two consecutive entries are equal.
struct UnitSequence {
  std::vector<int> units;
  std::string source_id;
};

/// Lloyd's algorithm from a k-means++ seeding. Rows of `frames` are points.
/// Stops after `max_iters` iterations or once assignments repeat. Throws
/// InsufficientData when fewer than K distinct rows are present.
Codebook KMeansFit(const Matrix& frames, int K, int max_iters,
                   std::uint64_t seed);

/// Nearest centroid per frame (Euclidean); ties go to the lowest index.
std::vector<int> Quantize(const Matrix& frames, const Codebook& cb);
std::vector<int> Quantize(const audio::FeatureSequence& f, const Codebook& cb);

/// Collapses every maximal run of equal symbols to one symbol.
UnitSequence DedupRuns(const std::vector<int>& raw);

/// Sum of squared distances from each frame to its assigned centroid.
double Inertia(const Matrix& frames, const Matrix& centroids,
               const std::vector<int>& assignment);

/// Rounds centroids to the 32-bit storage precision of the codebook file.
void RoundToStoragePrecision(Codebook& cb);

// Codebook file: "SPKC" magic, u32 version, u32 K, u32 B, then K*B
// little-endian float32 values, row-major.
constexpr std::uint32_t kCodebookVersion = 1;
void SaveCodebook(const Codebook& cb, const std::filesystem::path& file);
Codebook LoadCodebook(const std::filesystem::path& file);

}  // namespace spkd::units

#endif  // SPKD_UNITS_HPP_
