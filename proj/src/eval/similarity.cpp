// src/eval/similarity.cpp

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
#include <set>

#include "spkd/errors.hpp"
#include "spkd/eval.hpp"

namespace spkd::eval {

namespace {

RowVector Unit(const RowVector& v, const std::string& id) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw NumericsError("embedding of '" + id + "' has zero or non-finite norm");
  }
  return v / n;
}

void MeanStd(const std::vector<double>& v, double* mean, double* sd) {
  *mean = 0.0;
  *sd = 0.0;
  if (v.empty()) return;
  for (double x : v) *mean += x;
  *mean /= static_cast<double>(v.size());
  for (double x : v) *sd += (x - *mean) * (x - *mean);
  *sd = std::sqrt(*sd / static_cast<double>(v.size()));
}

}  // namespace

double EqualErrorRate(const std::vector<double>& target,
                      const std::vector<double>& nontarget) {
  if (target.empty() || nontarget.empty()) {
    throw ConfigError("EER needs target and non-target scores");
  }
  std::vector<double> t = target, n = nontarget;
  std::sort(t.begin(), t.end());
  std::sort(n.begin(), n.end());
  std::vector<double> thresholds = t;
  thresholds.insert(thresholds.end(), n.begin(), n.end());
  thresholds.push_back(INFINITY);
  double best_gap = INFINITY, eer = 0.5;
  for (double th : thresholds) {
    // Accept when score >= th.
    const double frr = static_cast<double>(std::lower_bound(t.begin(), t.end(), th) - t.begin()) /
                       static_cast<double>(t.size());
    const double far = static_cast<double>(n.end() - std::lower_bound(n.begin(), n.end(), th)) /
                       static_cast<double>(n.size());
    if (std::abs(far - frr) < best_gap) {
      best_gap = std::abs(far - frr);
      eer = 0.5 * (far + frr);
    }
  }
  return eer;
}

SimilarityResult CrossConditionSimilarity(const std::vector<EmbeddedRecord>& clean,
                                          const std::vector<EmbeddedRecord>& noisy) {
  std::set<int> sc, sn;
  for (const EmbeddedRecord& r : clean) sc.insert(r.speaker_id);
  for (const EmbeddedRecord& r : noisy) sn.insert(r.speaker_id);
  for (int s : sc) {
    if (!sn.count(s)) throw ManifestError("speaker " + std::to_string(s) + " has no noisy records");
  }
  for (int s : sn) {
    if (!sc.count(s)) throw ManifestError("speaker " + std::to_string(s) + " has no clean records");
  }
  if (sc.size() < 2) throw ManifestError("similarity needs at least two speakers");

  std::vector<RowVector> uc, un;
  for (const EmbeddedRecord& r : clean) uc.push_back(Unit(r.embedding, r.id));
  for (const EmbeddedRecord& r : noisy) un.push_back(Unit(r.embedding, r.id));

  SimilarityResult res;
  std::map<int, std::pair<double, int>> per;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    for (std::size_t j = 0; j < noisy.size(); ++j) {
      if (clean[i].id == noisy[j].id) continue;
      const double c = uc[i].dot(un[j]);
      if (clean[i].speaker_id == noisy[j].speaker_id) {
        res.same_scores.push_back(c);
        auto& [sum, cnt] = per[clean[i].speaker_id];
        sum += c;
        ++cnt;
      } else {
        res.diff_scores.push_back(c);
      }
    }
  }
  if (res.same_scores.empty()) {
    throw ManifestError("no same-speaker pair across conditions");
  }
  MeanStd(res.same_scores, &res.same_mean, &res.same_std);
  MeanStd(res.diff_scores, &res.diff_mean, &res.diff_std);
  res.gap = res.same_mean - res.diff_mean;
  res.eer = EqualErrorRate(res.same_scores, res.diff_scores);
  for (const auto& [s, sc2] : per) res.per_speaker_same[s] = sc2.first / sc2.second;
  return res;
}

}  // namespace spkd::eval
