// src/eval/probe.cpp

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
#include <map>
#include <numeric>

#include "spkd/errors.hpp"
#include "spkd/eval.hpp"
#include "spkd/grad.hpp"
#include "spkd/rng.hpp"
#include "spkd/speaker.hpp"

namespace spkd::eval {

namespace {

constexpr std::uint64_t kTagFolds = 0x464f;
constexpr std::uint64_t kTagInit = 0x5052;

// Dense 0..C-1 labels in sorted order of the original ids.
std::vector<int> Densify(const std::vector<int>& labels, int* n_classes) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [id, dense] : ids) dense = next++;
  *n_classes = next;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids[l]);
  return out;
}

double FoldAccuracy(const Matrix& x_train, const std::vector<int>& y_train,
                    const Matrix& x_test, const std::vector<int>& y_test,
                    int n_classes, const ProbeOptions& opts, int fold) {
  RowVector mean = x_train.colwise().mean();
  RowVector sd = ((x_train.rowwise() - mean).array().square().colwise().mean().sqrt()).matrix();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  }
  auto standardize = [&](const Matrix& x) {
    Matrix z = x.rowwise() - mean;
    z.array().rowwise() /= sd.array();
    return z;
  };
  const Matrix ztr = standardize(x_train);
  const Matrix zte = standardize(x_test);

  grad::Tensor onehot = grad::Tensor::Zero(ztr.rows(), n_classes);
  for (std::size_t i = 0; i < y_train.size(); ++i) onehot(static_cast<Eigen::Index>(i), y_train[i]) = 1.0;

  grad::ParamSet ps;
  Rng rng(StreamSeed({opts.seed, kTagInit, static_cast<std::uint64_t>(fold)}));
  const int d = static_cast<int>(ztr.cols());
  speaker::AddLinear(ps, "probe.l0", d, opts.hidden_dim, rng);
  speaker::AddLinear(ps, "probe.l1", opts.hidden_dim, n_classes, rng);
  grad::AdamState adam = grad::InitAdam(ps);
  const grad::AdamOptions ao{opts.lr, 0.9, 0.999, 1e-8};

  double prev = INFINITY;
  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    ps.ZeroGrad();
    grad::Graph g;
    grad::Var h = speaker::ApplyLinear(g, ps, "probe.l0", g.Constant(ztr));
    grad::Var logits = speaker::ApplyLinear(g, ps, "probe.l1", h);
    grad::Var loss = grad::CrossEntropyFromProbs(g.Constant(onehot),
                                                 grad::LogSoftmaxRows(logits));
    const double value = loss.scalar();
    if (std::abs(prev - value) < opts.tolerance) break;
    prev = value;
    g.Backward(loss);
    grad::AdamStep(ps, adam, ao);
  }

  grad::Graph g;
  grad::Var logits = speaker::ApplyLinear(
      g, ps, "probe.l1", speaker::ApplyLinear(g, ps, "probe.l0", g.Constant(zte)));
  const grad::Tensor& s = logits.value();
  int correct = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < s.cols(); ++c) {
      if (s(i, c) > s(i, best)) best = c;
    }
    correct += best == y_test[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(s.rows());
}

}  // namespace

std::vector<int> StratifiedFolds(const std::vector<int>& labels, int n_folds,
                                 std::uint64_t seed) {
  if (n_folds < 2) throw ConfigError("need at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<int> fold(labels.size(), 0);
  Rng rng(StreamSeed({seed, kTagFolds}));
  int offset = 0;
  for (auto& [label, idx] : by_class) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.Index(i)]);
    // Continue the round-robin across classes so fold sizes stay balanced.
    for (std::size_t i = 0; i < idx.size(); ++i) {
      fold[idx[i]] = static_cast<int>((offset + i) % n_folds);
    }
    offset = static_cast<int>((offset + idx.size()) % n_folds);
  }
  return fold;
}

ProbeResult LinearProbe(const Matrix& embeddings, const std::vector<int>& labels,
                        const ProbeOptions& opts) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (labels.size() != n) throw ShapeError("one label per embedding row required");
  if (opts.hidden_dim < 1 || opts.max_epochs < 1) throw ConfigError("invalid probe options");
  if (n < static_cast<std::size_t>(opts.n_folds)) {
    throw ConfigError("probe needs at least n_folds samples");
  }
  int n_classes = 0;
  const std::vector<int> y = Densify(labels, &n_classes);
  if (n_classes < 2) throw StratificationError("probe needs at least two classes");

  const std::vector<int> fold = StratifiedFolds(y, opts.n_folds, opts.seed);
  ProbeResult r;
  r.n_folds = opts.n_folds;
  r.n_classes = n_classes;
  r.hidden_dim = opts.hidden_dim;
  std::vector<int> counts(n_classes, 0);
  for (int c : y) ++counts[c];
  r.chance = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
             static_cast<double>(n);

  for (int f = 0; f < opts.n_folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
    std::vector<int> seen(n_classes, 0);
    for (Eigen::Index i : tr) seen[y[i]] = 1;
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
      throw StratificationError("fold " + std::to_string(f) + " trains without every class");
    }
    if (te.empty()) throw StratificationError("fold " + std::to_string(f) + " is empty");
    Matrix xtr(static_cast<Eigen::Index>(tr.size()), embeddings.cols());
    Matrix xte(static_cast<Eigen::Index>(te.size()), embeddings.cols());
    std::vector<int> ytr, yte;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      xtr.row(static_cast<Eigen::Index>(i)) = embeddings.row(tr[i]);
      ytr.push_back(y[tr[i]]);
    }
    for (std::size_t i = 0; i < te.size(); ++i) {
      xte.row(static_cast<Eigen::Index>(i)) = embeddings.row(te[i]);
      yte.push_back(y[te[i]]);
    }
    r.fold_accuracies.push_back(FoldAccuracy(xtr, ytr, xte, yte, n_classes, opts, f));
  }
  const double k = static_cast<double>(r.fold_accuracies.size());
  r.mean_accuracy = std::accumulate(r.fold_accuracies.begin(), r.fold_accuracies.end(), 0.0) / k;
  double ss = 0.0;
  for (double a : r.fold_accuracies) ss += (a - r.mean_accuracy) * (a - r.mean_accuracy);
  r.std_accuracy = k > 1 ? std::sqrt(ss / (k - 1)) : 0.0;
  return r;
}

}  // namespace spkd::eval
