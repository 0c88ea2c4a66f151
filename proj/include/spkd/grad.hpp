// include/spkd/grad.hpp

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

#ifndef SPKD_GRAD_HPP_
#define SPKD_GRAD_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spkd/matrix.hpp"

namespace spkd::grad {

/// Dense rank-2 tensor (vectors are 1 x n). Shape is (rows, cols).
using Tensor = Matrix;

/// A named trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

/// Insertion-ordered set of uniquely named parameters.
///
/// Graph nodes hold pointers into the set, so do not Add() while a Graph that
/// references it is alive.
class ParamSet {
 public:
  Param& Add(const std::string& name, Tensor value, bool trainable = true);

  bool Has(std::string_view name) const;
  Param& Get(std::string_view name);
  const Param& Get(std::string_view name) const;

  std::deque<Param>& params() { return params_; }
  const std::deque<Param>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void ZeroGrad();
  /// Sets the trainable flag on every parameter whose name starts with
  /// `prefix`.
  void SetTrainable(std::string_view prefix, bool trainable);
  /// Same names, order and shapes.
  bool SameSchema(const ParamSet& other) const;
  std::size_t NumValues() const;
  /// L2 norm of the gradients of trainable parameters.
  double GradNorm() const;

 private:
  std::deque<Param> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  Tensor grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
};

/// Single-threaded reverse-mode tape. Nodes are recorded in creation order,
/// which is a topological order, and Backward() walks them in reverse.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Constant(Tensor value);
  /// Leaf with its own gradient, used to differentiate w.r.t. inputs.
  Var Input(Tensor value);
  /// Leaf bound to `p`. Backward() adds into p.grad when p is trainable;
  /// frozen parameters do not require gradients at all.
  Var Parameter(Param& p);

  /// Records an op. `parents` decide whether the node requires gradients;
  /// `backward` is dropped when none does. Throws NumericsError on a
  /// non-finite value.
  Var Record(const char* op, Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 for a 1 x 1 `loss` and propagates.
  void Backward(Var loss);

  const Tensor& Value(int id) const { return nodes_[id].value; }
  Tensor Grad(int id) const;
  bool RequiresGrad(int id) const { return nodes_[id].requires_grad; }
  /// Adds `g` into the gradient of node `id` if it requires one.
  void Accumulate(int id, const Tensor& g);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Param* param = nullptr;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitives. All shapes are explicit; the only broadcast is the bias row of
// Linear / AddRow.

Var MatMul(Var a, Var b);                  // (n x k) * (k x m)
Var MatMulTransposed(Var a, Var b);        // a * b^T
Var Linear(Var x, Var weight, Var bias);   // x W^T + b, W is out x in
Var AddRow(Var x, Var row);                // x + 1 row (broadcast over rows)
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);  // elementwise
Var Scale(Var a, double s);
Var Tanh(Var x);
Var Relu(Var x);
Var Exp(Var x);
Var SoftmaxRows(Var x);
Var LogSoftmaxRows(Var x);
Var Sum(Var x);               // 1 x 1
Var Mean(Var x);              // 1 x 1
Var MeanRows(Var x);          // 1 x cols
Var SegmentMean(Var x, Eigen::Index segments);  // equal consecutive blocks
Var Mse(Var a, Var b);        // mean of squared differences, 1 x 1
/// Mean over rows of -sum_j p_ij * log_q_ij.
Var CrossEntropyFromProbs(Var p, Var log_q);
/// Mean over rows of sum_j KL(N(mu1, s1^2) || N(mu2, s2^2)), with s given as
/// log standard deviations.
Var DiagGaussianKl(Var mu1, Var log_sigma1, Var mu2, Var log_sigma2);
Var L2NormalizeRows(Var x);
Var ConcatCols(Var a, Var b);
Var SliceCols(Var x, Eigen::Index start, Eigen::Index count);
Var SliceRows(Var x, Eigen::Index start, Eigen::Index count);
/// Each row repeated `times` times consecutively.
Var RepeatRows(Var x, Eigen::Index times);
Var GatherRows(Var table, const std::vector<int>& ids);
/// n x 1 column of x(i, labels[i]).
Var Pick(Var x, const std::vector<int>& labels);
/// Replaces x(i, labels[i]) = cos(theta) by cos(theta + margin).
Var AngularMargin(Var cosines, const std::vector<int>& labels, double margin);
Var StopGradient(Var x);

// ---------------------------------------------------------------------------
// Optimization.

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter first/second moments and step counts, aligned by name with
/// a ParamSet.
struct AdamState {
  struct Slot {
    std::string name;
    Tensor m;
    Tensor v;
    std::int64_t steps = 0;
  };
  std::vector<Slot> slots;
};

AdamState InitAdam(const ParamSet& params);

/// Standard bias-corrected Adam. Frozen parameters and their slots are left
/// untouched. Throws StateError when `state` is not aligned with `params`.
void AdamStep(ParamSet& params, AdamState& state, const AdamOptions& opts);

/// target <- m * target + (1 - m) * source for every parameter, trainable or
/// not. Throws StateError on a schema mismatch.
void EmaUpdate(ParamSet& target, const ParamSet& source, double m);

/// Largest relative error between analytic gradients and central differences
/// over every coordinate of every trainable parameter in `params`.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8). `order` 2 is the
/// two-point difference (f(x+h) - f(x-h)) / 2h; order 4 the five-point
/// stencil, whose O(h^4) truncation allows a larger h on sharp losses.
double GradCheck(const std::function<Var(Graph&)>& scalar_fn,
                 const std::vector<ParamSet*>& params, double h, int order = 2);

// ---------------------------------------------------------------------------
// Checkpoint container.
//
// Layout (all little-endian):
//   "SPKDCKPT" | u32 version | u32 value_bytes (4 or 8) | u32 entry count
//   entries: u32 name length, name, u8 kind, payload
//     kind 0 tensor: u64 rows, u64 cols, rows*cols values of value_bytes
//     kind 1 int:    i64
//     kind 2 real:   f64
//     kind 3 text:   u64 length, bytes
//   u64 FNV-1a hash of every preceding byte
class Archive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  explicit Archive(int value_bytes = 8);

  void PutTensor(const std::string& name, const Tensor& t);
  void PutInt(const std::string& name, std::int64_t v);
  void PutReal(const std::string& name, double v);
  void PutText(const std::string& name, const std::string& v);
  void PutParams(const std::string& prefix, const ParamSet& params);
  void PutAdam(const std::string& prefix, const AdamState& state);

  bool Has(const std::string& name) const;
  const Tensor& GetTensor(const std::string& name) const;
  std::int64_t GetInt(const std::string& name) const;
  double GetReal(const std::string& name) const;
  const std::string& GetText(const std::string& name) const;
  /// Overwrites values of an existing ParamSet with the stored ones.
  void GetParams(const std::string& prefix, ParamSet& params) const;
  void GetAdam(const std::string& prefix, const ParamSet& params,
               AdamState& state) const;

  int value_bytes() const { return value_bytes_; }

  std::string Serialize() const;
  static Archive Deserialize(const std::string& bytes);
  void Save(const std::string& path) const;
  static Archive Load(const std::string& path);

 private:
  struct Entry {
    int kind = 0;
    Tensor tensor;
    std::int64_t integer = 0;
    double real = 0.0;
    std::string text;
  };
  const Entry& Find(const std::string& name, int kind) const;

  int value_bytes_;
  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
};

}  // namespace spkd::grad

#endif  // SPKD_GRAD_HPP_
