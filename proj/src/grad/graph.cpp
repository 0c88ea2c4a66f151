// src/grad/graph.cpp

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

#include <cmath>
#include <string>

#include "spkd/errors.hpp"
#include "spkd/grad.hpp"

namespace spkd::grad {

Param& ParamSet::Add(const std::string& name, Tensor value, bool trainable) {
  if (index_.count(name)) throw StateError("duplicate parameter '" + name + "'");
  index_.emplace(name, params_.size());
  Param& p = params_.emplace_back();
  p.name = name;
  p.grad = Tensor::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  p.trainable = trainable;
  return p;
}

bool ParamSet::Has(std::string_view name) const {
  return index_.find(name) != index_.end();
}

Param& ParamSet::Get(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw StateError("no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Param& ParamSet::Get(std::string_view name) const {
  return const_cast<ParamSet*>(this)->Get(name);
}

void ParamSet::ZeroGrad() {
  for (Param& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

void ParamSet::SetTrainable(std::string_view prefix, bool trainable) {
  for (Param& p : params_) {
    if (std::string_view(p.name).starts_with(prefix)) p.trainable = trainable;
  }
}

bool ParamSet::SameSchema(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Param& a = params_[i];
    const Param& b = other.params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() ||
        a.value.cols() != b.value.cols()) {
      return false;
    }
  }
  return true;
}

std::size_t ParamSet::NumValues() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

double ParamSet::GradNorm() const {
  double acc = 0.0;
  for (const Param& p : params_) {
    if (p.trainable) acc += p.grad.squaredNorm();
  }
  return std::sqrt(acc);
}

const Tensor& Var::value() const { return graph->Value(id); }
Tensor Var::grad() const { return graph->Grad(id); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) {
    throw ShapeError("scalar() on a " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()) + " tensor");
  }
  return v(0, 0);
}

Var Graph::Constant(Tensor value) {
  if (!value.allFinite()) throw NumericsError("non-finite constant");
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::Input(Tensor value) {
  Var v = Constant(std::move(value));
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Graph::Parameter(Param& p) {
  Var v = Constant(p.value);
  Node& n = nodes_[v.id];
  n.requires_grad = p.trainable;
  n.param = p.trainable ? &p : nullptr;
  return v;
}

Var Graph::Record(const char* op, Tensor value,
                  std::initializer_list<Var> parents, BackwardFn backward) {
  if (!value.allFinite()) {
    throw NumericsError(std::string("non-finite output of ") + op);
  }
  bool needs_grad = false;
  for (const Var& p : parents) {
    if (p.graph != this) throw StateError(std::string(op) + ": mixed graphs");
    needs_grad = needs_grad || nodes_[p.id].requires_grad;
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Tensor Graph::Grad(int id) const {
  const Node& n = nodes_[id];
  if (n.has_grad) return n.grad;
  return Tensor::Zero(n.value.rows(), n.value.cols());
}

void Graph::Accumulate(int id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
    throw ShapeError("gradient shape does not match node shape");
  }
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Graph::Backward(Var loss) {
  if (loss.graph != this) throw StateError("Backward on a foreign Var");
  if (Value(loss.id).size() != 1) throw ShapeError("Backward needs a 1x1 loss");
  Accumulate(loss.id, Tensor::Ones(1, 1));
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    if (!n.grad.allFinite()) throw NumericsError("non-finite gradient");
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

}  // namespace spkd::grad
