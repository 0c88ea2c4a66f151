// src/grad/optim.cpp

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
#include <string>

#include "spkd/errors.hpp"
#include "spkd/grad.hpp"

namespace spkd::grad {

AdamState InitAdam(const ParamSet& params) {
  AdamState state;
  for (const Param& p : params.params()) {
    AdamState::Slot slot;
    slot.name = p.name;
    slot.m = Tensor::Zero(p.value.rows(), p.value.cols());
    slot.v = Tensor::Zero(p.value.rows(), p.value.cols());
    state.slots.push_back(std::move(slot));
  }
  return state;
}

void AdamStep(ParamSet& params, AdamState& state, const AdamOptions& opts) {
  if (state.slots.size() != params.size()) {
    throw StateError("optimizer state has " + std::to_string(state.slots.size()) +
                     " slots for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = params.params()[i];
    const AdamState::Slot& s = state.slots[i];
    if (s.name != p.name || s.m.rows() != p.value.rows() ||
        s.m.cols() != p.value.cols()) {
      throw StateError("optimizer slot '" + s.name + "' does not match '" +
                       p.name + "'");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = params.params()[i];
    if (!p.trainable) continue;
    AdamState::Slot& s = state.slots[i];
    ++s.steps;
    s.m = opts.beta1 * s.m + (1.0 - opts.beta1) * p.grad;
    s.v = opts.beta2 * s.v + (1.0 - opts.beta2) * p.grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(s.steps));
    const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(s.steps));
    p.value.array() -= opts.lr * (s.m.array() / c1) /
                       ((s.v.array() / c2).sqrt() + opts.eps);
    if (!p.value.allFinite()) throw NumericsError("Adam produced non-finite '" + p.name + "'");
  }
}

void EmaUpdate(ParamSet& target, const ParamSet& source, double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("EMA momentum must lie in [0, 1]");
  if (!target.SameSchema(source)) throw StateError("EMA between different schemas");
  for (std::size_t i = 0; i < target.size(); ++i) {
    Param& t = target.params()[i];
    const Param& s = source.params()[i];
    t.value = m * t.value + (1.0 - m) * s.value;
  }
}

double GradCheck(const std::function<Var(Graph&)>& scalar_fn,
                 const std::vector<ParamSet*>& params, double h, int order) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  if (order != 2 && order != 4) throw ConfigError("stencil order must be 2 or 4");
  for (ParamSet* ps : params) ps->ZeroGrad();
  {
    Graph g;
    g.Backward(scalar_fn(g));
  }
  auto eval = [&] {
    Graph g;
    return scalar_fn(g).scalar();
  };
  double worst = 0.0;
  for (ParamSet* ps : params) {
    for (Param& p : ps->params()) {
      if (!p.trainable) continue;
      for (Eigen::Index k = 0; k < p.value.size(); ++k) {
        double& x = p.value.data()[k];
        const double saved = x;
        auto at = [&](double dx) {
          x = saved + dx;
          return eval();
        };
        double numeric;
        if (order == 2) {
          numeric = (at(h) - at(-h)) / (2.0 * h);
        } else {
          // Paired differences cancel exactly where f does not depend on x.
          const double d1 = at(h) - at(-h);
          const double d2 = at(2 * h) - at(-2 * h);
          numeric = (8.0 * d1 - d2) / (12.0 * h);
        }
        x = saved;
        const double analytic = p.grad.data()[k];
        const double denom =
            std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
      }
    }
  }
  return worst;
}

}  // namespace spkd::grad
