// src/synth/synth.cpp

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

#include <string>

#include "spkd/errors.hpp"
#include "spkd/speaker.hpp"
#include "spkd/synth.hpp"

namespace spkd::synth {

using speaker::AddLinear;
using speaker::ApplyLinear;

SynthNet::SynthNet(const SynthConfig& cfg) : cfg_(cfg) {
  if (cfg.n_units < 1 || cfg.feature_dim < 1 || cfg.speaker_dim < 1 ||
      cfg.unit_dim < 1 || cfg.latent_dim < 1 || cfg.hidden_dim < 1) {
    throw ConfigError("invalid synthesizer dimensions");
  }
}

void SynthNet::InitParams(ParamSet& params, Rng& rng) const {
  Tensor table(cfg_.n_units, cfg_.unit_dim);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = rng.Normal();
  params.Add("syn.unit_emb", std::move(table));
  AddLinear(params, "syn.prior.l0", cfg_.unit_dim, cfg_.hidden_dim, rng);
  AddLinear(params, "syn.prior.l1", cfg_.hidden_dim, 2 * cfg_.latent_dim, rng);
  AddLinear(params, "syn.post.l0", cfg_.feature_dim + cfg_.speaker_dim,
            cfg_.hidden_dim, rng);
  AddLinear(params, "syn.post.l1", cfg_.hidden_dim, 2 * cfg_.latent_dim, rng);
  AddLinear(params, "syn.dec.l0", cfg_.latent_dim + cfg_.speaker_dim,
            cfg_.hidden_dim, rng);
  AddLinear(params, "syn.dec.l1", cfg_.hidden_dim, cfg_.feature_dim, rng);
}

void SynthNet::CheckUnits(const std::vector<int>& units) const {
  if (units.empty()) throw UnitError("empty unit sequence");
  for (int u : units) {
    if (u < 0 || u >= cfg_.n_units) {
      throw UnitError("unit " + std::to_string(u) + " outside [0, " +
                      std::to_string(cfg_.n_units) + ")");
    }
  }
}

VaeTerms SynthNet::Loss(Graph& g, ParamSet& params,
                        const std::vector<int>& units, Var target, Var speaker,
                        const Tensor& noise, double beta) const {
  CheckUnits(units);
  const auto rows = static_cast<Eigen::Index>(units.size());
  if (target.rows() != rows || speaker.rows() != rows || noise.rows() != rows) {
    throw ShapeError("units, target, speaker and noise rows must agree (" +
                     std::to_string(rows) + " units, " +
                     std::to_string(target.rows()) + " target frames)");
  }
  if (target.cols() != cfg_.feature_dim || speaker.cols() != cfg_.speaker_dim ||
      noise.cols() != cfg_.latent_dim) {
    throw ShapeError("synthesizer input widths do not match its config");
  }
  const Eigen::Index dz = cfg_.latent_dim;

  Var emb = grad::GatherRows(g.Parameter(params.Get("syn.unit_emb")), units);
  Var prior = ApplyLinear(g, params, "syn.prior.l1",
                          grad::Tanh(ApplyLinear(g, params, "syn.prior.l0", emb)));
  Var mu_p = grad::SliceCols(prior, 0, dz);
  Var ls_p = grad::SliceCols(prior, dz, dz);

  Var post_in = grad::ConcatCols(target, speaker);
  Var post = ApplyLinear(g, params, "syn.post.l1",
                         grad::Tanh(ApplyLinear(g, params, "syn.post.l0", post_in)));
  Var mu_q = grad::SliceCols(post, 0, dz);
  Var ls_q = grad::SliceCols(post, dz, dz);

  Var z = grad::Add(mu_q, grad::Mul(grad::Exp(ls_q), g.Constant(noise)));
  Var decoded = ApplyLinear(
      g, params, "syn.dec.l1",
      grad::Tanh(ApplyLinear(g, params, "syn.dec.l0", grad::ConcatCols(z, speaker))));

  VaeTerms out;
  out.decoded = decoded;
  out.recon = grad::Mse(decoded, target);
  out.kl = grad::DiagGaussianKl(mu_q, ls_q, mu_p, ls_p);
  out.total = grad::Add(out.recon, grad::Scale(out.kl, beta));
  return out;
}

Matrix SynthNet::Synthesize(const ParamSet& params,
                            const std::vector<int>& units,
                            const RowVector& speaker) const {
  CheckUnits(units);
  if (speaker.size() != cfg_.speaker_dim) {
    throw ShapeError("speaker embedding has " + std::to_string(speaker.size()) +
                     " entries, expected " + std::to_string(cfg_.speaker_dim));
  }
  Graph g;
  auto& ps = const_cast<ParamSet&>(params);  // forward only
  Var emb = grad::GatherRows(g.Parameter(ps.Get("syn.unit_emb")), units);
  Var prior = ApplyLinear(g, ps, "syn.prior.l1",
                          grad::Tanh(ApplyLinear(g, ps, "syn.prior.l0", emb)));
  Var z = grad::SliceCols(prior, 0, cfg_.latent_dim);
  Tensor spk = speaker.replicate(static_cast<Eigen::Index>(units.size()), 1);
  Var decoded = ApplyLinear(
      g, ps, "syn.dec.l1",
      grad::Tanh(ApplyLinear(g, ps, "syn.dec.l0",
                             grad::ConcatCols(z, g.Constant(std::move(spk))))));
  return decoded.value();
}

}  // namespace spkd::synth
