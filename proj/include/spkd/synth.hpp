// include/spkd/synth.hpp

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

#ifndef SPKD_SYNTH_HPP_
#define SPKD_SYNTH_HPP_

#include <vector>

#include "spkd/grad.hpp"
#include "spkd/matrix.hpp"
#include "spkd/rng.hpp"

namespace spkd::synth {

using grad::Graph;
using grad::ParamSet;
using grad::Tensor;
using grad::Var;

struct SynthConfig {
  int n_units = 64;
  int feature_dim = 20;
  int speaker_dim = 32;
  int unit_dim = 16;
  int latent_dim = 8;
  int hidden_dim = 64;
};

struct VaeTerms {
  Var total;
  Var recon;
  Var kl;
  Var decoded;
};

/// Unit-conditioned conditional VAE over feature frames.
///
///   prior      unit embedding            -> (mu_p, log sigma_p)
///   posterior  [target frame, speaker]   -> (mu_q, log sigma_q)
///   decoder    [z, speaker]              -> frame
///
/// Parameters live under "syn.".
class SynthNet {
 public:
  explicit SynthNet(const SynthConfig& cfg);

  void InitParams(ParamSet& params, Rng& rng) const;

  /// Frame-synchronous VAE objective for a stack of frames.
  ///   units    one raw unit id per target row
  ///   target   rows x feature_dim
  ///   speaker  rows x speaker_dim (each item's embedding repeated per frame)
  ///   noise    rows x latent_dim standard-normal draws for reparameterization
  /// recon is the mean squared error over all entries, kl the mean over rows
  /// of the summed per-dimension KL(q || p); total = recon + beta * kl.
  VaeTerms Loss(Graph& g, ParamSet& params, const std::vector<int>& units,
                Var target, Var speaker, const Tensor& noise, double beta) const;

  /// Deterministic decode from the prior mean. Throws UnitError on an empty
  /// sequence or an out-of-range unit.
  Matrix Synthesize(const ParamSet& params, const std::vector<int>& units,
                    const RowVector& speaker) const;

  const SynthConfig& config() const { return cfg_; }

 private:
  void CheckUnits(const std::vector<int>& units) const;

  SynthConfig cfg_;
};

}  // namespace spkd::synth

#endif  // SPKD_SYNTH_HPP_
