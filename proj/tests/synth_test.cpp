// tests/synth_test.cpp

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

#include "doctest.h"
#include "spkd/errors.hpp"
#include "spkd/synth.hpp"
#include "test_util.hpp"

using namespace spkd;
using namespace spkd::synth;
using spkd::testing::RandomMatrix;

namespace {

SynthConfig Small() { return SynthConfig{5, 3, 2, 3, 2, 6}; }

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("kl vanishes when posterior equals prior") {
  SynthNet net(Small());
  ParamSet ps;
  Rng rng(1);
  net.InitParams(ps, rng);
  for (const char* n : {"syn.prior.l1.w", "syn.prior.l1.b", "syn.post.l1.w", "syn.post.l1.b"}) {
    ps.Get(n).value.setZero();
  }
  Graph g;
  VaeTerms t = net.Loss(g, ps, {0, 1, 4}, g.Constant(RandomMatrix(3, 3, rng)),
                        g.Constant(RandomMatrix(3, 2, rng)), RandomMatrix(3, 2, rng), 1.0);
  CHECK(t.kl.scalar() == doctest::Approx(0.0));
  CHECK(t.recon.scalar() >= 0.0);
}

TEST_CASE("vae gradient on a three-frame item") {
  for (int seed = 0; seed < 5; ++seed) {
    SynthNet net(Small());
    ParamSet ps, spk;
    Rng rng(StreamSeed({static_cast<std::uint64_t>(seed), 5}));
    net.InitParams(ps, rng);
    spk.Add("e", RandomMatrix(1, 2, rng));
    const Matrix target = RandomMatrix(3, 3, rng), noise = RandomMatrix(3, 2, rng);
    auto fn = [&](Graph& g) {
      Var e = grad::RepeatRows(g.Parameter(spk.Get("e")), 3);
      return net.Loss(g, ps, {1, 1, 3}, g.Constant(target), e, noise, 0.7).total;
    };
    CHECK(grad::GradCheck(fn, {&ps, &spk}, 1e-5) < 1e-4);
  }
}

TEST_CASE("beta zero reduces to regression") {
  SynthNet net(Small());
  ParamSet ps;
  Rng rng(2);
  net.InitParams(ps, rng);
  const Matrix target = RandomMatrix(4, 3, rng), spk = RandomMatrix(4, 2, rng),
               noise = RandomMatrix(4, 2, rng);
  const std::vector<int> units{0, 2, 2, 4};
  auto grads = [&](bool recon_only) {
    Graph g;
    ps.ZeroGrad();
    VaeTerms t = net.Loss(g, ps, units, g.Constant(target), g.Constant(spk), noise, 0.0);
    g.Backward(recon_only ? t.recon : t.total);
    std::vector<Matrix> out;
    for (const auto& p : ps.params()) out.push_back(p.grad);
    return out;
  };
  const auto a = grads(false), b = grads(true);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("synthesize") {
  SynthNet net(Small());
  ParamSet ps;
  Rng rng(3);
  net.InitParams(ps, rng);
  RowVector e = RandomMatrix(1, 2, rng);
  Matrix out = net.Synthesize(ps, {0, 1, 2}, e);
  CHECK(out.rows() == 3);
  CHECK(out == net.Synthesize(ps, {0, 1, 2}, e));
  RowVector e2 = e;
  e2(0) += 0.5;
  CHECK((net.Synthesize(ps, {0, 1, 2}, e2) - out).cwiseAbs().maxCoeff() > 1e-6);
  CHECK_THROWS_AS(net.Synthesize(ps, {}, e), UnitError);
  CHECK_THROWS_AS(net.Synthesize(ps, {0, 5}, e), UnitError);

  Graph g;
  CHECK_THROWS_AS(net.Loss(g, ps, {0, 1}, g.Constant(RandomMatrix(3, 3, rng)),
                           g.Constant(RandomMatrix(3, 2, rng)), RandomMatrix(3, 2, rng), 1.0),
                  ShapeError);
}

TEST_CASE("trained toy model beats the global mean frame") {
  SynthConfig cfg{6, 4, 2, 4, 2, 16};
  SynthNet net(cfg);
  ParamSet ps;
  Rng rng(4);
  net.InitParams(ps, rng);
  const Matrix table = RandomMatrix(6, 4, rng);
  const Matrix speakers = RandomMatrix(3, 2, rng);
  auto item = [&](Rng& r, std::vector<int>& units, Matrix& target, Matrix& spk) {
    units.resize(20);
    target.resize(20, 4);
    spk.resize(20, 2);
    const int s = static_cast<int>(r.Index(3));
    for (int i = 0; i < 20; ++i) {
      units[i] = static_cast<int>(r.Index(6));
      target.row(i) = table.row(units[i]) + 0.3 * speakers(s, 0) * RowVector::Ones(4);
      for (int j = 0; j < 4; ++j) target(i, j) += r.Normal(0.0, 0.05);
      spk.row(i) = speakers.row(s);
    }
  };

  Rng train(10);
  RowVector mean = RowVector::Zero(4);
  grad::AdamState st = grad::InitAdam(ps);
  grad::AdamOptions opt;
  opt.lr = 1e-2;
  for (int step = 0; step < 600; ++step) {
    std::vector<int> u;
    Matrix t, s;
    item(train, u, t, s);
    mean += t.colwise().mean() / 600.0;
    Graph g;
    ps.ZeroGrad();
    g.Backward(net.Loss(g, ps, u, g.Constant(t), g.Constant(s), RandomMatrix(20, 2, train), 0.1).total);
    grad::AdamStep(ps, st, opt);
  }

  Rng held(99);
  double model_mse = 0.0, mean_mse = 0.0;
  for (int k = 0; k < 20; ++k) {
    std::vector<int> u;
    Matrix t, s;
    item(held, u, t, s);
    model_mse += (net.Synthesize(ps, u, s.row(0)) - t).squaredNorm();
    for (int i = 0; i < 20; ++i) mean_mse += (t.row(i) - mean).squaredNorm();
  }
  CHECK(model_mse < mean_mse);
}

}  // TEST_SUITE
