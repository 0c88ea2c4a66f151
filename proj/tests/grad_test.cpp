// tests/grad_test.cpp

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
#include <limits>
#include <string>

#include "doctest.h"
#include "spkd/errors.hpp"
#include "spkd/grad.hpp"
#include "test_util.hpp"

using namespace spkd;
using namespace spkd::grad;
using spkd::testing::RandomMatrix;

TEST_SUITE("grad") {

TEST_CASE("elementary derivatives") {
  Graph g;
  Var x = g.Input(Tensor::Constant(1, 1, 3.0));
  g.Backward(Sum(Mul(x, x)));
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0).epsilon(1e-15));

  Graph h;
  Var p = SoftmaxRows(h.Constant(Tensor::Constant(1, 4, 0.7)));
  for (int i = 0; i < 4; ++i) CHECK(p.value()(0, i) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("shape and numeric errors") {
  Graph g;
  CHECK_THROWS_AS(Add(g.Constant(Tensor::Zero(2, 3)), g.Constant(Tensor::Zero(3, 2))), ShapeError);
  CHECK_THROWS_AS(MatMul(g.Constant(Tensor::Zero(2, 3)), g.Constant(Tensor::Zero(2, 3))), ShapeError);
  CHECK_THROWS_AS(Exp(g.Constant(Tensor::Constant(1, 1, 1000.0))), NumericsError);
  CHECK_THROWS_AS(g.Constant(Tensor::Constant(1, 1, std::numeric_limits<double>::quiet_NaN())), NumericsError);
}

TEST_CASE("gradcheck on smooth functions") {
  ParamSet ps;
  ps.Add("x", Tensor::Constant(1, 3, 1.0));
  auto linear = [&](Graph& g) {
    Tensor c(3, 1);
    c << 2.0, -1.0, 0.5;
    return Sum(MatMul(g.Parameter(ps.Get("x")), g.Constant(c)));
  };
  CHECK(GradCheck(linear, {&ps}, 1e-5) < 1e-9);

  ParamSet cube;
  cube.Add("x", Tensor::Constant(1, 1, 1.0));
  auto f = [&](Graph& g) {
    Var x = g.Parameter(cube.Get("x"));
    return Sum(Mul(x, Mul(x, x)));
  };
  CHECK(GradCheck(f, {&cube}, 1e-5) < 1e-8);
  CHECK_THROWS_AS(GradCheck(f, {&cube}, 1e-5, 3), ConfigError);
}

TEST_CASE("random three-layer net passes gradcheck") {
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(StreamSeed({static_cast<std::uint64_t>(seed), 3}));
    ParamSet ps;
    for (int l = 0; l < 3; ++l) {
      ps.Add("l" + std::to_string(l) + ".w", RandomMatrix(4, 4, rng, 0.5));
      ps.Add("l" + std::to_string(l) + ".b", RandomMatrix(1, 4, rng, 0.1));
    }
    const Tensor x = RandomMatrix(5, 4, rng);
    Tensor probs = RandomMatrix(5, 4, rng).cwiseAbs();
    for (int r = 0; r < 5; ++r) probs.row(r) /= probs.row(r).sum();
    auto fn = [&](Graph& g) {
      Var h = g.Constant(x);
      h = Tanh(Linear(h, g.Parameter(ps.Get("l0.w")), g.Parameter(ps.Get("l0.b"))));
      h = Relu(Linear(h, g.Parameter(ps.Get("l1.w")), g.Parameter(ps.Get("l1.b"))));
      h = Linear(h, g.Parameter(ps.Get("l2.w")), g.Parameter(ps.Get("l2.b")));
      Var a = CrossEntropyFromProbs(g.Constant(probs), LogSoftmaxRows(h));
      Var b = Mse(L2NormalizeRows(h), g.Constant(x));
      Var c = DiagGaussianKl(SliceCols(h, 0, 2), SliceCols(h, 2, 2),
                             g.Constant(Tensor::Zero(5, 2)), g.Constant(Tensor::Zero(5, 2)));
      return Add(Add(a, Mean(ConcatCols(b, c))), Scale(b, 0.3));
    };
    CHECK(GradCheck(fn, {&ps}, 1e-5) < 1e-4);
  }
}

TEST_CASE("kl closed forms") {
  Graph g;
  Tensor mu(1, 3);
  mu << 0.5, -1.0, 2.0;
  Var kl = DiagGaussianKl(g.Constant(mu), g.Constant(Tensor::Zero(1, 3)),
                          g.Constant(Tensor::Zero(1, 3)), g.Constant(Tensor::Zero(1, 3)));
  CHECK(kl.scalar() == doctest::Approx(mu.squaredNorm() / 2).epsilon(1e-14));
  Var zero = DiagGaussianKl(g.Constant(mu), g.Constant(mu), g.Constant(mu), g.Constant(mu));
  CHECK(std::abs(zero.scalar()) < 1e-15);
}

TEST_CASE("adam") {
  ParamSet ps;
  ps.Add("x", Tensor::Constant(1, 1, 0.0));
  AdamState st = InitAdam(ps);
  AdamOptions opts;
  opts.lr = 0.1;
  ps.ZeroGrad();
  AdamStep(ps, st, opts);
  CHECK(ps.Get("x").value(0, 0) == 0.0);

  ParamSet one;
  one.Add("x", Tensor::Constant(1, 1, 0.0));
  AdamState first = InitAdam(one);
  one.Get("x").grad(0, 0) = 1.0;
  AdamStep(one, first, opts);
  CHECK(std::abs(one.Get("x").value(0, 0) + 0.1) < 1e-6);

  ParamSet q;
  q.Add("x", Tensor::Zero(1, 1));
  AdamState qs = InitAdam(q);
  double prev = 2.0;
  for (int i = 0; i < 10; ++i) {
    Graph g;
    Var x = g.Parameter(q.Get("x"));
    Var d = Sub(x, g.Constant(Tensor::Constant(1, 1, 2.0)));
    q.ZeroGrad();
    g.Backward(Sum(Mul(d, d)));
    AdamStep(q, qs, opts);
    const double dist = std::abs(q.Get("x").value(0, 0) - 2.0);
    CHECK(dist < prev);
    prev = dist;
  }

  ParamSet other;
  other.Add("y", Tensor::Zero(1, 1));
  CHECK_THROWS_AS(AdamStep(other, qs, opts), StateError);
}

TEST_CASE("frozen parameters never move") {
  ParamSet ps;
  ps.Add("a", Tensor::Constant(1, 2, 1.0));
  ps.Add("b", Tensor::Constant(1, 2, 1.0), false);
  AdamState st = InitAdam(ps);
  for (int i = 0; i < 5; ++i) {
    Graph g;
    Var s = Sum(Mul(g.Parameter(ps.Get("a")), g.Parameter(ps.Get("b"))));
    ps.ZeroGrad();
    g.Backward(s);
    CHECK(ps.Get("b").grad.isZero());
    AdamStep(ps, st, AdamOptions{});
  }
  CHECK(ps.Get("b").value == Tensor::Constant(1, 2, 1.0));
  CHECK(ps.Get("a").value != Tensor::Constant(1, 2, 1.0));
}

TEST_CASE("ema update") {
  auto make = [](double v) {
    ParamSet p;
    p.Add("w", Tensor::Constant(2, 2, v));
    return p;
  };
  ParamSet src = make(0.0);
  ParamSet t = make(1.0);
  EmaUpdate(t, src, 1.0);
  CHECK(t.Get("w").value == Tensor::Constant(2, 2, 1.0));
  EmaUpdate(t, src, 0.9);
  CHECK(t.Get("w").value == Tensor::Constant(2, 2, 0.9));
  EmaUpdate(t, src, 0.0);
  CHECK(t.Get("w").value == src.Get("w").value);

  // Affine: m then m' equals m * m' for a fixed source.
  Rng rng(6);
  ParamSet s2;
  s2.Add("w", RandomMatrix(2, 2, rng));
  ParamSet a = make(0.3), b = make(0.3);
  EmaUpdate(a, s2, 0.7);
  EmaUpdate(a, s2, 0.6);
  EmaUpdate(b, s2, 0.7 * 0.6);
  CHECK((a.Get("w").value - b.Get("w").value).cwiseAbs().maxCoeff() < 1e-15);

  ParamSet wrong;
  wrong.Add("v", Tensor::Zero(2, 2));
  CHECK_THROWS_AS(EmaUpdate(t, wrong, 0.5), StateError);
}

TEST_CASE("archive round trip and corruption") {
  Rng rng(7);
  Archive ar;
  ar.PutTensor("t", RandomMatrix(3, 2, rng));
  ar.PutInt("i", -42);
  ar.PutReal("r", 0.125);
  ar.PutText("s", "hello");
  const std::string bytes = ar.Serialize();
  Archive back = Archive::Deserialize(bytes);
  CHECK(back.GetTensor("t") == ar.GetTensor("t"));
  CHECK(back.GetInt("i") == -42);
  CHECK(back.GetReal("r") == 0.125);
  CHECK(back.GetText("s") == "hello");
  CHECK(back.Serialize() == bytes);

  CHECK_THROWS_AS(Archive::Deserialize(bytes.substr(0, bytes.size() - 3)), FormatError);
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x5a;
  CHECK_THROWS_AS(Archive::Deserialize(flipped), FormatError);
  CHECK_THROWS(back.GetInt("missing"));
}

}  // TEST_SUITE
