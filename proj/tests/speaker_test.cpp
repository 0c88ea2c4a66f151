// tests/speaker_test.cpp

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
#include <numeric>

#include "doctest.h"
#include "spkd/errors.hpp"
#include "spkd/speaker.hpp"
#include "test_util.hpp"

using namespace spkd;
using namespace spkd::speaker;
using spkd::testing::RandomMatrix;

namespace {

DinoState TestState(int k, double tt, double ts, double mc = 0.9) {
  DinoConfig c;
  c.out_dim = k;
  c.teacher_temp = tt;
  c.student_temp = ts;
  c.center_momentum = mc;
  return MakeDinoState(c, ParamSet{});
}

}  // namespace

TEST_SUITE("speaker") {

TEST_CASE("encoder forward") {
  EncoderConfig cfg{5, 7, 2, 3};
  EncoderNet net(cfg);
  ParamSet ps;
  Rng rng(1);
  net.InitParams(ps, rng);

  Matrix frame = RandomMatrix(1, 5, rng);
  Matrix constant = frame.replicate(9, 1);
  CHECK((net.Encode(ps, constant) - net.Encode(ps, frame)).cwiseAbs().maxCoeff() < 1e-12);

  Matrix x = RandomMatrix(11, 5, rng);
  Matrix perm(11, 5);
  for (int i = 0; i < 11; ++i) perm.row(i) = x.row((i * 4) % 11);
  CHECK((net.Encode(ps, x) - net.Encode(ps, perm)).cwiseAbs().maxCoeff() < 1e-12);

  Matrix stacked = RandomMatrix(12, 5, rng);
  Graph g;
  Var e = net.Forward(g, ps, g.Constant(stacked), 3);
  Matrix want = spkd::testing::OracleEncode(ps, stacked, 3, 2);
  CHECK((e.value() - want).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(net.Encode(ps, RandomMatrix(4, 6, rng)), ShapeError);
}

TEST_CASE("dino head has three affine layers") {
  DinoHead head(HeadConfig{3, 6, 8});
  ParamSet ps;
  Rng rng(2);
  head.InitParams(ps, rng);
  CHECK(ps.size() == 6);
  Matrix e = RandomMatrix(4, 3, rng);
  Graph g;
  Var out = head.Forward(g, ps, g.Constant(e));
  CHECK((out.value() - spkd::testing::OracleHead(ps, e)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dino loss worked examples") {
  DinoState uni = TestState(2, 1.0, 1.0);
  Graph g;
  Var l = DinoLoss(g.Constant(Tensor::Zero(1, 2)), g.Constant(Tensor::Zero(1, 2)), uni);
  CHECK(l.scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  Tensor t(1, 2), s(1, 2);
  t << 20.0, -20.0;
  s << std::log(3.0), 0.0;
  Var l2 = DinoLoss(g.Constant(t), g.Constant(s), uni);
  // p_t = (1 - e^-40, e^-40) / ..., log q = (ln .75, ln .25).
  const double pt0 = 1.0 / (1.0 + std::exp(-40.0));
  CHECK(l2.scalar() == doctest::Approx(-(pt0 * std::log(0.75) + (1 - pt0) * std::log(0.25))).epsilon(1e-14));
  CHECK(l2.scalar() == doctest::Approx(0.2877).epsilon(1e-4));

  CHECK_THROWS_AS(DinoLoss(g.Constant(Tensor::Zero(1, 3)), g.Constant(Tensor::Zero(1, 3)), uni), ShapeError);
}

TEST_CASE("dino loss matches the direct formula") {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(StreamSeed({static_cast<std::uint64_t>(trial), 4}));
    const int k = 2 + static_cast<int>(rng.Index(20));
    const int n = 1 + static_cast<int>(rng.Index(5));
    DinoState st = TestState(k, rng.Uniform(0.02, 1.0), rng.Uniform(0.05, 1.0));
    st.center = RandomMatrix(1, k, rng);
    Tensor t = RandomMatrix(n, k, rng, 3.0), s = RandomMatrix(n, k, rng, 3.0);
    Graph g;
    Var tv = g.Input(t), sv = g.Input(s);
    Var loss = DinoLoss(tv, sv, st);
    const double want = spkd::testing::OracleDino(t, s, st.center, st.config.teacher_temp,
                                                  st.config.student_temp);
    CHECK(std::abs(loss.scalar() - want) < 1e-10);
    CHECK(loss.scalar() >= 0.0);
    g.Backward(loss);
    CHECK(tv.grad().isZero());

    // Student gradient against central differences of the oracle.
    double worst = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      Tensor sp = s, sm = s;
      sp.data()[i] += 1e-5;
      sm.data()[i] -= 1e-5;
      const double fd = (spkd::testing::OracleDino(t, sp, st.center, st.config.teacher_temp, st.config.student_temp) -
                         spkd::testing::OracleDino(t, sm, st.center, st.config.teacher_temp, st.config.student_temp)) / 2e-5;
      const double an = sv.grad().data()[i];
      worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd) + std::abs(an)));
    }
    CHECK(worst < 1e-4);

    // Shift invariance: student shift, and teacher shift matched by the center.
    Graph h;
    const double c = rng.Normal(0.0, 5.0);
    DinoState shifted = st;
    shifted.center.array() += c;
    Var moved = DinoLoss(h.Constant((t.array() + c).matrix()), h.Constant((s.array() - c).matrix()), shifted);
    CHECK(std::abs(moved.scalar() - loss.scalar()) < 1e-9);
  }
}

TEST_CASE("single temperature mode") {
  DinoConfig c;
  c.out_dim = 3;
  c.single_temperature = true;
  CHECK(c.TeacherTemp() == c.student_temp);
}

TEST_CASE("center ema closed forms") {
  DinoState st = TestState(3, 0.04, 0.1, 1.0);
  st.center << 0.5, -0.5, 2.0;
  const RowVector before = st.center;
  UpdateCenter(st, Tensor::Constant(4, 3, 7.0));
  CHECK(st.center == before);

  DinoState s9 = TestState(3, 0.04, 0.1, 0.9);
  UpdateCenter(s9, Tensor::Constant(2, 3, 1.0));
  for (int i = 0; i < 3; ++i) CHECK(s9.center(i) == doctest::Approx(0.1).epsilon(1e-15));

  // Geometric series: C_n = mu (1 - m^n) from C_0 = 0.
  DinoState geo = TestState(2, 0.04, 0.1, 0.8);
  Tensor batch(3, 2);
  batch << 1.0, -2.0, 2.0, 0.0, 3.0, 2.0;
  for (int n = 1; n <= 40; ++n) {
    UpdateCenter(geo, batch);
    const double f = 1.0 - std::pow(0.8, n);
    CHECK(geo.center(0) == doctest::Approx(2.0 * f).epsilon(1e-12));
    CHECK(geo.center(1) == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(UpdateCenter(geo, Tensor::Zero(0, 2)), ShapeError);
}

TEST_CASE("teacher ema") {
  ParamSet student;
  student.Add("w", Tensor::Constant(1, 2, 0.0));
  DinoConfig c;
  c.teacher_momentum = 0.9;
  c.out_dim = 2;
  DinoState st = MakeDinoState(c, student);
  st.teacher.Get("w").value.setConstant(1.0);
  UpdateTeacher(st, student);
  CHECK(st.teacher.Get("w").value == Tensor::Constant(1, 2, 0.9));
  st.config.teacher_momentum = 1.0;
  UpdateTeacher(st, student);
  CHECK(st.teacher.Get("w").value == Tensor::Constant(1, 2, 0.9));
  st.config.teacher_momentum = 0.0;
  UpdateTeacher(st, student);
  CHECK(st.teacher.Get("w").value == student.Get("w").value);

  ParamSet other;
  other.Add("v", Tensor::Zero(1, 2));
  CHECK_THROWS_AS(UpdateTeacher(st, other), StateError);

  DinoState bad = st;
  bad.config.center_momentum = 1.5;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
}

TEST_CASE("aam softmax") {
  Graph g;
  Rng rng(5);
  Var one = AamSoftmaxLoss(g.Constant(RandomMatrix(3, 4, rng)), {0, 0, 0},
                           g.Constant(RandomMatrix(1, 4, rng)), 0.0, 1.0);
  CHECK(one.scalar() == doctest::Approx(0.0));

  // m = 0: cosine-softmax cross-entropy.
  Matrix e = RandomMatrix(5, 4, rng), w = RandomMatrix(3, 4, rng);
  std::vector<int> y{0, 2, 1, 1, 0};
  const double s = 7.0;
  double want = 0.0;
  for (int i = 0; i < 5; ++i) {
    RowVector z(3);
    for (int k = 0; k < 3; ++k) z(k) = s * e.row(i).dot(w.row(k)) / (e.row(i).norm() * w.row(k).norm());
    want -= std::log(spkd::testing::OracleSoftmax(z)(y[i]));
  }
  want /= 5.0;
  Var plain = AamSoftmaxLoss(g.Constant(e), y, g.Constant(w), 0.0, s);
  CHECK(std::abs(plain.scalar() - want) < 1e-10);

  // Rescaling an embedding changes nothing.
  Matrix e2 = e;
  e2.row(2) *= 13.0;
  e2.row(4) *= 0.25;
  Var scaled = AamSoftmaxLoss(g.Constant(e2), y, g.Constant(w), 0.3, s);
  Var base = AamSoftmaxLoss(g.Constant(e), y, g.Constant(w), 0.3, s);
  CHECK(scaled.scalar() == doctest::Approx(base.scalar()).epsilon(1e-14));

  // Aligned with its own class, orthogonal to the other.
  Matrix ea(1, 2), wa(2, 2);
  ea << 2.0, 0.0;
  wa << 1.0, 0.0, 0.0, 1.0;
  Var aligned = AamSoftmaxLoss(g.Constant(ea), {0}, g.Constant(wa), 0.2, 30.0);
  CHECK(aligned.scalar() == doctest::Approx(std::log1p(std::exp(-30.0 * std::cos(0.2)))).epsilon(1e-12));

  CHECK_THROWS_AS(AamSoftmaxLoss(g.Constant(e), {0, 3, 1, 1, 0}, g.Constant(w), 0.2, s), LabelError);
}

}  // TEST_SUITE
