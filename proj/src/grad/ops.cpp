// src/grad/ops.cpp

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

namespace {

std::string Shape(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void RequireSameShape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + Shape(a.value()) + " vs " +
                     Shape(b.value()));
  }
}

void RequireLabels(const char* op, Var x, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw ShapeError(std::string(op) + ": label count does not match rows");
  }
  for (int l : labels) {
    if (l < 0 || l >= x.cols()) {
      throw LabelError(std::string(op) + ": label " + std::to_string(l) +
                       " out of range [0, " + std::to_string(x.cols()) + ")");
    }
  }
}

}  // namespace

Var MatMul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("MatMul: " + Shape(a.value()) + " * " + Shape(b.value()));
  }
  Graph& g = *a.graph;
  return g.Record("MatMul", a.value() * b.value(), {a, b},
                  [a, b](Graph& g, int self) {
                    const Tensor d = g.Grad(self);
                    if (g.RequiresGrad(a.id)) g.Accumulate(a.id, d * g.Value(b.id).transpose());
                    if (g.RequiresGrad(b.id)) g.Accumulate(b.id, g.Value(a.id).transpose() * d);
                  });
}

Var MatMulTransposed(Var a, Var b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("MatMulTransposed: " + Shape(a.value()) + " * (" +
                     Shape(b.value()) + ")^T");
  }
  Graph& g = *a.graph;
  return g.Record("MatMulTransposed", a.value() * b.value().transpose(), {a, b},
                  [a, b](Graph& g, int self) {
                    const Tensor d = g.Grad(self);
                    if (g.RequiresGrad(a.id)) g.Accumulate(a.id, d * g.Value(b.id));
                    if (g.RequiresGrad(b.id)) g.Accumulate(b.id, d.transpose() * g.Value(a.id));
                  });
}

Var Linear(Var x, Var weight, Var bias) {
  if (x.cols() != weight.cols() || bias.rows() != 1 ||
      bias.cols() != weight.rows()) {
    throw ShapeError("Linear: x " + Shape(x.value()) + ", W " +
                     Shape(weight.value()) + ", b " + Shape(bias.value()));
  }
  Graph& g = *x.graph;
  Tensor y = x.value() * weight.value().transpose();
  y.rowwise() += bias.value().row(0);
  return g.Record("Linear", std::move(y), {x, weight, bias},
                  [x, weight, bias](Graph& g, int self) {
                    const Tensor d = g.Grad(self);
                    if (g.RequiresGrad(x.id)) g.Accumulate(x.id, d * g.Value(weight.id));
                    if (g.RequiresGrad(weight.id)) {
                      g.Accumulate(weight.id, d.transpose() * g.Value(x.id));
                    }
                    if (g.RequiresGrad(bias.id)) g.Accumulate(bias.id, d.colwise().sum());
                  });
}

Var AddRow(Var x, Var row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("AddRow: " + Shape(x.value()) + " + " + Shape(row.value()));
  }
  Graph& g = *x.graph;
  Tensor y = x.value();
  y.rowwise() += row.value().row(0);
  return g.Record("AddRow", std::move(y), {x, row}, [x, row](Graph& g, int self) {
    const Tensor d = g.Grad(self);
    g.Accumulate(x.id, d);
    if (g.RequiresGrad(row.id)) g.Accumulate(row.id, d.colwise().sum());
  });
}

Var Add(Var a, Var b) {
  RequireSameShape("Add", a, b);
  return a.graph->Record("Add", a.value() + b.value(), {a, b},
                         [a, b](Graph& g, int self) {
                           const Tensor d = g.Grad(self);
                           g.Accumulate(a.id, d);
                           g.Accumulate(b.id, d);
                         });
}

Var Sub(Var a, Var b) {
  RequireSameShape("Sub", a, b);
  return a.graph->Record("Sub", a.value() - b.value(), {a, b},
                         [a, b](Graph& g, int self) {
                           const Tensor d = g.Grad(self);
                           g.Accumulate(a.id, d);
                           if (g.RequiresGrad(b.id)) g.Accumulate(b.id, -d);
                         });
}

Var Mul(Var a, Var b) {
  RequireSameShape("Mul", a, b);
  return a.graph->Record(
      "Mul", a.value().cwiseProduct(b.value()), {a, b},
      [a, b](Graph& g, int self) {
        const Tensor d = g.Grad(self);
        if (g.RequiresGrad(a.id)) g.Accumulate(a.id, d.cwiseProduct(g.Value(b.id)));
        if (g.RequiresGrad(b.id)) g.Accumulate(b.id, d.cwiseProduct(g.Value(a.id)));
      });
}

Var Scale(Var a, double s) {
  return a.graph->Record("Scale", a.value() * s, {a}, [a, s](Graph& g, int self) {
    g.Accumulate(a.id, g.Grad(self) * s);
  });
}

Var Tanh(Var x) {
  return x.graph->Record("Tanh", x.value().array().tanh().matrix(), {x},
                         [x](Graph& g, int self) {
                           const Tensor& y = g.Value(self);
                           g.Accumulate(x.id, (g.Grad(self).array() *
                                               (1.0 - y.array().square()))
                                                  .matrix());
                         });
}

Var Relu(Var x) {
  return x.graph->Record("Relu", x.value().cwiseMax(0.0), {x},
                         [x](Graph& g, int self) {
                           const Tensor& in = g.Value(x.id);
                           g.Accumulate(x.id, (in.array() > 0.0)
                                                  .select(g.Grad(self).array(), 0.0)
                                                  .matrix());
                         });
}

Var Exp(Var x) {
  return x.graph->Record("Exp", x.value().array().exp().matrix(), {x},
                         [x](Graph& g, int self) {
                           g.Accumulate(x.id, g.Grad(self).cwiseProduct(g.Value(self)));
                         });
}

namespace {

Tensor RowSoftmax(const Tensor& x) {
  Tensor y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mx = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - mx).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

}  // namespace

Var SoftmaxRows(Var x) {
  return x.graph->Record("SoftmaxRows", RowSoftmax(x.value()), {x},
                         [x](Graph& g, int self) {
                           const Tensor& y = g.Value(self);
                           const Tensor d = g.Grad(self);
                           Tensor dx(y.rows(), y.cols());
                           for (Eigen::Index i = 0; i < y.rows(); ++i) {
                             const double dot = d.row(i).dot(y.row(i));
                             dx.row(i) = y.row(i).cwiseProduct(
                                 (d.row(i).array() - dot).matrix());
                           }
                           g.Accumulate(x.id, dx);
                         });
}

Var LogSoftmaxRows(Var x) {
  const Tensor& in = x.value();
  Tensor y(in.rows(), in.cols());
  for (Eigen::Index i = 0; i < in.rows(); ++i) {
    const double mx = in.row(i).maxCoeff();
    const double lse = mx + std::log((in.row(i).array() - mx).exp().sum());
    y.row(i) = (in.row(i).array() - lse).matrix();
  }
  return x.graph->Record("LogSoftmaxRows", std::move(y), {x},
                         [x](Graph& g, int self) {
                           const Tensor& y = g.Value(self);
                           const Tensor d = g.Grad(self);
                           Tensor dx(y.rows(), y.cols());
                           for (Eigen::Index i = 0; i < y.rows(); ++i) {
                             const double total = d.row(i).sum();
                             dx.row(i) = d.row(i) - total * y.row(i).array().exp().matrix();
                           }
                           g.Accumulate(x.id, dx);
                         });
}

Var Sum(Var x) {
  Tensor y(1, 1);
  y(0, 0) = x.value().sum();
  return x.graph->Record("Sum", std::move(y), {x}, [x](Graph& g, int self) {
    const double d = g.Grad(self)(0, 0);
    g.Accumulate(x.id, Tensor::Constant(g.Value(x.id).rows(), g.Value(x.id).cols(), d));
  });
}

Var Mean(Var x) {
  if (x.value().size() == 0) throw ShapeError("Mean of an empty tensor");
  Tensor y(1, 1);
  y(0, 0) = x.value().mean();
  return x.graph->Record("Mean", std::move(y), {x}, [x](Graph& g, int self) {
    const Tensor& in = g.Value(x.id);
    const double d = g.Grad(self)(0, 0) / static_cast<double>(in.size());
    g.Accumulate(x.id, Tensor::Constant(in.rows(), in.cols(), d));
  });
}

Var MeanRows(Var x) { return SegmentMean(x, 1); }

Var SegmentMean(Var x, Eigen::Index segments) {
  const Tensor& in = x.value();
  if (segments < 1 || in.rows() % segments != 0 || in.rows() == 0) {
    throw ShapeError("SegmentMean: " + std::to_string(in.rows()) +
                     " rows into " + std::to_string(segments) + " segments");
  }
  const Eigen::Index len = in.rows() / segments;
  Tensor y(segments, in.cols());
  for (Eigen::Index s = 0; s < segments; ++s) {
    y.row(s) = in.middleRows(s * len, len).colwise().mean();
  }
  return x.graph->Record("SegmentMean", std::move(y), {x},
                         [x, segments, len](Graph& g, int self) {
                           const Tensor d = g.Grad(self);
                           Tensor dx(segments * len, d.cols());
                           for (Eigen::Index s = 0; s < segments; ++s) {
                             dx.middleRows(s * len, len).rowwise() =
                                 d.row(s) / static_cast<double>(len);
                           }
                           g.Accumulate(x.id, dx);
                         });
}

Var Mse(Var a, Var b) {
  RequireSameShape("Mse", a, b);
  if (a.value().size() == 0) throw ShapeError("Mse of empty tensors");
  const Tensor diff = a.value() - b.value();
  Tensor y(1, 1);
  y(0, 0) = diff.squaredNorm() / static_cast<double>(diff.size());
  return a.graph->Record("Mse", std::move(y), {a, b},
                         [a, b, diff](Graph& g, int self) {
                           const Tensor da = diff * (2.0 * g.Grad(self)(0, 0) /
                                                     static_cast<double>(diff.size()));
                           g.Accumulate(a.id, da);
                           if (g.RequiresGrad(b.id)) g.Accumulate(b.id, -da);
                         });
}

Var CrossEntropyFromProbs(Var p, Var log_q) {
  RequireSameShape("CrossEntropyFromProbs", p, log_q);
  const double n = static_cast<double>(p.rows());
  Tensor y(1, 1);
  y(0, 0) = -p.value().cwiseProduct(log_q.value()).sum() / n;
  return p.graph->Record("CrossEntropyFromProbs", std::move(y), {p, log_q},
                         [p, log_q, n](Graph& g, int self) {
                           const double d = g.Grad(self)(0, 0) / n;
                           if (g.RequiresGrad(p.id)) g.Accumulate(p.id, -d * g.Value(log_q.id));
                           if (g.RequiresGrad(log_q.id)) {
                             g.Accumulate(log_q.id, -d * g.Value(p.id));
                           }
                         });
}

Var DiagGaussianKl(Var mu1, Var log_sigma1, Var mu2, Var log_sigma2) {
  RequireSameShape("DiagGaussianKl", mu1, log_sigma1);
  RequireSameShape("DiagGaussianKl", mu1, mu2);
  RequireSameShape("DiagGaussianKl", mu1, log_sigma2);
  const auto m1 = mu1.value().array(), m2 = mu2.value().array();
  const auto l1 = log_sigma1.value().array(), l2 = log_sigma2.value().array();
  const Eigen::ArrayXXd var1 = (2.0 * l1).exp();
  const Eigen::ArrayXXd inv_var2 = (-2.0 * l2).exp();
  const Eigen::ArrayXXd diff = m1 - m2;
  const Eigen::ArrayXXd kl =
      l2 - l1 + 0.5 * (var1 + diff.square()) * inv_var2 - 0.5;
  const double n = static_cast<double>(mu1.rows());
  Tensor y(1, 1);
  y(0, 0) = kl.sum() / n;
  return mu1.graph->Record(
      "DiagGaussianKl", std::move(y), {mu1, log_sigma1, mu2, log_sigma2},
      [=](Graph& g, int self) {
        const double d = g.Grad(self)(0, 0) / n;
        const Eigen::ArrayXXd dmu1 = diff * inv_var2;
        auto put = [&](Var v, const Eigen::ArrayXXd& a) {
          if (g.RequiresGrad(v.id)) g.Accumulate(v.id, (d * a).matrix());
        };
        put(mu1, dmu1);
        put(mu2, -dmu1);
        put(log_sigma1, var1 * inv_var2 - 1.0);
        put(log_sigma2, 1.0 - (var1 + diff.square()) * inv_var2);
      });
}

Var L2NormalizeRows(Var x) {
  const Tensor& in = x.value();
  Eigen::VectorXd norms = in.rowwise().norm();
  if ((norms.array() <= 0.0).any()) {
    throw NumericsError("L2NormalizeRows: zero-norm row");
  }
  Tensor y = norms.cwiseInverse().asDiagonal() * in;
  return x.graph->Record("L2NormalizeRows", std::move(y), {x},
                         [x, norms](Graph& g, int self) {
                           const Tensor& y = g.Value(self);
                           const Tensor d = g.Grad(self);
                           Tensor dx(y.rows(), y.cols());
                           for (Eigen::Index i = 0; i < y.rows(); ++i) {
                             const double dot = y.row(i).dot(d.row(i));
                             dx.row(i) = (d.row(i) - dot * y.row(i)) / norms(i);
                           }
                           g.Accumulate(x.id, dx);
                         });
}

Var ConcatCols(Var a, Var b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("ConcatCols: " + Shape(a.value()) + " | " + Shape(b.value()));
  }
  Tensor y(a.rows(), a.cols() + b.cols());
  y << a.value(), b.value();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return a.graph->Record("ConcatCols", std::move(y), {a, b},
                         [a, b, ca, cb](Graph& g, int self) {
                           const Tensor d = g.Grad(self);
                           if (g.RequiresGrad(a.id)) g.Accumulate(a.id, d.leftCols(ca));
                           if (g.RequiresGrad(b.id)) g.Accumulate(b.id, d.rightCols(cb));
                         });
}

Var SliceCols(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > x.cols()) {
    throw ShapeError("SliceCols out of range for " + Shape(x.value()));
  }
  return x.graph->Record("SliceCols", x.value().middleCols(start, count), {x},
                         [x, start, count](Graph& g, int self) {
                           Tensor dx = Tensor::Zero(x.rows(), x.cols());
                           dx.middleCols(start, count) = g.Grad(self);
                           g.Accumulate(x.id, dx);
                         });
}

Var SliceRows(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > x.rows()) {
    throw ShapeError("SliceRows out of range for " + Shape(x.value()));
  }
  return x.graph->Record("SliceRows", x.value().middleRows(start, count), {x},
                         [x, start, count](Graph& g, int self) {
                           Tensor dx = Tensor::Zero(x.rows(), x.cols());
                           dx.middleRows(start, count) = g.Grad(self);
                           g.Accumulate(x.id, dx);
                         });
}

Var RepeatRows(Var x, Eigen::Index times) {
  if (times < 1) throw ShapeError("RepeatRows: times must be >= 1");
  const Tensor& in = x.value();
  Tensor y(in.rows() * times, in.cols());
  for (Eigen::Index i = 0; i < in.rows(); ++i) {
    y.middleRows(i * times, times).rowwise() = in.row(i);
  }
  return x.graph->Record("RepeatRows", std::move(y), {x},
                         [x, times](Graph& g, int self) {
                           const Tensor d = g.Grad(self);
                           Tensor dx(x.rows(), d.cols());
                           for (Eigen::Index i = 0; i < x.rows(); ++i) {
                             dx.row(i) = d.middleRows(i * times, times).colwise().sum();
                           }
                           g.Accumulate(x.id, dx);
                         });
}

Var GatherRows(Var table, const std::vector<int>& ids) {
  const Tensor& t = table.value();
  Tensor y(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) {
      throw ShapeError("GatherRows: id " + std::to_string(ids[i]) +
                       " outside table of " + std::to_string(t.rows()) + " rows");
    }
    y.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  return table.graph->Record("GatherRows", std::move(y), {table},
                             [table, ids](Graph& g, int self) {
                               const Tensor d = g.Grad(self);
                               Tensor dt = Tensor::Zero(table.rows(), table.cols());
                               for (std::size_t i = 0; i < ids.size(); ++i) {
                                 dt.row(ids[i]) += d.row(static_cast<Eigen::Index>(i));
                               }
                               g.Accumulate(table.id, dt);
                             });
}

Var Pick(Var x, const std::vector<int>& labels) {
  RequireLabels("Pick", x, labels);
  Tensor y(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, 0) = x.value()(i, labels[i]);
  return x.graph->Record("Pick", std::move(y), {x}, [x, labels](Graph& g, int self) {
    const Tensor d = g.Grad(self);
    Tensor dx = Tensor::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) dx(i, labels[i]) = d(i, 0);
    g.Accumulate(x.id, dx);
  });
}

Var AngularMargin(Var cosines, const std::vector<int>& labels, double margin) {
  RequireLabels("AngularMargin", cosines, labels);
  const double cm = std::cos(margin), sm = std::sin(margin);
  Tensor y = cosines.value();
  std::vector<double> slope(labels.size());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double c = std::clamp(y(i, labels[i]), -1.0, 1.0);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    y(i, labels[i]) = c * cm - s * sm;
    // d/dc [c cos m - sqrt(1 - c^2) sin m]; the sqrt term is dropped at |c| = 1.
    slope[i] = s > 1e-12 ? cm + c * sm / s : cm;
  }
  return cosines.graph->Record("AngularMargin", std::move(y), {cosines},
                               [cosines, labels, slope](Graph& g, int self) {
                                 Tensor dx = g.Grad(self);
                                 for (Eigen::Index i = 0; i < dx.rows(); ++i) {
                                   dx(i, labels[i]) *= slope[i];
                                 }
                                 g.Accumulate(cosines.id, dx);
                               });
}

Var StopGradient(Var x) { return x.graph->Constant(x.value()); }

}  // namespace spkd::grad
