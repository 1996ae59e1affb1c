// micrograd.cpp

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

#include "scoh/micrograd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace scoh::nn {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using NodePtr = std::shared_ptr<Node>;

Index NumElements(const Shape &shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape &shape) {
  std::ostringstream os;
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  return os.str();
}

namespace {

Tensor MakeResult(Shape shape, VectorXd value, std::vector<NodePtr> parents,
                  std::function<void(Node &)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = std::any_of(parents.begin(), parents.end(),
                                    [](const NodePtr &p) { return p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void RequireShape(bool ok, const std::string &op, const Shape &a, const Shape &b = {}) {
  Require(ok, ErrorKind::kSize, op + ": incompatible shapes " + ShapeString(a) +
                                    (b.empty() ? "" : " and " + ShapeString(b)));
}

void Require2d(const Tensor &t, const std::string &op) {
  RequireShape(t.shape().size() == 2, op + " needs a 2-D tensor", t.shape());
}

// Gradient sink helper: only touch parents that track gradients.
inline VectorXd *GradOf(Node &self, size_t i) {
  Node &p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.EnsureGrad();
  return &p.grad;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::Constant(Shape shape, VectorXd data) {
  Require(NumElements(shape) == data.size(), ErrorKind::kSize, "data does not match shape");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(std::move(node));
}

Tensor Tensor::Constant(const MatrixXd &m) {
  return Constant({m.rows(), m.cols()}, Map<const VectorXd>(m.data(), m.size()));
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  Index n = NumElements(shape);
  Tensor t = Constant(std::move(shape), VectorXd::Zero(n));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::Parameter(Shape shape, VectorXd data) {
  Tensor t = Constant(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

double Tensor::item() const {
  Require(size() == 1, ErrorKind::kSize, "item() on a tensor with " + std::to_string(size()) + " elements");
  return node_->value(0);
}

Map<MatrixXd> Tensor::matrix() {
  Require2d(*this, "matrix");
  return {node_->value.data(), dim(0), dim(1)};
}

Map<const MatrixXd> Tensor::matrix() const {
  Require2d(*this, "matrix");
  return {node_->value.data(), dim(0), dim(1)};
}

void Tensor::Backward() {
  Require(size() == 1, ErrorKind::kContract, "backward needs a scalar");
  if (!node_->requires_grad) return;
  // Iterative post-order DFS; recurrent graphs are deep.
  std::vector<Node *> order;
  std::unordered_set<Node *> seen;
  std::vector<std::pair<Node *, size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto &[n, next] = stack.back();
    if (next < n->parents.size()) {
      Node *p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->EnsureGrad();
  node_->grad(0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node *n = *it;
    if (n->backward && n->grad.size()) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra ops

Tensor MatMul(const Tensor &a, const Tensor &b) {
  Require2d(a, "MatMul");
  Require2d(b, "MatMul");
  RequireShape(a.dim(1) == b.dim(0), "MatMul", a.shape(), b.shape());
  MatrixXd out = a.matrix() * b.matrix();
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  return MakeResult({m, n}, Map<VectorXd>(out.data(), out.size()), {a.node(), b.node()},
                    [m, k, n](Node &self) {
                      Map<const MatrixXd> g(self.grad.data(), m, n);
                      Map<const MatrixXd> av(self.parents[0]->value.data(), m, k);
                      Map<const MatrixXd> bv(self.parents[1]->value.data(), k, n);
                      if (auto *ga = GradOf(self, 0)) Map<MatrixXd>(ga->data(), m, k).noalias() += g * bv.transpose();
                      if (auto *gb = GradOf(self, 1)) Map<MatrixXd>(gb->data(), k, n).noalias() += av.transpose() * g;
                    });
}

Tensor Add(const Tensor &a, const Tensor &b) {
  RequireShape(a.shape() == b.shape(), "Add", a.shape(), b.shape());
  return MakeResult(a.shape(), a.value() + b.value(), {a.node(), b.node()}, [](Node &self) {
    if (auto *ga = GradOf(self, 0)) *ga += self.grad;
    if (auto *gb = GradOf(self, 1)) *gb += self.grad;
  });
}

Tensor Sub(const Tensor &a, const Tensor &b) {
  RequireShape(a.shape() == b.shape(), "Sub", a.shape(), b.shape());
  return MakeResult(a.shape(), a.value() - b.value(), {a.node(), b.node()}, [](Node &self) {
    if (auto *ga = GradOf(self, 0)) *ga += self.grad;
    if (auto *gb = GradOf(self, 1)) *gb -= self.grad;
  });
}

Tensor Mul(const Tensor &a, const Tensor &b) {
  RequireShape(a.shape() == b.shape(), "Mul", a.shape(), b.shape());
  return MakeResult(a.shape(), a.value().cwiseProduct(b.value()), {a.node(), b.node()},
                    [](Node &self) {
                      if (auto *ga = GradOf(self, 0)) *ga += self.grad.cwiseProduct(self.parents[1]->value);
                      if (auto *gb = GradOf(self, 1)) *gb += self.grad.cwiseProduct(self.parents[0]->value);
                    });
}

Tensor Scale(const Tensor &a, double s) {
  return MakeResult(a.shape(), a.value() * s, {a.node()}, [s](Node &self) {
    if (auto *ga = GradOf(self, 0)) *ga += s * self.grad;
  });
}

Tensor AddRowBias(const Tensor &a, const Tensor &bias) {
  Require2d(a, "AddRowBias");
  RequireShape(bias.size() == a.dim(1), "AddRowBias", a.shape(), bias.shape());
  const Index m = a.dim(0), n = a.dim(1);
  MatrixXd out = a.matrix();
  out.rowwise() += bias.value().transpose();
  return MakeResult({m, n}, Map<VectorXd>(out.data(), out.size()), {a.node(), bias.node()},
                    [m, n](Node &self) {
                      Map<const MatrixXd> g(self.grad.data(), m, n);
                      if (auto *ga = GradOf(self, 0)) *ga += self.grad;
                      if (auto *gb = GradOf(self, 1)) *gb += g.colwise().sum().transpose();
                    });
}

namespace {

template <typename Fwd, typename Deriv>
Tensor Pointwise(const Tensor &a, Fwd fwd, Deriv deriv) {
  VectorXd out = a.value().unaryExpr(fwd);
  return MakeResult(a.shape(), out, {a.node()}, [deriv](Node &self) {
    if (auto *ga = GradOf(self, 0)) {
      const VectorXd &x = self.parents[0]->value;
      for (Index i = 0; i < x.size(); ++i) (*ga)(i) += self.grad(i) * deriv(x(i), self.value(i));
    }
  });
}

}  // namespace

Tensor Relu(const Tensor &a) {
  return Pointwise(a, [](double x) { return x > 0.0 ? x : 0.0; },
                   [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor Elu(const Tensor &a, double alpha) {
  return Pointwise(
      a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Tensor Sigmoid(const Tensor &a) {
  return Pointwise(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Tanh(const Tensor &a) {
  return Pointwise(a, [](double x) { return std::tanh(x); },
                   [](double, double y) { return 1.0 - y * y; });
}

Tensor Transpose(const Tensor &a) {
  Require2d(a, "Transpose");
  const Index m = a.dim(0), n = a.dim(1);
  MatrixXd out = a.matrix().transpose();
  return MakeResult({n, m}, Map<VectorXd>(out.data(), out.size()), {a.node()}, [m, n](Node &self) {
    if (auto *ga = GradOf(self, 0))
      Map<MatrixXd>(ga->data(), m, n) += Map<const MatrixXd>(self.grad.data(), n, m).transpose();
  });
}

Tensor Reshape(const Tensor &a, Shape shape) {
  RequireShape(NumElements(shape) == a.size(), "Reshape", a.shape(), shape);
  return MakeResult(std::move(shape), a.value(), {a.node()}, [](Node &self) {
    if (auto *ga = GradOf(self, 0)) *ga += self.grad;
  });
}

Tensor Sum(const Tensor &a) {
  VectorXd out(1);
  out(0) = a.value().sum();
  return MakeResult({1}, out, {a.node()}, [](Node &self) {
    if (auto *ga = GradOf(self, 0)) ga->array() += self.grad(0);
  });
}

Tensor ConcatCols(const Tensor &a, const Tensor &b) {
  Require2d(a, "ConcatCols");
  Require2d(b, "ConcatCols");
  RequireShape(a.dim(0) == b.dim(0), "ConcatCols", a.shape(), b.shape());
  // Column-major: the columns of a then of b are contiguous blocks.
  VectorXd out(a.size() + b.size());
  out << a.value(), b.value();
  const Index na = a.size();
  return MakeResult({a.dim(0), a.dim(1) + b.dim(1)}, out, {a.node(), b.node()}, [na](Node &self) {
    if (auto *ga = GradOf(self, 0)) *ga += self.grad.head(na);
    if (auto *gb = GradOf(self, 1)) *gb += self.grad.tail(self.grad.size() - na);
  });
}

Tensor ConcatRows(const std::vector<Tensor> &parts) {
  Require(!parts.empty(), ErrorKind::kSize, "ConcatRows of nothing");
  const Index cols = parts[0].dim(1);
  Index rows = 0;
  std::vector<NodePtr> parents;
  std::vector<Index> offsets;
  for (const auto &p : parts) {
    Require2d(p, "ConcatRows");
    RequireShape(p.dim(1) == cols, "ConcatRows", parts[0].shape(), p.shape());
    offsets.push_back(rows);
    rows += p.dim(0);
    parents.push_back(p.node());
  }
  MatrixXd out(rows, cols);
  for (size_t i = 0; i < parts.size(); ++i) out.middleRows(offsets[i], parts[i].dim(0)) = parts[i].matrix();
  return MakeResult({rows, cols}, Map<VectorXd>(out.data(), out.size()), std::move(parents),
                    [rows, cols, offsets](Node &self) {
                      Map<const MatrixXd> g(self.grad.data(), rows, cols);
                      for (size_t i = 0; i < self.parents.size(); ++i) {
                        if (auto *gp = GradOf(self, i)) {
                          Index r = self.parents[i]->shape[0];
                          Map<MatrixXd>(gp->data(), r, cols) += g.middleRows(offsets[i], r);
                        }
                      }
                    });
}

Tensor ConcatChannels(const Tensor &a, const Tensor &b) {
  RequireShape(a.shape().size() == 3 && b.shape().size() == 3 && a.dim(1) == b.dim(1) &&
                   a.dim(2) == b.dim(2),
               "ConcatChannels", a.shape(), b.shape());
  const Index ca = a.dim(0), cb = b.dim(0), rest = a.dim(1) * a.dim(2);
  // Channel is the fastest index: view each as [C x rest] and stack rows.
  MatrixXd out(ca + cb, rest);
  out.topRows(ca) = Map<const MatrixXd>(a.value().data(), ca, rest);
  out.bottomRows(cb) = Map<const MatrixXd>(b.value().data(), cb, rest);
  return MakeResult({ca + cb, a.dim(1), a.dim(2)}, Map<VectorXd>(out.data(), out.size()),
                    {a.node(), b.node()}, [ca, cb, rest](Node &self) {
                      Map<const MatrixXd> g(self.grad.data(), ca + cb, rest);
                      if (auto *ga = GradOf(self, 0)) Map<MatrixXd>(ga->data(), ca, rest) += g.topRows(ca);
                      if (auto *gb = GradOf(self, 1)) Map<MatrixXd>(gb->data(), cb, rest) += g.bottomRows(cb);
                    });
}

Tensor SliceRow(const Tensor &a, Index i) {
  Require2d(a, "SliceRow");
  Require(i >= 0 && i < a.dim(0), ErrorKind::kSize, "SliceRow index out of range");
  const Index m = a.dim(0), n = a.dim(1);
  VectorXd out = a.matrix().row(i).transpose();
  return MakeResult({1, n}, out, {a.node()}, [i, m, n](Node &self) {
    if (auto *ga = GradOf(self, 0)) Map<MatrixXd>(ga->data(), m, n).row(i) += self.grad.transpose();
  });
}

Tensor Softmax(const Tensor &logits) {
  Require2d(logits, "Softmax");
  const Index m = logits.dim(0), n = logits.dim(1);
  MatrixXd p = logits.matrix();
  for (Index r = 0; r < m; ++r) {
    p.row(r).array() -= p.row(r).maxCoeff();
    p.row(r) = p.row(r).array().exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return MakeResult({m, n}, Map<VectorXd>(p.data(), p.size()), {logits.node()}, [m, n](Node &self) {
    if (auto *ga = GradOf(self, 0)) {
      Map<const MatrixXd> y(self.value.data(), m, n), g(self.grad.data(), m, n);
      Map<MatrixXd> gx(ga->data(), m, n);
      for (Index r = 0; r < m; ++r) {
        double dot = y.row(r).dot(g.row(r));
        gx.row(r) += (y.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

struct ConvGeometry {
  Index cin, h, w;       // input
  Index cout, hout;      // output (w unchanged)
  int kh, kw, stride;
};

// Patch matrix for Conv2d: row c + cin*(i + kh*j), column ho + hout*t.
MatrixXd Im2Col(const VectorXd &x, const ConvGeometry &g) {
  MatrixXd cols = MatrixXd::Zero(g.cin * g.kh * g.kw, g.hout * g.w);
  for (Index t = 0; t < g.w; ++t) {
    for (int j = 0; j < g.kw; ++j) {
      Index ts = t - (g.kw - 1) + j;
      if (ts < 0 || ts >= g.w) continue;
      for (Index ho = 0; ho < g.hout; ++ho) {
        for (int i = 0; i < g.kh; ++i) {
          Index hs = ho * g.stride + i;
          const double *src = x.data() + g.cin * (hs + g.h * ts);
          double *dst = cols.data() + (ho + g.hout * t) * cols.rows() + g.cin * (i + g.kh * j);
          std::copy(src, src + g.cin, dst);
        }
      }
    }
  }
  return cols;
}

void Col2ImAdd(const MatrixXd &cols, const ConvGeometry &g, VectorXd &x) {
  for (Index t = 0; t < g.w; ++t) {
    for (int j = 0; j < g.kw; ++j) {
      Index ts = t - (g.kw - 1) + j;
      if (ts < 0 || ts >= g.w) continue;
      for (Index ho = 0; ho < g.hout; ++ho) {
        for (int i = 0; i < g.kh; ++i) {
          Index hs = ho * g.stride + i;
          double *dst = x.data() + g.cin * (hs + g.h * ts);
          const double *src = cols.data() + (ho + g.hout * t) * cols.rows() + g.cin * (i + g.kh * j);
          for (Index c = 0; c < g.cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d(const Tensor &x, const Tensor &weight, const Tensor &bias, int stride_h) {
  RequireShape(x.shape().size() == 3 && weight.shape().size() == 4, "Conv2d", x.shape(), weight.shape());
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), weight.dim(0), 0,
                 static_cast<int>(weight.dim(2)), static_cast<int>(weight.dim(3)), stride_h};
  RequireShape(weight.dim(1) == g.cin && bias.size() == g.cout && g.h >= g.kh && stride_h >= 1,
               "Conv2d", x.shape(), weight.shape());
  g.hout = (g.h - g.kh) / g.stride + 1;

  auto cols = std::make_shared<MatrixXd>(Im2Col(x.value(), g));
  Map<const MatrixXd> wmat(weight.value().data(), g.cout, g.cin * g.kh * g.kw);
  MatrixXd y = wmat * *cols;
  y.colwise() += bias.value();
  return MakeResult({g.cout, g.hout, g.w}, Map<VectorXd>(y.data(), y.size()),
                    {x.node(), weight.node(), bias.node()}, [g, cols](Node &self) {
                      Map<const MatrixXd> gy(self.grad.data(), g.cout, g.hout * g.w);
                      const Index k = g.cin * g.kh * g.kw;
                      if (auto *gx = GradOf(self, 0)) {
                        Map<const MatrixXd> wmat(self.parents[1]->value.data(), g.cout, k);
                        MatrixXd gcols = wmat.transpose() * gy;
                        Col2ImAdd(gcols, g, *gx);
                      }
                      if (auto *gw = GradOf(self, 1))
                        Map<MatrixXd>(gw->data(), g.cout, k).noalias() += gy * cols->transpose();
                      if (auto *gb = GradOf(self, 2)) *gb += gy.rowwise().sum();
                    });
}

Tensor ConvTranspose2d(const Tensor &x, const Tensor &weight, const Tensor &bias, int stride_h,
                       int output_pad_h) {
  RequireShape(x.shape().size() == 3 && weight.shape().size() == 4, "ConvTranspose2d", x.shape(),
               weight.shape());
  const Index cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Index cout = weight.dim(1);
  const int kh = static_cast<int>(weight.dim(2)), kw = static_cast<int>(weight.dim(3));
  RequireShape(weight.dim(0) == cin && bias.size() == cout && stride_h >= 1 && output_pad_h >= 0,
               "ConvTranspose2d", x.shape(), weight.shape());
  const Index hout = (h - 1) * stride_h + kh + output_pad_h;
  // This op is the input-adjoint of a Conv2d mapping {cout, hout, w} -> {cin, h, w}.
  ConvGeometry g{cout, hout, w, cin, h, kh, kw, stride_h};

  Map<const MatrixXd> wmat(weight.value().data(), cin, cout * kh * kw);
  Map<const MatrixXd> xmat(x.value().data(), cin, h * w);
  MatrixXd cols = wmat.transpose() * xmat;
  VectorXd y = VectorXd::Zero(cout * hout * w);
  Col2ImAdd(cols, g, y);
  for (Index p = 0; p < hout * w; ++p) y.segment(p * cout, cout) += bias.value();

  return MakeResult({cout, hout, w}, y, {x.node(), weight.node(), bias.node()},
                    [g, cin, h, w, cout, kh, kw](Node &self) {
                      MatrixXd gcols = Im2Col(self.grad, g);  // [cout*kh*kw x h*w]
                      if (auto *gx = GradOf(self, 0)) {
                        Map<const MatrixXd> wmat(self.parents[1]->value.data(), cin, cout * kh * kw);
                        Map<MatrixXd>(gx->data(), cin, h * w).noalias() += wmat * gcols;
                      }
                      if (auto *gw = GradOf(self, 1)) {
                        Map<const MatrixXd> xmat(self.parents[0]->value.data(), cin, h * w);
                        Map<MatrixXd>(gw->data(), cin, cout * kh * kw).noalias() += xmat * gcols.transpose();
                      }
                      if (auto *gb = GradOf(self, 2))
                        *gb += Map<const MatrixXd>(self.grad.data(), cout, self.grad.size() / cout).rowwise().sum();
                    });
}

// ---------------------------------------------------------------------------
// Losses

Tensor SoftmaxCrossEntropy(const Tensor &logits, const std::vector<int> &labels) {
  Require2d(logits, "SoftmaxCrossEntropy");
  const Index m = logits.dim(0), n = logits.dim(1);
  Require(static_cast<Index>(labels.size()) == m, ErrorKind::kSize, "one label per row required");
  MatrixXd p = logits.matrix();
  double loss = 0.0;
  for (Index r = 0; r < m; ++r) {
    Require(labels[r] >= 0 && labels[r] < n, ErrorKind::kContract, "label out of range");
    double mx = p.row(r).maxCoeff();
    p.row(r).array() -= mx;
    double lse = std::log(p.row(r).array().exp().sum());
    loss -= p(r, labels[r]) - lse;
    p.row(r) = (p.row(r).array() - lse).exp().matrix();
  }
  loss /= static_cast<double>(m);
  Require(std::isfinite(loss), ErrorKind::kNumeric, "non-finite cross-entropy");
  VectorXd out(1);
  out(0) = loss;
  auto probs = std::make_shared<MatrixXd>(std::move(p));
  return MakeResult({1}, out, {logits.node()}, [probs, labels, m, n](Node &self) {
    if (auto *ga = GradOf(self, 0)) {
      Map<MatrixXd> g(ga->data(), m, n);
      MatrixXd d = *probs;
      for (Index r = 0; r < m; ++r) d(r, labels[r]) -= 1.0;
      g += (self.grad(0) / static_cast<double>(m)) * d;
    }
  });
}

Tensor CompressedMse(const Tensor &target, const Tensor &estimate, double c) {
  RequireShape(target.shape() == estimate.shape(), "CompressedMse", target.shape(), estimate.shape());
  Require((target.value().array() >= 0.0).all() && (estimate.value().array() >= 0.0).all(),
          ErrorKind::kContract, "compressed MSE needs nonnegative magnitudes");
  constexpr double kFloor = 1e-8;
  VectorXd tc = target.value().cwiseMax(kFloor).array().pow(c);
  VectorXd ec = estimate.value().cwiseMax(kFloor).array().pow(c);
  VectorXd diff = tc - ec;
  VectorXd out(1);
  out(0) = diff.squaredNorm();
  Require(std::isfinite(out(0)), ErrorKind::kNumeric, "non-finite compressed MSE");
  return MakeResult({1}, out, {target.node(), estimate.node()}, [diff, c](Node &self) {
    const double g = self.grad(0);
    for (int which = 0; which < 2; ++which) {
      VectorXd *gp = GradOf(self, which);
      if (!gp) continue;
      const VectorXd &v = self.parents[which]->value;
      const double sign = which == 0 ? 1.0 : -1.0;
      for (Index i = 0; i < v.size(); ++i) {
        if (v(i) < kFloor) continue;  // clamped region
        (*gp)(i) += g * sign * 2.0 * diff(i) * c * std::pow(v(i), c - 1.0);
      }
    }
  });
}

Tensor SquaredError(const Tensor &a, const Tensor &b) {
  Tensor d = Sub(a, b);
  return Sum(Mul(d, d));
}

// ---------------------------------------------------------------------------
// Layers

VectorXd GlorotUniform(Index count, Index fan_in, Index fan_out, std::mt19937_64 &rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  VectorXd v(count);
  for (Index i = 0; i < count; ++i) v(i) = dist(rng);
  return v;
}

Dense::Dense(Index in, Index out, std::mt19937_64 &rng)
    : weight(Tensor::Parameter({in, out}, GlorotUniform(in * out, in, out, rng))),
      bias(Tensor::Parameter({out}, VectorXd::Zero(out))) {}

Conv2dLayer::Conv2dLayer(Index in, Index out, int kh, int kw, int stride, std::mt19937_64 &rng)
    : weight(Tensor::Parameter({out, in, kh, kw},
                               GlorotUniform(out * in * kh * kw, in * kh * kw, out * kh * kw, rng))),
      bias(Tensor::Parameter({out}, VectorXd::Zero(out))),
      stride_h(stride) {}

ConvTranspose2dLayer::ConvTranspose2dLayer(Index in, Index out, int kh, int kw, int stride,
                                           int output_pad, std::mt19937_64 &rng)
    : weight(Tensor::Parameter({in, out, kh, kw},
                               GlorotUniform(in * out * kh * kw, in * kh * kw, out * kh * kw, rng))),
      bias(Tensor::Parameter({out}, VectorXd::Zero(out))),
      stride_h(stride),
      output_pad_h(output_pad) {}

BiRnn::BiRnn(Index in, Index hidden, std::mt19937_64 &rng)
    : w_in_fwd(Tensor::Parameter({in, hidden}, GlorotUniform(in * hidden, in, hidden, rng))),
      w_rec_fwd(Tensor::Parameter({hidden, hidden}, GlorotUniform(hidden * hidden, hidden, hidden, rng))),
      b_fwd(Tensor::Parameter({hidden}, VectorXd::Zero(hidden))),
      w_in_bwd(Tensor::Parameter({in, hidden}, GlorotUniform(in * hidden, in, hidden, rng))),
      w_rec_bwd(Tensor::Parameter({hidden, hidden}, GlorotUniform(hidden * hidden, hidden, hidden, rng))),
      b_bwd(Tensor::Parameter({hidden}, VectorXd::Zero(hidden))) {}

Tensor BiRnn::operator()(const Tensor &x) const {
  Require2d(x, "BiRnn");
  const Index steps = x.dim(0);
  const Index hid = hidden();
  auto run = [&](const Tensor &w_in, const Tensor &w_rec, const Tensor &b, bool reverse) {
    Tensor drive = AddRowBias(MatMul(x, w_in), b);
    std::vector<Tensor> states(steps);
    Tensor h = Tensor::Zeros({1, hid});
    for (Index s = 0; s < steps; ++s) {
      Index t = reverse ? steps - 1 - s : s;
      h = Tanh(Add(SliceRow(drive, t), MatMul(h, w_rec)));
      states[t] = h;
    }
    return ConcatRows(states);
  };
  return ConcatCols(run(w_in_fwd, w_rec_fwd, b_fwd, false), run(w_in_bwd, w_rec_bwd, b_bwd, true));
}

// ---------------------------------------------------------------------------
// Optimization

double GradientNorm(const std::vector<Tensor> &params) {
  double sq = 0.0;
  for (const auto &p : params)
    if (p.node()->grad.size()) sq += p.node()->grad.squaredNorm();
  return std::sqrt(sq);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto &p : params_) {
    m_.push_back(VectorXd::Zero(p.size()));
    v_.push_back(VectorXd::Zero(p.size()));
  }
}

void Adam::ZeroGrad() {
  for (auto &p : params_) p.ZeroGrad();
}

double Adam::Step() {
  const double norm = GradientNorm(params_);
  const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor &p = params_[i];
    if (!p.node()->grad.size()) continue;
    VectorXd g = p.node()->grad * clip;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    p.value().array() -= cfg_.learning_rate * (m_[i].array() / bc1) /
                         ((v_[i].array() / bc2).sqrt() + cfg_.epsilon);
  }
  return norm;
}

double GradientCheck(const std::function<Tensor()> &loss_fn, const std::vector<Tensor> &params,
                     double h) {
  std::vector<Tensor> ps = params;
  for (auto &p : ps) p.ZeroGrad();
  Tensor loss = loss_fn();
  loss.Backward();
  double worst = 0.0;
  for (auto &p : ps) {
    VectorXd analytic = p.node()->grad.size() ? p.node()->grad : VectorXd::Zero(p.size());
    VectorXd numeric(p.size());
    for (Index i = 0; i < p.size(); ++i) {
      double saved = p.value()(i);
      p.value()(i) = saved + h;
      double up = loss_fn().item();
      p.value()(i) = saved - h;
      double down = loss_fn().item();
      p.value()(i) = saved;
      numeric(i) = (up - down) / (2.0 * h);
    }
    double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
    worst = std::max(worst, (analytic - numeric).norm() / scale);
  }
  return worst;
}

}  // namespace scoh::nn
