// scoh/micrograd.hpp

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

// Small reverse-mode autodiff over dense float64 tensors.
//
// Storage is first-index-fastest: shape {d0, d1, d2} puts element (i, j, k) at
// i + d0 * (j + d1 * k). A 2-D tensor is therefore an Eigen column-major
// matrix, and a feature map {C, F, L} viewed as (C*F) x L has one frame per
// column.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scoh/error.hpp"

namespace scoh::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

Index NumElements(const Shape &shape);
std::string ShapeString(const Shape &shape);

struct Node {
  Shape shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;  // empty until backward touches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward;

  void EnsureGrad() {
    if (grad.size() != value.size()) grad = Eigen::VectorXd::Zero(value.size());
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor Constant(Shape shape, Eigen::VectorXd data);
  static Tensor Constant(const Eigen::MatrixXd &m);
  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Parameter(Shape shape, Eigen::VectorXd data);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape &shape() const { return node_->shape; }
  Index dim(size_t i) const { return node_->shape.at(i); }
  Index size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  Eigen::VectorXd &value() { return node_->value; }
  const Eigen::VectorXd &value() const { return node_->value; }
  Eigen::VectorXd &grad() {
    node_->EnsureGrad();
    return node_->grad;
  }
  double item() const;

  /// 2-D view (rows = dim 0).
  Eigen::Map<Eigen::MatrixXd> matrix();
  Eigen::Map<const Eigen::MatrixXd> matrix() const;

  void ZeroGrad() {
    if (node_->grad.size()) node_->grad.setZero();
  }
  /// Reverse sweep from this scalar.
  void Backward();

  const std::shared_ptr<Node> &node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// ---------------------------------------------------------------------------
// Operations

Tensor MatMul(const Tensor &a, const Tensor &b);
Tensor Add(const Tensor &a, const Tensor &b);
Tensor Sub(const Tensor &a, const Tensor &b);
Tensor Mul(const Tensor &a, const Tensor &b);
Tensor Scale(const Tensor &a, double s);
/// a [m x n] + bias [n] broadcast over rows.
Tensor AddRowBias(const Tensor &a, const Tensor &bias);
Tensor Relu(const Tensor &a);
Tensor Elu(const Tensor &a, double alpha = 1.0);
Tensor Sigmoid(const Tensor &a);
Tensor Tanh(const Tensor &a);
Tensor Transpose(const Tensor &a);
Tensor Reshape(const Tensor &a, Shape shape);
Tensor Sum(const Tensor &a);
/// [m x n1] | [m x n2] -> [m x (n1+n2)]
Tensor ConcatCols(const Tensor &a, const Tensor &b);
/// Rows stacked vertically; every part is [1 x n] or [r_i x n].
Tensor ConcatRows(const std::vector<Tensor> &parts);
/// {C1, H, W} and {C2, H, W} -> {C1 + C2, H, W}
Tensor ConcatChannels(const Tensor &a, const Tensor &b);
/// Row i of a 2-D tensor as [1 x n].
Tensor SliceRow(const Tensor &a, Index i);
/// Row-wise softmax of a 2-D tensor.
Tensor Softmax(const Tensor &logits);

/// Convolution over {C_in, H, W} with weight {C_out, C_in, kh, kw} and bias
/// {C_out}. Stride applies along H; W is padded with kw - 1 leading zeros so
/// the output keeps W columns. Output {C_out, (H - kh) / stride + 1, W}.
Tensor Conv2d(const Tensor &x, const Tensor &weight, const Tensor &bias, int stride_h);
/// Transpose of Conv2d along H (with output_pad extra rows), and the adjoint
/// time kernel along W. weight {C_in, C_out, kh, kw}. Output
/// {C_out, (H - 1) * stride + kh + output_pad, W}.
Tensor ConvTranspose2d(const Tensor &x, const Tensor &weight, const Tensor &bias, int stride_h,
                       int output_pad_h);

// ---------------------------------------------------------------------------
// Losses

/// Mean over rows of -log softmax(logits)[label]. labels are 0-based.
Tensor SoftmaxCrossEntropy(const Tensor &logits, const std::vector<int> &labels);
/// sum (target^c - max(estimate, 1e-8)^c)^2. Both must be nonnegative.
Tensor CompressedMse(const Tensor &target, const Tensor &estimate, double c = 0.3);
/// sum (a - b)^2
Tensor SquaredError(const Tensor &a, const Tensor &b);

// ---------------------------------------------------------------------------
// Layers

/// Glorot-uniform values, a = sqrt(6 / (fan_in + fan_out)).
Eigen::VectorXd GlorotUniform(Index count, Index fan_in, Index fan_out, std::mt19937_64 &rng);

struct Dense {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  Dense() = default;
  Dense(Index in, Index out, std::mt19937_64 &rng);
  Tensor operator()(const Tensor &x) const { return AddRowBias(MatMul(x, weight), bias); }
  std::vector<Tensor> parameters() const { return {weight, bias}; }
};

struct Conv2dLayer {
  Tensor weight;  // {out, in, kh, kw}
  Tensor bias;
  int stride_h = 1;

  Conv2dLayer() = default;
  Conv2dLayer(Index in, Index out, int kh, int kw, int stride, std::mt19937_64 &rng);
  Tensor operator()(const Tensor &x) const { return Conv2d(x, weight, bias, stride_h); }
  std::vector<Tensor> parameters() const { return {weight, bias}; }
};

struct ConvTranspose2dLayer {
  Tensor weight;  // {in, out, kh, kw}
  Tensor bias;
  int stride_h = 1;
  int output_pad_h = 0;

  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(Index in, Index out, int kh, int kw, int stride, int output_pad,
                       std::mt19937_64 &rng);
  Tensor operator()(const Tensor &x) const {
    return ConvTranspose2d(x, weight, bias, stride_h, output_pad_h);
  }
  std::vector<Tensor> parameters() const { return {weight, bias}; }
};

/// Bidirectional tanh recurrence over the rows of x [T x in]; output
/// [T x 2*hidden], forward states then backward states.
struct BiRnn {
  Tensor w_in_fwd, w_rec_fwd, b_fwd;
  Tensor w_in_bwd, w_rec_bwd, b_bwd;

  BiRnn() = default;
  BiRnn(Index in, Index hidden, std::mt19937_64 &rng);
  Index hidden() const { return w_rec_fwd.dim(0); }
  Tensor operator()(const Tensor &x) const;
  std::vector<Tensor> parameters() const {
    return {w_in_fwd, w_rec_fwd, b_fwd, w_in_bwd, w_rec_bwd, b_bwd};
  }
};

// ---------------------------------------------------------------------------
// Optimization

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 3.0;  // <= 0 disables clipping
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  /// Clips the global gradient norm, then applies one Adam update. Returns
  /// the pre-clip gradient norm.
  double Step();
  void ZeroGrad();

  double learning_rate() const { return cfg_.learning_rate; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  long steps() const { return step_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Eigen::VectorXd> m_, v_;
  AdamConfig cfg_;
  long step_ = 0;
};

/// Global L2 norm of the gradients of params.
double GradientNorm(const std::vector<Tensor> &params);

/// Largest relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// over params, using central differences with step h.
double GradientCheck(const std::function<Tensor()> &loss_fn, const std::vector<Tensor> &params,
                     double h = 1e-5);

}  // namespace scoh::nn
