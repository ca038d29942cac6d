/* Copyright 2026 The DeepQuarantine Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef DQ_TENSOR_HPP_
#define DQ_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

// Dense 2-D tensors and the layer math of the classifier, all in double
// precision. Layers come as free forward/backward function pairs. Gradient
// outputs ACCUMULATE into their buffers (callers zero them first) except
// where a function documents that it overwrites; accumulation is what makes
// minibatch gradients and shared inputs compose.

namespace dq {

class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(int rows, int cols)
      : rows_(rows),
        cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
              0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int r, int c) {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const {
    return data_.data() + static_cast<std::size_t>(r) * cols_;
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  bool same_shape(const Tensor2& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Fills t with N(0, stddev^2) draws. stddev must be positive.
void gaussian_init(Tensor2& t, std::mt19937_64& rng, double stddev);

// Embedding lookup. table: V x E, out: ids.size() x E.
void embedding_forward(std::span<const std::int32_t> ids, const Tensor2& table,
                       Tensor2& out);
void embedding_backward(std::span<const std::int32_t> ids, const Tensor2& d_out,
                        Tensor2& d_table);

// 1-D convolution over the rows of x with full-width kernels, no padding,
// stride 1. x: T x E, w: F x (K*E) with filter f's taps row-major over
// (offset, channel), b: 1 x F, out: (T-K+1) x F.
void conv1d_forward(const Tensor2& x, const Tensor2& w, const Tensor2& b, int k,
                    Tensor2& out);
void conv1d_backward(const Tensor2& x, const Tensor2& w, int k,
                     const Tensor2& d_out, Tensor2& d_x, Tensor2& d_w,
                     Tensor2& d_b);

// Elementwise max(x, 0). relu_backward overwrites d_x.
void relu_forward(const Tensor2& x, Tensor2& out);
void relu_backward(const Tensor2& x, const Tensor2& d_out, Tensor2& d_x);

// Max pooling over rows, per column. out: ((T-size)/stride + 1) x F; argmax
// records the winning source row for each output cell (first on ties).
// A global max pool is maxpool1d with size = x.rows().
void maxpool1d_forward(const Tensor2& x, int size, int stride, Tensor2& out,
                       std::vector<std::int32_t>& argmax);
void maxpool1d_backward(std::span<const std::int32_t> argmax,
                        const Tensor2& d_out, Tensor2& d_x);

// Fully connected y = W x + b. x may have any shape with w.cols() elements
// (flattening is implicit in the row-major layout). w: Out x In, b: 1 x Out,
// out: 1 x Out.
void dense_forward(const Tensor2& x, const Tensor2& w, const Tensor2& b,
                   Tensor2& out);
void dense_backward(const Tensor2& x, const Tensor2& w, const Tensor2& d_out,
                    Tensor2& d_x, Tensor2& d_w, Tensor2& d_b);

// Inverted dropout: mask entries are 0 (dropped) or 1/(1-drop_prob), so the
// expected activation is unchanged and inference needs no rescaling.
std::vector<double> make_dropout_mask(std::mt19937_64& rng, std::size_t n,
                                      double drop_prob);
void dropout_forward(const Tensor2& x, std::span<const double> mask,
                     Tensor2& out);
// Overwrites d_x.
void dropout_backward(const Tensor2& d_out, std::span<const double> mask,
                      Tensor2& d_x);

// Numerically safe logistic function.
double sigmoid(double z);

// Binary cross-entropy of probability p against label y in {0,1}; p is
// clamped away from 0 and 1 for the log. d_logit is the loss gradient with
// respect to the pre-sigmoid logit, which reduces to p - y.
struct BceOut {
  double loss;
  double d_logit;
};
BceOut bce_loss(double p, int label);

// v = momentum * v - lr * g; w += v
void sgd_momentum_step(Tensor2& w, Tensor2& v, const Tensor2& g, double lr,
                       double momentum);

}  // namespace dq

#endif  // DQ_TENSOR_HPP_
