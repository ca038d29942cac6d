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

#include "dq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dq/kernels.hpp"

namespace dq {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void gaussian_init(Tensor2& t, std::mt19937_64& rng, double stddev) {
  require(stddev > 0.0, "gaussian_init: stddev must be positive");
  std::normal_distribution<double> dist(0.0, stddev);
  double* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = dist(rng);
}

void embedding_forward(std::span<const std::int32_t> ids, const Tensor2& table,
                       Tensor2& out) {
  require(out.rows() == static_cast<int>(ids.size()) && out.cols() == table.cols(),
          "embedding_forward: output shape mismatch");
  for (std::size_t t = 0; t < ids.size(); ++t) {
    std::int32_t id = ids[t];
    require(id >= 0 && id < table.rows(), "embedding_forward: id out of range");
    std::copy_n(table.row(id), table.cols(), out.row(static_cast<int>(t)));
  }
}

void embedding_backward(std::span<const std::int32_t> ids, const Tensor2& d_out,
                        Tensor2& d_table) {
  require(d_out.rows() == static_cast<int>(ids.size()) &&
              d_out.cols() == d_table.cols(),
          "embedding_backward: gradient shape mismatch");
  for (std::size_t t = 0; t < ids.size(); ++t) {
    std::int32_t id = ids[t];
    require(id >= 0 && id < d_table.rows(), "embedding_backward: id out of range");
    kernels::axpy(1.0, d_out.row(static_cast<int>(t)), d_table.row(id),
                  static_cast<std::size_t>(d_table.cols()));
  }
}

void conv1d_forward(const Tensor2& x, const Tensor2& w, const Tensor2& b, int k,
                    Tensor2& out) {
  require(k >= 1 && x.rows() >= k, "conv1d_forward: input shorter than kernel");
  require(w.cols() == k * x.cols(), "conv1d_forward: weight width mismatch");
  require(b.rows() == 1 && b.cols() == w.rows(), "conv1d_forward: bias shape mismatch");
  const int t_out = x.rows() - k + 1;
  const int filters = w.rows();
  require(out.rows() == t_out && out.cols() == filters,
          "conv1d_forward: output shape mismatch");
  const std::size_t win = static_cast<std::size_t>(w.cols());

  for (int t = 0; t < t_out; ++t) {
    const double* window = x.row(t);
    double* orow = out.row(t);
    int f = 0;
    for (; f + 4 <= filters; f += 4) {
      kernels::dot4(w.row(f), win, window, win, orow + f);
    }
    for (; f < filters; ++f) orow[f] = kernels::dot(w.row(f), window, win);
    for (f = 0; f < filters; ++f) orow[f] += b(0, f);
  }
}

void conv1d_backward(const Tensor2& x, const Tensor2& w, int k,
                     const Tensor2& d_out, Tensor2& d_x, Tensor2& d_w,
                     Tensor2& d_b) {
  const int t_out = x.rows() - k + 1;
  const int filters = w.rows();
  require(d_out.rows() == t_out && d_out.cols() == filters,
          "conv1d_backward: upstream gradient shape mismatch");
  require(d_x.same_shape(x) && d_w.same_shape(w),
          "conv1d_backward: gradient buffer shape mismatch");
  require(d_b.rows() == 1 && d_b.cols() == filters,
          "conv1d_backward: bias gradient shape mismatch");
  const std::size_t win = static_cast<std::size_t>(w.cols());
  const std::size_t stride = static_cast<std::size_t>(x.cols());

  for (int t = 0; t < t_out; ++t) {
    const double* grow = d_out.row(t);
    double* window = d_x.row(t);
    int f = 0;
    for (; f + 4 <= filters; f += 4) {
      kernels::axpy4(grow + f, w.row(f), win, window, win);
    }
    for (; f < filters; ++f) kernels::axpy(grow[f], w.row(f), window, win);
    for (f = 0; f < filters; ++f) d_b(0, f) += grow[f];
  }

  for (int f = 0; f < filters; ++f) {
    double* wgrad = d_w.row(f);
    int t = 0;
    for (; t + 4 <= t_out; t += 4) {
      double coeff[4] = {d_out(t, f), d_out(t + 1, f), d_out(t + 2, f),
                         d_out(t + 3, f)};
      kernels::axpy4(coeff, x.row(t), stride, wgrad, win);
    }
    for (; t < t_out; ++t) kernels::axpy(d_out(t, f), x.row(t), wgrad, win);
  }
}

void relu_forward(const Tensor2& x, Tensor2& out) {
  require(out.same_shape(x), "relu_forward: shape mismatch");
  kernels::relu(x.data(), out.data(), x.size());
}

void relu_backward(const Tensor2& x, const Tensor2& d_out, Tensor2& d_x) {
  require(d_out.same_shape(x) && d_x.same_shape(x), "relu_backward: shape mismatch");
  kernels::relu_backward(x.data(), d_out.data(), d_x.data(), x.size());
}

void maxpool1d_forward(const Tensor2& x, int size, int stride, Tensor2& out,
                       std::vector<std::int32_t>& argmax) {
  require(size >= 1 && stride >= 1, "maxpool1d_forward: bad geometry");
  require(x.rows() >= size, "maxpool1d_forward: input shorter than window");
  const int t_out = (x.rows() - size) / stride + 1;
  require(out.rows() == t_out && out.cols() == x.cols(),
          "maxpool1d_forward: output shape mismatch");
  argmax.assign(out.size(), 0);

  for (int ti = 0; ti < t_out; ++ti) {
    const int t0 = ti * stride;
    for (int c = 0; c < x.cols(); ++c) {
      double best = x(t0, c);
      int best_t = t0;
      for (int t = t0 + 1; t < t0 + size; ++t) {
        if (x(t, c) > best) {
          best = x(t, c);
          best_t = t;
        }
      }
      out(ti, c) = best;
      argmax[static_cast<std::size_t>(ti) * x.cols() + c] = best_t;
    }
  }
}

void maxpool1d_backward(std::span<const std::int32_t> argmax,
                        const Tensor2& d_out, Tensor2& d_x) {
  require(argmax.size() == d_out.size(), "maxpool1d_backward: argmax size mismatch");
  require(d_out.cols() == d_x.cols(), "maxpool1d_backward: column mismatch");
  for (int ti = 0; ti < d_out.rows(); ++ti) {
    for (int c = 0; c < d_out.cols(); ++c) {
      std::int32_t t = argmax[static_cast<std::size_t>(ti) * d_out.cols() + c];
      d_x(t, c) += d_out(ti, c);
    }
  }
}

void dense_forward(const Tensor2& x, const Tensor2& w, const Tensor2& b,
                   Tensor2& out) {
  require(x.size() == static_cast<std::size_t>(w.cols()),
          "dense_forward: input size mismatch");
  require(b.rows() == 1 && b.cols() == w.rows(), "dense_forward: bias shape mismatch");
  require(out.rows() == 1 && out.cols() == w.rows(),
          "dense_forward: output shape mismatch");
  const std::size_t in = x.size();
  double* orow = out.row(0);
  int o = 0;
  for (; o + 4 <= w.rows(); o += 4) {
    kernels::dot4(w.row(o), in, x.data(), in, orow + o);
  }
  for (; o < w.rows(); ++o) orow[o] = kernels::dot(w.row(o), x.data(), in);
  for (o = 0; o < w.rows(); ++o) orow[o] += b(0, o);
}

void dense_backward(const Tensor2& x, const Tensor2& w, const Tensor2& d_out,
                    Tensor2& d_x, Tensor2& d_w, Tensor2& d_b) {
  require(d_out.rows() == 1 && d_out.cols() == w.rows(),
          "dense_backward: upstream gradient shape mismatch");
  require(d_x.size() == x.size() && d_w.same_shape(w),
          "dense_backward: gradient buffer shape mismatch");
  require(d_b.rows() == 1 && d_b.cols() == w.rows(),
          "dense_backward: bias gradient shape mismatch");
  const std::size_t in = x.size();
  const double* grow = d_out.row(0);

  int o = 0;
  for (; o + 4 <= w.rows(); o += 4) {
    kernels::axpy4(grow + o, w.row(o), in, d_x.data(), in);
  }
  for (; o < w.rows(); ++o) kernels::axpy(grow[o], w.row(o), d_x.data(), in);

  for (o = 0; o < w.rows(); ++o) {
    kernels::axpy(grow[o], x.data(), d_w.row(o), in);
    d_b(0, o) += grow[o];
  }
}

std::vector<double> make_dropout_mask(std::mt19937_64& rng, std::size_t n,
                                      double drop_prob) {
  require(drop_prob >= 0.0 && drop_prob < 1.0, "make_dropout_mask: bad drop_prob");
  std::vector<double> mask(n);
  const double scale = 1.0 / (1.0 - drop_prob);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = unit(rng) < drop_prob ? 0.0 : scale;
  }
  return mask;
}

void dropout_forward(const Tensor2& x, std::span<const double> mask,
                     Tensor2& out) {
  require(mask.size() == x.size() && out.same_shape(x),
          "dropout_forward: shape mismatch");
  const double* p = x.data();
  double* q = out.data();
  for (std::size_t i = 0; i < mask.size(); ++i) q[i] = p[i] * mask[i];
}

void dropout_backward(const Tensor2& d_out, std::span<const double> mask,
                      Tensor2& d_x) {
  require(mask.size() == d_out.size() && d_x.same_shape(d_out),
          "dropout_backward: shape mismatch");
  const double* p = d_out.data();
  double* q = d_x.data();
  for (std::size_t i = 0; i < mask.size(); ++i) q[i] = p[i] * mask[i];
}

double sigmoid(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

BceOut bce_loss(double p, int label) {
  require(label == 0 || label == 1, "bce_loss: label must be 0 or 1");
  constexpr double kFloor = 1e-12;
  double pc = std::clamp(p, kFloor, 1.0 - kFloor);
  double loss = label == 1 ? -std::log(pc) : -std::log(1.0 - pc);
  return {loss, p - label};
}

void sgd_momentum_step(Tensor2& w, Tensor2& v, const Tensor2& g, double lr,
                       double momentum) {
  require(v.same_shape(w) && g.same_shape(w), "sgd_momentum_step: shape mismatch");
  kernels::sgd_update(w.data(), v.data(), g.data(), lr, momentum, w.size());
}

}  // namespace dq
