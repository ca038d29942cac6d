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

#include "dq/kernels.hpp"

namespace dq::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void dot4_scalar(const double* a, std::size_t lda, const double* b,
                 std::size_t n, double* out) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s0 += a[i] * b[i];
    s1 += a[lda + i] * b[i];
    s2 += a[2 * lda + i] * b[i];
    s3 += a[3 * lda + i] * b[i];
  }
  out[0] = s0;
  out[1] = s1;
  out[2] = s2;
  out[3] = s3;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpy4_scalar(const double* a, const double* x, std::size_t ldx, double* y,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += a[0] * x[i] + a[1] * x[ldx + i] + a[2] * x[2 * ldx + i] +
            a[3] * x[3 * ldx + i];
  }
}

void sgd_update_scalar(double* w, double* v, const double* g, double lr,
                       double momentum, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] - lr * g[i];
    w[i] += v[i];
  }
}

void relu_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(const double* x, const double* dy, double* dx,
                          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{"scalar",
                       dot_scalar,
                       dot4_scalar,
                       axpy_scalar,
                       axpy4_scalar,
                       sgd_update_scalar,
                       relu_scalar,
                       relu_backward_scalar};
  return ops;
}

}  // namespace dq::kernels
