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

#ifndef DQ_KERNELS_HPP_
#define DQ_KERNELS_HPP_

#include <cstddef>

// Inner loops of the network, in two flavors: a plain scalar reference and an
// AVX2 variant picked at runtime when the CPU supports it. The scalar build is
// the semantic ground truth; the vector build may differ by rounding (FMA,
// reduction order) and is equivalence-tested against it.
//
// Selection: automatic by default, overridable with DQ_KERNELS=scalar|avx2|auto
// in the environment, or programmatically via force_ops (tests).

namespace dq::kernels {

struct Ops {
  const char* name;

  // sum(a[i] * b[i])
  double (*dot)(const double* a, const double* b, std::size_t n);

  // Four dot products sharing the right-hand side:
  // out[j] = sum(a[j*lda + i] * b[i]). Shapes the conv and dense forward
  // passes so every load of b feeds four FMA chains.
  void (*dot4)(const double* a, std::size_t lda, const double* b,
               std::size_t n, double* out);

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // Four accumulations sharing the destination:
  // y[i] += sum_j(a[j] * x[j*ldx + i]). The backward-pass twin of dot4.
  void (*axpy4)(const double* a, const double* x, std::size_t ldx, double* y,
                std::size_t n);

  // v[i] = momentum * v[i] - lr * g[i]; w[i] += v[i]
  void (*sgd_update)(double* w, double* v, const double* g, double lr,
                     double momentum, std::size_t n);

  // y[i] = max(x[i], 0)
  void (*relu)(const double* x, double* y, std::size_t n);

  // dx[i] = x[i] > 0 ? dy[i] : 0
  void (*relu_backward)(const double* x, const double* dy, double* dx,
                        std::size_t n);
};

const Ops& scalar_ops();

// Null when this build or this CPU has no AVX2 path.
const Ops* avx2_ops();

// The selected implementation. First call reads DQ_KERNELS; an explicit choice
// that cannot be honored falls back with a warning on stderr.
const Ops& active();

// Test hooks. force_ops(nullptr) restores automatic selection.
void force_ops(const Ops* ops);

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void dot4(const double* a, std::size_t lda, const double* b,
                 std::size_t n, double* out) {
  active().dot4(a, lda, b, n, out);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  active().axpy(a, x, y, n);
}
inline void axpy4(const double* a, const double* x, std::size_t ldx, double* y,
                  std::size_t n) {
  active().axpy4(a, x, ldx, y, n);
}
inline void sgd_update(double* w, double* v, const double* g, double lr,
                       double momentum, std::size_t n) {
  active().sgd_update(w, v, g, lr, momentum, n);
}
inline void relu(const double* x, double* y, std::size_t n) {
  active().relu(x, y, n);
}
inline void relu_backward(const double* x, const double* dy, double* dx,
                          std::size_t n) {
  active().relu_backward(x, dy, dx, n);
}

}  // namespace dq::kernels

#endif  // DQ_KERNELS_HPP_
