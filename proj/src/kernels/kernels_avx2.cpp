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

// Compiled with -mavx2 -mfma (see CMakeLists). Execution is gated by the
// dispatcher, so these bodies only run on CPUs that report AVX2.

#include "dq/kernels.hpp"

#if defined(DQ_HAVE_AVX2)

#include <immintrin.h>

namespace dq::kernels {
namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double sum = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void dot4_avx2(const double* a, std::size_t lda, const double* b,
               std::size_t n, double* out) {
  const double* a0 = a;
  const double* a1 = a + lda;
  const double* a2 = a + 2 * lda;
  const double* a3 = a + 3 * lda;
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vb = _mm256_loadu_pd(b + i);
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a0 + i), vb, s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a1 + i), vb, s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a2 + i), vb, s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a3 + i), vb, s3);
  }
  out[0] = hsum(s0);
  out[1] = hsum(s1);
  out[2] = hsum(s2);
  out[3] = hsum(s3);
  for (; i < n; ++i) {
    out[0] += a0[i] * b[i];
    out[1] += a1[i] * b[i];
    out[2] += a2[i] * b[i];
    out[3] += a3[i] * b[i];
  }
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void axpy4_avx2(const double* a, const double* x, std::size_t ldx, double* y,
                std::size_t n) {
  const double* x0 = x;
  const double* x1 = x + ldx;
  const double* x2 = x + 2 * ldx;
  const double* x3 = x + 3 * ldx;
  __m256d a0 = _mm256_set1_pd(a[0]);
  __m256d a1 = _mm256_set1_pd(a[1]);
  __m256d a2 = _mm256_set1_pd(a[2]);
  __m256d a3 = _mm256_set1_pd(a[3]);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_loadu_pd(y + i);
    acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(x0 + i), acc);
    acc = _mm256_fmadd_pd(a1, _mm256_loadu_pd(x1 + i), acc);
    acc = _mm256_fmadd_pd(a2, _mm256_loadu_pd(x2 + i), acc);
    acc = _mm256_fmadd_pd(a3, _mm256_loadu_pd(x3 + i), acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) {
    y[i] += a[0] * x0[i] + a[1] * x1[i] + a[2] * x2[i] + a[3] * x3[i];
  }
}

void sgd_update_avx2(double* w, double* v, const double* g, double lr,
                     double momentum, std::size_t n) {
  __m256d vmu = _mm256_set1_pd(momentum);
  __m256d vnlr = _mm256_set1_pd(-lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d step = _mm256_mul_pd(vnlr, _mm256_loadu_pd(g + i));
    step = _mm256_fmadd_pd(vmu, _mm256_loadu_pd(v + i), step);
    _mm256_storeu_pd(v + i, step);
    _mm256_storeu_pd(w + i, _mm256_add_pd(_mm256_loadu_pd(w + i), step));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] - lr * g[i];
    w[i] += v[i];
  }
}

void relu_avx2(const double* x, double* y, std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(const double* x, const double* dy, double* dx,
                        std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

}  // namespace

const Ops* avx2_ops() {
  static const Ops ops{"avx2",
                       dot_avx2,
                       dot4_avx2,
                       axpy_avx2,
                       axpy4_avx2,
                       sgd_update_avx2,
                       relu_avx2,
                       relu_backward_avx2};
  return &ops;
}

}  // namespace dq::kernels

#else  // !DQ_HAVE_AVX2

namespace dq::kernels {

const Ops* avx2_ops() { return nullptr; }

}  // namespace dq::kernels

#endif
