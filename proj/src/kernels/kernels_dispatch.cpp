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

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace dq::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops* best_available() {
  if (const Ops* a = avx2_ops(); a && cpu_has_avx2()) return a;
  return &scalar_ops();
}

const Ops* select_from_env() {
  const char* req = std::getenv("DQ_KERNELS");
  if (!req || !*req || std::strcmp(req, "auto") == 0) return best_available();
  if (std::strcmp(req, "scalar") == 0) return &scalar_ops();
  if (std::strcmp(req, "avx2") == 0) {
    if (const Ops* a = avx2_ops(); a && cpu_has_avx2()) return a;
    std::fprintf(stderr,
                 "dq: DQ_KERNELS=avx2 requested but AVX2 is unavailable, "
                 "using scalar kernels\n");
    return &scalar_ops();
  }
  std::fprintf(stderr, "dq: unknown DQ_KERNELS value '%s', using automatic selection\n",
               req);
  return best_available();
}

std::atomic<const Ops*> g_forced{nullptr};

}  // namespace

const Ops& active() {
  if (const Ops* f = g_forced.load(std::memory_order_acquire)) return *f;
  static const Ops* selected = select_from_env();
  return *selected;
}

void force_ops(const Ops* ops) { g_forced.store(ops, std::memory_order_release); }

}  // namespace dq::kernels
