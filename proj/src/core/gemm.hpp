#pragma once

#include <cstddef>

#include "jepa_fer/parallel.hpp"

namespace jepa_fer::kernel {

/// C = A (m x k) . B (k x n), all row-major, C overwritten. Every output
/// element is summed over k in ascending order no matter how rows are split
/// across workers, so results are bit-identical for any thread count.
template <typename Real>
void gemm(const Real* __restrict a, const Real* __restrict b, Real* __restrict c, std::size_t m,
          std::size_t k, std::size_t n) {
  const std::size_t work = k * n;
  const std::size_t grain = work >= 32768 ? 4 : (work >= 4096 ? 16 : m);
  parallel_for(0, m, grain, [=](std::size_t r0, std::size_t r1) {
    std::size_t i = r0;
    for (; i + 4 <= r1; i += 4) {
      Real* __restrict c0 = c + (i + 0) * n;
      Real* __restrict c1 = c + (i + 1) * n;
      Real* __restrict c2 = c + (i + 2) * n;
      Real* __restrict c3 = c + (i + 3) * n;
      for (std::size_t j = 0; j < n; ++j) c0[j] = c1[j] = c2[j] = c3[j] = Real(0);
      for (std::size_t l = 0; l < k; ++l) {
        const Real a0 = a[(i + 0) * k + l];
        const Real a1 = a[(i + 1) * k + l];
        const Real a2 = a[(i + 2) * k + l];
        const Real a3 = a[(i + 3) * k + l];
        const Real* __restrict brow = b + l * n;
        for (std::size_t j = 0; j < n; ++j) {
          const Real bv = brow[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < r1; ++i) {
      Real* __restrict crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = Real(0);
      for (std::size_t l = 0; l < k; ++l) {
        const Real av = a[i * k + l];
        const Real* __restrict brow = b + l * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

/// out (n x m) = transpose of in (m x n).
template <typename Real>
void transpose(const Real* __restrict in, Real* __restrict out, std::size_t m, std::size_t n) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < m; i0 += kBlock) {
    for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
      const std::size_t i1 = i0 + kBlock < m ? i0 + kBlock : m;
      const std::size_t j1 = j0 + kBlock < n ? j0 + kBlock : n;
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) out[j * m + i] = in[i * n + j];
      }
    }
  }
}

}  // namespace jepa_fer::kernel
