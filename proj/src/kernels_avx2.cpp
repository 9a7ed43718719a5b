// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma; only dispatched to
// when the running CPU reports both features.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "fodwb/kernels.hpp"

namespace fodwb::kern {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_sq_diff_avx2(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    r += d * d;
  }
  return r;
}

// 4x8 register tile; A element broadcast per row, two B vectors streamed.
// stride_ai: distance between A elements consumed along k for a fixed row
// (1 for NN layout, m for TN layout); stride_ak: distance between rows.
template <bool kTransA>
void gemm_broadcast(double* c, const double* a, const double* b, int m, int n,
                    int k, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * size_t(m) * size_t(n));

  const size_t a_row = kTransA ? 1 : size_t(k);  // step between rows i
  const size_t a_col = kTransA ? size_t(m) : 1;  // step along k

  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + size_t(i) * a_row;
    const double* a1 = a0 + a_row;
    const double* a2 = a1 + a_row;
    const double* a3 = a2 + a_row;
    int j = 0;
    for (; j + 8 <= n; j += 8) {
      double* c0 = c + size_t(i) * n + j;
      __m256d s00 = _mm256_loadu_pd(c0);
      __m256d s01 = _mm256_loadu_pd(c0 + 4);
      __m256d s10 = _mm256_loadu_pd(c0 + n);
      __m256d s11 = _mm256_loadu_pd(c0 + n + 4);
      __m256d s20 = _mm256_loadu_pd(c0 + 2 * n);
      __m256d s21 = _mm256_loadu_pd(c0 + 2 * n + 4);
      __m256d s30 = _mm256_loadu_pd(c0 + 3 * n);
      __m256d s31 = _mm256_loadu_pd(c0 + 3 * n + 4);
      for (int p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + size_t(p) * n + j);
        const __m256d b1 = _mm256_loadu_pd(b + size_t(p) * n + j + 4);
        const __m256d v0 = _mm256_set1_pd(a0[size_t(p) * a_col]);
        const __m256d v1 = _mm256_set1_pd(a1[size_t(p) * a_col]);
        const __m256d v2 = _mm256_set1_pd(a2[size_t(p) * a_col]);
        const __m256d v3 = _mm256_set1_pd(a3[size_t(p) * a_col]);
        s00 = _mm256_fmadd_pd(v0, b0, s00);
        s01 = _mm256_fmadd_pd(v0, b1, s01);
        s10 = _mm256_fmadd_pd(v1, b0, s10);
        s11 = _mm256_fmadd_pd(v1, b1, s11);
        s20 = _mm256_fmadd_pd(v2, b0, s20);
        s21 = _mm256_fmadd_pd(v2, b1, s21);
        s30 = _mm256_fmadd_pd(v3, b0, s30);
        s31 = _mm256_fmadd_pd(v3, b1, s31);
      }
      _mm256_storeu_pd(c0, s00);
      _mm256_storeu_pd(c0 + 4, s01);
      _mm256_storeu_pd(c0 + n, s10);
      _mm256_storeu_pd(c0 + n + 4, s11);
      _mm256_storeu_pd(c0 + 2 * n, s20);
      _mm256_storeu_pd(c0 + 2 * n + 4, s21);
      _mm256_storeu_pd(c0 + 3 * n, s30);
      _mm256_storeu_pd(c0 + 3 * n + 4, s31);
    }
    for (; j < n; ++j) {
      for (int r = 0; r < 4; ++r) {
        const double* ar = a + size_t(i + r) * a_row;
        double acc = c[size_t(i + r) * n + j];
        for (int p = 0; p < k; ++p) acc += ar[size_t(p) * a_col] * b[size_t(p) * n + j];
        c[size_t(i + r) * n + j] = acc;
      }
    }
  }
  for (; i < m; ++i) {
    const double* ar = a + size_t(i) * a_row;
    double* crow = c + size_t(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ar[size_t(p) * a_col];
      const double* brow = b + size_t(p) * n;
      int j = 0;
      const __m256d va = _mm256_set1_pd(av);
      for (; j + 4 <= n; j += 4) {
        __m256d vc = _mm256_loadu_pd(crow + j);
        vc = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), vc);
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nn_avx2(double* c, const double* a, const double* b, int m, int n,
                  int k, bool accumulate) {
  gemm_broadcast<false>(c, a, b, m, n, k, accumulate);
}

void gemm_tn_avx2(double* c, const double* a, const double* b, int m, int n,
                  int k, bool accumulate) {
  gemm_broadcast<true>(c, a, b, m, n, k, accumulate);
}

// Both operands contiguous along k: accumulate 2x4 dot tiles.
void gemm_nt_avx2(double* c, const double* a, const double* b, int m, int n,
                  int k, bool accumulate) {
  int i = 0;
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + size_t(i) * k;
    const double* a1 = a0 + k;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + size_t(j) * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
      __m256d s02 = _mm256_setzero_pd(), s03 = _mm256_setzero_pd();
      __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
      __m256d s12 = _mm256_setzero_pd(), s13 = _mm256_setzero_pd();
      int p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d va0 = _mm256_loadu_pd(a0 + p);
        const __m256d va1 = _mm256_loadu_pd(a1 + p);
        const __m256d vb0 = _mm256_loadu_pd(b0 + p);
        const __m256d vb1 = _mm256_loadu_pd(b1 + p);
        const __m256d vb2 = _mm256_loadu_pd(b2 + p);
        const __m256d vb3 = _mm256_loadu_pd(b3 + p);
        s00 = _mm256_fmadd_pd(va0, vb0, s00);
        s01 = _mm256_fmadd_pd(va0, vb1, s01);
        s02 = _mm256_fmadd_pd(va0, vb2, s02);
        s03 = _mm256_fmadd_pd(va0, vb3, s03);
        s10 = _mm256_fmadd_pd(va1, vb0, s10);
        s11 = _mm256_fmadd_pd(va1, vb1, s11);
        s12 = _mm256_fmadd_pd(va1, vb2, s12);
        s13 = _mm256_fmadd_pd(va1, vb3, s13);
      }
      double r00 = hsum(s00), r01 = hsum(s01), r02 = hsum(s02), r03 = hsum(s03);
      double r10 = hsum(s10), r11 = hsum(s11), r12 = hsum(s12), r13 = hsum(s13);
      for (; p < k; ++p) {
        r00 += a0[p] * b0[p];
        r01 += a0[p] * b1[p];
        r02 += a0[p] * b2[p];
        r03 += a0[p] * b3[p];
        r10 += a1[p] * b0[p];
        r11 += a1[p] * b1[p];
        r12 += a1[p] * b2[p];
        r13 += a1[p] * b3[p];
      }
      double* c0 = c + size_t(i) * n + j;
      double* c1 = c0 + n;
      if (accumulate) {
        c0[0] += r00; c0[1] += r01; c0[2] += r02; c0[3] += r03;
        c1[0] += r10; c1[1] += r11; c1[2] += r12; c1[3] += r13;
      } else {
        c0[0] = r00; c0[1] = r01; c0[2] = r02; c0[3] = r03;
        c1[0] = r10; c1[1] = r11; c1[2] = r12; c1[3] = r13;
      }
    }
    for (; j < n; ++j) {
      const double* brow = b + size_t(j) * k;
      const double d0 = dot_avx2(a0, brow, size_t(k));
      const double d1 = dot_avx2(a1, brow, size_t(k));
      if (accumulate) {
        c[size_t(i) * n + j] += d0;
        c[size_t(i + 1) * n + j] += d1;
      } else {
        c[size_t(i) * n + j] = d0;
        c[size_t(i + 1) * n + j] = d1;
      }
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + size_t(i) * k;
    for (int j = 0; j < n; ++j) {
      const double d = dot_avx2(arow, b + size_t(j) * k, size_t(k));
      if (accumulate)
        c[size_t(i) * n + j] += d;
      else
        c[size_t(i) * n + j] = d;
    }
  }
}

void relu_avx2(double* x, size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(double* delta, const double* act, size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(delta + i, _mm256_and_pd(_mm256_loadu_pd(delta + i), mask));
  }
  for (; i < n; ++i) {
    if (!(act[i] > 0.0)) delta[i] = 0.0;
  }
}

void rmsprop_update_avx2(double* w, double* v, const double* g, size_t n,
                         double lr, double rho, double eps) {
  const __m256d vrho = _mm256_set1_pd(rho);
  const __m256d vomr = _mm256_set1_pd(1.0 - rho);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vv = _mm256_fmadd_pd(vrho, vv, _mm256_mul_pd(vomr, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(v + i, vv);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vv), veps);
    __m256d vw = _mm256_loadu_pd(w + i);
    vw = _mm256_sub_pd(vw, _mm256_div_pd(_mm256_mul_pd(vlr, vg), denom));
    _mm256_storeu_pd(w + i, vw);
  }
  for (; i < n; ++i) {
    v[i] = rho * v[i] + (1.0 - rho) * g[i] * g[i];
    w[i] -= lr * g[i] / (std::sqrt(v[i]) + eps);
  }
}

}  // namespace

namespace detail {

const KernelTable* avx2_table() {
  static const KernelTable table = {
      dot_avx2,     axpy_avx2,          sum_sq_diff_avx2,
      gemm_nn_avx2, gemm_tn_avx2,       gemm_nt_avx2,
      relu_avx2,    relu_backward_avx2, rmsprop_update_avx2,
  };
  return &table;
}

}  // namespace detail
}  // namespace fodwb::kern

#endif  // x86_64
