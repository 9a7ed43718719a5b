#include <cmath>
#include <cstring>

#include "fodwb/kernels.hpp"

// Reference kernels. These define the semantics the SIMD variants are
// equivalence-tested against.

namespace fodwb::kern {
namespace {

double dot_scalar(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_sq_diff_scalar(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void gemm_nn_scalar(double* c, const double* a, const double* b, int m, int n,
                    int k, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * size_t(m) * size_t(n));
  for (int i = 0; i < m; ++i) {
    double* crow = c + size_t(i) * n;
    const double* arow = a + size_t(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + size_t(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn_scalar(double* c, const double* a, const double* b, int m, int n,
                    int k, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * size_t(m) * size_t(n));
  for (int p = 0; p < k; ++p) {
    const double* arow = a + size_t(p) * m;
    const double* brow = b + size_t(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + size_t(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt_scalar(double* c, const double* a, const double* b, int m, int n,
                    int k, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + size_t(i) * k;
    double* crow = c + size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? crow[j] : 0.0;
      const double* brow = b + size_t(j) * k;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

void relu_scalar(double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(double* delta, const double* act, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (!(act[i] > 0.0)) delta[i] = 0.0;
  }
}

void rmsprop_update_scalar(double* w, double* v, const double* g, size_t n,
                           double lr, double rho, double eps) {
  for (size_t i = 0; i < n; ++i) {
    v[i] = rho * v[i] + (1.0 - rho) * g[i] * g[i];
    w[i] -= lr * g[i] / (std::sqrt(v[i]) + eps);
  }
}

}  // namespace

namespace detail {

const KernelTable& scalar_table() {
  static const KernelTable table = {
      dot_scalar,     axpy_scalar,          sum_sq_diff_scalar,
      gemm_nn_scalar, gemm_tn_scalar,       gemm_nt_scalar,
      relu_scalar,    relu_backward_scalar, rmsprop_update_scalar,
  };
  return table;
}

}  // namespace detail
}  // namespace fodwb::kern
