#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the hot paths (MLP training, coefficient
// rotation, batched metric reductions). Every kernel has a scalar reference
// implementation and may have SIMD variants; the active variant is selected
// at runtime from CPU capabilities and can be forced for equivalence tests.
//
// All matrices are dense row-major double arrays.

namespace fodwb::kern {

enum class Level { scalar = 0, avx2 = 1 };

Level detect_level();
Level active_level();
void force_level(Level level);
void reset_level();  // back to autodetection
std::string level_name(Level level);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, size_t n);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, size_t n);

// sum_i (a[i] - b[i])^2
double sum_sq_diff(const double* a, const double* b, size_t n);

// C (MxN) = A (MxK) * B (KxN), accumulating into C when accumulate is set.
void gemm_nn(double* c, const double* a, const double* b, int m, int n, int k,
             bool accumulate = false);

// C (MxN) = A^T * B with A stored KxM: C[i,j] = sum_k A[k,i] * B[k,j].
void gemm_tn(double* c, const double* a, const double* b, int m, int n, int k,
             bool accumulate = false);

// C (MxN) = A * B^T with B stored NxK: C[i,j] = sum_k A[i,k] * B[j,k].
void gemm_nt(double* c, const double* a, const double* b, int m, int n, int k,
             bool accumulate = false);

// x[i] = max(x[i], 0)
void relu(double* x, size_t n);

// delta[i] = act[i] > 0 ? delta[i] : 0
void relu_backward(double* delta, const double* act, size_t n);

// v = rho*v + (1-rho)*g^2 ; w -= lr * g / (sqrt(v) + eps), elementwise
void rmsprop_update(double* w, double* v, const double* g, size_t n, double lr,
                    double rho, double eps);

namespace detail {

struct KernelTable {
  double (*dot)(const double*, const double*, size_t);
  void (*axpy)(double, const double*, double*, size_t);
  double (*sum_sq_diff)(const double*, const double*, size_t);
  void (*gemm_nn)(double*, const double*, const double*, int, int, int, bool);
  void (*gemm_tn)(double*, const double*, const double*, int, int, int, bool);
  void (*gemm_nt)(double*, const double*, const double*, int, int, int, bool);
  void (*relu)(double*, size_t);
  void (*relu_backward)(double*, const double*, size_t);
  void (*rmsprop_update)(double*, double*, const double*, size_t, double,
                         double, double);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // null when not compiled in / unsupported

}  // namespace detail

}  // namespace fodwb::kern
