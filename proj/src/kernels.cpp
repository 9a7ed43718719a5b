#include "fodwb/kernels.hpp"

#include <atomic>

namespace fodwb::kern {
namespace {

using detail::KernelTable;

const KernelTable* table_for(Level level) {
#if defined(FODWB_HAVE_AVX2_SOURCES)
  if (level == Level::avx2) {
    const KernelTable* t = detail::avx2_table();
    if (t) return t;
  }
#endif
  (void)level;
  return &detail::scalar_table();
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Level> g_level{Level::scalar};

const KernelTable& active_table() {
  const KernelTable* t = g_table.load(std::memory_order_acquire);
  if (!t) {
    const Level level = detect_level();
    t = table_for(level);
    g_level.store(level, std::memory_order_relaxed);
    g_table.store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace

Level detect_level() {
#if defined(FODWB_HAVE_AVX2_SOURCES) && defined(__GNUC__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return Level::avx2;
#endif
  return Level::scalar;
}

Level active_level() {
  active_table();
  return g_level.load(std::memory_order_relaxed);
}

void force_level(Level level) {
  if (level == Level::avx2 && detect_level() != Level::avx2) level = Level::scalar;
  g_level.store(level, std::memory_order_relaxed);
  g_table.store(table_for(level), std::memory_order_release);
}

void reset_level() {
  g_level.store(detect_level(), std::memory_order_relaxed);
  g_table.store(table_for(detect_level()), std::memory_order_release);
}

std::string level_name(Level level) {
  return level == Level::avx2 ? "avx2" : "scalar";
}

double dot(const double* a, const double* b, size_t n) {
  return active_table().dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, size_t n) {
  active_table().axpy(alpha, x, y, n);
}

double sum_sq_diff(const double* a, const double* b, size_t n) {
  return active_table().sum_sq_diff(a, b, n);
}

void gemm_nn(double* c, const double* a, const double* b, int m, int n, int k,
             bool accumulate) {
  active_table().gemm_nn(c, a, b, m, n, k, accumulate);
}

void gemm_tn(double* c, const double* a, const double* b, int m, int n, int k,
             bool accumulate) {
  active_table().gemm_tn(c, a, b, m, n, k, accumulate);
}

void gemm_nt(double* c, const double* a, const double* b, int m, int n, int k,
             bool accumulate) {
  active_table().gemm_nt(c, a, b, m, n, k, accumulate);
}

void relu(double* x, size_t n) { active_table().relu(x, n); }

void relu_backward(double* delta, const double* act, size_t n) {
  active_table().relu_backward(delta, act, n);
}

void rmsprop_update(double* w, double* v, const double* g, size_t n, double lr,
                    double rho, double eps) {
  active_table().rmsprop_update(w, v, g, n, lr, rho, eps);
}

}  // namespace fodwb::kern
