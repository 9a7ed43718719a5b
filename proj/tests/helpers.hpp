#pragma once

#include <cmath>
#include <vector>

#include "fodwb/rng.hpp"
#include "fodwb/sh.hpp"

namespace testutil {

inline std::vector<fodwb::Direction> fibonacci_dirs(int n) {
  std::vector<fodwb::Direction> dirs;
  dirs.reserve(n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  return dirs;
}

inline fodwb::SHCoeffs random_coeffs(fodwb::RngStream& rng, int order) {
  fodwb::SHCoeffs c(order);
  for (double& v : c.coeffs) v = 2.0 * rng.uniform() - 1.0;
  return c;
}

inline fodwb::Direction random_direction(fodwb::RngStream& rng) {
  const double z = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * M_PI * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

inline double angle_deg(const fodwb::Direction& a, const fodwb::Direction& b) {
  const double c = std::abs(a.x * b.x + a.y * b.y + a.z * b.z);
  return std::acos(std::min(1.0, c)) * 180.0 / M_PI;
}

// dense argmax of an SH function over a Fibonacci grid
inline fodwb::Direction dense_peak(const fodwb::SHCoeffs& c, int n_dirs) {
  const auto dirs = fibonacci_dirs(n_dirs);
  double best = -INFINITY;
  fodwb::Direction peak = dirs[0];
  for (const auto& d : dirs) {
    const double a = fodwb::evaluate_at(c, d);
    if (a > best) {
      best = a;
      peak = d;
    }
  }
  return peak;
}

// Solve the normal equations with plain Gaussian elimination; independent of
// the library's fitting path.
inline std::vector<double> normal_equations_fit(
    const std::vector<double>& design, const std::vector<double>& amplitudes,
    int n_dirs, int n_coef) {
  std::vector<double> ata(size_t(n_coef) * n_coef, 0.0);
  std::vector<double> atb(n_coef, 0.0);
  for (int i = 0; i < n_dirs; ++i) {
    const double* row = design.data() + size_t(i) * n_coef;
    for (int a = 0; a < n_coef; ++a) {
      atb[a] += row[a] * amplitudes[i];
      for (int b = 0; b < n_coef; ++b) ata[size_t(a) * n_coef + b] += row[a] * row[b];
    }
  }
  // partial pivoting
  std::vector<int> perm(n_coef);
  for (int i = 0; i < n_coef; ++i) perm[i] = i;
  for (int col = 0; col < n_coef; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n_coef; ++r)
      if (std::abs(ata[size_t(r) * n_coef + col]) >
          std::abs(ata[size_t(pivot) * n_coef + col]))
        pivot = r;
    if (pivot != col) {
      for (int c2 = 0; c2 < n_coef; ++c2)
        std::swap(ata[size_t(col) * n_coef + c2], ata[size_t(pivot) * n_coef + c2]);
      std::swap(atb[col], atb[pivot]);
    }
    const double diag = ata[size_t(col) * n_coef + col];
    for (int r = col + 1; r < n_coef; ++r) {
      const double f = ata[size_t(r) * n_coef + col] / diag;
      for (int c2 = col; c2 < n_coef; ++c2)
        ata[size_t(r) * n_coef + c2] -= f * ata[size_t(col) * n_coef + c2];
      atb[r] -= f * atb[col];
    }
  }
  std::vector<double> x(n_coef, 0.0);
  for (int r = n_coef - 1; r >= 0; --r) {
    double acc = atb[r];
    for (int c2 = r + 1; c2 < n_coef; ++c2)
      acc -= ata[size_t(r) * n_coef + c2] * x[c2];
    x[r] = acc / ata[size_t(r) * n_coef + r];
  }
  return x;
}

}  // namespace testutil
