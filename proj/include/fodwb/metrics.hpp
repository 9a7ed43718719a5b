#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fodwb/sh.hpp"

namespace fodwb {

struct PairedMetricsRecord {
  int64_t voxel = 0;
  int64_t group_id = 0;
  double acc_a = 0.0;
  double acc_b = 0.0;
  double mse_a = 0.0;
  double mse_b = 0.0;
};

struct SignedRankResult {
  double statistic = 0.0;  // W: rank sum of positive differences
  int n_effective = 0;     // pairs with nonzero difference
  double p_two_sided = 1.0;
  std::string method;      // "exact" or "normal-approximation"
};

struct Histogram {
  std::vector<double> edges;    // n_bins + 1
  std::vector<int64_t> counts;  // n_bins
  int64_t below = 0;
  int64_t above = 0;
};

// Angular correlation coefficient: cosine of the l >= 2 coefficients after
// zero-padding the shorter input to the longer order. Throws IsotropicInput
// when either side has no l >= 2 energy.
double acc(const SHCoeffs& u, const SHCoeffs& v);

// Mean squared coefficient difference over the padded common length.
double mse_coeffs(const SHCoeffs& u, const SHCoeffs& v);

// sqrt(mean of per-voxel MSEs)
double rmse(const std::vector<double>& mses);

double median(std::vector<double> values);

// Paired signed-rank test: zero differences dropped, midranks for ties,
// exact two-sided p by enumeration of the rank-sum distribution when
// n_effective <= 25, otherwise normal approximation with tie-corrected
// variance and continuity correction.
SignedRankResult wilcoxon_signed_rank(
    const std::vector<std::pair<double, double>>& pairs);

Histogram histogram(const std::vector<double>& values, int n_bins, double lo,
                    double hi);

}  // namespace fodwb
