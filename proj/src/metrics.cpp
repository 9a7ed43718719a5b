#include "fodwb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fodwb {

namespace {

// dot and norms over the l >= 2 coefficients of the zero-padded pair
void anisotropic_products(const SHCoeffs& u, const SHCoeffs& v, double& uv,
                          double& uu, double& vv) {
  uv = uu = vv = 0.0;
  const size_t start = static_cast<size_t>(num_coeffs(0));
  const size_t nu = u.coeffs.size(), nv = v.coeffs.size();
  for (size_t j = start; j < std::max(nu, nv); ++j) {
    const double a = j < nu ? u.coeffs[j] : 0.0;
    const double b = j < nv ? v.coeffs[j] : 0.0;
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
}

double phi_tail_two_sided(double z_abs) {
  return std::erfc(z_abs / M_SQRT2);
}

}  // namespace

double acc(const SHCoeffs& u, const SHCoeffs& v) {
  double uv, uu, vv;
  anisotropic_products(u, v, uv, uu, vv);
  if (uu == 0.0 || vv == 0.0)
    throw IsotropicInput("zero anisotropic energy");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

double mse_coeffs(const SHCoeffs& u, const SHCoeffs& v) {
  const size_t n = std::max(u.coeffs.size(), v.coeffs.size());
  double acc_sq = 0.0;
  for (size_t j = 0; j < n; ++j) {
    const double a = j < u.coeffs.size() ? u.coeffs[j] : 0.0;
    const double b = j < v.coeffs.size() ? v.coeffs[j] : 0.0;
    const double d = a - b;
    acc_sq += d * d;
  }
  return acc_sq / static_cast<double>(n);
}

double rmse(const std::vector<double>& mses) {
  if (mses.empty()) throw EmptyInput("rmse of no values");
  const double mean =
      std::accumulate(mses.begin(), mses.end(), 0.0) / mses.size();
  return std::sqrt(mean);
}

double median(std::vector<double> values) {
  if (values.empty()) throw EmptyInput("median of no values");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SignedRankResult wilcoxon_signed_rank(
    const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 5) throw InvalidInput("need at least 5 pairs");

  std::vector<double> diffs;
  diffs.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    const double d = a - b;
    if (d != 0.0) diffs.push_back(d);
  }
  const int n = static_cast<int>(diffs.size());
  if (n == 0) throw DegenerateInput("all differences are zero");

  // midranks of |d|
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(diffs[a]) < std::abs(diffs[b]);
  });
  std::vector<double> rank(n);
  std::vector<int> tie_sizes;
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && std::abs(diffs[idx[j]]) == std::abs(diffs[idx[i]])) ++j;
    const double mid = 0.5 * (i + 1 + j);  // average of ranks i+1 .. j
    for (int k = i; k < j; ++k) rank[idx[k]] = mid;
    tie_sizes.push_back(j - i);
    i = j;
  }

  double w = 0.0;
  for (int i = 0; i < n; ++i)
    if (diffs[i] > 0.0) w += rank[i];

  SignedRankResult result;
  result.statistic = w;
  result.n_effective = n;

  if (n <= 25) {
    // Exact null distribution of the doubled rank sum (midranks are
    // half-integers, so doubling keeps everything integral).
    const int total2 = n * (n + 1);
    std::vector<uint64_t> count(total2 + 1, 0);
    count[0] = 1;
    for (int i = 0; i < n; ++i) {
      const int r2 = static_cast<int>(std::llround(2.0 * rank[i]));
      for (int s = total2; s >= r2; --s) count[s] += count[s - r2];
    }
    const int w2 = static_cast<int>(std::llround(2.0 * w));
    uint64_t le = 0, ge = 0;
    for (int s = 0; s <= total2; ++s) {
      if (s <= w2) le += count[s];
      if (s >= w2) ge += count[s];
    }
    const double denom = std::ldexp(1.0, n);  // 2^n
    const double p = 2.0 * std::min(double(le), double(ge)) / denom;
    result.p_two_sided = std::min(1.0, p);
    result.method = "exact";
  } else {
    const double nn = n;
    const double mu = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    for (int t : tie_sizes) tie_term += double(t) * t * t - t;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double d = w - mu;
    const double cc = d > 0.5 ? -0.5 : (d < -0.5 ? 0.5 : -d);  // continuity
    const double z = var > 0.0 ? (d + cc) / std::sqrt(var) : 0.0;
    result.p_two_sided = std::min(1.0, phi_tail_two_sided(std::abs(z)));
    result.method = "normal-approximation";
  }
  return result;
}

Histogram histogram(const std::vector<double>& values, int n_bins, double lo,
                    double hi) {
  if (n_bins < 1) throw InvalidInput("n_bins must be >= 1");
  if (!(hi > lo)) throw InvalidInput("empty histogram range");
  Histogram h;
  h.edges.resize(n_bins + 1);
  for (int i = 0; i <= n_bins; ++i)
    h.edges[i] = lo + (hi - lo) * i / n_bins;
  h.counts.assign(n_bins, 0);
  const double width = (hi - lo) / n_bins;
  for (double v : values) {
    if (v < lo || std::isnan(v)) {
      ++h.below;
    } else if (v > hi) {
      ++h.above;
    } else {
      int bin = static_cast<int>((v - lo) / width);
      if (bin >= n_bins) bin = n_bins - 1;  // v == hi closes the last bin
      ++h.counts[bin];
    }
  }
  return h;
}

}  // namespace fodwb
