#include <doctest.h>

#include <cmath>

#include "fodwb/csd.hpp"
#include "fodwb/metrics.hpp"
#include "fodwb/phantom.hpp"
#include "fodwb/rotation.hpp"
#include "helpers.hpp"

using namespace fodwb;

namespace {

SHCoeffs single_fiber_signal(const Direction& dir, const GradientScheme& scheme) {
  FiberPopulation pop;
  pop.fibers.push_back({dir, 1.0});
  const auto atten = tensor_signal(pop, scheme);
  return fit_sh(atten, scheme.directions, kSignalOrder, 0.0);
}

}  // namespace

TEST_CASE("estimate_response of a z-aligned fiber") {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const SHCoeffs zsignal = single_fiber_signal({0.0, 0.0, 1.0}, scheme);
  const ResponseFunction resp = estimate_response(zsignal);
  REQUIRE(resp.zonal.size() == 5);
  CHECK(resp.zonal[0] > 0.0);
  CHECK(resp.zonal[1] < 0.0);  // prolate signal, oblate profile

  // isotropic signal keeps only the mean term
  SHCoeffs iso(8);
  iso.coeffs[0] = 1.0;
  const ResponseFunction flat = estimate_response(iso);
  CHECK(flat.zonal[0] == doctest::Approx(1.0));
  for (size_t i = 1; i < flat.zonal.size(); ++i)
    CHECK(flat.zonal[i] == doctest::Approx(0.0));

  const SHCoeffs xsignal = single_fiber_signal({1.0, 0.0, 0.0}, scheme);
  CHECK_THROWS_AS(estimate_response(xsignal), NotZonal);
}

TEST_CASE("forward_convolve formula and linearity") {
  RngStream rng(71);
  ResponseFunction resp;
  resp.order = 8;
  resp.zonal = {1.0, -0.5, 0.25, -0.125, 0.0625};

  const SHCoeffs dz = delta_sh({0.0, 0.0, 1.0}, 8);
  const SHCoeffs conv = forward_convolve(dz, resp);
  for (int l = 0; l <= 8; l += 2) {
    for (int m = -l; m <= l; ++m) {
      if (m != 0) {
        CHECK(std::abs(conv.at(l, m)) < 1e-14);
      } else {
        const double expect =
            std::sqrt(4.0 * M_PI / (2 * l + 1)) * resp.zonal[l / 2] * dz.at(l, 0);
        CHECK(conv.at(l, 0) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }

  // r_0-only response zeroes everything above l=0
  ResponseFunction dc;
  dc.order = 8;
  dc.zonal = {1.0, 0.0, 0.0, 0.0, 0.0};
  const SHCoeffs f = testutil::random_coeffs(rng, 8);
  const SHCoeffs lowpass = forward_convolve(f, dc);
  CHECK(lowpass.coeffs[0] ==
        doctest::Approx(std::sqrt(4.0 * M_PI) * f.coeffs[0]).epsilon(1e-12));
  for (size_t j = 1; j < lowpass.coeffs.size(); ++j)
    CHECK(lowpass.coeffs[j] == 0.0);

  // linearity
  const SHCoeffs g = testutil::random_coeffs(rng, 8);
  SHCoeffs sum(8);
  for (size_t j = 0; j < sum.coeffs.size(); ++j)
    sum.coeffs[j] = f.coeffs[j] + g.coeffs[j];
  const SHCoeffs conv_sum = forward_convolve(sum, resp);
  const SHCoeffs conv_f = forward_convolve(f, resp);
  const SHCoeffs conv_g = forward_convolve(g, resp);
  for (size_t j = 0; j < sum.coeffs.size(); ++j)
    CHECK(conv_sum.coeffs[j] ==
          doctest::Approx(conv_f.coeffs[j] + conv_g.coeffs[j]).epsilon(1e-12));
}

TEST_CASE("convolution model matches a simulated crossing") {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const ResponseFunction resp = calibrate_response(1.7e-3, 0.2e-3, scheme);

  FiberPopulation two;
  const double s = std::sin(M_PI / 3.0), c = std::cos(M_PI / 3.0);
  two.fibers.push_back({Direction{0.0, 0.0, 1.0}, 0.5});
  two.fibers.push_back({Direction{s, 0.0, c}, 0.5});
  const auto atten = tensor_signal(two, scheme);
  const SHCoeffs direct = fit_sh(atten, scheme.directions, 8, 0.0);

  const SHCoeffs predicted = forward_convolve(truth_fod(two, 8), resp);
  double err = 0.0, norm = 0.0;
  for (size_t j = 0; j < direct.coeffs.size(); ++j) {
    err += (predicted.coeffs[j] - direct.coeffs[j]) *
           (predicted.coeffs[j] - direct.coeffs[j]);
    norm += direct.coeffs[j] * direct.coeffs[j];
  }
  CHECK(std::sqrt(err / norm) < 0.05);
}

TEST_CASE("csd recovers an exactly convolved nonnegative FOD") {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const ResponseFunction resp = calibrate_response(1.7e-3, 0.2e-3, scheme);

  // strongly positive everywhere: isotropic mass plus a soft bump
  SHCoeffs fod(8);
  fod.coeffs[sh_index(0, 0)] = 1.0;
  fod.coeffs[sh_index(2, 0)] = 0.05;
  fod.coeffs[sh_index(4, 0)] = 0.01;

  const SHCoeffs signal = forward_convolve(fod, resp);
  const CsdResult result = csd_deconvolve(signal, resp);
  CHECK(result.converged);
  for (size_t j = 0; j < fod.coeffs.size(); ++j)
    CHECK(std::abs(result.fod.coeffs[j] - fod.coeffs[j]) < 1e-6);
}

TEST_CASE("csd single fiber peak and shape") {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const ResponseFunction resp = calibrate_response(1.7e-3, 0.2e-3, scheme);

  RngStream rng(72);
  const Direction fiber = testutil::random_direction(rng);
  const SHCoeffs signal = single_fiber_signal(fiber, scheme);
  const CsdResult result = csd_deconvolve(signal, resp);
  CHECK(result.converged);

  const Direction peak = testutil::dense_peak(result.fod, 10000);
  CHECK(testutil::angle_deg(peak, fiber) < 2.0);
  // negativity suppression reshapes the high degrees, so correlation with
  // the ringing raw delta stays well below 1 at published constraint
  // strength; it must still be strongly positive
  CHECK(acc(result.fod, delta_sh(fiber, 8)) > 0.75);
}

TEST_CASE("csd resolves a 60 degree crossing") {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const ResponseFunction resp = calibrate_response(1.7e-3, 0.2e-3, scheme);

  FiberPopulation two;
  const double s = std::sin(M_PI / 3.0), c = std::cos(M_PI / 3.0);
  const Direction f1{0.0, 0.0, 1.0};
  const Direction f2{s, 0.0, c};
  two.fibers.push_back({f1, 0.5});
  two.fibers.push_back({f2, 0.5});
  const auto atten = tensor_signal(two, scheme);
  const SHCoeffs signal = fit_sh(atten, scheme.directions, 8, 0.0);
  const CsdResult result = csd_deconvolve(signal, resp);

  // local maxima over a dense grid, separated by at least 15 degrees
  const auto dirs = testutil::fibonacci_dirs(10000);
  std::vector<std::pair<double, Direction>> scored;
  for (const auto& d : dirs)
    scored.push_back({evaluate_at(result.fod, d), d});
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Direction> peaks;
  for (const auto& [amp, d] : scored) {
    bool fresh = true;
    for (const auto& p : peaks)
      if (testutil::angle_deg(p, d) < 15.0) fresh = false;
    if (fresh) peaks.push_back(d);
    if (peaks.size() == 2) break;
  }
  REQUIRE(peaks.size() == 2);
  const double err1 = std::min(testutil::angle_deg(peaks[0], f1),
                               testutil::angle_deg(peaks[1], f1));
  const double err2 = std::min(testutil::angle_deg(peaks[0], f2),
                               testutil::angle_deg(peaks[1], f2));
  CHECK(err1 < 5.0);
  CHECK(err2 < 5.0);
}

TEST_CASE("csd suppresses negative lobes") {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const ResponseFunction resp = calibrate_response(1.7e-3, 0.2e-3, scheme);
  const SHCoeffs signal = single_fiber_signal({0.0, 0.0, 1.0}, scheme);
  const CsdResult result = csd_deconvolve(signal, resp);

  const auto dirs = testutil::fibonacci_dirs(300);
  double min_amp = INFINITY, max_amp = -INFINITY;
  for (const auto& d : dirs) {
    const double a = evaluate_at(result.fod, d);
    min_amp = std::min(min_amp, a);
    max_amp = std::max(max_amp, a);
  }
  CHECK(min_amp >= -0.05 * max_amp);
}

TEST_CASE("csd data consistency does not degrade across iterations") {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const ResponseFunction resp = calibrate_response(1.7e-3, 0.2e-3, scheme);

  // Single-fiber inputs: the active set only sheds rings as the peak
  // sharpens, so each re-solve is less constrained and the residual falls.
  // (With growing sets the residual provably rises, so crossings are
  // covered by the convergence and peak tests instead.)
  RngStream rng(73);
  for (int trial = 0; trial < 6; ++trial) {
    FiberPopulation pop;
    pop.fibers.push_back({testutil::random_direction(rng), 1.0});
    const auto atten = tensor_signal(pop, scheme);
    const SHCoeffs signal = fit_sh(atten, scheme.directions, 8, 0.0);

    const CsdResult result = csd_deconvolve(signal, resp);
    CHECK(result.converged);
    REQUIRE(result.data_residuals.size() ==
            static_cast<size_t>(result.iterations));
    for (size_t i = 1; i < result.data_residuals.size(); ++i)
      CHECK(result.data_residuals[i] <= result.data_residuals[i - 1] + 1e-9);
  }
}

TEST_CASE("csd is rotation equivariant on noiseless input") {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const ResponseFunction resp = calibrate_response(1.7e-3, 0.2e-3, scheme);

  RngStream rng(74);
  const SHCoeffs signal = single_fiber_signal(testutil::random_direction(rng), scheme);
  const Rotation q = random_rotation(rng);

  const SHCoeffs rotated_first =
      csd_deconvolve(rotate_sh(signal, q), resp).fod;
  const SHCoeffs deconv_first = rotate_sh(csd_deconvolve(signal, resp).fod, q);
  for (size_t j = 0; j < rotated_first.coeffs.size(); ++j)
    CHECK(std::abs(rotated_first.coeffs[j] - deconv_first.coeffs[j]) < 1e-6);
}

TEST_CASE("csd error paths") {
  ResponseFunction resp;
  resp.order = 8;
  resp.zonal = {1.0, 0.0, 0.25, -0.125, 0.0625};  // zero at degree 2
  SHCoeffs signal(8);
  signal.coeffs[0] = 1.0;
  CHECK_THROWS_AS(csd_deconvolve(signal, resp), SingularResponse);
}
