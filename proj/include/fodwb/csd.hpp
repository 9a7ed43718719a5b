#pragma once

#include <vector>

#include "fodwb/sh.hpp"

namespace fodwb {

struct GradientScheme;

// Zonal (m = 0) coefficients of the z-aligned single-fiber signal, one per
// even degree 0, 2, ..., order.
struct ResponseFunction {
  int order = kSignalOrder;
  std::vector<double> zonal;
};

struct CsdParams {
  int n_constraint_dirs = 300;
  double tau = 0.1;     // threshold factor on the mean initial amplitude
  double lambda = 1.0;  // constraint weight
  int max_iters = 50;
  int init_order = 4;
};

struct CsdResult {
  SHCoeffs fod;  // same order as the input signal
  bool converged = false;
  int iterations = 0;
  std::vector<double> data_residuals;  // |C f - s| after each solve
};

// Extracts the zonal profile of an approximately z-aligned single-fiber
// signal; throws NotZonal when more than 5% of the energy sits at m != 0.
ResponseFunction estimate_response(const SHCoeffs& zsignal);

// Spherical convolution: s_(l,m) = sqrt(4pi/(2l+1)) r_l f_(l,m).
SHCoeffs forward_convolve(const SHCoeffs& fod, const ResponseFunction& resp);

// Per-degree diagonal entries of the forward operator.
std::vector<double> convolution_diagonal(const ResponseFunction& resp, int order);

// Iterative non-negativity-constrained deconvolution. The initial estimate
// inverts the convolution up to init_order. Each pass evaluates the current
// FOD on n_constraint_dirs points arranged as equal-area iso-latitude rings
// about the initial FOD's principal axis and penalizes the rings whose mean
// amplitude falls below tau times the mean initial amplitude, until the
// active ring set repeats or max_iters passes run.
//
// Ring sums of basis products are exact for the band limit, so the penalty
// is independent of the grid's azimuthal phase and the whole iteration is
// rotation-equivariant up to roundoff.
CsdResult csd_deconvolve(const SHCoeffs& signal, const ResponseFunction& resp,
                         const CsdParams& params = {});

// Response from averaged noiseless z-aligned single-fiber simulations at the
// given diffusivities and scheme.
ResponseFunction calibrate_response(double axial_diffusivity,
                                    double radial_diffusivity,
                                    const GradientScheme& scheme,
                                    int n_average = 30);

}  // namespace fodwb
