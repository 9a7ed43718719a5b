#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fodwb/rng.hpp"
#include "fodwb/sample.hpp"
#include "fodwb/sh.hpp"

namespace fodwb {

// Synthetic stand-in for a histology-grounded voxel: up to three fiber
// compartments with axially symmetric tensors.
struct FiberPopulation {
  struct Fiber {
    Direction dir;
    double fraction = 1.0;
  };
  std::vector<Fiber> fibers;
  double axial_diffusivity = 1.7e-3;   // mm^2/s
  double radial_diffusivity = 0.2e-3;  // mm^2/s
};

struct DatasetConfig {
  int n_base_voxels = 567;
  int rotations_per_voxel = 100;
  int n_directions = 100;
  double bvalue = 2000.0;               // s/mm^2
  std::optional<double> snr = 30.0;     // linear SNR at b=0; nullopt = noiseless
  double crossing_min_deg = 30.0;
  double crossing_max_deg = 90.0;
  double fraction_floor = 0.2;
  double axial_diffusivity = 1.7e-3;
  double radial_diffusivity = 0.2e-3;
  // share of 1-, 2- and 3-fiber base voxels
  double mix_one = 0.5;
  double mix_two = 0.4;
  // signal-fit regularization; defaults to 0 noiseless / 0.006 noisy
  std::optional<double> lb_lambda;
  uint64_t seed = 42;

  double effective_lambda() const {
    if (lb_lambda) return *lb_lambda;
    return snr ? 0.006 : 0.0;
  }
};

// n near-uniform directions on a spherical Fibonacci lattice.
GradientScheme make_gradient_scheme(int n, double bvalue);

// Normalized attenuations a(g) = sum_i f_i exp(-b g^T D_i g), in (0, 1].
std::vector<double> tensor_signal(const FiberPopulation& pop,
                                  const GradientScheme& scheme);

// Magnitude-image noise: a -> sqrt((a + n1)^2 + n2^2), n ~ N(0, 1/snr).
void add_rician_noise(std::span<double> attenuations, double snr,
                      RngStream& rng);

// Weighted band-limited point masses of the fiber directions.
SHCoeffs truth_fod(const FiberPopulation& pop, int order = kFodOrder);

// Validates fractions/diffusivities/fiber count.
void check_population(const FiberPopulation& pop);

FiberPopulation sample_population(const DatasetConfig& cfg, RngStream& rng);

// Full synthetic pipeline: per base voxel simulate, fit, augment. Sample
// count is n_base_voxels * (rotations_per_voxel + 1). Deterministic in the
// config alone; per-voxel substreams make the result independent of thread
// count and iteration order.
std::vector<VoxelSample> generate_dataset(const DatasetConfig& cfg);

}  // namespace fodwb
