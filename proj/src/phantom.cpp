#include "fodwb/phantom.hpp"

#include <cmath>

#include "fodwb/parallel.hpp"
#include "fodwb/rotation.hpp"

namespace fodwb {

namespace {

constexpr uint64_t kVoxelStreamSalt = 0x766F78656C5F3031ULL;

void orthonormal_frame(const Direction& n, Direction& e1, Direction& e2) {
  // Pick the axis least aligned with n to seed the frame.
  if (std::abs(n.x) <= std::abs(n.y) && std::abs(n.x) <= std::abs(n.z))
    e1 = normalized(0.0, -n.z, n.y);
  else if (std::abs(n.y) <= std::abs(n.z))
    e1 = normalized(-n.z, 0.0, n.x);
  else
    e1 = normalized(-n.y, n.x, 0.0);
  e2 = {n.y * e1.z - n.z * e1.y, n.z * e1.x - n.x * e1.z,
        n.x * e1.y - n.y * e1.x};
}

Direction uniform_direction(RngStream& rng) {
  const double z = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * M_PI * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace

GradientScheme make_gradient_scheme(int n, double bvalue) {
  if (n < num_coeffs(kSignalOrder))
    throw TooFewDirections(std::to_string(n) + " < " +
                           std::to_string(num_coeffs(kSignalOrder)));
  if (bvalue <= 0.0) throw InvalidInput("bvalue must be positive");
  GradientScheme scheme;
  scheme.bvalue = bvalue;
  scheme.directions.reserve(n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    scheme.directions.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return scheme;
}

void check_population(const FiberPopulation& pop) {
  if (pop.fibers.empty() || pop.fibers.size() > 3)
    throw InvalidInput("fiber count must be 1..3");
  if (!(pop.axial_diffusivity >= pop.radial_diffusivity) ||
      !(pop.radial_diffusivity > 0.0))
    throw InvalidInput("diffusivities must satisfy AD >= RD > 0");
  double total = 0.0;
  for (const auto& f : pop.fibers) {
    if (!(f.fraction > 0.0)) throw InvalidInput("fractions must be positive");
    check_unit(f.dir);
    total += f.fraction;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw InvalidInput("fractions sum to " + std::to_string(total));
}

std::vector<double> tensor_signal(const FiberPopulation& pop,
                                  const GradientScheme& scheme) {
  check_population(pop);
  const double b = scheme.bvalue;
  const double rd = pop.radial_diffusivity;
  const double delta = pop.axial_diffusivity - rd;
  std::vector<double> out(scheme.directions.size(), 0.0);
  for (const auto& fiber : pop.fibers) {
    for (size_t i = 0; i < scheme.directions.size(); ++i) {
      const Direction& g = scheme.directions[i];
      const double c = g.x * fiber.dir.x + g.y * fiber.dir.y + g.z * fiber.dir.z;
      out[i] += fiber.fraction * std::exp(-b * (rd + delta * c * c));
    }
  }
  return out;
}

void add_rician_noise(std::span<double> attenuations, double snr,
                      RngStream& rng) {
  if (!(snr > 0.0)) throw InvalidInput("snr must be positive");
  const double sigma = 1.0 / snr;
  for (double& a : attenuations) {
    const double re = a + sigma * rng.normal();
    const double im = sigma * rng.normal();
    a = std::sqrt(re * re + im * im);
  }
}

SHCoeffs truth_fod(const FiberPopulation& pop, int order) {
  check_population(pop);
  SHCoeffs out(order);
  for (const auto& fiber : pop.fibers) {
    const SHCoeffs d = delta_sh(fiber.dir, order);
    for (size_t j = 0; j < out.coeffs.size(); ++j)
      out.coeffs[j] += fiber.fraction * d.coeffs[j];
  }
  return out;
}

FiberPopulation sample_population(const DatasetConfig& cfg, RngStream& rng) {
  FiberPopulation pop;
  pop.axial_diffusivity = cfg.axial_diffusivity;
  pop.radial_diffusivity = cfg.radial_diffusivity;

  const double u = rng.uniform();
  const int count = u < cfg.mix_one ? 1 : (u < cfg.mix_one + cfg.mix_two ? 2 : 3);

  const Direction first = uniform_direction(rng);
  pop.fibers.push_back({first, 1.0});
  for (int k = 1; k < count; ++k) {
    const double psi =
        rng.uniform(cfg.crossing_min_deg, cfg.crossing_max_deg) * M_PI / 180.0;
    const double alpha = 2.0 * M_PI * rng.uniform();
    Direction e1, e2;
    orthonormal_frame(first, e1, e2);
    const double s = std::sin(psi), c = std::cos(psi);
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    pop.fibers.push_back({{c * first.x + s * (ca * e1.x + sa * e2.x),
                           c * first.y + s * (ca * e1.y + sa * e2.y),
                           c * first.z + s * (ca * e1.z + sa * e2.z)},
                          1.0});
  }

  if (count == 1) {
    pop.fibers[0].fraction = 1.0;
    return pop;
  }
  // Dirichlet(1,..,1) rescaled above a per-fiber floor.
  double total = 0.0;
  std::vector<double> raw(count);
  for (int k = 0; k < count; ++k) {
    raw[k] = -std::log(1.0 - rng.uniform());
    total += raw[k];
  }
  const double spread = 1.0 - cfg.fraction_floor * count;
  for (int k = 0; k < count; ++k)
    pop.fibers[k].fraction = cfg.fraction_floor + spread * raw[k] / total;
  return pop;
}

std::vector<VoxelSample> generate_dataset(const DatasetConfig& cfg) {
  if (cfg.n_base_voxels < 1) throw InvalidInput("n_base_voxels must be >= 1");
  if (cfg.rotations_per_voxel < 0)
    throw InvalidInput("rotations_per_voxel must be >= 0");
  if (!(cfg.crossing_min_deg > 0.0) || cfg.crossing_max_deg > 90.0 ||
      cfg.crossing_min_deg > cfg.crossing_max_deg)
    throw InvalidInput("crossing angles must lie in (0, 90] degrees");

  const GradientScheme scheme = make_gradient_scheme(cfg.n_directions, cfg.bvalue);
  const double lambda = cfg.effective_lambda();
  const int per_voxel = cfg.rotations_per_voxel + 1;
  std::vector<VoxelSample> samples(size_t(cfg.n_base_voxels) * per_voxel);

  parallel_for_each(size_t(cfg.n_base_voxels), [&](size_t v) {
    RngStream rng(cfg.seed, kVoxelStreamSalt ^ v);
    const FiberPopulation pop = sample_population(cfg, rng);

    std::vector<double> atten = tensor_signal(pop, scheme);
    if (cfg.snr) add_rician_noise(atten, *cfg.snr, rng);

    VoxelSample base;
    base.signal_sh = fit_sh(atten, scheme.directions, kSignalOrder, lambda);
    base.fod_sh = truth_fod(pop, kFodOrder);
    base.group_id = static_cast<int64_t>(v);
    base.rotation = Rotation{};

    VoxelSample* slot = samples.data() + v * per_voxel;
    slot[0] = base;
    for (int r = 1; r < per_voxel; ++r) {
      const Rotation rot = random_rotation(rng);
      slot[r] = augment_sample(base, wigner_blocks(rot, kFodOrder), rot);
    }
  });
  return samples;
}

}  // namespace fodwb
