#include "fodwb/csd.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "fodwb/phantom.hpp"

namespace fodwb {

namespace {

constexpr int kRingPoints = 25;  // > 2*order so ring sums are exact

// Order-2 expansions of the six monomials u_a u_b; the second-moment matrix
// of an FOD is then a linear map of its l <= 2 coefficients. Built once from
// an exact band-limited fit.
const std::array<std::vector<double>, 6>& moment_expansions() {
  static const std::array<std::vector<double>, 6> expansions = [] {
    const int n = 64;
    std::vector<Direction> dirs;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / n;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
    }
    std::array<std::vector<double>, 6> out;
    std::array<std::vector<double>, 6> values;
    for (auto& v : values) v.resize(n);
    for (int i = 0; i < n; ++i) {
      const Direction& d = dirs[i];
      values[0][i] = d.x * d.x;
      values[1][i] = d.y * d.y;
      values[2][i] = d.z * d.z;
      values[3][i] = d.x * d.y;
      values[4][i] = d.x * d.z;
      values[5][i] = d.y * d.z;
    }
    for (int k = 0; k < 6; ++k) out[k] = fit_sh(values[k], dirs, 2, 0.0).coeffs;
    return out;
  }();
  return expansions;
}

// Principal axis of the second-moment tensor of the l <= 2 part.
Direction principal_axis(const SHCoeffs& fod) {
  const auto& expansions = moment_expansions();
  const int n2 = num_coeffs(2);
  double moments[6] = {0, 0, 0, 0, 0, 0};
  for (int k = 0; k < 6; ++k)
    for (int j = 0; j < n2 && j < static_cast<int>(fod.coeffs.size()); ++j)
      moments[k] += expansions[k][j] * fod.coeffs[j];

  Eigen::Matrix3d m;
  m << moments[0], moments[3], moments[4],
       moments[3], moments[1], moments[5],
       moments[4], moments[5], moments[2];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m);
  const Eigen::Vector3d axis = eig.eigenvectors().col(2);  // largest eigenvalue
  return {axis(0), axis(1), axis(2)};
}

void orthonormal_pair(const Direction& n, Direction& e1, Direction& e2) {
  if (std::abs(n.x) <= std::abs(n.y) && std::abs(n.x) <= std::abs(n.z))
    e1 = normalized(0.0, -n.z, n.y);
  else if (std::abs(n.y) <= std::abs(n.z))
    e1 = normalized(-n.z, 0.0, n.x);
  else
    e1 = normalized(-n.y, n.x, 0.0);
  e2 = {n.y * e1.z - n.z * e1.y, n.z * e1.x - n.x * e1.z,
        n.x * e1.y - n.y * e1.x};
}

}  // namespace

ResponseFunction estimate_response(const SHCoeffs& zsignal) {
  double zonal_energy = 0.0, total_energy = 0.0;
  for (int l = 0; l <= zsignal.order; l += 2) {
    for (int m = -l; m <= l; ++m) {
      const double c = zsignal.at(l, m);
      total_energy += c * c;
      if (m == 0) zonal_energy += c * c;
    }
  }
  if (total_energy == 0.0 || total_energy - zonal_energy > 0.05 * total_energy)
    throw NotZonal("m != 0 energy fraction " +
                   std::to_string(total_energy > 0.0
                                      ? 1.0 - zonal_energy / total_energy
                                      : 1.0));
  ResponseFunction resp;
  resp.order = zsignal.order;
  resp.zonal.resize(zsignal.order / 2 + 1);
  for (int l = 0; l <= zsignal.order; l += 2)
    resp.zonal[l / 2] = zsignal.at(l, 0);
  if (!(resp.zonal[0] > 0.0)) throw NotZonal("nonpositive mean signal");
  return resp;
}

std::vector<double> convolution_diagonal(const ResponseFunction& resp,
                                         int order) {
  if (order > resp.order) throw InvalidInput("order above response order");
  std::vector<double> diag(num_coeffs(order));
  for (int l = 0; l <= order; l += 2) {
    const double factor = std::sqrt(4.0 * M_PI / (2 * l + 1)) * resp.zonal[l / 2];
    for (int m = -l; m <= l; ++m) diag[sh_index(l, m)] = factor;
  }
  return diag;
}

SHCoeffs forward_convolve(const SHCoeffs& fod, const ResponseFunction& resp) {
  const std::vector<double> diag = convolution_diagonal(resp, fod.order);
  SHCoeffs out(fod.order);
  for (size_t j = 0; j < out.coeffs.size(); ++j)
    out.coeffs[j] = diag[j] * fod.coeffs[j];
  return out;
}

CsdResult csd_deconvolve(const SHCoeffs& signal, const ResponseFunction& resp,
                         const CsdParams& params) {
  const int order = signal.order;
  const int ncoef = num_coeffs(order);
  if (params.init_order > order) throw InvalidInput("init_order above signal order");
  if (params.max_iters < 1) throw InvalidInput("max_iters must be >= 1");
  if (params.n_constraint_dirs < 2 * kRingPoints)
    throw InvalidInput("n_constraint_dirs too small for the ring grid");

  const std::vector<double> diag = convolution_diagonal(resp, order);
  for (int l = 0; l <= params.init_order; l += 2) {
    if (resp.zonal[l / 2] == 0.0)
      throw SingularResponse("zero zonal term at degree " + std::to_string(l));
  }

  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  Eigen::Map<const VectorXd> s(signal.coeffs.data(), ncoef);
  Eigen::Map<const VectorXd> c_diag(diag.data(), ncoef);

  VectorXd f = VectorXd::Zero(ncoef);
  for (int j = 0; j < num_coeffs(params.init_order); ++j)
    f(j) = signal.coeffs[j] / diag[j];

  SHCoeffs f0(order);
  for (int j = 0; j < ncoef; ++j) f0.coeffs[j] = f(j);

  // Equal-area rings about the initial FOD's principal axis. Per-ring basis
  // sums are phase-exact, so the grid's gauge cannot leak into the result.
  const int n_rings = params.n_constraint_dirs / kRingPoints;
  const int n_dirs = n_rings * kRingPoints;
  const Direction axis = principal_axis(f0);
  Direction e1, e2;
  orthonormal_pair(axis, e1, e2);

  std::vector<double> basis(size_t(n_dirs) * ncoef);
  for (int k = 0; k < n_rings; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / n_rings;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int p = 0; p < kRingPoints; ++p) {
      const double phi = 2.0 * M_PI * p / kRingPoints;
      const double cx = r * std::cos(phi), cy = r * std::sin(phi);
      const Direction dir{cx * e1.x + cy * e2.x + z * axis.x,
                          cx * e1.y + cy * e2.y + z * axis.y,
                          cx * e1.z + cy * e2.z + z * axis.z};
      eval_basis_into(dir, order,
                      basis.data() + (size_t(k) * kRingPoints + p) * ncoef);
    }
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      B(basis.data(), n_dirs, ncoef);

  const VectorXd init_amp = B * f;
  const double threshold = params.tau * init_amp.mean();
  // Constraint weight commensurate with the data operator and independent of
  // the grid density.
  const double eta_sq = params.lambda * params.lambda * 4.0 * M_PI *
                        resp.zonal[0] * resp.zonal[0] / n_dirs;

  std::vector<char> active(n_rings, 0), previous(n_rings, 0);
  CsdResult result;
  VectorXd best_f = f;
  double best_objective = INFINITY;
  for (int iter = 0; iter < params.max_iters; ++iter) {
    const VectorXd amp = B * f;
    for (int k = 0; k < n_rings; ++k) {
      double mean = 0.0;
      for (int p = 0; p < kRingPoints; ++p) mean += amp(k * kRingPoints + p);
      active[k] = mean / kRingPoints < threshold ? 1 : 0;
    }

    if (iter > 0 && active == previous) {
      result.converged = true;
      best_f = f;
      break;
    }
    previous = active;

    MatrixXd normal = MatrixXd::Zero(ncoef, ncoef);
    normal.diagonal() = c_diag.cwiseProduct(c_diag);
    for (int k = 0; k < n_rings; ++k) {
      if (!active[k]) continue;
      for (int p = 0; p < kRingPoints; ++p)
        normal.noalias() += eta_sq *
                            B.row(k * kRingPoints + p).transpose() *
                            B.row(k * kRingPoints + p);
    }
    f = normal.ldlt().solve(c_diag.cwiseProduct(s));
    ++result.iterations;

    const double data_residual = (c_diag.cwiseProduct(f) - s).norm();
    result.data_residuals.push_back(data_residual);
    double objective = data_residual * data_residual;
    for (int k = 0; k < n_rings; ++k) {
      if (!active[k]) continue;
      for (int p = 0; p < kRingPoints; ++p) {
        const double a = B.row(k * kRingPoints + p).dot(f);
        objective += eta_sq * a * a;
      }
    }
    if (objective < best_objective) {
      best_objective = objective;
      best_f = f;
    }
  }

  result.fod = SHCoeffs(order);
  for (int j = 0; j < ncoef; ++j) result.fod.coeffs[j] = best_f(j);
  return result;
}

ResponseFunction calibrate_response(double axial_diffusivity,
                                    double radial_diffusivity,
                                    const GradientScheme& scheme,
                                    int n_average) {
  FiberPopulation pop;
  pop.fibers.push_back({Direction{0.0, 0.0, 1.0}, 1.0});
  pop.axial_diffusivity = axial_diffusivity;
  pop.radial_diffusivity = radial_diffusivity;

  std::vector<double> zonal_sum;
  ResponseFunction resp;
  for (int i = 0; i < n_average; ++i) {
    const std::vector<double> atten = tensor_signal(pop, scheme);
    const SHCoeffs fitted = fit_sh(atten, scheme.directions, kSignalOrder, 0.0);
    const ResponseFunction one = estimate_response(fitted);
    if (zonal_sum.empty()) {
      zonal_sum.assign(one.zonal.begin(), one.zonal.end());
      resp.order = one.order;
    } else {
      for (size_t j = 0; j < zonal_sum.size(); ++j) zonal_sum[j] += one.zonal[j];
    }
  }
  resp.zonal.resize(zonal_sum.size());
  for (size_t j = 0; j < zonal_sum.size(); ++j)
    resp.zonal[j] = zonal_sum[j] / n_average;
  return resp;
}

}  // namespace fodwb
