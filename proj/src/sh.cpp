#include "fodwb/sh.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace fodwb {

namespace {

constexpr double kFourPi = 4.0 * M_PI;

void check_order(int order) {
  if (order < 0 || order % 2 != 0 || order > kMaxOrder)
    throw InvalidOrder("order must be even in [0, " +
                       std::to_string(kMaxOrder) + "], got " +
                       std::to_string(order));
}

// (l-m)! / (l+m)! as a running product, exact in double through l = 10
double factorial_ratio(int l, int m) {
  double r = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) r /= k;
  return r;
}

}  // namespace

SHCoeffs::SHCoeffs(int order_) : order(order_) {
  check_order(order_);
  coeffs.assign(num_coeffs(order_), 0.0);
}

double& SHCoeffs::at(int l, int m) { return coeffs[sh_index(l, m)]; }
double SHCoeffs::at(int l, int m) const { return coeffs[sh_index(l, m)]; }

int sh_index(int l, int m) {
  if (l < 0 || l % 2 != 0 || l > kMaxOrder)
    throw InvalidIndex("degree " + std::to_string(l));
  if (m < -l || m > l)
    throw InvalidIndex("order " + std::to_string(m) + " at degree " +
                       std::to_string(l));
  return l * (l + 1) / 2 + m;
}

int num_coeffs(int order) {
  check_order(order);
  return (order + 1) * (order + 2) / 2;
}

int degree_of_index(int j) {
  for (int l = 0; l <= kMaxOrder; l += 2) {
    if (j < (l + 1) * (l + 2) / 2) return l;
  }
  throw InvalidIndex("flat index " + std::to_string(j));
}

void check_unit(const Direction& dir) {
  const double n2 = dir.x * dir.x + dir.y * dir.y + dir.z * dir.z;
  if (std::abs(n2 - 1.0) > 1e-6)
    throw InvalidDirection("squared norm " + std::to_string(n2));
}

Direction normalized(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (n == 0.0) throw InvalidDirection("zero vector");
  return {x / n, y / n, z / n};
}

void eval_basis_into(const Direction& dir, int order, double* out) {
  check_order(order);
  check_unit(dir);

  const double ct = dir.z;
  const double st = std::sqrt(std::max(0.0, dir.x * dir.x + dir.y * dir.y));
  double cphi = 1.0, sphi = 0.0;
  if (st > 1e-300) {
    cphi = dir.x / st;
    sphi = dir.y / st;
  }

  // Associated Legendre values with Condon-Shortley phase: for each m, seed
  // the sectoral term and recur upward in l.
  double pmm = 1.0;  // P_m^m
  double cm = 1.0, sm = 0.0;  // cos(m phi), sin(m phi)
  for (int m = 0; m <= order; ++m) {
    if (m > 0) {
      pmm *= -(2 * m - 1) * st;
      const double c_next = cm * cphi - sm * sphi;
      sm = sm * cphi + cm * sphi;
      cm = c_next;
    }
    double p_prev = pmm;                       // P_m^m
    double p_curr = (2 * m + 1) * ct * pmm;    // P_{m+1}^m
    for (int l = m; l <= order; ++l) {
      double plm;
      if (l == m) {
        plm = p_prev;
      } else if (l == m + 1) {
        plm = p_curr;
      } else {
        plm = ((2 * l - 1) * ct * p_curr - (l + m - 1) * p_prev) / (l - m);
        p_prev = p_curr;
        p_curr = plm;
      }
      if (l % 2 != 0) continue;
      const double norm = std::sqrt((2 * l + 1) / kFourPi * factorial_ratio(l, m));
      if (m == 0) {
        out[sh_index(l, 0)] = norm * plm;
      } else {
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        const double common = M_SQRT2 * sign * norm * plm;
        out[sh_index(l, m)] = common * cm;
        out[sh_index(l, -m)] = common * sm;
      }
    }
  }
}

std::vector<double> eval_basis(const Direction& dir, int order) {
  std::vector<double> out(num_coeffs(order));
  eval_basis_into(dir, order, out.data());
  return out;
}

std::vector<double> design_matrix(const std::vector<Direction>& directions,
                                  int order) {
  const int ncoef = num_coeffs(order);
  if (static_cast<int>(directions.size()) < ncoef)
    throw TooFewDirections(std::to_string(directions.size()) +
                           " directions for " + std::to_string(ncoef) +
                           " coefficients");
  std::vector<double> mat(directions.size() * static_cast<size_t>(ncoef));
  for (size_t i = 0; i < directions.size(); ++i)
    eval_basis_into(directions[i], order, mat.data() + i * ncoef);
  return mat;
}

SHCoeffs fit_sh(std::span<const double> amplitudes,
                const std::vector<Direction>& directions, int order,
                double lb_lambda) {
  if (amplitudes.size() != directions.size())
    throw InvalidInput("amplitude/direction count mismatch");
  if (lb_lambda < 0.0) throw InvalidInput("negative regularization weight");

  const int ncoef = num_coeffs(order);
  const std::vector<double> design = design_matrix(directions, order);
  const int ndir = static_cast<int>(directions.size());

  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      B(design.data(), ndir, ncoef);
  Eigen::Map<const VectorXd> a(amplitudes.data(), ndir);

  MatrixXd normal = B.transpose() * B;
  if (lb_lambda > 0.0) {
    for (int j = 0; j < ncoef; ++j) {
      const double l = degree_of_index(j);
      normal(j, j) += lb_lambda * l * l * (l + 1) * (l + 1);
    }
  }

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(normal);
  const VectorXd& ev = eig.eigenvalues();
  const double ev_max = ev(ncoef - 1);
  const double ev_min = ev(0);
  if (!(ev_min > 0.0) || ev_max / ev_min > 1e12)
    throw SingularFit("normal-equations condition estimate " +
                      std::to_string(ev_min > 0.0 ? ev_max / ev_min : INFINITY));

  const VectorXd rhs = B.transpose() * a;
  const VectorXd c =
      eig.eigenvectors() * (eig.eigenvectors().transpose() * rhs).cwiseQuotient(ev);

  SHCoeffs out(order);
  for (int j = 0; j < ncoef; ++j) out.coeffs[j] = c(j);
  return out;
}

double evaluate_at(const SHCoeffs& coeffs, const Direction& dir) {
  double basis[66];
  eval_basis_into(dir, coeffs.order, basis);
  double acc = 0.0;
  for (size_t j = 0; j < coeffs.coeffs.size(); ++j) acc += coeffs.coeffs[j] * basis[j];
  return acc;
}

std::vector<double> evaluate(const SHCoeffs& coeffs,
                             const std::vector<Direction>& dirs) {
  std::vector<double> out(dirs.size());
  for (size_t i = 0; i < dirs.size(); ++i) out[i] = evaluate_at(coeffs, dirs[i]);
  return out;
}

SHCoeffs delta_sh(const Direction& dir, int order) {
  SHCoeffs out(order);
  eval_basis_into(dir, order, out.coeffs.data());
  return out;
}

}  // namespace fodwb
