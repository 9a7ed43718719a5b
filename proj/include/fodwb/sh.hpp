#pragma once

#include <span>
#include <vector>

#include "fodwb/errors.hpp"

namespace fodwb {

inline constexpr int kMaxOrder = 10;
inline constexpr int kSignalOrder = 8;   // diffusion signal band limit
inline constexpr int kFodOrder = 10;     // FOD band limit

struct Direction {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
};

// Real even-degree spherical harmonic coefficients, indexed by sh_index(l,m).
struct SHCoeffs {
  int order = 0;
  std::vector<double> coeffs;

  SHCoeffs() : coeffs(1, 0.0) {}
  explicit SHCoeffs(int order_);
  double& at(int l, int m);
  double at(int l, int m) const;
};

struct GradientScheme {
  double bvalue = 0.0;
  std::vector<Direction> directions;
};

// Flat index for even degree l and order m, l ascending, m from -l to +l.
int sh_index(int l, int m);

// Number of coefficients of an even band limit: (order+1)(order+2)/2.
int num_coeffs(int order);

// Degree of the coefficient at flat index j.
int degree_of_index(int j);

// Real even SH basis values at a unit direction, in sh_index order.
// Convention: for m < 0, sqrt(2)*(-1)^m*Im(Y_l^|m|); for m = 0, Y_l^0; for
// m > 0, sqrt(2)*(-1)^m*Re(Y_l^m), with Condon-Shortley phase in Y_l^m.
std::vector<double> eval_basis(const Direction& dir, int order);
void eval_basis_into(const Direction& dir, int order, double* out);

// Row i = eval_basis(directions[i], order); row-major n x num_coeffs(order).
std::vector<double> design_matrix(const std::vector<Direction>& directions,
                                  int order);

// Least-squares coefficients of sampled amplitudes, with optional
// Laplace-Beltrami regularization: min |B c - a|^2 + lambda * sum_j
// l_j^2 (l_j+1)^2 c_j^2. Throws SingularFit when the normal-equations
// condition estimate exceeds 1e12.
SHCoeffs fit_sh(std::span<const double> amplitudes,
                const std::vector<Direction>& directions, int order,
                double lb_lambda = 0.0);

// Synthesis: amplitude at each direction.
std::vector<double> evaluate(const SHCoeffs& coeffs,
                             const std::vector<Direction>& dirs);
double evaluate_at(const SHCoeffs& coeffs, const Direction& dir);

// Band-limited projection of a symmetric unit point mass: c_j = basis_j(dir).
SHCoeffs delta_sh(const Direction& dir, int order);

// |v| must be 1 within 1e-6; throws InvalidDirection otherwise.
void check_unit(const Direction& dir);

Direction normalized(double x, double y, double z);

}  // namespace fodwb
