#pragma once

#include <array>
#include <vector>

#include "fodwb/rng.hpp"
#include "fodwb/sample.hpp"
#include "fodwb/sh.hpp"

namespace fodwb {

// Per-degree orthogonal matrices realizing a rotation on SH coefficients.
struct WignerBlocks {
  int order = 0;
  // blocks[l/2] is the (2l+1)x(2l+1) row-major matrix for even degree l
  std::vector<std::vector<double>> blocks;
};

using Mat3 = std::array<double, 9>;

Rotation normalized(const Rotation& q);
Rotation conjugate(const Rotation& q);
// compose(b, a) applies a first, then b.
Rotation compose(const Rotation& b, const Rotation& a);
Mat3 to_matrix(const Rotation& q);
Direction rotate_dir(const Mat3& m, const Direction& v);
Direction rotate_dir(const Rotation& q, const Direction& v);
bool is_identity(const Rotation& q);

// Uniform rotation on SO(3) (Shoemake subgroup sampling from three uniforms).
Rotation random_rotation(RngStream& rng);

// Blocks D_l with evaluate(D_l c_l, u) = evaluate(c_l, R^-1 u), built by
// exact least squares of the rotated basis on a fixed spherical design.
WignerBlocks wigner_blocks(const Rotation& rot, int order);

// Block-diagonal application; order unchanged.
SHCoeffs rotate_sh(const SHCoeffs& c, const WignerBlocks& blocks);
SHCoeffs rotate_sh(const SHCoeffs& c, const Rotation& rot);

// Rotates signal and FOD coefficients jointly; group id preserved, the
// sample's stored rotation becomes rot composed with the previous one.
VoxelSample augment_sample(const VoxelSample& s, const WignerBlocks& blocks,
                           const Rotation& rot);
VoxelSample augment_sample(const VoxelSample& s, const Rotation& rot);

}  // namespace fodwb
