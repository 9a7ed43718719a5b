#include "fodwb/rotation.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "fodwb/kernels.hpp"

namespace fodwb {

namespace {

// Fixed fitting design shared by every rotation: 2x the coefficient count of
// the largest order keeps the least-squares system well conditioned.
constexpr int kDesignPoints = 160;

std::vector<Direction> fibonacci_design(int n) {
  std::vector<Direction> dirs;
  dirs.reserve(n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return dirs;
}

struct DesignCache {
  std::vector<Direction> dirs;
  std::vector<double> pinv;  // ncoef x n, row-major: (B^T B)^-1 B^T
};

// Cached per order (orders are 0,2,...,10).
const DesignCache& design_cache(int order) {
  static const std::array<DesignCache, kMaxOrder / 2 + 1> caches = [] {
    std::array<DesignCache, kMaxOrder / 2 + 1> out;
    const auto dirs = fibonacci_design(kDesignPoints);
    for (int order = 0; order <= kMaxOrder; order += 2) {
      const int ncoef = num_coeffs(order);
      const auto design = design_matrix(dirs, order);
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          B(design.data(), kDesignPoints, ncoef);
      Eigen::MatrixXd pinv =
          (B.transpose() * B).ldlt().solve(B.transpose().eval());
      DesignCache& cache = out[order / 2];
      cache.dirs = dirs;
      cache.pinv.resize(size_t(ncoef) * kDesignPoints);
      for (int i = 0; i < ncoef; ++i)
        for (int j = 0; j < kDesignPoints; ++j)
          cache.pinv[size_t(i) * kDesignPoints + j] = pinv(i, j);
    }
    return out;
  }();
  return caches.at(order / 2);
}

void check_quaternion(const Rotation& q) {
  const double n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
  if (std::abs(n2 - 1.0) > 1e-6)
    throw InvalidInput("quaternion squared norm " + std::to_string(n2));
}

}  // namespace

Rotation normalized(const Rotation& q) {
  const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  if (n == 0.0) throw InvalidInput("zero quaternion");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Rotation conjugate(const Rotation& q) { return {q.w, -q.x, -q.y, -q.z}; }

Rotation compose(const Rotation& b, const Rotation& a) {
  return {b.w * a.w - b.x * a.x - b.y * a.y - b.z * a.z,
          b.w * a.x + b.x * a.w + b.y * a.z - b.z * a.y,
          b.w * a.y - b.x * a.z + b.y * a.w + b.z * a.x,
          b.w * a.z + b.x * a.y - b.y * a.x + b.z * a.w};
}

Mat3 to_matrix(const Rotation& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
          2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
}

Direction rotate_dir(const Mat3& m, const Direction& v) {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
          m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Direction rotate_dir(const Rotation& q, const Direction& v) {
  return rotate_dir(to_matrix(q), v);
}

bool is_identity(const Rotation& q) {
  return q.x == 0.0 && q.y == 0.0 && q.z == 0.0 && std::abs(q.w) == 1.0;
}

Rotation random_rotation(RngStream& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const double t2 = 2.0 * M_PI * u2;
  const double t3 = 2.0 * M_PI * u3;
  return {b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3)};
}

WignerBlocks wigner_blocks(const Rotation& rot, int order) {
  check_quaternion(rot);
  const DesignCache& cache = design_cache(order);
  const int ncoef = num_coeffs(order);
  const int ndir = static_cast<int>(cache.dirs.size());

  // Basis rows at R^-1 u_i; fitting them gives the coefficient action.
  const Mat3 rinv = to_matrix(conjugate(rot));
  std::vector<double> rotated(size_t(ndir) * ncoef);
  for (int i = 0; i < ndir; ++i)
    eval_basis_into(rotate_dir(rinv, cache.dirs[i]), order,
                    rotated.data() + size_t(i) * ncoef);

  WignerBlocks out;
  out.order = order;
  out.blocks.resize(order / 2 + 1);
  std::vector<double> rot_block(size_t(ndir) * (2 * kMaxOrder + 1));
  for (int l = 0; l <= order; l += 2) {
    const int w = 2 * l + 1;
    const int j0 = sh_index(l, -l);
    // Gather the degree-l columns, then one small GEMM against the
    // pseudo-inverse rows of the same degree.
    for (int i = 0; i < ndir; ++i)
      for (int c = 0; c < w; ++c)
        rot_block[size_t(i) * w + c] = rotated[size_t(i) * ncoef + j0 + c];
    auto& block = out.blocks[l / 2];
    block.assign(size_t(w) * w, 0.0);
    kern::gemm_nn(block.data(), cache.pinv.data() + size_t(j0) * ndir,
                  rot_block.data(), w, w, ndir);
  }
  return out;
}

SHCoeffs rotate_sh(const SHCoeffs& c, const WignerBlocks& blocks) {
  if (blocks.order < c.order)
    throw InvalidInput("blocks order below coefficient order");
  SHCoeffs out(c.order);
  for (int l = 0; l <= c.order; l += 2) {
    const int w = 2 * l + 1;
    const int j0 = sh_index(l, -l);
    const auto& block = blocks.blocks[l / 2];
    for (int r = 0; r < w; ++r)
      out.coeffs[j0 + r] =
          kern::dot(block.data() + size_t(r) * w, c.coeffs.data() + j0, w);
  }
  return out;
}

SHCoeffs rotate_sh(const SHCoeffs& c, const Rotation& rot) {
  return rotate_sh(c, wigner_blocks(rot, c.order));
}

VoxelSample augment_sample(const VoxelSample& s, const WignerBlocks& blocks,
                           const Rotation& rot) {
  VoxelSample out;
  out.signal_sh = rotate_sh(s.signal_sh, blocks);
  out.fod_sh = rotate_sh(s.fod_sh, blocks);
  out.group_id = s.group_id;
  out.rotation = normalized(compose(rot, s.rotation));
  return out;
}

VoxelSample augment_sample(const VoxelSample& s, const Rotation& rot) {
  const int order = std::max(s.signal_sh.order, s.fod_sh.order);
  return augment_sample(s, wigner_blocks(rot, order), rot);
}

}  // namespace fodwb
