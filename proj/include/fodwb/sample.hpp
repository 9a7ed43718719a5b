#pragma once

#include <cstdint>

#include "fodwb/sh.hpp"

namespace fodwb {

struct Rotation {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Paired (signal, truth FOD) coefficients for one voxel; group_id identifies
// the un-augmented base voxel and is preserved by augmentation.
struct VoxelSample {
  SHCoeffs signal_sh;  // order 8
  SHCoeffs fod_sh;     // order 10
  int64_t group_id = 0;
  Rotation rotation;   // identity for base samples
};

}  // namespace fodwb
