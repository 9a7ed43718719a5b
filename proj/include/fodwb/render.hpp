#pragma once

#include <string>
#include <vector>

#include "fodwb/sh.hpp"

namespace fodwb {

// A grid of FOD glyphs: each cell draws the closed polar curve
// r(theta) ~ max(amplitude in the x-y slice plane, 0), colored by the
// dominant 3D direction (|x|,|y|,|z|) -> (R,G,B).
struct GlyphScene {
  std::vector<SHCoeffs> cells;
  int n_cols = 0;                  // 0 = near-square layout
  enum class Norm { per_voxel, global } norm = Norm::per_voxel;
  int samples_per_glyph = 128;     // >= 64
  double cell_px = 48.0;
};

std::string render_svg(const GlyphScene& scene);

}  // namespace fodwb
