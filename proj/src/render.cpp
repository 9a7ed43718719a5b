#include "fodwb/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fodwb {

namespace {

std::vector<Direction> color_probe_directions() {
  // small fixed Fibonacci set for picking the dominant 3D direction
  std::vector<Direction> dirs;
  const int n = 256;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  dirs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  return dirs;
}

void append_fixed(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  out += buf;
}

}  // namespace

std::string render_svg(const GlyphScene& scene) {
  if (scene.cells.empty()) throw EmptyScene("no glyphs to render");
  if (scene.samples_per_glyph < 64)
    throw InvalidInput("samples_per_glyph must be >= 64");
  if (scene.n_cols < 0) throw InvalidInput("negative column count");

  const int n = static_cast<int>(scene.cells.size());
  const int cols = scene.n_cols > 0
                       ? scene.n_cols
                       : static_cast<int>(std::ceil(std::sqrt(double(n))));
  const int rows = (n + cols - 1) / cols;
  const double cell = scene.cell_px;
  const double radius = 0.48 * cell;

  // polar samples in the x-y slice plane, clamped at zero
  const int s = scene.samples_per_glyph;
  std::vector<std::vector<double>> amplitudes(n);
  std::vector<double> cell_max(n, 0.0);
  for (int i = 0; i < n; ++i) {
    amplitudes[i].resize(s);
    for (int k = 0; k < s; ++k) {
      const double theta = 2.0 * M_PI * k / s;
      const Direction dir{std::cos(theta), std::sin(theta), 0.0};
      amplitudes[i][k] = std::max(evaluate_at(scene.cells[i], dir), 0.0);
      cell_max[i] = std::max(cell_max[i], amplitudes[i][k]);
    }
  }
  const double global_max = *std::max_element(cell_max.begin(), cell_max.end());

  const auto probes = color_probe_directions();

  std::string svg;
  svg.reserve(size_t(n) * s * 16 + 512);
  char header[160];
  std::snprintf(header, sizeof(header),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" "
                "height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                int(cols * cell), int(rows * cell), int(cols * cell),
                int(rows * cell));
  svg += header;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"black\"/>\n";

  for (int i = 0; i < n; ++i) {
    const double denom =
        scene.norm == GlyphScene::Norm::global ? global_max : cell_max[i];
    const double cx = (i % cols + 0.5) * cell;
    const double cy = (i / cols + 0.5) * cell;
    if (denom <= 0.0) continue;  // nothing positive to draw

    // dominant direction over the 3D probe set
    double best = -INFINITY;
    Direction dom{1.0, 0.0, 0.0};
    for (const auto& p : probes) {
      const double a = evaluate_at(scene.cells[i], p);
      if (a > best) {
        best = a;
        dom = p;
      }
    }
    const int r8 = static_cast<int>(std::lround(255.0 * std::abs(dom.x)));
    const int g8 = static_cast<int>(std::lround(255.0 * std::abs(dom.y)));
    const int b8 = static_cast<int>(std::lround(255.0 * std::abs(dom.z)));

    svg += "<path d=\"M";
    for (int k = 0; k < s; ++k) {
      const double theta = 2.0 * M_PI * k / s;
      const double r = radius * amplitudes[i][k] / denom;
      // SVG y grows downward
      const double px = cx + r * std::cos(theta);
      const double py = cy - r * std::sin(theta);
      if (k) svg += "L";
      append_fixed(svg, px);
      svg += ",";
      append_fixed(svg, py);
    }
    char color[64];
    std::snprintf(color, sizeof(color), "Z\" fill=\"rgb(%d,%d,%d)\"/>\n", r8,
                  g8, b8);
    svg += color;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace fodwb
