#include "icar/complexity/features.hpp"

#include "icar/error.hpp"

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>

namespace icar::complexity {

namespace {

int quantize(double v, int levels) { return std::clamp(static_cast<int>(std::floor(v * levels)), 0, levels - 1); }

}  // namespace

ComplexityFeatures extract_features(const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != image.dim(2)) {
    throw DimensionError("extract_features: expected 3 x S x S, got " + shape_string(image.shape()));
  }
  const Index s = image.dim(1);
  const Index plane = s * s;
  const Vector& px = image.data();

  Matrix gray(s, s);
  std::array<long, 256> hist{};
  std::bitset<kPaletteSize> palette;
  for (Index y = 0; y < s; ++y) {
    for (Index x = 0; x < s; ++x) {
      const Index i = y * s + x;
      const double r = px[i], g = px[plane + i], b = px[2 * plane + i];
      gray(y, x) = 0.299 * r + 0.587 * g + 0.114 * b;
      ++hist[quantize(gray(y, x), 256)];
      palette.set((quantize(r, kColorLevels) * kColorLevels + quantize(g, kColorLevels)) * kColorLevels +
                  quantize(b, kColorLevels));
    }
  }

  ComplexityFeatures f;
  for (long c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(plane);
    f.pixel_entropy -= p * std::log2(p);
  }
  f.pixel_entropy = std::clamp(f.pixel_entropy, 0.0, 8.0);
  f.color_diversity = static_cast<double>(palette.count()) / kPaletteSize;

  // Morphological gradient: max - min over the clipped 3x3 neighborhood.
  long edges = 0;
  for (Index y = 0; y < s; ++y) {
    for (Index x = 0; x < s; ++x) {
      const Index y0 = std::max<Index>(0, y - 1), y1 = std::min<Index>(s - 1, y + 1);
      const Index x0 = std::max<Index>(0, x - 1), x1 = std::min<Index>(s - 1, x + 1);
      const auto win = gray.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1);
      if (win.maxCoeff() - win.minCoeff() > kEdgeThreshold) ++edges;
    }
  }
  f.edge_density = static_cast<double>(edges) / static_cast<double>(plane);

  double total = 0.0;
  long patches = 0;
  for (Index y = 0; y < s; y += kPatchSide) {
    for (Index x = 0; x < s; x += kPatchSide) {
      const auto patch = gray.block(y, x, std::min<Index>(kPatchSide, s - y), std::min<Index>(kPatchSide, s - x));
      const double mu = patch.mean();
      total += (patch.array() - mu).square().mean();
      ++patches;
    }
  }
  f.patch_variance = total / static_cast<double>(patches);
  return f;
}

}  // namespace icar::complexity
