#pragma once

#include "icar/numerics/tensor.hpp"

namespace icar::complexity {

// Handcrafted complexity descriptors of a 3 x S x S image in [0, 1].
struct ComplexityFeatures {
  double pixel_entropy = 0.0;    // bits over a 256-bin grayscale histogram, in [0, 8]
  double edge_density = 0.0;     // fraction of pixels whose 3x3 gray range exceeds kEdgeThreshold
  double color_diversity = 0.0;  // distinct colors / kPaletteSize after 4-level channel quantization
  double patch_variance = 0.0;   // mean gray variance over 4x4 patches
};

inline constexpr double kEdgeThreshold = 0.1;
inline constexpr int kColorLevels = 4;
inline constexpr int kPaletteSize = kColorLevels * kColorLevels * kColorLevels;
inline constexpr int kPatchSide = 4;

ComplexityFeatures extract_features(const Tensor& image);

}  // namespace icar::complexity
