#pragma once

#include "icar/numerics/tensor.hpp"

#include <filesystem>

namespace icar::synth {

// Binary P6, maxval 255, row-major RGB.
void write_ppm(const std::filesystem::path& path, const Tensor& image);
// Throws LoadError naming the file on malformed headers, truncated payloads
// or a size other than expected_size (when positive).
Tensor read_ppm(const std::filesystem::path& path, int expected_size = 0);

}  // namespace icar::synth
