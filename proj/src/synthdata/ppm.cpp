#include "icar/synthdata/ppm.hpp"

#include "icar/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace icar::synth {

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != image.dim(2)) {
    throw DimensionError("write_ppm: expected a 3xSxS image, got " + shape_string(image.shape()));
  }
  const Index s = image.dim(1);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(3 * s * s));
  for (Index y = 0; y < s; ++y) {
    for (Index x = 0; x < s; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image[(c * s + y) * s + x], 0.0, 1.0);
        bytes[static_cast<std::size_t>((y * s + x) * 3 + c)] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P6\n" << s << ' ' << s << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Tensor read_ppm(const std::filesystem::path& path, int expected_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("image file missing: " + path.string());
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (!in || magic != "P6" || maxval != 255 || width <= 0 || width != height) {
    throw LoadError("malformed PPM header in " + path.string());
  }
  if (expected_size > 0 && width != expected_size) {
    throw LoadError("image " + path.string() + " is " + std::to_string(width) + "x" + std::to_string(height) +
                    ", expected " + std::to_string(expected_size) + "x" + std::to_string(expected_size));
  }
  in.get();  // single whitespace after maxval
  const Index s = width;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(3 * s * s));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw LoadError("truncated image data in " + path.string());
  }
  Tensor image({3, s, s});
  for (Index y = 0; y < s; ++y)
    for (Index x = 0; x < s; ++x)
      for (int c = 0; c < 3; ++c)
        image[(c * s + y) * s + x] = bytes[static_cast<std::size_t>((y * s + x) * 3 + c)] / 255.0;
  return image;
}

}  // namespace icar::synth
