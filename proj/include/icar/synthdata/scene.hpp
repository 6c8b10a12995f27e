#pragma once

#include "icar/numerics/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace icar::synth {

enum class ShapeKind : int { kCircle = 0, kSquare, kTriangle, kCross };
enum class ColorName : int { kRed = 0, kGreen, kBlue, kYellow, kCyan, kMagenta, kWhite, kOrange };
enum class SizeClass : int { kSmall = 0, kLarge };

inline constexpr int kShapeCount = 4;
inline constexpr int kPaletteSize = 8;
// Objects sit in distinct cells of a fixed 3x3 grid.
inline constexpr int kGridSide = 3;
inline constexpr int kMaxObjects = kGridSide * kGridSide;
inline constexpr int kNoiseLevels = 10;
// Fraction of pixels replaced by speckle at background_noise == 1.
inline constexpr double kMaxSpeckleFraction = 0.4;

struct SceneObject {
  ShapeKind shape;
  ColorName color;
  int cell;  // row-major index into the grid
  SizeClass size;
};

struct SceneSpec {
  int object_count = 0;
  std::vector<SceneObject> objects;  // sorted by cell
  double background_noise = 0.0;     // one of (j + 0.5) / kNoiseLevels
  std::uint64_t seed = 0;            // stream used to draw this scene and its speckle
};

// 0.5 (count - 1) / (max_objects - 1) + 0.5 noise, clamped to [0, 1].
// With max_objects == 1 the count term is zero.
double complexity_score(int object_count, double background_noise, int max_objects);
inline bool is_complex(double score) { return score > 0.5; }

// Draws a scene from a stream seeded by `seed`. object_count is uniform in
// [1, max_objects]; cells are distinct.
SceneSpec sample_scene(std::uint64_t seed, int max_objects);

// 3 x S x S image with values k / 255. Deterministic in (spec, image_size).
Tensor render(const SceneSpec& spec, int image_size);

std::vector<std::string> caption_words(const SceneSpec& spec);
std::string caption_text(const SceneSpec& spec);

// Sorted multiset of shape kinds packed as four 4-bit counts.
std::uint64_t category_id(const SceneSpec& spec);

// Word-level vocabulary of every caption the generator can emit. Ids 0-2 are
// reserved for padding, begin and end of sequence.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  static const Vocabulary& instance();

  int size() const { return static_cast<int>(words_.size()); }
  int id(std::string_view word) const;
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::vector<int> encode(const std::vector<std::string>& words) const;

 private:
  Vocabulary();
  std::vector<std::string> words_;
};

std::string_view shape_name(ShapeKind s);
std::string_view color_name(ColorName c);
std::array<double, 3> color_rgb(ColorName c);

}  // namespace icar::synth
