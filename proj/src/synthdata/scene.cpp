#include "icar/synthdata/scene.hpp"

#include "icar/error.hpp"
#include "icar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icar::synth {

namespace {

constexpr std::array<std::string_view, kShapeCount> kShapeNames{"circle", "square", "triangle", "cross"};
constexpr std::array<std::string_view, kPaletteSize> kColorNames{"red",  "green",   "blue",  "yellow",
                                                                 "cyan", "magenta", "white", "orange"};
constexpr std::array<std::string_view, kMaxObjects> kCellNames{
    "top-left", "top", "top-right", "left", "center", "right", "bottom-left", "bottom", "bottom-right"};
constexpr std::array<std::string_view, 5> kNoiseWords{"clean", "speckled", "grainy", "noisy", "cluttered"};
constexpr std::array<double, 3> kBackground{0.25, 0.25, 0.25};

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

bool inside(ShapeKind shape, double dx, double dy, double r) {
  switch (shape) {
    case ShapeKind::kCircle:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::kSquare:
      return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
    case ShapeKind::kTriangle:
      return dy >= -r && dy <= 0.8 * r && std::abs(dx) <= (dy + r) / 1.8;
    case ShapeKind::kCross: {
      const double arm = 0.3 * r;
      return (std::abs(dx) <= arm && std::abs(dy) <= r) || (std::abs(dy) <= arm && std::abs(dx) <= r);
    }
  }
  return false;
}

std::string_view noise_word(double noise) {
  const int level = std::clamp(static_cast<int>(noise * kNoiseLevels), 0, kNoiseLevels - 1);
  return kNoiseWords[static_cast<std::size_t>(level / 2)];
}

}  // namespace

std::string_view shape_name(ShapeKind s) { return kShapeNames[static_cast<std::size_t>(s)]; }
std::string_view color_name(ColorName c) { return kColorNames[static_cast<std::size_t>(c)]; }

std::array<double, 3> color_rgb(ColorName c) {
  static constexpr std::array<std::array<double, 3>, kPaletteSize> kRgb{{{0.90, 0.10, 0.10},
                                                                         {0.10, 0.80, 0.15},
                                                                         {0.15, 0.25, 0.95},
                                                                         {0.95, 0.90, 0.10},
                                                                         {0.10, 0.85, 0.90},
                                                                         {0.90, 0.10, 0.85},
                                                                         {0.97, 0.97, 0.97},
                                                                         {1.00, 0.55, 0.05}}};
  return kRgb[static_cast<std::size_t>(c)];
}

double complexity_score(int object_count, double background_noise, int max_objects) {
  if (object_count < 1 || max_objects < 1 || object_count > max_objects) {
    throw ContractError("complexity_score: object_count must lie in [1, max_objects]");
  }
  const double count_term =
      max_objects == 1 ? 0.0 : static_cast<double>(object_count - 1) / static_cast<double>(max_objects - 1);
  return std::clamp(0.5 * count_term + 0.5 * background_noise, 0.0, 1.0);
}

SceneSpec sample_scene(std::uint64_t seed, int max_objects) {
  if (max_objects < 1 || max_objects > kMaxObjects) {
    throw ContractError("max_objects must lie in [1, " + std::to_string(kMaxObjects) + "]");
  }
  Rng rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  spec.object_count = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(max_objects)));
  std::vector<int> cells(kMaxObjects);
  std::iota(cells.begin(), cells.end(), 0);
  for (int i = 0; i < spec.object_count; ++i) {
    const auto j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(kMaxObjects - i)));
    std::swap(cells[i], cells[j]);
  }
  for (int i = 0; i < spec.object_count; ++i) {
    SceneObject o;
    o.cell = cells[i];
    o.shape = static_cast<ShapeKind>(uniform_index(rng, kShapeCount));
    o.color = static_cast<ColorName>(uniform_index(rng, kPaletteSize));
    o.size = static_cast<SizeClass>(uniform_index(rng, 2));
    spec.objects.push_back(o);
  }
  std::sort(spec.objects.begin(), spec.objects.end(),
            [](const SceneObject& a, const SceneObject& b) { return a.cell < b.cell; });
  const auto level = uniform_index(rng, kNoiseLevels);
  spec.background_noise = (static_cast<double>(level) + 0.5) / kNoiseLevels;
  return spec;
}

Tensor render(const SceneSpec& spec, int image_size) {
  const Index s = image_size;
  Tensor image({3, s, s});
  auto px = [&](int c, Index y, Index x) -> double& { return image[(c * s + y) * s + x]; };
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < s; ++y)
      for (Index x = 0; x < s; ++x) px(c, y, x) = quantize(kBackground[static_cast<std::size_t>(c)]);

  const double cell = static_cast<double>(s) / kGridSide;
  for (const SceneObject& o : spec.objects) {
    const double cx = (o.cell % kGridSide + 0.5) * cell;
    const double cy = (o.cell / kGridSide + 0.5) * cell;
    const double r = (o.size == SizeClass::kLarge ? 0.42 : 0.26) * cell;
    const auto rgb = color_rgb(o.color);
    for (Index y = 0; y < s; ++y) {
      for (Index x = 0; x < s; ++x) {
        if (!inside(o.shape, x + 0.5 - cx, y + 0.5 - cy, r)) continue;
        for (int c = 0; c < 3; ++c) px(c, y, x) = quantize(rgb[static_cast<std::size_t>(c)]);
      }
    }
  }

  // Speckle overlays everything so the visible amount tracks the noise level exactly.
  Rng rng(derive_seed(spec.seed, "speckle"));
  const Index pixels = s * s;
  const auto count = static_cast<Index>(std::lround(spec.background_noise * kMaxSpeckleFraction * pixels));
  std::vector<Index> order(static_cast<std::size_t>(pixels));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(pixels - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    const Index p = order[static_cast<std::size_t>(i)];
    for (int c = 0; c < 3; ++c) px(c, p / s, p % s) = static_cast<double>(uniform_index(rng, 256)) / 255.0;
  }
  return image;
}

std::vector<std::string> caption_words(const SceneSpec& spec) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const SceneObject& o = spec.objects[i];
    if (i) words.emplace_back("and");
    words.emplace_back(o.size == SizeClass::kLarge ? "large" : "small");
    words.emplace_back(color_name(o.color));
    words.emplace_back(shape_name(o.shape));
    words.emplace_back(kCellNames[static_cast<std::size_t>(o.cell)]);
  }
  words.emplace_back("on");
  words.emplace_back(noise_word(spec.background_noise));
  words.emplace_back("background");
  return words;
}

std::string caption_text(const SceneSpec& spec) {
  std::string text;
  for (const auto& w : caption_words(spec)) {
    if (!text.empty()) text += ' ';
    text += w;
  }
  return text;
}

std::uint64_t category_id(const SceneSpec& spec) {
  std::uint64_t id = 0;
  for (const SceneObject& o : spec.objects) id += std::uint64_t{1} << (4 * static_cast<int>(o.shape));
  return id;
}

Vocabulary::Vocabulary() {
  words_ = {"<pad>", "<bos>", "<eos>", "small", "large", "and", "on", "background"};
  for (auto w : kColorNames) words_.emplace_back(w);
  for (auto w : kShapeNames) words_.emplace_back(w);
  for (auto w : kCellNames) words_.emplace_back(w);
  for (auto w : kNoiseWords) words_.emplace_back(w);
}

const Vocabulary& Vocabulary::instance() {
  static const Vocabulary vocab;
  return vocab;
}

int Vocabulary::id(std::string_view word) const {
  const auto it = std::find(words_.begin(), words_.end(), word);
  if (it == words_.end()) throw ContractError("word '" + std::string(word) + "' is not in the vocabulary");
  return static_cast<int>(it - words_.begin());
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

}  // namespace icar::synth
