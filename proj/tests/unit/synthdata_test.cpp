#include <gtest/gtest.h>

#include "icar/error.hpp"
#include "icar/synthdata/dataset.hpp"
#include "icar/synthdata/ppm.hpp"
#include "test_util.hpp"

#include <set>
#include <unordered_set>

using namespace icar;
using namespace icar::synth;
using icar::testing::TempDir;
using icar::testing::read_file;

namespace {

GeneratorConfig config_of(std::uint64_t seed, int n, int max_objects = 6) {
  GeneratorConfig c;
  c.seed = seed;
  c.n_samples = n;
  c.max_objects = max_objects;
  return c;
}

}  // namespace

TEST(Scene, ComplexityScoreFormulaAndMonotonicity) {
  EXPECT_DOUBLE_EQ(complexity_score(1, 0.0, 6), 0.0);
  EXPECT_DOUBLE_EQ(complexity_score(6, 1.0, 6), 1.0);
  EXPECT_DOUBLE_EQ(complexity_score(4, 0.45, 6), 0.5 * 0.6 + 0.5 * 0.45);
  EXPECT_DOUBLE_EQ(complexity_score(1, 0.95, 1), 0.475);
  for (int count = 1; count <= 6; ++count) {
    for (int j = 0; j + 1 < kNoiseLevels; ++j) {
      const double n0 = (j + 0.5) / kNoiseLevels, n1 = (j + 1.5) / kNoiseLevels;
      EXPECT_LE(complexity_score(count, n0, 6), complexity_score(count, n1, 6));
      if (count < 6) EXPECT_LE(complexity_score(count, n0, 6), complexity_score(count + 1, n0, 6));
    }
  }
  EXPECT_THROW(complexity_score(7, 0.1, 6), ContractError);
}

TEST(Scene, SpecInvariants) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const SceneSpec spec = sample_scene(seed, 9);
    ASSERT_EQ(spec.object_count, static_cast<int>(spec.objects.size()));
    std::set<int> cells;
    for (const auto& o : spec.objects) cells.insert(o.cell);
    EXPECT_EQ(cells.size(), spec.objects.size()) << "objects share a grid cell";
    EXPECT_GE(spec.background_noise, 0.0);
    EXPECT_LE(spec.background_noise, 1.0);
  }
}

TEST(Scene, RenderIsQuantizedAndDeterministic) {
  const SceneSpec spec = sample_scene(99, 6);
  const Tensor a = render(spec, 32), b = render(spec, 32);
  EXPECT_EQ(a.shape(), (std::vector<Index>{3, 32, 32}));
  EXPECT_EQ(a.data(), b.data());
  for (Index i = 0; i < a.numel(); ++i) {
    EXPECT_GE(a[i], 0.0);
    EXPECT_LE(a[i], 1.0);
    EXPECT_DOUBLE_EQ(a[i] * 255.0, std::round(a[i] * 255.0));
  }
}

TEST(Scene, CaptionUsesVocabulary) {
  SceneSpec spec;
  spec.object_count = 2;
  spec.objects = {{ShapeKind::kCircle, ColorName::kRed, 0, SizeClass::kLarge},
                  {ShapeKind::kSquare, ColorName::kBlue, 4, SizeClass::kSmall}};
  spec.background_noise = 0.05;
  EXPECT_EQ(caption_text(spec), "large red circle top-left and small blue square center on clean background");
  const auto tokens = Vocabulary::instance().encode(caption_words(spec));
  EXPECT_EQ(tokens.size(), 12u);
  for (int t : tokens) EXPECT_GT(t, Vocabulary::kEos);
  EXPECT_EQ(category_id(spec), 0x11u);
  EXPECT_THROW(Vocabulary::instance().id("giraffe"), ContractError);
}

TEST(Dataset, SameArgumentsGiveIdenticalBytes) {
  TempDir a("gen-a"), b("gen-b");
  generate_dataset(config_of(7, 100), a.path());
  generate_dataset(config_of(7, 100), b.path());
  EXPECT_EQ(read_file(a / "manifest.jsonl"), read_file(b / "manifest.jsonl"));
  for (int i = 0; i < 100; i += 7) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%06d.ppm", i);
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
  }
}

TEST(Dataset, CaptionsAreUniqueAndLabelsBalanced) {
  const Dataset ds = generate_dataset(config_of(7, 3000));
  std::unordered_set<std::string> texts;
  std::size_t complex = 0;
  for (const auto& s : ds.samples) {
    EXPECT_TRUE(texts.insert(s.text).second) << "caption collision: " << s.text;
    EXPECT_EQ(s.complex, s.score > 0.5);
    complex += s.complex;
  }
  const double frac = static_cast<double>(complex) / 3000.0;
  EXPECT_GE(frac, 0.45);
  EXPECT_LE(frac, 0.55);
}

TEST(Dataset, SingleObjectScenesAreAllSimple) {
  const Dataset ds = generate_dataset(config_of(3, 200, 1));
  for (const auto& s : ds.samples) EXPECT_FALSE(s.complex);
}

TEST(Dataset, RejectsInvalidConfig) {
  auto c = config_of(1, 10);
  c.image_size = 24;
  EXPECT_THROW(generate_dataset(c), ContractError);
  c = config_of(1, 0);
  EXPECT_THROW(generate_dataset(c), ContractError);
}

TEST(Dataset, UnwritableOutputDirectory) {
  TempDir tmp("unwritable");
  std::ofstream(tmp / "file") << "x";
  EXPECT_ANY_THROW(generate_dataset(config_of(1, 3), tmp / "file/sub"));
}

TEST(Split, SeventyFifteenFifteenSizes) {
  Dataset ds = generate_dataset(config_of(7, 3000));
  split_dataset(ds, {0.70, 0.15, 0.15}, 11);
  EXPECT_EQ(ds.split(Split::kTrain).size(), 2100u);
  EXPECT_EQ(ds.split(Split::kVal).size(), 450u);
  EXPECT_EQ(ds.split(Split::kTest).size(), 450u);

  std::size_t total_complex = 0;
  for (const auto& s : ds.samples) total_complex += s.complex;
  const double global = static_cast<double>(total_complex) / 3000.0;
  for (Split sp : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto part = ds.split(sp);
    std::size_t c = 0;
    for (const auto* s : part) c += s->complex;
    EXPECT_LE(std::abs(static_cast<double>(c) - global * static_cast<double>(part.size())), 2.0);
  }
}

TEST(Split, SmallDatasetsAndContracts) {
  Dataset ds = generate_dataset(config_of(7, 10));
  split_dataset(ds, {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(ds.split(Split::kTrain).size(), 8u);
  EXPECT_EQ(ds.split(Split::kVal).size(), 1u);
  EXPECT_EQ(ds.split(Split::kTest).size(), 1u);
  EXPECT_THROW(split_dataset(ds, {0.8, 0.1, 0.2}, 1), ContractError);
  Dataset tiny = generate_dataset(config_of(7, 4));
  EXPECT_THROW(split_dataset(tiny, {0.9, 0.05, 0.05}, 1), ContractError);
}

TEST(Split, DeterministicGivenSeed) {
  Dataset a = generate_dataset(config_of(5, 200)), b = generate_dataset(config_of(5, 200));
  split_dataset(a, {0.7, 0.15, 0.15}, 3);
  split_dataset(b, {0.7, 0.15, 0.15}, 3);
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].split, b.samples[i].split);
}

TEST(Load, RoundTripPreservesRecordsAndPixels) {
  TempDir tmp("load");
  Dataset ds = generate_dataset(config_of(7, 60));
  split_dataset(ds, {0.7, 0.15, 0.15}, 2);
  write_dataset(ds, tmp.path());
  const Dataset loaded = load_dataset(tmp.path());
  ASSERT_EQ(loaded.samples.size(), ds.samples.size());

  const auto specs = generate_specs(loaded.config);
  const auto& vocab = Vocabulary::instance();
  double worst = 0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = loaded.samples[i];
    EXPECT_EQ(s.tokens, vocab.encode(caption_words(specs[i])));
    EXPECT_EQ(s.text, ds.samples[i].text);
    EXPECT_EQ(s.split, ds.samples[i].split);
    EXPECT_EQ(s.category_id, ds.samples[i].category_id);
    EXPECT_DOUBLE_EQ(s.score, ds.samples[i].score);
    worst = std::max(worst, (s.image.data() - ds.samples[i].image.data()).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1.0 / 255.0);
}

TEST(Load, TruncatedImageNamesTheFile) {
  TempDir tmp("trunc");
  generate_dataset(config_of(7, 5), tmp.path());
  const auto victim = tmp / "images/000003.ppm";
  const std::string bytes = read_file(victim);
  std::ofstream(victim, std::ios::binary | std::ios::trunc) << bytes.substr(0, bytes.size() / 2);
  try {
    load_dataset(tmp.path());
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("000003.ppm"), std::string::npos) << e.what();
  }
}

TEST(Load, MissingManifestAndWrongImageSize) {
  TempDir tmp("missing");
  EXPECT_THROW(load_dataset(tmp.path()), LoadError);
  generate_dataset(config_of(7, 3), tmp.path());
  write_ppm(tmp / "images/000001.ppm", Tensor({3, 16, 16}));
  EXPECT_THROW(load_dataset(tmp.path()), LoadError);
}
