#include "icar/costmodel/cost.hpp"
#include "icar/error.hpp"

#include <gtest/gtest.h>

#include <thread>

namespace icar::cost {
namespace {

TEST(PerLayer, Values) {
  EXPECT_NEAR(per_layer_gflops({}), 6.75125, 1e-12);
  CostParams p;
  p.vision_total_gflops = 24;
  EXPECT_DOUBLE_EQ(per_layer_gflops(p), 1.0);
  p.vision_layers = 1;
  EXPECT_DOUBLE_EQ(per_layer_gflops(p), 24.0);
  p.vision_layers = 0;
  EXPECT_THROW(per_layer_gflops(p), ContractError);
}

TEST(ExpectedGflops, DefaultExits) {
  const CostParams p;
  const std::pair<int, double> rows[] = {{8, 124.31}, {12, 137.68}, {16, 151.05}, {20, 164.41}, {24, 177.78}};
  for (auto [k, v] : rows) EXPECT_NEAR(expected_gflops(p, k), v, 0.01) << "k=" << k;
  EXPECT_NEAR(baseline_gflops(p), 175.33, 0.01);
}

TEST(ExpectedGflops, FinalExitCostsBaselinePlusRouting) {
  const CostParams p;
  EXPECT_NEAR(expected_gflops(p, 24), baseline_gflops(p) + p.routing_gflops, 1e-12);
}

TEST(ExpectedGflops, StrictlyIncreasingInExit) {
  const CostParams p;
  for (int k = 1; k < 24; ++k) EXPECT_LT(expected_gflops(p, k), expected_gflops(p, k + 1));
}

TEST(ExpectedGflops, AllSimpleMix) {
  CostParams p;
  p.p_simple = 1.0;
  p.p_complex = 0.0;
  EXPECT_NEAR(expected_gflops(p, 8), 162.03 / 3 + 2.45 + 13.3, 1e-12);
  EXPECT_NEAR(expected_gflops(p, 8), 69.76, 0.005);
}

TEST(ExpectedGflops, Errors) {
  const CostParams p;
  EXPECT_THROW(expected_gflops(p, 0), ContractError);
  EXPECT_THROW(expected_gflops(p, 25), ContractError);
  CostParams bad;
  bad.p_simple = 0.6;
  EXPECT_THROW(expected_gflops(bad, 8), ContractError);
}

TEST(Baseline, DegenerateInputs) {
  CostParams p;
  p.text_gflops = 0;
  EXPECT_NEAR(baseline_gflops(p), 162.03, 1e-12);
  p = {};
  p.vision_total_gflops = 0;
  EXPECT_NEAR(baseline_gflops(p), 13.3, 1e-12);
}

TEST(Speedup, DefaultParams) {
  const CostParams p;
  EXPECT_NEAR(speedup_estimate(p, 8), 1.41, 0.01);
  EXPECT_NEAR(speedup_estimate(p, 24), 175.33 / 177.78, 1e-4);
  for (int k = 1; k <= 24; ++k) EXPECT_EQ(speedup_estimate(p, k) > 1.0, k <= 23) << "k=" << k;
  CostParams z;
  z.routing_gflops = 0;
  EXPECT_DOUBLE_EQ(speedup_estimate(z, 24), 1.0);
}

TEST(Projection, DefaultParams) {
  const Projection r = production_projection({});
  EXPECT_NEAR(r.daily_gpu_hours, 3333.3, 1.0);
  EXPECT_NEAR(r.daily_gpu_hours_saved, 666.7, 1.0);
  EXPECT_NEAR(r.annual_kwh, 668002, 0.01 * 668002);
  EXPECT_NEAR(r.annual_kwh_saved, 133640, 0.01 * 133640);
  EXPECT_NEAR(r.annual_co2_tonnes_saved, 16.6, 0.05 * 16.6);
}

TEST(Projection, LinearInVolumeAndSavings) {
  const ProjectionParams base;
  const Projection a = production_projection(base);
  ProjectionParams twice = base;
  twice.daily_images *= 2;
  const Projection b = production_projection(twice);
  EXPECT_NEAR(b.annual_kwh, 2 * a.annual_kwh, 1e-6);
  EXPECT_NEAR(b.annual_co2_tonnes_saved, 2 * a.annual_co2_tonnes_saved, 1e-9);
  ProjectionParams more = base;
  more.savings_fraction *= 2;
  const Projection c = production_projection(more);
  EXPECT_NEAR(c.annual_kwh_saved, 2 * a.annual_kwh_saved, 1e-6);
  EXPECT_DOUBLE_EQ(c.annual_kwh, a.annual_kwh);
}

TEST(Projection, RejectsNonPositive) {
  ProjectionParams p;
  p.pue = 0;
  EXPECT_THROW(production_projection(p), ContractError);
}

TEST(Throughput, CountsEveryImageAndHistogram) {
  int calls = 0;
  auto encode = [&](std::size_t i) {
    ++calls;
    return i % 2 ? 12 : 4;
  };
  ThroughputConfig cfg;
  cfg.warmup = 3;
  cfg.repeats = 4;
  const auto r = measure_throughput(encode, 10, cfg);
  EXPECT_EQ(calls, 3 + 4 * 10);
  EXPECT_EQ(r.per_repeat_img_per_s.size(), 4u);
  EXPECT_EQ(r.layers_histogram.at(4), 5);
  EXPECT_EQ(r.layers_histogram.at(12), 5);
  EXPECT_LE(r.min_img_per_s, r.median_img_per_s);
  EXPECT_LE(r.median_img_per_s, r.max_img_per_s);
}

TEST(Throughput, SlowerEncoderMeasuresSlower) {
  auto sleep_for = [](int us) {
    return [us](std::size_t) {
      std::this_thread::sleep_for(std::chrono::microseconds(us));
      return 1;
    };
  };
  ThroughputConfig cfg;
  cfg.warmup = 0;
  const auto fast = measure_throughput(sleep_for(200), 20, cfg);
  const auto slow = measure_throughput(sleep_for(2000), 20, cfg);
  EXPECT_GT(fast.median_img_per_s, slow.median_img_per_s);
}

TEST(Throughput, Errors) {
  auto encode = [](std::size_t) { return 1; };
  EXPECT_THROW(measure_throughput(encode, 0), ContractError);
  ThroughputConfig cfg;
  cfg.repeats = 0;
  EXPECT_THROW(measure_throughput(encode, 5, cfg), ContractError);
}

}  // namespace
}  // namespace icar::cost
