#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace icar::cost {

// Default inference-cost constants (GFLOPs) and the simple/complex mix.
struct CostParams {
  double vision_total_gflops = 162.03;
  int vision_layers = 24;
  double text_gflops = 13.3;
  double routing_gflops = 2.45;
  double p_simple = 0.495;
  double p_complex = 0.505;

  void validate() const;
};

struct ProjectionParams {
  double daily_images = 6e9;
  double throughput_img_per_s = 500.0;
  double gpu_power_kw = 0.5;
  double pue = 1.10;
  double days_per_year = 365.0;
  double grid_intensity_kg_per_kwh = 0.124;
  double savings_fraction = 0.20;

  void validate() const;
};

struct Projection {
  double daily_gpu_hours = 0.0;
  double daily_gpu_hours_saved = 0.0;
  double annual_kwh = 0.0;
  double annual_kwh_saved = 0.0;
  double annual_co2_tonnes_saved = 0.0;
};

double per_layer_gflops(const CostParams& p);
// p_simple * (k / L) * V + p_complex * V + routing + text.
double expected_gflops(const CostParams& p, int exit_layer);
// V + text, no routing.
double baseline_gflops(const CostParams& p);
double speedup_estimate(const CostParams& p, int exit_layer);
Projection production_projection(const ProjectionParams& p);

struct ThroughputConfig {
  int warmup = 10;   // untimed images before the first repetition
  int repeats = 3;   // timed passes over the whole image set
};

struct ThroughputReport {
  double median_img_per_s = 0.0;
  double min_img_per_s = 0.0;
  double max_img_per_s = 0.0;
  std::vector<double> per_repeat_img_per_s;
  std::map<int, long> layers_histogram;  // layers used -> images, from one pass
};

// `encode(i)` processes image i and returns the layers it used. The warmup
// cycles through the first images; every repetition covers all `count` images.
ThroughputReport measure_throughput(const std::function<int(std::size_t)>& encode, std::size_t count,
                                    const ThroughputConfig& config = {});

}  // namespace icar::cost
