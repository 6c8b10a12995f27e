#include "icar/costmodel/cost.hpp"

#include "icar/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace icar::cost {

void CostParams::validate() const {
  if (vision_layers < 1) throw ContractError("cost: vision_layers must be >= 1");
  if (vision_total_gflops < 0 || text_gflops < 0 || routing_gflops < 0) {
    throw ContractError("cost: GFLOP constants must be nonnegative");
  }
  if (p_simple < 0 || p_complex < 0 || std::abs(p_simple + p_complex - 1.0) > 1e-9) {
    throw ContractError("cost: p_simple + p_complex must equal 1");
  }
}

void ProjectionParams::validate() const {
  for (double v : {daily_images, throughput_img_per_s, gpu_power_kw, pue, days_per_year, grid_intensity_kg_per_kwh,
                   savings_fraction}) {
    if (!(v > 0.0)) throw ContractError("projection: all parameters must be positive");
  }
}

double per_layer_gflops(const CostParams& p) {
  p.validate();
  return p.vision_total_gflops / p.vision_layers;
}

double expected_gflops(const CostParams& p, int exit_layer) {
  p.validate();
  if (exit_layer < 1 || exit_layer > p.vision_layers) {
    throw ContractError("cost: exit layer " + std::to_string(exit_layer) + " outside [1, " +
                        std::to_string(p.vision_layers) + "]");
  }
  const double v = p.vision_total_gflops;
  return p.p_simple * (static_cast<double>(exit_layer) / p.vision_layers) * v + p.p_complex * v + p.routing_gflops +
         p.text_gflops;
}

double baseline_gflops(const CostParams& p) {
  p.validate();
  return p.vision_total_gflops + p.text_gflops;
}

double speedup_estimate(const CostParams& p, int exit_layer) {
  return baseline_gflops(p) / expected_gflops(p, exit_layer);
}

Projection production_projection(const ProjectionParams& p) {
  p.validate();
  Projection r;
  r.daily_gpu_hours = p.daily_images / p.throughput_img_per_s / 3600.0;
  r.daily_gpu_hours_saved = r.daily_gpu_hours * p.savings_fraction;
  r.annual_kwh = r.daily_gpu_hours * p.gpu_power_kw * p.pue * p.days_per_year;
  r.annual_kwh_saved = r.annual_kwh * p.savings_fraction;
  r.annual_co2_tonnes_saved = r.annual_kwh_saved * p.grid_intensity_kg_per_kwh / 1000.0;
  return r;
}

ThroughputReport measure_throughput(const std::function<int(std::size_t)>& encode, std::size_t count,
                                    const ThroughputConfig& config) {
  if (count == 0) throw ContractError("measure_throughput: empty dataset");
  if (config.repeats < 1) throw ContractError("measure_throughput: repeats must be >= 1");
  if (config.warmup < 0) throw ContractError("measure_throughput: warmup must be >= 0");
  using Clock = std::chrono::steady_clock;
  for (int i = 0; i < config.warmup; ++i) encode(static_cast<std::size_t>(i) % count);
  ThroughputReport r;
  for (int rep = 0; rep < config.repeats; ++rep) {
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < count; ++i) {
      const int layers = encode(i);
      if (rep == 0) ++r.layers_histogram[layers];
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    r.per_repeat_img_per_s.push_back(static_cast<double>(count) / std::max(secs, 1e-12));
  }
  std::vector<double> sorted = r.per_repeat_img_per_s;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median_img_per_s = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.min_img_per_s = sorted.front();
  r.max_img_per_s = sorted.back();
  return r;
}

}  // namespace icar::cost
