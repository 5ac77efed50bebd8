#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lwopt/problem.hpp"

namespace lwopt {

enum class Schedule { constant, warmup, polynomial };

/// Scale-schedule and rate-rule parameters. The scaled target is
/// gamma_base * B / B_base (linear scaling rule); warmup ramps to it per
/// epoch, polynomial decay leaves from it.
struct RateConfig {
  double gamma_base = 0.1;
  int batch_base = 128;
  int batch = 128;
  double eta = 0.001;
  Schedule schedule = Schedule::constant;
  int warmup_epochs = 0;
  double poly_power = 2.0;
  std::int64_t total_iters = 0;
  int iters_per_epoch = 1;

  double target_scale() const {
    return gamma_base * static_cast<double>(batch) / static_cast<double>(batch_base);
  }
  void validate() const;
};

/// gamma_scale at iteration t:
///   constant            target
///   warmup(W)           target * (e+1)/W while epoch e < W, then target
///   polynomial(p, T)    target * (1 - t/T)^p, clamped to 0 past T
double schedule_rate(const RateConfig& cfg, std::int64_t iter);

/// Per-layer rate with its degenerate-denominator status. An undefined rate
/// means the layer's update is skipped for the step; a zero weight norm
/// forces the rate to 0 (logged as a warning by the harness).
struct LayerRate {
  double value = 0.0;
  bool defined = true;
  bool zero_weight = false;
};

/// gamma_k = gamma_scale(t) * eta * ||w_k|| / ||batch mean gradient of k||.
std::vector<LayerRate> lars_rates(const LayerStats& stats, const RateConfig& cfg,
                                  std::int64_t iter);

/// gamma_k = gamma_scale(t) * eta * ||w_k|| / ((1/B) sum_i ||grad_k f_i||),
/// i.e. LARS times a correction factor <= 1 by the triangle inequality.
std::vector<LayerRate> clars_rates(const LayerStats& stats, const RateConfig& cfg,
                                   std::int64_t iter);

std::string to_string(Schedule s);
Schedule schedule_from_string(const std::string& s);

}  // namespace lwopt
