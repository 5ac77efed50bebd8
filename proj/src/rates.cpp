#include "lwopt/rates.hpp"

#include <cmath>

#include "lwopt/errors.hpp"

namespace lwopt {

void RateConfig::validate() const {
  if (!(gamma_base > 0.0)) throw config_error("rates: gamma_base must be > 0");
  if (batch_base < 1) throw config_error("rates: batch_base must be >= 1");
  if (batch < 1) throw config_error("rates: batch must be >= 1");
  if (!(eta > 0.0)) throw config_error("rates: eta must be > 0");
  if (iters_per_epoch < 1) throw config_error("rates: iters_per_epoch must be >= 1");
  if (schedule == Schedule::warmup && warmup_epochs < 1) {
    throw config_error("rates: warmup needs warmup_epochs >= 1");
  }
  if (schedule == Schedule::polynomial && total_iters < 1) {
    throw config_error("rates: polynomial decay needs total_iters >= 1");
  }
}

double schedule_rate(const RateConfig& cfg, std::int64_t iter) {
  if (iter < 0) throw config_error("schedule: iteration must be >= 0");
  const double target = cfg.target_scale();
  switch (cfg.schedule) {
    case Schedule::constant:
      return target;
    case Schedule::warmup: {
      const std::int64_t epoch = iter / cfg.iters_per_epoch;
      if (epoch < cfg.warmup_epochs) {
        return target * static_cast<double>(epoch + 1) /
               static_cast<double>(cfg.warmup_epochs);
      }
      return target;
    }
    case Schedule::polynomial: {
      if (iter > cfg.total_iters) return 0.0;
      const double frac =
          1.0 - static_cast<double>(iter) / static_cast<double>(cfg.total_iters);
      return target * std::pow(frac, cfg.poly_power);
    }
  }
  throw config_error("schedule: unknown kind");
}

namespace {

std::vector<LayerRate> ratio_rates(const LayerStats& stats,
                                   const std::vector<double>& denominator,
                                   const RateConfig& cfg, std::int64_t iter) {
  const double scale = schedule_rate(cfg, iter) * cfg.eta;
  std::vector<LayerRate> rates(stats.weight_norm.size());
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (denominator[k] == 0.0) {
      rates[k] = {0.0, false, stats.weight_norm[k] == 0.0};
      continue;
    }
    if (stats.weight_norm[k] == 0.0) {
      rates[k] = {0.0, true, true};
      continue;
    }
    rates[k] = {scale * stats.weight_norm[k] / denominator[k], true, false};
  }
  return rates;
}

}  // namespace

std::vector<LayerRate> lars_rates(const LayerStats& stats, const RateConfig& cfg,
                                  std::int64_t iter) {
  return ratio_rates(stats, stats.batch_grad_norm, cfg, iter);
}

std::vector<LayerRate> clars_rates(const LayerStats& stats, const RateConfig& cfg,
                                   std::int64_t iter) {
  return ratio_rates(stats, stats.mean_sample_norm, cfg, iter);
}

std::string to_string(Schedule s) {
  switch (s) {
    case Schedule::constant: return "constant";
    case Schedule::warmup: return "warmup";
    case Schedule::polynomial: return "polynomial";
  }
  return "constant";
}

Schedule schedule_from_string(const std::string& s) {
  if (s == "constant") return Schedule::constant;
  if (s == "warmup") return Schedule::warmup;
  if (s == "polynomial") return Schedule::polynomial;
  throw config_error("unknown schedule: " + s);
}

}  // namespace lwopt
