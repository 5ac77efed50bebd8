#include "lwopt/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "lwopt/errors.hpp"
#include "lwopt/rng.hpp"

namespace lwopt {

MkEstimate mk_ratio_from_stats(const LayerStats& stats) {
  MkEstimate est;
  est.method = MkMethod::ratio_full;
  est.batch_size = stats.batch_size;
  est.value.resize(stats.weight_norm.size());
  for (std::size_t k = 0; k < est.value.size(); ++k) {
    const double denom = stats.batch_grad_norm[k] * stats.batch_grad_norm[k];
    if (denom == 0.0) continue;  // undefined
    est.value[k] = stats.mean_sample_sq_norm[k] / denom;
  }
  return est;
}

MkEstimate estimate_mk_ratio(const Problem& p, const BlockVector& w,
                             const MiniBatch& data) {
  return mk_ratio_from_stats(eval_layer_stats(p, w, data));
}

MkEstimate estimate_mk_sampled(const LayerStats& batch_stats,
                               const LayerStats& subsample_stats) {
  if (batch_stats.layers() != subsample_stats.layers()) {
    throw config_error("mk sampled: layer counts differ between stats");
  }
  MkEstimate est;
  est.method = MkMethod::sampled;
  est.batch_size = batch_stats.batch_size;
  est.subsample_size = subsample_stats.batch_size;
  est.value.resize(batch_stats.weight_norm.size());
  for (std::size_t k = 0; k < est.value.size(); ++k) {
    const double denom = subsample_stats.mean_sample_sq_norm[k];
    if (denom == 0.0) continue;  // undefined
    const double num = batch_stats.batch_grad_norm[k] * batch_stats.batch_grad_norm[k];
    est.value[k] = num / denom;
  }
  return est;
}

LipschitzEstimate estimate_block_lipschitz(const Problem& p, const BlockVector& w,
                                           int probes, double radius,
                                           std::uint64_t seed) {
  if (probes < 1) throw config_error("lipschitz estimate: probes must be >= 1");
  if (!(radius > 0.0)) throw config_error("lipschitz estimate: radius must be > 0");
  if (!(w.layout() == p.layout())) {
    throw config_error("lipschitz estimate: iterate layout does not match problem");
  }

  const BlockVector base_grad = full_gradient(p, w);
  const int layers = p.layout().blocks();
  LipschitzEstimate est;
  est.probes = probes;
  est.radius = radius;
  est.value.assign(static_cast<std::size_t>(layers), 0.0);

  Rng rng(seed);
  BlockVector probe_point(p.layout_ptr());
  for (int probe = 0; probe < probes; ++probe) {
    for (int k = 0; k < layers; ++k) {
      auto wp = probe_point.data();
      std::copy(w.data().begin(), w.data().end(), wp.begin());
      auto block = probe_point.block(k);
      double norm = 0.0;
      std::vector<double> direction(block.size());
      do {
        for (double& d : direction) d = rng.normal();
        norm = l2_norm(direction);
      } while (norm == 0.0);
      for (std::size_t i = 0; i < block.size(); ++i) {
        block[i] += direction[i] * (radius / norm);
      }
      const BlockVector probe_grad = full_gradient(p, probe_point);
      double diff_sq = 0.0;
      const auto g0 = base_grad.block(k);
      const auto g1 = probe_grad.block(k);
      for (std::size_t i = 0; i < g0.size(); ++i) {
        const double diff = g0[i] - g1[i];
        diff_sq += diff * diff;
      }
      const auto ks = static_cast<std::size_t>(k);
      est.value[ks] = std::max(est.value[ks], std::sqrt(diff_sq) / radius);
    }
  }
  return est;
}

}  // namespace lwopt
