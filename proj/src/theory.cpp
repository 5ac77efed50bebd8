#include "lwopt/theory.hpp"

#include <algorithm>
#include <cmath>

#include "lwopt/errors.hpp"
#include "lwopt/optimizer.hpp"
#include "lwopt/parallel.hpp"
#include "lwopt/rng.hpp"

namespace lwopt {

CapValue cap_min(CapValue a, CapValue b) {
  if (!a.is_bounded) return b;
  if (!b.is_bounded) return a;
  return a.value <= b.value ? a : b;
}

LrCaps lr_caps_mgd(const TheoryConstants& c, int batch) {
  if (batch < 1) throw config_error("lr caps: batch must be >= 1");
  LrCaps caps;
  caps.regime = Regime::mgd;
  caps.batch = batch;
  caps.per_layer.resize(c.lipschitz.size());
  for (std::size_t k = 0; k < c.lipschitz.size(); ++k) {
    const CapValue smooth = CapValue::of(1.0 / (8.0 * c.lipschitz[k]));
    const CapValue variance =
        c.grad_var_factor[k] == 0.0
            ? CapValue::unbounded()
            : CapValue::of(batch / (8.0 * c.lipschitz[k] * c.grad_var_factor[k]));
    caps.per_layer[k] = cap_min(smooth, variance);
  }
  const CapValue mean_smooth = CapValue::of(1.0 / (2.0 * c.lipschitz_max));
  const CapValue mean_variance =
      c.grad_var_factor_max == 0.0
          ? CapValue::unbounded()
          : CapValue::of(std::sqrt(static_cast<double>(batch) / c.grad_var_factor_max) /
                         (2.0 * c.lipschitz_max));
  caps.mean_cap = cap_min(mean_smooth, mean_variance);
  return caps;
}

LrCaps lr_caps_mnag(const TheoryConstants& c, int batch, double beta) {
  if (batch < 1) throw config_error("lr caps: batch must be >= 1");
  if (!(beta >= 0.0 && beta < 1.0)) throw config_error("lr caps: beta must lie in [0, 1)");
  LrCaps caps;
  caps.regime = Regime::mnag;
  caps.beta = beta;
  caps.batch = batch;
  const double omb = 1.0 - beta;
  caps.per_layer.resize(c.lipschitz.size());
  for (std::size_t k = 0; k < c.lipschitz.size(); ++k) {
    const CapValue smooth = CapValue::of(omb / (8.0 * c.lipschitz[k]));
    const CapValue variance =
        c.grad_var_factor[k] == 0.0
            ? CapValue::unbounded()
            : CapValue::of(omb * batch /
                           (8.0 * c.lipschitz[k] * c.grad_var_factor[k]));
    caps.per_layer[k] = cap_min(smooth, variance);
  }
  const double lg = c.lipschitz_max;
  const double root_b = std::sqrt(static_cast<double>(batch));
  const double root_mg =
      c.grad_var_factor_max > 0.0 ? std::sqrt(c.grad_var_factor_max) : 0.0;
  CapValue mean = beta == 0.0
                      ? CapValue::unbounded()
                      : CapValue::of(omb * omb / (4.0 * beta * beta * lg));
  if (beta > 0.0 && c.grad_var_factor_max > 0.0) {
    mean = cap_min(mean, CapValue::of(omb * omb * root_b /
                                      (4.0 * beta * beta * lg * root_mg)));
  }
  if (c.grad_var_factor_max > 0.0) {
    mean = cap_min(mean, CapValue::of(omb * root_b / (4.0 * lg * root_mg)));
  }
  mean = cap_min(mean, CapValue::of(omb / (4.0 * lg)));
  caps.mean_cap = mean;
  return caps;
}

std::vector<NamedCap> scalar_gamma_caps(const TheoryConstants& c, int batch,
                                        double beta, Regime regime) {
  // gamma_k = gamma / L_k turns the per-layer caps into caps on gamma itself
  // and the mean cap into gamma * (1/K) sum 1/L_k <= mean.
  const LrCaps caps = regime == Regime::mgd ? lr_caps_mgd(c, batch)
                                            : lr_caps_mnag(c, batch, beta);
  std::vector<NamedCap> named;
  const double omb = regime == Regime::mgd ? 1.0 : 1.0 - beta;
  named.push_back({regime == Regime::mgd ? "per-layer 1/(8 L_k)"
                                         : "per-layer (1-beta)/(8 L_k)",
                   CapValue::of(omb / 8.0)});
  if (c.grad_var_factor_max > 0.0) {
    named.push_back({regime == Regime::mgd ? "per-layer B/(8 L_k M_k)"
                                           : "per-layer (1-beta)B/(8 L_k M_k)",
                     CapValue::of(omb * batch / (8.0 * c.grad_var_factor_max))});
  }
  if (caps.mean_cap.is_bounded) {
    const double k_count = static_cast<double>(c.blocks());
    named.push_back({"mean (1/K) sum gamma_k",
                     CapValue::of(caps.mean_cap.value * k_count / c.inv_lipschitz_sum)});
  }
  return named;
}

double max_scalar_gamma(const TheoryConstants& c, int batch, double beta,
                        Regime regime) {
  CapValue cap = CapValue::unbounded();
  for (const auto& named : scalar_gamma_caps(c, batch, beta, regime)) {
    cap = cap_min(cap, named.cap);
  }
  if (!cap.is_bounded) {
    throw config_error("scalar gamma cap: no bounded branch");
  }
  return cap.value;
}

void check_scalar_gamma(const TheoryConstants& c, int batch, double beta,
                        Regime regime, double gamma) {
  if (!(gamma > 0.0)) throw config_error("gamma must be > 0");
  for (const auto& named : scalar_gamma_caps(c, batch, beta, regime)) {
    if (named.cap.is_bounded && gamma > named.cap.value) {
      throw cap_violation("gamma " + std::to_string(gamma) +
                          " violates branch \"" + named.branch + "\" (cap " +
                          std::to_string(named.cap.value) + ")");
    }
  }
}

double convergence_metric(const std::vector<std::vector<double>>& sq_grad_norms,
                          std::span<const double> q) {
  double q_sum = 0.0;
  for (double w : q) q_sum += w;
  if (std::abs(q_sum - 1.0) > 1e-9) {
    throw config_error("convergence metric: q must sum to 1");
  }
  if (sq_grad_norms.empty()) return 0.0;
  double total = 0.0;
  for (const auto& row : sq_grad_norms) {
    if (row.size() != q.size()) {
      throw config_error("convergence metric: row width must equal K");
    }
    for (std::size_t k = 0; k < q.size(); ++k) total += q[k] * row[k];
  }
  return total / static_cast<double>(sq_grad_norms.size());
}

MetricAccumulator::MetricAccumulator(std::vector<double> q) : q_(std::move(q)) {
  double q_sum = 0.0;
  for (double w : q_) q_sum += w;
  if (std::abs(q_sum - 1.0) > 1e-9) {
    throw config_error("convergence metric: q must sum to 1");
  }
}

void MetricAccumulator::add(std::span<const double> per_layer_sq_norms) {
  if (per_layer_sq_norms.size() != q_.size()) {
    throw config_error("convergence metric: row width must equal K");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < q_.size(); ++k) s += q_[k] * per_layer_sq_norms[k];
  sum_ += s;
  ++steps_;
}

double MetricAccumulator::value() const {
  return steps_ == 0 ? 0.0 : sum_ / static_cast<double>(steps_);
}

BoundTerms bound_rhs_mgd(const TheoryConstants& c, double gamma, int batch,
                         std::int64_t iters, double f0, bool check_caps) {
  if (iters < 1) throw config_error("bound rhs: iters must be >= 1");
  if (check_caps) check_scalar_gamma(c, batch, 0.0, Regime::mgd, gamma);
  BoundTerms terms;
  terms.optimization = 8.0 * (f0 - c.f_inf) /
                       (static_cast<double>(iters) * gamma * c.inv_lipschitz_sum);
  terms.noise = (4.0 + 2.0 * c.kappa_max) * c.grad_var_bound * gamma / batch;
  return terms;
}

BoundTerms bound_rhs_mnag(const TheoryConstants& c, double gamma, int batch,
                          std::int64_t iters, double beta, double f0,
                          bool check_caps) {
  if (iters < 1) throw config_error("bound rhs: iters must be >= 1");
  if (!(beta >= 0.0 && beta < 1.0)) throw config_error("bound rhs: beta must lie in [0, 1)");
  if (check_caps) check_scalar_gamma(c, batch, beta, Regime::mnag, gamma);
  const double omb = 1.0 - beta;
  BoundTerms terms;
  terms.optimization = 8.0 * omb * (f0 - c.f_inf) /
                       (static_cast<double>(iters) * gamma * c.inv_lipschitz_sum);
  terms.noise = c.grad_var_bound * gamma / (omb * batch) *
                (4.0 + 2.0 * c.kappa_max + 2.0 * c.kappa_max / omb);
  return terms;
}

CorollaryGamma corollary_gamma(const TheoryConstants& c, int batch,
                               std::int64_t iters, double f0, double beta,
                               Regime regime) {
  if (iters < 1) throw config_error("corollary gamma: iters must be >= 1");
  const double omb = regime == Regime::mgd ? 1.0 : 1.0 - beta;
  const double gap = f0 - c.f_inf;
  CorollaryGamma out;
  out.gamma = omb / 8.0;
  if (c.grad_var_bound > 0.0) {
    const double root = std::sqrt(
        batch * gap / (static_cast<double>(iters) * c.grad_var_bound * c.inv_lipschitz_sum));
    out.gamma = std::min(out.gamma, root);
  }
  const double sqrt_term =
      c.grad_var_bound > 0.0
          ? std::sqrt(c.grad_var_bound * gap /
                      (static_cast<double>(iters) * batch * c.inv_lipschitz_sum))
          : 0.0;
  if (regime == Regime::mgd) {
    out.rate_bound = 64.0 * gap / (static_cast<double>(iters) * c.inv_lipschitz_sum) +
                     (12.0 + 2.0 * c.kappa_max) * sqrt_term;
  } else {
    out.rate_bound =
        64.0 * gap / (omb * static_cast<double>(iters) * c.inv_lipschitz_sum) +
        (8.0 + (4.0 + 2.0 * c.kappa_max + 2.0 * c.kappa_max / omb) / omb) * sqrt_term;
  }
  return out;
}

BoundReport validate_bound(const Problem& quadratic, const BlockVector& w0,
                           double gamma, double beta, int batch,
                           std::span<const std::uint64_t> seeds,
                           std::int64_t iters) {
  const TheoryConstants consts = quad_theory_constants(quadratic);
  const Regime regime = beta == 0.0 ? Regime::mgd : Regime::mnag;
  check_scalar_gamma(consts, batch, beta, regime, gamma);
  if (seeds.empty()) throw config_error("validate bound: need at least one seed");
  if (iters < 1) throw config_error("validate bound: iters must be >= 1");
  if (batch > quadratic.num_samples()) {
    throw config_error("validate bound: batch exceeds the sample count");
  }

  const std::vector<double> rates = fixed_rates_from_lipschitz(consts, gamma);
  const int layers = quadratic.layout().blocks();

  std::vector<double> per_seed_metric(seeds.size(), 0.0);
  par::parallel_for(static_cast<std::int64_t>(seeds.size()), [&](std::int64_t s) {
    EpochSampler sampler(quadratic.num_samples(), batch,
                         seeds[static_cast<std::size_t>(s)]);
    OptimizerState state(w0, beta);
    MetricAccumulator metric(consts.q);
    BlockVector full_grad(quadratic.layout_ptr());
    std::vector<double> sq_norms(static_cast<std::size_t>(layers));
    for (std::int64_t t = 0; t < iters; ++t) {
      full_grad = full_gradient(quadratic, state.w);
      for (int k = 0; k < layers; ++k) {
        sq_norms[static_cast<std::size_t>(k)] = sq_norm(full_grad.block(k));
      }
      metric.add(sq_norms);
      const BlockVector grad = eval_grad_batch(quadratic, state.w, sampler.next());
      mnag_step(state, grad, rates);
    }
    per_seed_metric[static_cast<std::size_t>(s)] = metric.value();
  });

  double lhs = 0.0;
  for (double m : per_seed_metric) lhs += m;
  lhs /= static_cast<double>(per_seed_metric.size());

  const double f0 = eval_loss(quadratic, w0, MiniBatch::all(quadratic.num_samples()));
  BoundReport report;
  report.terms = regime == Regime::mgd
                     ? bound_rhs_mgd(consts, gamma, batch, iters, f0)
                     : bound_rhs_mnag(consts, gamma, batch, iters, beta, f0);
  report.lhs = lhs;
  report.rhs = report.terms.total();
  report.satisfied = lhs <= report.rhs;
  report.seeds = static_cast<int>(seeds.size());
  report.gamma = gamma;
  report.beta = beta;
  report.batch = batch;
  report.iters = iters;
  report.f0 = f0;
  report.constants = consts;
  return report;
}

}  // namespace lwopt
