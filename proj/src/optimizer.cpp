#include "lwopt/optimizer.hpp"

#include "lwopt/errors.hpp"

namespace lwopt {
namespace {

void validate_step_inputs(const OptimizerState& state, const BlockVector& grad,
                          std::span<const double> rates) {
  require_same_layout(state.w, grad, "optimizer step");
  if (rates.size() != static_cast<std::size_t>(state.w.layout().blocks())) {
    throw config_error("optimizer step: one rate per layer required");
  }
  for (double r : rates) {
    if (r < 0.0) throw config_error("optimizer step: rates must be >= 0");
  }
}

void record_rates(OptimizerState& state, std::span<const double> rates,
                  const std::vector<std::uint8_t>* skip) {
  state.last_rates.assign(rates.begin(), rates.end());
  if (skip != nullptr) {
    for (std::size_t k = 0; k < state.last_rates.size(); ++k) {
      if ((*skip)[k] != 0) state.last_rates[k] = 0.0;
    }
  }
}

// Shared per-block kernel so the one-shot step and the micro-step sweep are
// bit-identical.
void update_block(OptimizerState& state, const BlockVector& grad, int k,
                  double rate) {
  auto w = state.w.block(k);
  auto v = state.v.block(k);
  const auto g = grad.block(k);
  const double beta = state.beta;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v_new = w[i] - rate * g[i];
    w[i] = v_new + beta * (v_new - v[i]);
    v[i] = v_new;
  }
}

}  // namespace

OptimizerState::OptimizerState(BlockVector w0, double beta_in)
    : w(std::move(w0)), v(w), beta(beta_in) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw config_error("optimizer: beta must lie in [0, 1)");
  }
}

void mnag_step(OptimizerState& state, const BlockVector& grad,
               std::span<const double> rates,
               const std::vector<std::uint8_t>* skip) {
  validate_step_inputs(state, grad, rates);
  const int layers = state.w.layout().blocks();
  for (int k = 0; k < layers; ++k) {
    if (skip != nullptr && (*skip)[static_cast<std::size_t>(k)] != 0) continue;
    update_block(state, grad, k, rates[static_cast<std::size_t>(k)]);
  }
  record_rates(state, rates, skip);
  ++state.step;
}

void microstep_sweep(OptimizerState& state, const BlockVector& grad,
                     std::span<const double> rates,
                     const std::vector<std::uint8_t>* skip) {
  validate_step_inputs(state, grad, rates);
  const int layers = state.w.layout().blocks();
  // Micro-step s touches only the coordinates layer k(s) = s mod K + 1
  // selects; the gradient stays the one evaluated at the step start, and
  // blocks not yet visited still hold their step-start values.
  for (int s = 0; s < layers; ++s) {
    const int k = s % layers;
    if (skip != nullptr && (*skip)[static_cast<std::size_t>(k)] != 0) continue;
    update_block(state, grad, k, rates[static_cast<std::size_t>(k)]);
  }
  record_rates(state, rates, skip);
  ++state.step;
}

std::vector<double> fixed_rates_from_lipschitz(const TheoryConstants& consts,
                                               double gamma) {
  if (!(gamma > 0.0)) throw config_error("lipschitz-scaled rates: gamma must be > 0");
  std::vector<double> rates(consts.lipschitz.size());
  for (std::size_t k = 0; k < rates.size(); ++k) {
    rates[k] = gamma / consts.lipschitz[k];
  }
  return rates;
}

}  // namespace lwopt
