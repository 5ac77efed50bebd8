#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lwopt/block.hpp"
#include "lwopt/quadratic.hpp"

namespace lwopt {

/// Iterate pair of layer-wise Nesterov momentum. At step 0 the momentum
/// iterate equals the weight iterate (the w_{-1} = w_0, g_{-1} = 0 setup of
/// the analysis).
struct OptimizerState {
  BlockVector w;
  BlockVector v;
  std::int64_t step = 0;
  double beta = 0.0;
  std::vector<double> last_rates;  // per-layer rate the latest step applied;
                                   // 0 for skipped layers, empty before step 1

  OptimizerState(BlockVector w0, double beta);
};

/// One step of layer-wise mNAG with per-layer rates:
///   v+_k = w_k - gamma_k g_k
///   w+_k = v+_k + beta (v+_k - v_k)
/// beta = 0 reduces it to plain layer-wise gradient descent. Layers flagged
/// in `skip` keep both iterates untouched (degenerate-rate policy).
void mnag_step(OptimizerState& state, const BlockVector& grad,
               std::span<const double> rates,
               const std::vector<std::uint8_t>* skip = nullptr);

/// The same update expressed as K sequential micro-steps, layer
/// s mod K + 1 moving at micro-step s with the gradient held at the
/// step-start iterate. Composing the K micro-steps reproduces mnag_step
/// coordinate for coordinate.
void microstep_sweep(OptimizerState& state, const BlockVector& grad,
                     std::span<const double> rates,
                     const std::vector<std::uint8_t>* skip = nullptr);

/// gamma_k = gamma / L_k.
std::vector<double> fixed_rates_from_lipschitz(const TheoryConstants& consts,
                                               double gamma);

}  // namespace lwopt
