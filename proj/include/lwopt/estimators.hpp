#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lwopt/problem.hpp"

namespace lwopt {

enum class MkMethod { ratio_full, sampled };

/// Per-layer gradient-variance-factor estimate. An absent value marks a
/// degenerate denominator; it is reported as such, never as a NaN or
/// infinity. Ratio values are >= 1 where defined (Jensen); sampled values
/// are the reciprocal quotient and land in [0, 1].
struct MkEstimate {
  MkMethod method = MkMethod::ratio_full;
  std::vector<std::optional<double>> value;
  int batch_size = 0;
  int subsample_size = 0;
};

/// Ratio form over an index set at iterate w:
///   value_k = ((1/n) sum_i ||grad_k f_i||^2) / ||(1/n) sum_i grad_k f_i||^2.
MkEstimate estimate_mk_ratio(const Problem& p, const BlockVector& w,
                             const MiniBatch& data);
/// Same, from already-computed stats.
MkEstimate mk_ratio_from_stats(const LayerStats& stats);

/// Sampled form: numerator from the full batch I_t, denominator from the
/// subsample J_t evaluated at the same iterate:
///   value_k = ||(1/B) sum_{I_t} grad_k f_i||^2
///           / ((1/|J_t|) sum_{J_t} ||grad_k f_j||^2).
MkEstimate estimate_mk_sampled(const LayerStats& batch_stats,
                               const LayerStats& subsample_stats);

/// Probe-based layer-wise Lipschitz estimate using full-data gradients:
/// the max over seeded random directions v_k with ||v_k|| = radius of
/// ||grad_k f(w) - grad_k f(w + U_k v_k)|| / radius.
struct LipschitzEstimate {
  std::vector<double> value;
  int probes = 0;
  double radius = 0.0;
};

LipschitzEstimate estimate_block_lipschitz(const Problem& p, const BlockVector& w,
                                           int probes, double radius,
                                           std::uint64_t seed);

}  // namespace lwopt
