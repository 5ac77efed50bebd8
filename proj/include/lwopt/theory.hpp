#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lwopt/block.hpp"
#include "lwopt/quadratic.hpp"

namespace lwopt {

/// A cap that may be genuinely absent (e.g. the B/(8 L_k M_k) branch with
/// M_k = 0). Never encoded as a large float.
struct CapValue {
  double value = 0.0;
  bool is_bounded = true;

  static CapValue of(double v) { return {v, true}; }
  static CapValue unbounded() { return {0.0, false}; }
};

CapValue cap_min(CapValue a, CapValue b);

enum class Regime { mgd, mnag };

/// Admissible-rate region of one convergence theorem: per-layer caps on
/// gamma_k and a cap on the layer mean (1/K) sum_k gamma_k.
struct LrCaps {
  Regime regime = Regime::mgd;
  double beta = 0.0;
  int batch = 1;
  std::vector<CapValue> per_layer;
  CapValue mean_cap;
};

/// gamma_k <= min{ 1/(8 L_k), B/(8 L_k M_k) },
/// (1/K) sum gamma_k <= min{ 1/(2 L_g), (1/(2 L_g)) sqrt(B/M_g) }.
LrCaps lr_caps_mgd(const TheoryConstants& c, int batch);

/// gamma_k <= min{ (1-b)/(8 L_k), (1-b)B/(8 L_k M_k) },
/// (1/K) sum gamma_k <= min{ (1-b)^2/(4 b^2 L_g),
///                           (1-b)^2 sqrt(B)/(4 b^2 L_g sqrt(M_g)),
///                           (1-b) sqrt(B)/(4 L_g sqrt(M_g)),
///                           (1-b)/(4 L_g) },
/// with b = 0 and M_g = 0 branches reported as unbounded.
LrCaps lr_caps_mnag(const TheoryConstants& c, int batch, double beta);

/// The same caps translated to the scalar gamma of the rule
/// gamma_k = gamma / L_k, one named branch each.
struct NamedCap {
  std::string branch;
  CapValue cap;
};
std::vector<NamedCap> scalar_gamma_caps(const TheoryConstants& c, int batch,
                                        double beta, Regime regime);

/// Largest admissible scalar gamma (min over the named branches).
double max_scalar_gamma(const TheoryConstants& c, int batch, double beta,
                        Regime regime);

/// Throws cap_violation naming the violated branch.
void check_scalar_gamma(const TheoryConstants& c, int batch, double beta,
                        Regime regime, double gamma);

/// (1/T) sum_t sum_k q_k ||grad_k f(w_t)||^2 from a T x K matrix of
/// per-layer squared gradient norms. q must sum to 1.
double convergence_metric(const std::vector<std::vector<double>>& sq_grad_norms,
                          std::span<const double> q);

/// Streaming form of the metric; add() consumes one iterate's per-layer
/// squared norms.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::vector<double> q);
  void add(std::span<const double> per_layer_sq_norms);
  double value() const;
  std::int64_t steps() const { return steps_; }

 private:
  std::vector<double> q_;
  double sum_ = 0.0;
  std::int64_t steps_ = 0;
};

struct BoundTerms {
  double optimization = 0.0;
  double noise = 0.0;
  double total() const { return optimization + noise; }
};

/// 8 (f0 - f_inf) / (T gamma sum 1/L_k)  +  (4 + 2 kappa) M gamma / B.
/// With check_caps (default) the scalar gamma is validated first.
BoundTerms bound_rhs_mgd(const TheoryConstants& c, double gamma, int batch,
                         std::int64_t iters, double f0, bool check_caps = true);

/// 8 (1-b)(f0 - f_inf) / (T gamma sum 1/L_k)
///   +  M gamma / ((1-b) B) * (4 + 2 kappa + 2 kappa/(1-b)).
BoundTerms bound_rhs_mnag(const TheoryConstants& c, double gamma, int batch,
                          std::int64_t iters, double beta, double f0,
                          bool check_caps = true);

/// Corollary step size gamma = min{ (1-b)/8, sqrt(B (f0-f_inf)/(T M sum 1/L_k)) }
/// (1-b -> 1 in the mGD regime; M = 0 keeps the first branch) together with
/// the corollary's rate-bound value.
struct CorollaryGamma {
  double gamma = 0.0;
  double rate_bound = 0.0;
};
CorollaryGamma corollary_gamma(const TheoryConstants& c, int batch,
                               std::int64_t iters, double f0, double beta,
                               Regime regime);

/// Empirical check of one theorem: runs mGD/mNAG with gamma_k = gamma/L_k on
/// the quadratic oracle for every seed, averages the convergence metric over
/// seeds and compares against the theorem's right-hand side.
struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  BoundTerms terms;
  bool satisfied = false;
  int seeds = 0;
  double gamma = 0.0;
  double beta = 0.0;
  int batch = 0;
  std::int64_t iters = 0;
  double f0 = 0.0;
  TheoryConstants constants;
};

BoundReport validate_bound(const Problem& quadratic, const BlockVector& w0,
                           double gamma, double beta, int batch,
                           std::span<const std::uint64_t> seeds,
                           std::int64_t iters);

}  // namespace lwopt
