#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "lwopt/problem.hpp"

namespace lwopt {

/// Block-separable quadratic with exactly known constants:
///   f_i(w) = 1/2 sum_k L_k ||(w)_k - (x_i)_k||^2
/// Sample centers x_i are seeded Gaussians around a seeded population mean,
/// with per-layer spread sigma_k.
struct QuadraticSpec {
  std::vector<int> dims;
  std::vector<double> lipschitz;
  int num_samples = 0;
  std::vector<double> center_spread;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Constants of the convergence theorems for one problem instance. All
/// moments are of the realized samples, not population parameters.
struct TheoryConstants {
  std::vector<double> lipschitz;        // L_k
  double lipschitz_max = 0.0;           // L_g = max_k L_k
  std::vector<double> grad_var_factor;  // M_k
  double grad_var_factor_max = 0.0;     // M_g = max_k M_k
  double grad_var_bound = 0.0;          // M
  std::vector<double> kappa;            // kappa_k = L_g / L_k
  double kappa_max = 0.0;
  std::vector<double> q;                // (1/L_k) / sum_j (1/L_j)
  double inv_lipschitz_sum = 0.0;       // sum_k 1/L_k
  double f_inf = 0.0;

  int blocks() const { return static_cast<int>(lipschitz.size()); }
};

/// Builds TheoryConstants from L_k, M_k, M and f_inf, deriving the maxima,
/// kappa_k and the q_k weights.
TheoryConstants make_theory_constants(std::vector<double> lipschitz,
                                      std::vector<double> grad_var_factor,
                                      double grad_var_bound, double f_inf);

class BlockQuadratic final : public Problem {
 public:
  /// Centers are given explicitly, row-major n x d. Tests use this to place
  /// samples by hand; make_block_quadratic samples them.
  BlockQuadratic(std::shared_ptr<const BlockLayout> layout,
                 std::vector<double> lipschitz, std::vector<double> centers);

  int num_samples() const override { return num_samples_; }
  double sample_loss(const BlockVector& w, int sample) const override;
  void sample_grad(const BlockVector& w, int sample,
                   BlockVector& grad) const override;
  double sample_loss_and_grad(const BlockVector& w, int sample,
                              BlockVector& grad) const override;
  // grad_k f(w) = L_k ((w)_k - mu_k) with mu the empirical center mean.
  bool full_grad_closed_form(const BlockVector& w,
                             BlockVector& grad) const override;

  const std::vector<double>& lipschitz() const { return lipschitz_; }
  const BlockVector& center_mean() const { return center_mean_; }
  /// Var_k = (1/n) sum_i ||(x_i)_k - mu_k||^2.
  const std::vector<double>& center_variance() const { return center_variance_; }
  /// Per-layer noise bound M^(k) = L_k^2 Var_k; the scalar M is their max.
  const std::vector<double>& block_noise_bound() const { return block_noise_bound_; }

 private:
  std::vector<double> lipschitz_;
  std::vector<double> centers_;  // n x d row-major
  int num_samples_;
  BlockVector center_mean_;
  std::vector<double> center_variance_;
  std::vector<double> block_noise_bound_;
};

std::shared_ptr<BlockQuadratic> make_block_quadratic(const QuadraticSpec& spec);

/// Exact constants of a BlockQuadratic: M_k = 0, M = max_k L_k^2 Var_k,
/// f_inf = 1/2 sum_k L_k Var_k. Throws unsupported_error for any other
/// problem type.
TheoryConstants quad_theory_constants(const Problem& problem);

}  // namespace lwopt
