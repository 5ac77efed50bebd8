#include "lwopt/quadratic.hpp"

#include <algorithm>
#include <cmath>

#include "lwopt/errors.hpp"
#include "lwopt/rng.hpp"

namespace lwopt {

void QuadraticSpec::validate() const {
  if (dims.empty()) throw config_error("quadratic: dims must be non-empty");
  if (lipschitz.size() != dims.size()) {
    throw config_error("quadratic: lipschitz length must equal the block count");
  }
  for (double l : lipschitz) {
    if (!(l > 0.0)) throw config_error("quadratic: every L_k must be > 0");
  }
  if (center_spread.size() != dims.size()) {
    throw config_error("quadratic: center_spread length must equal the block count");
  }
  for (double s : center_spread) {
    if (s < 0.0) throw config_error("quadratic: center spreads must be >= 0");
  }
  if (num_samples < 1) throw config_error("quadratic: num_samples must be >= 1");
}

TheoryConstants make_theory_constants(std::vector<double> lipschitz,
                                      std::vector<double> grad_var_factor,
                                      double grad_var_bound, double f_inf) {
  TheoryConstants c;
  c.lipschitz = std::move(lipschitz);
  c.grad_var_factor = std::move(grad_var_factor);
  c.grad_var_bound = grad_var_bound;
  c.f_inf = f_inf;
  const std::size_t k_count = c.lipschitz.size();
  if (c.grad_var_factor.size() != k_count) {
    throw config_error("theory constants: M_k list length must equal L_k's");
  }
  c.lipschitz_max = *std::max_element(c.lipschitz.begin(), c.lipschitz.end());
  c.grad_var_factor_max =
      *std::max_element(c.grad_var_factor.begin(), c.grad_var_factor.end());
  c.kappa.resize(k_count);
  c.q.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    c.kappa[k] = c.lipschitz_max / c.lipschitz[k];
    c.inv_lipschitz_sum += 1.0 / c.lipschitz[k];
  }
  c.kappa_max = *std::max_element(c.kappa.begin(), c.kappa.end());
  for (std::size_t k = 0; k < k_count; ++k) {
    c.q[k] = (1.0 / c.lipschitz[k]) / c.inv_lipschitz_sum;
  }
  return c;
}

BlockQuadratic::BlockQuadratic(std::shared_ptr<const BlockLayout> layout,
                               std::vector<double> lipschitz,
                               std::vector<double> centers)
    : Problem(std::move(layout)),
      lipschitz_(std::move(lipschitz)),
      centers_(std::move(centers)),
      center_mean_(layout_) {
  const std::size_t d = layout_->dim();
  if (lipschitz_.size() != static_cast<std::size_t>(layout_->blocks())) {
    throw config_error("quadratic: lipschitz length must equal the block count");
  }
  if (centers_.empty() || centers_.size() % d != 0) {
    throw config_error("quadratic: centers must be n x d");
  }
  num_samples_ = static_cast<int>(centers_.size() / d);

  // Welford running mean: identical samples keep the mean bit-exact, which
  // in turn keeps Var_k, M and f_inf exactly zero for the sigma = 0 oracle.
  auto mean = center_mean_.data();
  for (int i = 0; i < num_samples_; ++i) {
    const double* x = centers_.data() + static_cast<std::size_t>(i) * d;
    for (std::size_t j = 0; j < d; ++j) mean[j] += (x[j] - mean[j]) / (i + 1);
  }

  const int k_count = layout_->blocks();
  center_variance_.assign(static_cast<std::size_t>(k_count), 0.0);
  for (int i = 0; i < num_samples_; ++i) {
    const double* x = centers_.data() + static_cast<std::size_t>(i) * d;
    for (int k = 0; k < k_count; ++k) {
      const std::size_t off = layout_->offset(k);
      const std::size_t dim = static_cast<std::size_t>(layout_->block_dim(k));
      double s = 0.0;
      for (std::size_t j = off; j < off + dim; ++j) {
        const double diff = x[j] - mean[j];
        s += diff * diff;
      }
      center_variance_[static_cast<std::size_t>(k)] += s;
    }
  }
  block_noise_bound_.resize(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    center_variance_[ks] /= num_samples_;
    block_noise_bound_[ks] = lipschitz_[ks] * lipschitz_[ks] * center_variance_[ks];
  }
}

double BlockQuadratic::sample_loss(const BlockVector& w, int sample) const {
  const std::size_t d = layout_->dim();
  const double* x = centers_.data() + static_cast<std::size_t>(sample) * d;
  double loss = 0.0;
  for (int k = 0; k < layout_->blocks(); ++k) {
    const std::size_t off = layout_->offset(k);
    const std::size_t dim = static_cast<std::size_t>(layout_->block_dim(k));
    double s = 0.0;
    for (std::size_t j = off; j < off + dim; ++j) {
      const double diff = w[j] - x[j];
      s += diff * diff;
    }
    loss += 0.5 * lipschitz_[static_cast<std::size_t>(k)] * s;
  }
  return loss;
}

void BlockQuadratic::sample_grad(const BlockVector& w, int sample,
                                 BlockVector& grad) const {
  const std::size_t d = layout_->dim();
  const double* x = centers_.data() + static_cast<std::size_t>(sample) * d;
  for (int k = 0; k < layout_->blocks(); ++k) {
    const std::size_t off = layout_->offset(k);
    const std::size_t dim = static_cast<std::size_t>(layout_->block_dim(k));
    const double l = lipschitz_[static_cast<std::size_t>(k)];
    for (std::size_t j = off; j < off + dim; ++j) {
      grad[j] = l * (w[j] - x[j]);
    }
  }
}

double BlockQuadratic::sample_loss_and_grad(const BlockVector& w, int sample,
                                            BlockVector& grad) const {
  const std::size_t d = layout_->dim();
  const double* x = centers_.data() + static_cast<std::size_t>(sample) * d;
  double loss = 0.0;
  for (int k = 0; k < layout_->blocks(); ++k) {
    const std::size_t off = layout_->offset(k);
    const std::size_t dim = static_cast<std::size_t>(layout_->block_dim(k));
    const double l = lipschitz_[static_cast<std::size_t>(k)];
    double s = 0.0;
    for (std::size_t j = off; j < off + dim; ++j) {
      const double diff = w[j] - x[j];
      s += diff * diff;
      grad[j] = l * diff;
    }
    loss += 0.5 * l * s;
  }
  return loss;
}

bool BlockQuadratic::full_grad_closed_form(const BlockVector& w,
                                           BlockVector& grad) const {
  const auto mean = center_mean_.data();
  for (int k = 0; k < layout_->blocks(); ++k) {
    const std::size_t off = layout_->offset(k);
    const std::size_t dim = static_cast<std::size_t>(layout_->block_dim(k));
    const double l = lipschitz_[static_cast<std::size_t>(k)];
    for (std::size_t j = off; j < off + dim; ++j) {
      grad[j] = l * (w[j] - mean[j]);
    }
  }
  return true;
}

std::shared_ptr<BlockQuadratic> make_block_quadratic(const QuadraticSpec& spec) {
  spec.validate();
  auto layout = make_layout(spec.dims);
  const std::size_t d = layout->dim();
  Rng rng(spec.seed);

  std::vector<double> population_mean(d);
  for (std::size_t j = 0; j < d; ++j) population_mean[j] = rng.normal();

  std::vector<double> centers(static_cast<std::size_t>(spec.num_samples) * d);
  for (int i = 0; i < spec.num_samples; ++i) {
    double* x = centers.data() + static_cast<std::size_t>(i) * d;
    for (int k = 0; k < layout->blocks(); ++k) {
      const std::size_t off = layout->offset(k);
      const std::size_t dim = static_cast<std::size_t>(layout->block_dim(k));
      const double sigma = spec.center_spread[static_cast<std::size_t>(k)];
      for (std::size_t j = off; j < off + dim; ++j) {
        x[j] = population_mean[j] + sigma * rng.normal();
      }
    }
  }
  return std::make_shared<BlockQuadratic>(std::move(layout), spec.lipschitz,
                                          std::move(centers));
}

TheoryConstants quad_theory_constants(const Problem& problem) {
  const auto* quad = dynamic_cast<const BlockQuadratic*>(&problem);
  if (quad == nullptr) {
    throw unsupported_error(
        "theory constants are only exact for the block quadratic");
  }
  const int k_count = quad->layout().blocks();
  double f_inf = 0.0;
  double noise = 0.0;
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    f_inf += 0.5 * quad->lipschitz()[ks] * quad->center_variance()[ks];
    noise = std::max(noise, quad->block_noise_bound()[ks]);
  }
  return make_theory_constants(quad->lipschitz(),
                               std::vector<double>(static_cast<std::size_t>(k_count), 0.0),
                               noise, f_inf);
}

}  // namespace lwopt
