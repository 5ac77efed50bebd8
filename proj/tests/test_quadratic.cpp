#include <doctest.h>

#include <cmath>

#include "lwopt/errors.hpp"
#include "lwopt/fcn.hpp"
#include "lwopt/quadratic.hpp"
#include "lwopt/rng.hpp"

using namespace lwopt;

namespace {

QuadraticSpec small_spec() {
  QuadraticSpec spec;
  spec.dims = {3, 2};
  spec.lipschitz = {1.0, 10.0};
  spec.num_samples = 64;
  spec.center_spread = {0.8, 0.4};
  spec.seed = 19;
  return spec;
}

}  // namespace

TEST_CASE("spec validation") {
  QuadraticSpec spec = small_spec();
  spec.lipschitz = {1.0};
  CHECK_THROWS_AS(make_block_quadratic(spec), config_error);
  spec = small_spec();
  spec.lipschitz[0] = 0.0;
  CHECK_THROWS_AS(make_block_quadratic(spec), config_error);
  spec = small_spec();
  spec.num_samples = 0;
  CHECK_THROWS_AS(make_block_quadratic(spec), config_error);
}

TEST_CASE("zero spread collapses every sample onto the mean") {
  QuadraticSpec spec = small_spec();
  spec.center_spread = {0.0, 0.0};
  auto problem = make_block_quadratic(spec);
  const TheoryConstants c = quad_theory_constants(*problem);
  CHECK(c.grad_var_bound == 0.0);
  CHECK(c.f_inf == 0.0);

  // The stochastic gradient is exact: any single sample equals the full mean.
  BlockVector w(problem->layout_ptr());
  w.fill(0.3);
  const BlockVector full = eval_grad_batch(*problem, w, MiniBatch::all(64));
  const BlockVector one = eval_grad_batch(*problem, w, MiniBatch::single(7));
  for (std::size_t i = 0; i < full.size(); ++i) {
    CHECK(full[i] == doctest::Approx(one[i]).epsilon(1e-12));
  }
}

TEST_CASE("kappa and q for L = (1, 10)") {
  auto problem = make_block_quadratic(small_spec());
  const TheoryConstants c = quad_theory_constants(*problem);
  CHECK(c.lipschitz_max == 10.0);
  CHECK(c.kappa_max == doctest::Approx(10.0));
  CHECK(c.q[0] == doctest::Approx(10.0 / 11.0).epsilon(1e-12));
  CHECK(c.q[1] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  double q_sum = 0.0;
  for (double q : c.q) {
    CHECK(q > 0.0);
    CHECK(q <= 1.0);
    q_sum += q;
  }
  CHECK(q_sum == doctest::Approx(1.0).epsilon(1e-12));
  for (double kappa : c.kappa) CHECK(kappa >= 1.0);
}

TEST_CASE("gradient vanishes at the empirical center mean") {
  auto problem = make_block_quadratic(small_spec());
  const BlockVector grad =
      eval_grad_batch(*problem, problem->center_mean(), MiniBatch::all(64));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    CHECK(std::abs(grad[i]) < 1e-12);
  }
}

TEST_CASE("hand-built two-sample instance: f_inf = 1, M = 4") {
  // K = 1, L = 2, 1-D samples at -1 and +1: mu = 0, Var = 1,
  // f_inf = 0.5 * 2 * 1 = 1, M = L^2 Var = 4.
  auto layout = make_layout({1});
  BlockQuadratic problem(layout, {2.0}, {-1.0, 1.0});
  const TheoryConstants c = quad_theory_constants(problem);
  CHECK(c.f_inf == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.grad_var_bound == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(problem.center_mean()[0] == 0.0);
}

TEST_CASE("f at the mean equals f_inf through the generic loss path") {
  auto problem = make_block_quadratic(small_spec());
  const TheoryConstants c = quad_theory_constants(*problem);
  const double f_mu =
      eval_loss(*problem, problem->center_mean(), MiniBatch::all(64));
  CHECK(f_mu == doctest::Approx(c.f_inf).epsilon(1e-12));
}

TEST_CASE("full-batch loss at the mean matches the brute-force sample mean") {
  auto problem = make_block_quadratic(small_spec());
  double brute = 0.0;
  for (int i = 0; i < 64; ++i) {
    brute += problem->sample_loss(problem->center_mean(), i);
  }
  brute /= 64.0;
  CHECK(eval_loss(*problem, problem->center_mean(), MiniBatch::all(64)) ==
        doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("batch gradient is L_k (w_k - batch center mean)") {
  auto problem = make_block_quadratic(small_spec());
  BlockVector w(problem->layout_ptr());
  Rng rng(77);
  for (double& x : w.data()) x = rng.normal();
  MiniBatch batch;
  batch.indices = {3, 11, 40, 59};

  // Independent oracle: average the centers by hand.
  BlockVector center_mean(problem->layout_ptr());
  BlockVector grad(problem->layout_ptr());
  for (std::int32_t i : batch.indices) {
    problem->sample_grad(w, i, grad);  // L(w - x_i)
  }
  // Recover sum of centers from gradients: x_i = w - grad_i / L.
  BlockVector expected(problem->layout_ptr());
  for (int k = 0; k < 2; ++k) {
    const double l = problem->lipschitz()[static_cast<std::size_t>(k)];
    std::vector<double> mean_center(w.block(k).size(), 0.0);
    for (std::int32_t i : batch.indices) {
      problem->sample_grad(w, i, grad);
      auto g = grad.block(k);
      for (std::size_t j = 0; j < g.size(); ++j) {
        mean_center[j] += (w.block(k)[j] - g[j] / l) / batch.size();
      }
    }
    auto e = expected.block(k);
    for (std::size_t j = 0; j < e.size(); ++j) {
      e[j] = l * (w.block(k)[j] - mean_center[j]);
    }
  }
  const BlockVector batch_grad = eval_grad_batch(*problem, w, batch);
  for (std::size_t i = 0; i < batch_grad.size(); ++i) {
    CHECK(batch_grad[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("layer-wise Lipschitz equality of the linear gradient") {
  auto problem = make_block_quadratic(small_spec());
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    BlockVector w(problem->layout_ptr());
    for (double& x : w.data()) x = rng.normal();
    for (int k = 0; k < 2; ++k) {
      BlockVector shifted = w;
      double v_sq = 0.0;
      for (double& x : shifted.block(k)) {
        const double dv = rng.normal();
        x += dv;
        v_sq += dv * dv;
      }
      const BlockVector g0 = full_gradient(*problem, w);
      const BlockVector g1 = full_gradient(*problem, shifted);
      double diff_sq = 0.0;
      for (std::size_t j = 0; j < g0.block(k).size(); ++j) {
        const double d = g0.block(k)[j] - g1.block(k)[j];
        diff_sq += d * d;
      }
      const double l = problem->lipschitz()[static_cast<std::size_t>(k)];
      CHECK(std::sqrt(diff_sq) ==
            doctest::Approx(l * std::sqrt(v_sq)).epsilon(1e-10));
    }
  }
}

TEST_CASE("per-sample gradient variance is w-independent and equals L^2 Var") {
  auto problem = make_block_quadratic(small_spec());
  Rng rng(55);
  for (int rep = 0; rep < 2; ++rep) {
    BlockVector w(problem->layout_ptr());
    for (double& x : w.data()) x = 5.0 * rng.normal();
    const BlockVector mean_grad = full_gradient(*problem, w);
    BlockVector grad(problem->layout_ptr());
    std::vector<double> var(2, 0.0);
    for (int i = 0; i < 64; ++i) {
      problem->sample_grad(w, i, grad);
      for (int k = 0; k < 2; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < grad.block(k).size(); ++j) {
          const double d = grad.block(k)[j] - mean_grad.block(k)[j];
          s += d * d;
        }
        var[static_cast<std::size_t>(k)] += s / 64.0;
      }
    }
    for (int k = 0; k < 2; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      CHECK(var[ks] ==
            doctest::Approx(problem->block_noise_bound()[ks]).epsilon(1e-9));
    }
  }
}

TEST_CASE("theory constants reject non-quadratic problems") {
  FcnSpec spec;
  spec.layer_dims = {4, 5, 5, 4, 3, 2};
  spec.init_seed = 3;
  auto data = std::make_shared<Dataset>(make_synthetic_blobs(12, 4, 2, 0.5, 9));
  auto fcn = make_fcn(spec, data);
  CHECK_THROWS_AS(quad_theory_constants(*fcn), unsupported_error);
}
