#include <doctest.h>

#include <cmath>
#include <vector>

#include "lwopt/errors.hpp"
#include "lwopt/rng.hpp"
#include "lwopt/theory.hpp"

using namespace lwopt;

namespace {

TheoryConstants consts_of(std::vector<double> lipschitz, std::vector<double> mk,
                          double m, double f_inf = 0.0) {
  return make_theory_constants(std::move(lipschitz), std::move(mk), m, f_inf);
}

QuadraticSpec unit_quad(double spread) {
  QuadraticSpec spec;
  spec.dims = {2, 2};
  spec.lipschitz = {1.0, 4.0};
  spec.num_samples = 256;
  spec.center_spread = {spread, spread};
  spec.seed = 77;
  return spec;
}

BlockVector offset_w0(const BlockQuadratic& quad, double offset, std::uint64_t seed) {
  BlockVector w0 = quad.center_mean();
  Rng rng(seed);
  for (double& x : w0.data()) x += offset * rng.normal();
  return w0;
}

}  // namespace

TEST_CASE("convergence metric") {
  SUBCASE("K = 1 collapses to the plain mean of squared norms") {
    const std::vector<std::vector<double>> norms{{4.0}, {1.0}, {0.25}};
    CHECK(convergence_metric(norms, std::vector<double>{1.0}) ==
          doctest::Approx((4.0 + 1.0 + 0.25) / 3.0).epsilon(1e-15));
  }
  SUBCASE("all-zero gradients give 0") {
    const std::vector<std::vector<double>> norms{{0.0, 0.0}, {0.0, 0.0}};
    CHECK(convergence_metric(norms, std::vector<double>{0.5, 0.5}) == 0.0);
  }
  SUBCASE("equal Lipschitz constants weight layers by 1/K") {
    // q = (1/2, 1/2): metric is half the mean total squared norm.
    Rng rng(3);
    std::vector<std::vector<double>> norms(10, std::vector<double>(2));
    double brute = 0.0;
    for (auto& row : norms) {
      row[0] = rng.uniform();
      row[1] = rng.uniform();
      brute += 0.5 * (row[0] + row[1]);
    }
    CHECK(convergence_metric(norms, std::vector<double>{0.5, 0.5}) ==
          doctest::Approx(brute / 10.0).epsilon(1e-12));
  }
  SUBCASE("q must sum to one") {
    CHECK_THROWS_AS(convergence_metric({{1.0}}, std::vector<double>{0.5}),
                    config_error);
  }
}

TEST_CASE("incremental metric equals the post-hoc computation") {
  Rng rng(8);
  const std::vector<double> q{0.2, 0.3, 0.5};
  std::vector<std::vector<double>> rows(57, std::vector<double>(3));
  MetricAccumulator acc(q);
  for (auto& row : rows) {
    for (double& x : row) x = rng.uniform();
    acc.add(row);
  }
  CHECK(acc.value() == doctest::Approx(convergence_metric(rows, q)).epsilon(1e-12));
  CHECK(acc.steps() == 57);
}

TEST_CASE("mGD caps") {
  SUBCASE("M_k = 0 leaves only the smoothness branch") {
    const LrCaps caps = lr_caps_mgd(consts_of({2.0}, {0.0}, 0.0), 32);
    REQUIRE(caps.per_layer[0].is_bounded);
    CHECK(caps.per_layer[0].value == doctest::Approx(0.0625).epsilon(1e-15));
    CHECK(caps.mean_cap.value == doctest::Approx(1.0 / 4.0).epsilon(1e-15));
  }
  SUBCASE("L = (1, 10), B = 64, M_k = 0") {
    const LrCaps caps = lr_caps_mgd(consts_of({1.0, 10.0}, {0.0, 0.0}, 0.0), 64);
    CHECK(caps.per_layer[0].value == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(caps.per_layer[1].value == doctest::Approx(0.0125).epsilon(1e-15));
    CHECK(caps.mean_cap.value == doctest::Approx(0.05).epsilon(1e-15));
  }
  SUBCASE("positive M_k activates the variance branch") {
    const LrCaps caps = lr_caps_mgd(consts_of({1.0}, {16.0}, 1.0), 4);
    // min{1/8, 4/(8*16)} = 1/32.
    CHECK(caps.per_layer[0].value == doctest::Approx(1.0 / 32.0).epsilon(1e-15));
    // mean: min{1/2, (1/2) sqrt(4/16)} = 1/4.
    CHECK(caps.mean_cap.value == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("mNAG caps") {
  SUBCASE("beta = 0 reduces the per-layer caps to the mGD values") {
    const TheoryConstants c = consts_of({1.0, 10.0}, {0.0, 0.0}, 0.0);
    const LrCaps mgd = lr_caps_mgd(c, 64);
    const LrCaps mnag = lr_caps_mnag(c, 64, 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(mnag.per_layer[k].value == mgd.per_layer[k].value);
    }
    // beta = 0 kills the beta^2 branches; with M_g = 0 only (1-beta)/(4 L_g)
    // stays.
    CHECK(mnag.mean_cap.value == doctest::Approx(1.0 / 40.0).epsilon(1e-15));
  }
  SUBCASE("beta = 0.9, L = (1), M = 0") {
    const LrCaps caps = lr_caps_mnag(consts_of({1.0}, {0.0}, 0.0), 16, 0.9);
    CHECK(caps.per_layer[0].value == doctest::Approx(0.0125).epsilon(1e-12));
    // min{ (1-b)^2/(4 b^2 L_g), (1-b)/(4 L_g) } = min{0.01/3.24, 0.025}.
    CHECK(caps.mean_cap.value == doctest::Approx(0.01 / 3.24).epsilon(1e-12));
  }
  SUBCASE("caps shrink as beta grows") {
    const TheoryConstants c = consts_of({1.0, 3.0}, {2.0, 1.0}, 1.0);
    double last_layer = 1e300, last_mean = 1e300;
    for (double beta : {0.0, 0.3, 0.6, 0.9, 0.99}) {
      const LrCaps caps = lr_caps_mnag(c, 32, beta);
      CHECK(caps.per_layer[0].value <= last_layer);
      CHECK(caps.mean_cap.value <= last_mean);
      last_layer = caps.per_layer[0].value;
      last_mean = caps.mean_cap.value;
    }
  }
}

TEST_CASE("uniform-constant corollary lists the mNAG caps branch by branch") {
  // With L_k = L_g and M_k = M_g the corollary's first two branches are the
  // theorem's per-layer caps; evaluate both sides directly.
  const double lg = 3.0, mg = 5.0, beta = 0.4;
  const int batch = 32;
  const TheoryConstants c = consts_of({lg, lg, lg}, {mg, mg, mg}, 1.0);
  const LrCaps caps = lr_caps_mnag(c, batch, beta);
  const double branch1 = (1.0 - beta) / (8.0 * lg);
  const double branch2 = batch * (1.0 - beta) / (8.0 * lg * mg);
  for (const CapValue& cap : caps.per_layer) {
    CHECK(cap.value == doctest::Approx(std::min(branch1, branch2)).epsilon(1e-15));
  }
  // The remaining corollary branches are the theorem's mean-cap branches.
  const double branch3 = (1.0 - beta) * std::sqrt(double(batch)) / (4.0 * lg * std::sqrt(mg));
  const double branch4 = (1.0 - beta) * (1.0 - beta) * std::sqrt(double(batch)) /
                         (4.0 * beta * beta * lg * std::sqrt(mg));
  const double branch5a = (1.0 - beta) * (1.0 - beta) / (4.0 * beta * beta * lg);
  const double branch5b = (1.0 - beta) / (4.0 * lg);
  CHECK(caps.mean_cap.value ==
        doctest::Approx(std::min(std::min(branch3, branch4), std::min(branch5a, branch5b)))
            .epsilon(1e-15));
}

TEST_CASE("mGD bound right-hand side") {
  SUBCASE("frozen direct evaluation") {
    // f0 - f_inf = 1, T = 100, gamma = 0.1, sum 1/L = 1, M = 0 -> 0.8.
    const TheoryConstants c = consts_of({1.0}, {0.0}, 0.0);
    const BoundTerms terms = bound_rhs_mgd(c, 0.1, 8, 100, 1.0);
    CHECK(terms.optimization == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(terms.noise == 0.0);
  }
  SUBCASE("doubling B halves the noise term") {
    const TheoryConstants c = consts_of({1.0}, {0.0}, 3.0, 0.0);
    const BoundTerms a = bound_rhs_mgd(c, 0.05, 16, 100, 1.0);
    const BoundTerms b = bound_rhs_mgd(c, 0.05, 32, 100, 1.0);
    CHECK(b.noise == doctest::Approx(a.noise / 2.0).epsilon(1e-15));
    CHECK(b.optimization == a.optimization);
  }
  SUBCASE("cap check names the violated branch") {
    const TheoryConstants c = consts_of({1.0}, {0.0}, 0.0);
    CHECK_THROWS_WITH_AS(bound_rhs_mgd(c, 0.2, 8, 100, 1.0),
                         doctest::Contains("1/(8 L_k)"), cap_violation);
  }
}

TEST_CASE("mNAG bound right-hand side") {
  SUBCASE("beta = 0 exceeds the mGD noise coefficient by exactly 2 kappa") {
    const TheoryConstants c = consts_of({1.0, 2.0}, {0.0, 0.0}, 5.0, 0.0);
    const double gamma = 0.01;
    const BoundTerms mgd = bound_rhs_mgd(c, gamma, 8, 100, 1.0);
    const BoundTerms mnag = bound_rhs_mnag(c, gamma, 8, 100, 0.0, 1.0);
    CHECK(mnag.optimization == doctest::Approx(mgd.optimization).epsilon(1e-15));
    const double extra = 2.0 * c.kappa_max * c.grad_var_bound * gamma / 8.0;
    CHECK(mnag.noise - mgd.noise == doctest::Approx(extra).epsilon(1e-12));
  }
  SUBCASE("frozen formula value (outside the caps, so unchecked)") {
    // M = 0, beta = 0.5, f0 - f_inf = 1, T = 100, gamma = 0.1, sum 1/L = 1
    // -> 8 * 0.5 / (100 * 0.1) = 0.4. gamma = 0.1 violates the
    // (1-beta)/8 = 0.0625 per-layer cap, so this exercises the raw formula.
    const TheoryConstants c = consts_of({1.0}, {0.0}, 0.0);
    CHECK_THROWS_AS(bound_rhs_mnag(c, 0.1, 8, 100, 0.5, 1.0), cap_violation);
    const BoundTerms terms = bound_rhs_mnag(c, 0.1, 8, 100, 0.5, 1.0, false);
    CHECK(terms.optimization == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(terms.noise == 0.0);
  }
  SUBCASE("noise blows up as beta approaches 1") {
    const TheoryConstants c = consts_of({1.0}, {0.0}, 2.0, 0.0);
    double last = 0.0;
    for (double beta : {0.0, 0.5, 0.9, 0.99, 0.999}) {
      const BoundTerms terms = bound_rhs_mnag(c, 1e-5, 8, 100, beta, 1.0, false);
      CHECK(terms.noise > last);
      last = terms.noise;
    }
  }
}

TEST_CASE("corollary gamma") {
  SUBCASE("M = 0 keeps the constant branch") {
    const TheoryConstants c = consts_of({1.0, 2.0}, {0.0, 0.0}, 0.0);
    CHECK(corollary_gamma(c, 8, 100, 1.0, 0.0, Regime::mgd).gamma ==
          doctest::Approx(0.125).epsilon(1e-15));
    CHECK(corollary_gamma(c, 8, 100, 1.0, 0.5, Regime::mnag).gamma ==
          doctest::Approx(0.0625).epsilon(1e-15));
  }
  SUBCASE("frozen square-root branch") {
    // B = 64, f0 - f_inf = 1, T = 10000, M = 4, sum 1/L = 1 -> 0.04.
    const TheoryConstants c = consts_of({1.0}, {0.0}, 4.0, 0.0);
    const CorollaryGamma g = corollary_gamma(c, 64, 10000, 1.0, 0.0, Regime::mgd);
    CHECK(g.gamma == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(g.rate_bound > 0.0);
  }
  SUBCASE("linear scaling at the formula level: (B, T) -> (cB, T/c)") {
    // With T B fixed, the square-root step size scales by c (the linear
    // scaling rule) and the square-root term of the guarantee is unchanged.
    const TheoryConstants c = consts_of({1.0, 4.0}, {0.0, 0.0}, 7.0, 0.0);
    const double gap = 2.0;
    const CorollaryGamma a = corollary_gamma(c, 16, 4000, gap, 0.0, Regime::mgd);
    const CorollaryGamma b = corollary_gamma(c, 32, 2000, gap, 0.0, Regime::mgd);
    CHECK(b.gamma == doctest::Approx(2.0 * a.gamma).epsilon(1e-12));
    const double noise_a =
        a.rate_bound - 64.0 * gap / (4000.0 * c.inv_lipschitz_sum);
    const double noise_b =
        b.rate_bound - 64.0 * gap / (2000.0 * c.inv_lipschitz_sum);
    CHECK(noise_a == doctest::Approx(noise_b).epsilon(1e-12));
  }
}

TEST_CASE("scalar gamma caps agree with the resolved LrCaps") {
  const TheoryConstants c = consts_of({1.0, 10.0}, {0.0, 0.0}, 0.0);
  const double cap = max_scalar_gamma(c, 64, 0.0, Regime::mgd);
  // gamma/L_k <= per-layer cap for all k and the mean constraint both hold
  // with equality allowed.
  CHECK_NOTHROW(check_scalar_gamma(c, 64, 0.0, Regime::mgd, cap));
  CHECK_THROWS_AS(check_scalar_gamma(c, 64, 0.0, Regime::mgd, cap * 1.0001),
                  cap_violation);
}

TEST_CASE("validate_bound on the noiseless quadratic at the cap") {
  auto quad = make_block_quadratic(unit_quad(0.0));
  const TheoryConstants c = quad_theory_constants(*quad);
  const BlockVector w0 = offset_w0(*quad, 1.0, 5);
  const double cap = max_scalar_gamma(c, 16, 0.0, Regime::mgd);
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const BoundReport report = validate_bound(*quad, w0, cap, 0.0, 16, seeds, 400);
  CHECK(report.satisfied);
  CHECK(report.terms.noise == 0.0);

  // lhs averages a decaying sequence, so it sits well below its first term.
  const BlockVector g0 = full_gradient(*quad, w0);
  double first = 0.0;
  for (int k = 0; k < 2; ++k) {
    first += c.q[static_cast<std::size_t>(k)] * sq_norm(g0.block(k));
  }
  CHECK(report.lhs < first);
}

TEST_CASE("validate_bound with gradient noise and momentum") {
  auto quad = make_block_quadratic(unit_quad(0.5));
  const TheoryConstants c = quad_theory_constants(*quad);
  const BlockVector w0 = offset_w0(*quad, 1.0, 5);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 8; ++s) seeds.push_back(100 + s);

  for (double beta : {0.0, 0.5}) {
    const Regime regime = beta == 0.0 ? Regime::mgd : Regime::mnag;
    const double cap = max_scalar_gamma(c, 16, beta, regime);
    const BoundReport report = validate_bound(*quad, w0, cap, beta, 16, seeds, 400);
    CHECK(report.satisfied);
    CHECK(report.lhs > 0.0);
    CHECK(report.rhs == report.terms.total());
  }
}

TEST_CASE("validate_bound at T = 1 measures only the initial gradient") {
  auto quad = make_block_quadratic(unit_quad(0.3));
  const TheoryConstants c = quad_theory_constants(*quad);
  const BlockVector w0 = offset_w0(*quad, 1.0, 9);
  const double cap = max_scalar_gamma(c, 32, 0.0, Regime::mgd);
  const std::vector<std::uint64_t> seeds{4, 5};
  const BoundReport report = validate_bound(*quad, w0, cap, 0.0, 32, seeds, 1);

  const BlockVector g0 = full_gradient(*quad, w0);
  double expected = 0.0;
  for (int k = 0; k < 2; ++k) {
    expected += c.q[static_cast<std::size_t>(k)] * sq_norm(g0.block(k));
  }
  CHECK(report.lhs == doctest::Approx(expected).epsilon(1e-12));
  CHECK(report.satisfied);
}

TEST_CASE("validate_bound refuses gamma above the caps") {
  auto quad = make_block_quadratic(unit_quad(0.2));
  const TheoryConstants c = quad_theory_constants(*quad);
  const BlockVector w0 = offset_w0(*quad, 1.0, 2);
  const double cap = max_scalar_gamma(c, 16, 0.0, Regime::mgd);
  const std::vector<std::uint64_t> seeds{1};
  CHECK_THROWS_AS(validate_bound(*quad, w0, cap * 2.0, 0.0, 16, seeds, 10),
                  cap_violation);
}
