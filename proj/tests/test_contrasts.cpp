#include <doctest.h>

#include <cmath>

#include "smallnoise/contrasts.hpp"
#include "smallnoise/errors.hpp"
#include "smallnoise/rng.hpp"
#include "smallnoise/simulate.hpp"
#include "support.hpp"

using namespace smallnoise;
using testing::vec;

namespace {

FlowSolution flow_for(const ModelSpec& m, const Vec& alpha, const Vec& beta, const ObservedPath& path) {
  return solve_flow(m, alpha, beta, path.x0(), path.grid);
}

}  // namespace

TEST_CASE("ObservedPath validation") {
  const SamplingGrid g(1.0, 2);
  CHECK_THROWS_AS(ObservedPath(g, {vec({1.0}), vec({1.0})}, 0.1), ConfigError);
  CHECK_THROWS_AS(ObservedPath(g, {vec({1.0}), vec({1.0}), vec({1.0})}, 0.0), ConfigError);
  CHECK_THROWS_AS(ObservedPath(g, {vec({1.0}), vec({NAN}), vec({1.0})}, 0.1), ConfigError);
  CHECK_THROWS_AS(ObservedPath(g, {vec({1.0}), vec({1.0, 2.0}), vec({1.0})}, 0.1), ConfigError);
  const ObservedPath p(SamplingGrid(1.0, 4), {vec({0}), vec({1}), vec({2}), vec({3}), vec({4})}, 0.1);
  const ObservedPath s = p.subsample(2);
  CHECK(s.n() == 2);
  CHECK(s.obs[1][0] == 2.0);
  CHECK(s.grid.horizon() == 1.0);
  CHECK_THROWS_AS((void)p.subsample(3), ConfigError);
}

TEST_CASE("residuals") {
  SUBCASE("zero on the flow itself") {
    const ModelSpec m = builtin_two_factor();
    const Vec alpha = vec({1.0, 1.0, 1.0});
    const ObservedPath path = testing::flow_path(m, alpha, vec({0.0, 1.5}), SamplingGrid(1.0, 10));
    for (const Vec& nk : residuals(path, flow_for(m, alpha, vec({1.0, 1.0, 0.3}), path))) {
      CHECK(nk.norm() <= 1e-14);
    }
  }
  SUBCASE("OU with a constant offset: N_k = c (1 - e^{alpha Delta})") {
    const double alpha = 0.5, x0 = 1.0, c = 0.25;
    const SamplingGrid grid(2.0, 8);
    std::vector<Vec> obs{vec({x0})};
    for (int k = 1; k <= 8; ++k) obs.push_back(vec({x0 * std::exp(alpha * grid.time(k)) + c}));
    const ObservedPath path(grid, obs, 0.1);
    const auto n = residuals(path, flow_for(builtin_ou(), vec({alpha}), vec({1.0}), path));
    // k = 1 has no offset on X_0.
    CHECK(n[0][0] == doctest::Approx(c).epsilon(1e-9));
    for (std::size_t k = 1; k < n.size(); ++k) {
      CHECK(n[k][0] == doctest::Approx(c * (1.0 - std::exp(alpha * grid.delta()))).epsilon(1e-9));
    }
  }
  SUBCASE("drift-free p = 2: plain increments") {
    const SamplingGrid grid(1.0, 3);
    const std::vector<Vec> obs{vec({1.0, 2.0}), vec({1.5, 1.0}), vec({0.5, 0.0}), vec({2.0, 2.5})};
    const ObservedPath path(grid, obs, 0.1);
    const auto n = residuals(path, flow_for(testing::drift_free_model(2), vec({0.0}), vec({1.0}), path));
    for (std::size_t k = 1; k < obs.size(); ++k) CHECK((n[k - 1] - (obs[k] - obs[k - 1])).norm() <= 1e-15);
  }
}

TEST_CASE("contrast_cls") {
  const ModelSpec m = testing::drift_free_model(2);
  const ObservedPath path(SamplingGrid(0.5, 1), {vec({1.0, 1.0}), vec({4.0, 5.0})}, 0.1);
  CHECK(contrast_cls(path, flow_for(m, vec({0.0}), vec({1.0}), path)) == doctest::Approx(50.0));

  const ModelSpec ou = builtin_ou();
  const ObservedPath exact = testing::flow_path(ou, vec({0.3}), vec({1.0}), SamplingGrid(1.0, 10));
  CHECK(contrast_cls(exact, flow_for(ou, vec({0.3}), vec({1.0}), exact)) <= 1e-28);

  SeededRng rng(3, 0);
  const ObservedPath noisy =
      simulate_sde(ou, vec({0.3}), vec({1.0}), 0.1, vec({1.0}), SamplingGrid(1.0, 10), 10, rng);
  const double a = evaluate_contrast(ContrastKind::cls, ou, LinkSpec::free(), noisy, vec({0.3}), vec({0.5}));
  const double b = evaluate_contrast(ContrastKind::cls, ou, LinkSpec::free(), noisy, vec({0.3}), vec({3.0}));
  CHECK(a == b);
  CHECK(a > 0.0);
}

TEST_CASE("contrast_weighted") {
  const ModelSpec ou = builtin_ou();
  SeededRng rng(4, 0);
  const ObservedPath path = simulate_sde(ou, vec({-0.4}), vec({1.5}), 0.1, vec({1.0}), SamplingGrid(1.0, 12), 10, rng);
  const LinkSpec link = LinkSpec::fixed_beta(vec({1.5}));
  const FlowSolution f = flow_for(ou, vec({-0.4}), vec({1.5}), path);
  const double s = f.s_mats.front()(0, 0);
  CHECK(contrast_weighted(path, f, link) == doctest::Approx(contrast_cls(path, f) / s).epsilon(1e-12));
  CHECK(contrast_weighted(path, f, link) >= 0.0);

  const ObservedPath exact = testing::flow_path(ou, vec({-0.4}), vec({1.0}), SamplingGrid(1.0, 10));
  CHECK(contrast_weighted(exact, flow_for(ou, vec({-0.4}), vec({1.5}), exact), link) <= 1e-26);
  CHECK_THROWS_AS((void)contrast_weighted(path, f, LinkSpec::free()), ConfigError);
  CHECK_THROWS_AS((void)flow_options_for(ContrastKind::weighted_multiplicative, link, 8), ConfigError);
}

TEST_CASE("contrast_small_delta") {
  const ModelSpec ou = builtin_ou();
  SUBCASE("zero residuals leave the log-det sum") {
    const ModelSpec cir = builtin_cir();
    const ObservedPath exact = testing::flow_path(cir, vec({1.0}), vec({1.0}), SamplingGrid(1.0, 10));
    const FlowSolution f = flow_for(cir, vec({1.0}), vec({2.0}), exact);
    double expected = 0.0;
    for (int k = 0; k < 10; ++k) expected += std::log(4.0 * exact.obs[static_cast<std::size_t>(k)][0]);
    CHECK(contrast_small_delta(exact, f, vec({2.0}), cir) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("OU scalar form and its beta^2 minimizer") {
    SeededRng rng(5, 0);
    const SamplingGrid grid(1.0, 20);
    const ObservedPath path = simulate_sde(ou, vec({0.5}), vec({1.0}), 0.1, vec({1.0}), grid, 10, rng);
    const FlowSolution f = flow_for(ou, vec({0.5}), vec({1.0}), path);
    double sum_n2 = 0.0;
    for (const Vec& nk : residuals(path, f)) sum_n2 += nk.squaredNorm();
    const double e2d = 0.01 * grid.delta();
    for (double beta : {0.5, 1.0, 2.0}) {
      const double expected = 20.0 * std::log(beta * beta) + sum_n2 / (e2d * beta * beta);
      CHECK(contrast_small_delta(path, f, vec({beta}), ou) == doctest::Approx(expected).epsilon(1e-12));
    }
    const double b2 = sum_n2 / (20.0 * e2d);
    const double at_min = contrast_small_delta(path, f, vec({std::sqrt(b2)}), ou);
    for (double scale : {0.98, 1.02}) {
      CHECK(contrast_small_delta(path, f, vec({std::sqrt(b2 * scale)}), ou) > at_min);
    }
    // eps -> 2 eps divides the quadratic term by 4.
    const ObservedPath wide(path.grid, path.obs, 0.2);
    const double logdet = 20.0 * std::log(1.0);
    CHECK(contrast_small_delta(wide, f, vec({1.0}), ou) - logdet ==
          doctest::Approx((contrast_small_delta(path, f, vec({1.0}), ou) - logdet) / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("gaussian_loglik") {
  const ModelSpec ou = builtin_ou();
  const double alpha = -0.3, beta = 0.7, eps = 0.1;
  const SamplingGrid grid(1.0, 10);
  SUBCASE("zero residuals") {
    const ObservedPath exact = testing::flow_path(ou, vec({alpha}), vec({1.0}), grid, eps);
    const FlowSolution f = flow_for(ou, vec({alpha}), vec({beta}), exact);
    double logdet = 0.0;
    for (const Mat& s : f.s_mats) logdet += std::log(s(0, 0));
    CHECK(gaussian_loglik(exact, f) == doctest::Approx(-0.5 * logdet).epsilon(1e-12));
  }
  SUBCASE("OU closed form and residual scaling") {
    SeededRng rng(6, 0);
    const ObservedPath path = simulate_sde(ou, vec({alpha}), vec({beta}), eps, vec({1.0}), grid, 10, rng);
    const FlowSolution f = flow_for(ou, vec({alpha}), vec({beta}), path);
    const double d = grid.delta();
    const double a = std::exp(alpha * d);
    const double s = beta * beta * (std::exp(2.0 * alpha * d) - 1.0) / (2.0 * alpha * d);
    double expected = 0.0;
    double quad = 0.0;
    for (int k = 1; k <= 10; ++k) {
      const double nk = path.obs[static_cast<std::size_t>(k)][0] - a * path.obs[static_cast<std::size_t>(k - 1)][0];
      expected += -0.5 * std::log(s) - nk * nk / (2.0 * eps * eps * d * s);
      quad += nk * nk / (2.0 * eps * eps * d * s);
    }
    CHECK(gaussian_loglik(path, f) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(evaluate_contrast(ContrastKind::gaussian_loglik, ou, LinkSpec::free(), path, vec({alpha}), vec({beta})) ==
          doctest::Approx(-expected).epsilon(1e-10));

    // Doubling every residual: the flow is linear, so scale deviations from x_alpha.
    std::vector<Vec> doubled;
    for (int k = 0; k <= 10; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      doubled.push_back(f.x[ks] + 2.0 * (path.obs[ks] - f.x[ks]));
    }
    const ObservedPath big(grid, doubled, eps);
    CHECK(gaussian_loglik(path, f) - gaussian_loglik(big, f) == doctest::Approx(3.0 * quad).epsilon(1e-9));
  }
}

TEST_CASE("noise-free paths are minimized at the truth") {
  SUBCASE("cls and weighted on SIR") {
    const ModelSpec sir = builtin_sir();
    const Vec truth = vec({0.4, 1.0 / 3.0});
    const ObservedPath path = testing::flow_path(sir, truth, vec({0.99, 0.01}), SamplingGrid(50.0, 25), 0.01);
    const LinkSpec link = builtin_link("sir");
    for (ContrastKind kind : {ContrastKind::cls, ContrastKind::weighted_link, ContrastKind::small_delta}) {
      CAPTURE(to_string(kind));
      const double at_truth = evaluate_contrast(kind, sir, link, path, truth, truth, 16);
      for (double dl : {-0.02, 0.0, 0.02}) {
        for (double dg : {-0.02, 0.0, 0.02}) {
          if (dl == 0.0 && dg == 0.0) continue;
          const Vec a = truth + vec({dl, dg});
          CHECK(evaluate_contrast(kind, sir, link, path, a, truth, 16) > at_truth);
        }
      }
    }
  }
  SUBCASE("multiplicative on CIR") {
    const ModelSpec cir = builtin_cir();
    const ObservedPath path = testing::flow_path(cir, vec({1.0}), vec({1.0}), SamplingGrid(1.0, 10));
    const LinkSpec link = builtin_link("cir");
    const double at_truth =
        evaluate_contrast(ContrastKind::weighted_multiplicative, cir, link, path, vec({1.0}), vec({1.0}));
    for (double a : {0.8, 0.95, 1.05, 1.2}) {
      CHECK(evaluate_contrast(ContrastKind::weighted_multiplicative, cir, link, path, vec({a}), vec({1.0})) > at_truth);
    }
  }
}

TEST_CASE("contrast kind names") {
  for (ContrastKind k : {ContrastKind::cls, ContrastKind::weighted_link, ContrastKind::weighted_multiplicative,
                         ContrastKind::small_delta, ContrastKind::gaussian_loglik}) {
    CHECK(parse_contrast_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS((void)parse_contrast_kind("mystery"), ConfigError);
}
