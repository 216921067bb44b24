#include <doctest.h>

#include <random>

#include "smallnoise/errors.hpp"
#include "smallnoise/model.hpp"
#include "support.hpp"

using namespace smallnoise;
using testing::vec;

TEST_CASE("ou built-in") {
  const ModelSpec m = builtin_ou();
  CHECK(m.p == 1);
  CHECK(m.drift(vec({0.5}), vec({2.0}))[0] == doctest::Approx(1.0));
  CHECK(m.big_sigma(vec({2.0}), vec({7.0}))(0, 0) == doctest::Approx(4.0));
  CHECK(m.drift_jac_x(vec({0.5}), vec({2.0}))(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("cir built-in") {
  const ModelSpec m = builtin_cir();
  CHECK(m.big_sigma(vec({1.0}), vec({4.0}))(0, 0) == doctest::Approx(4.0));
  CHECK(m.domain_guard(vec({-0.003}))[0] == kStateFloor);
  CHECK(kStateFloor == 1e-8);
  CHECK(m.drift(vec({1.0}), vec({3.0}))[0] == doctest::Approx(3.0));
}

TEST_CASE("two-factor built-in") {
  const ModelSpec m = builtin_two_factor();
  CHECK(m.p == 2);
  CHECK(m.a == 3);
  CHECK(m.b == 3);
  const Mat s = m.big_sigma(vec({1.0, 1.0, 0.3}), vec({0.0, 1.5}));
  CHECK(s(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s(0, 1) == doctest::Approx(0.3 * std::sqrt(1.5)).epsilon(1e-14));
  CHECK(s(1, 0) == doctest::Approx(0.3 * std::sqrt(1.5)).epsilon(1e-14));
  CHECK(s(1, 1) == doctest::Approx(1.5).epsilon(1e-14));
  const Vec b = m.drift(vec({1.0, 1.0, 1.0}), vec({0.0, 1.5}));
  CHECK(b[0] == doctest::Approx(2.5));
  CHECK(b[1] == doctest::Approx(-0.5));
  const Mat d = m.big_sigma(vec({2.0, 3.0, 0.0}), vec({0.0, 1.5}));
  CHECK(d(0, 1) == 0.0);
  CHECK(d(1, 0) == 0.0);

  SUBCASE("rho is clamped into [-0.99, 0.99]") {
    const Mat hi = m.big_sigma(vec({1.0, 1.0, 1.5}), vec({0.0, 1.0}));
    CHECK(hi(0, 1) == doctest::Approx(kRhoClamp));
    Eigen::LLT<Eigen::MatrixXd> llt(hi);
    CHECK(llt.info() == Eigen::Success);
  }
  SUBCASE("guard floors R") { CHECK(m.domain_guard(vec({3.0, -1.0}))[1] == kStateFloor); }
}

TEST_CASE("sir built-in") {
  const ModelSpec m = builtin_sir();
  const Vec alpha = vec({0.4, 1.0 / 3.0});
  const Vec b = m.drift(alpha, vec({0.99, 0.01}));
  CHECK(b[0] == doctest::Approx(-0.00396).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(0.00396 - 0.01 / 3.0).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(0.0006267).epsilon(1e-4));
  const Mat s = m.big_sigma(alpha, vec({0.7, 0.2}));
  CHECK(s(0, 0) + s(0, 1) == doctest::Approx(0.0));
  const Mat g = m.big_sigma(alpha, m.domain_guard(vec({0.5, 0.0})));
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  CHECK(llt.info() == Eigen::Success);
  const LinkSpec link = builtin_link("sir");
  CHECK(link.kind == LinkKind::beta_equals_f_alpha);
  CHECK(link.f(alpha) == alpha);
}

namespace {

// Random guarded state and parameters inside typical ranges for each model.
struct Sample {
  Vec alpha, beta, x;
};

Sample draw(const ModelSpec& m, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.05, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Sample s{Vec(m.a), Vec(m.b), Vec(m.p)};
  for (int i = 0; i < m.a; ++i) s.alpha[i] = u(gen);
  for (int i = 0; i < m.b; ++i) s.beta[i] = u(gen);
  if (m.id == "two_factor") s.beta[2] = 2.0 * unit(gen) - 1.0;
  for (int i = 0; i < m.p; ++i) s.x[i] = m.id == "sir" ? unit(gen) : u(gen);
  s.x = m.domain_guard(s.x);
  return s;
}

double fd_step(double v) { return 1e-6 * (1.0 + std::abs(v)); }

}  // namespace

TEST_CASE("model properties over random states") {
  std::mt19937_64 gen(42);
  for (const std::string& id : builtin_model_ids()) {
    CAPTURE(id);
    const ModelSpec m = builtin_model(id);
    for (int trial = 0; trial < 1000; ++trial) {
      const Sample s = draw(m, gen);
      const Mat sig = m.sigma(s.beta, s.x);
      const Mat big = m.big_sigma(s.beta, s.x);
      CHECK((sig * sig.transpose() - big).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + big.cwiseAbs().maxCoeff()));
      Eigen::LLT<Eigen::MatrixXd> llt(big);
      CHECK(llt.info() == Eigen::Success);
      CHECK(m.domain_guard(m.domain_guard(s.x)) == m.domain_guard(s.x));
    }
  }
}

TEST_CASE("analytic derivatives agree with central differences") {
  std::mt19937_64 gen(7);
  for (const std::string& id : builtin_model_ids()) {
    CAPTURE(id);
    const ModelSpec m = builtin_model(id);
    for (int trial = 0; trial < 50; ++trial) {
      Sample s = draw(m, gen);
      // Keep clear of guard kinks so the central difference is smooth.
      if (id == "sir") s.x = s.x.cwiseMax(0.05).cwiseMin(0.95);
      if (id == "two_factor") s.beta[2] = std::clamp(s.beta[2], -0.9, 0.9);
      const Mat jac = m.drift_jac_x(s.alpha, s.x);
      for (int j = 0; j < m.p; ++j) {
        Vec xp = s.x, xm = s.x;
        const double h = fd_step(s.x[j]);
        xp[j] += h;
        xm[j] -= h;
        const Vec col = (m.drift(s.alpha, xp) - m.drift(s.alpha, xm)) / (2.0 * h);
        CHECK((jac.col(j) - col).norm() <= 1e-5 * std::max(1.0, col.norm()));
      }
      const Mat grad = m.drift_grad_alpha(s.alpha, s.x);
      for (int j = 0; j < m.a; ++j) {
        Vec ap = s.alpha, am = s.alpha;
        const double h = fd_step(s.alpha[j]);
        ap[j] += h;
        am[j] -= h;
        const Vec col = (m.drift(ap, s.x) - m.drift(am, s.x)) / (2.0 * h);
        CHECK((grad.col(j) - col).norm() <= 1e-5 * std::max(1.0, col.norm()));
      }
      const std::vector<Mat> dsig = m.big_sigma_grad_beta(s.beta, s.x);
      REQUIRE(static_cast<int>(dsig.size()) == m.b);
      for (int j = 0; j < m.b; ++j) {
        Vec bp = s.beta, bm = s.beta;
        const double h = fd_step(s.beta[j]);
        bp[j] += h;
        bm[j] -= h;
        const Mat fd = (m.big_sigma(bp, s.x) - m.big_sigma(bm, s.x)) / (2.0 * h);
        CHECK((dsig[static_cast<std::size_t>(j)] - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
      }
    }
  }
}

TEST_CASE("complete_model fills missing callables") {
  ModelSpec m;
  m.id = "logistic";
  m.p = 1;
  m.a = 2;
  m.b = 1;
  m.drift = [](const Vec& a, const Vec& x) -> Vec { return a[0] * x.array() * (1.0 - x.array() / a[1]); };
  m.sigma = [](const Vec& b, const Vec& x) -> Mat { return Mat::Constant(1, 1, b[0] * x[0]); };
  const ModelSpec c = complete_model(m);
  const Vec a = vec({0.8, 2.0});
  const Vec x = vec({0.5});
  CHECK(c.drift_jac_x(a, x)(0, 0) == doctest::Approx(0.8 * (1.0 - 2.0 * 0.5 / 2.0)).epsilon(1e-7));
  CHECK(c.drift_grad_alpha(a, x)(0, 0) == doctest::Approx(0.5 * (1.0 - 0.25)).epsilon(1e-7));
  CHECK(c.drift_grad_alpha(a, x)(0, 1) == doctest::Approx(0.8 * 0.25 / 4.0).epsilon(1e-7));
  CHECK(c.big_sigma(vec({3.0}), x)(0, 0) == doctest::Approx(2.25));
  CHECK(c.big_sigma_grad_beta(vec({3.0}), x)[0](0, 0) == doctest::Approx(2.0 * 3.0 * 0.25).epsilon(1e-7));
  CHECK(c.domain_guard(vec({-4.0}))[0] == -4.0);

  ModelSpec bad = m;
  bad.sigma = nullptr;
  CHECK_THROWS_AS((void)complete_model(bad), ConfigError);
  bad = m;
  bad.p = 9;
  CHECK_THROWS_AS((void)complete_model(bad), ConfigError);
}

TEST_CASE("ParamBox") {
  const ParamBox box(vec({0.0, -1.0}), vec({1.0, 1.0}));
  CHECK(box.contains(vec({0.5, 0.0})));
  CHECK_FALSE(box.contains(vec({1.5, 0.0})));
  CHECK(box.project(vec({1.5, -3.0})) == vec({1.0, -1.0}));
  CHECK_THROWS_AS(ParamBox(vec({1.0}), vec({1.0})), ConfigError);
  CHECK_THROWS_AS(ParamBox(vec({0.0}), vec({1.0, 2.0})), ConfigError);
}

TEST_CASE("model registry") {
  for (const std::string& id : builtin_model_ids()) CHECK(builtin_model(id).id == id);
  CHECK_THROWS_AS((void)builtin_model("heston"), ConfigError);
  CHECK(builtin_link("ou").kind == LinkKind::multiplicative);
  CHECK(builtin_link("cir").kind == LinkKind::multiplicative);
  CHECK(builtin_link("two_factor").kind == LinkKind::free_beta);
}
