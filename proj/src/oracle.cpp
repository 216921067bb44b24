#include "smallnoise/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "smallnoise/estimate.hpp"
#include "smallnoise/flow.hpp"
#include "smallnoise/model.hpp"

namespace smallnoise {

namespace {

constexpr double kTol = 1e-6;
constexpr int kSubsteps = 64;
constexpr int kMesh = 2000;

OracleCheck relative(std::string name, double computed, double expected) {
  OracleCheck c{std::move(name), computed, expected, kTol, 0.0, false};
  c.error = std::abs(computed - expected) / std::max(std::abs(expected), 1e-300);
  c.passed = c.error <= kTol;
  return c;
}

// Largest relative error over every interval of a per-k comparison.
template <typename Computed, typename Expected>
OracleCheck worst_over_k(std::string name, int n, Computed computed, Expected expected) {
  OracleCheck worst = relative(name, computed(1), expected(1));
  for (int k = 2; k <= n; ++k) {
    OracleCheck c = relative(name, computed(k), expected(k));
    if (c.error > worst.error) worst = c;
  }
  return worst;
}

Vec scalar(double v) { return Vec::Constant(1, v); }

}  // namespace

std::vector<OracleCheck> cir_oracle_suite() {
  const double alpha = 1.0, beta = 1.0, x0 = 1.0, horizon = 1.0;
  const ModelSpec model = builtin_cir();
  std::vector<OracleCheck> out;

  const double ib_expected = x0 * (std::exp(alpha * horizon) - 1.0) / (beta * beta * alpha);
  out.push_back(relative("cir I_b", info_I_b(model, scalar(alpha), scalar(beta), scalar(x0), horizon, kMesh)(0, 0),
                         ib_expected));
  out.push_back(relative("cir I_sigma",
                         info_I_sigma(model, scalar(alpha), scalar(beta), scalar(x0), horizon, kMesh)(0, 0),
                         2.0 / (beta * beta)));

  for (int n : {100, 50, 20, 10, 5, 4, 2}) {
    const SamplingGrid grid(horizon, n);
    const double delta = grid.delta();
    const double a = std::exp(alpha * delta);
    FlowOptions opts;
    opts.substeps = kSubsteps;
    const FlowSolution flow = solve_flow(model, scalar(alpha), scalar(beta), scalar(x0), grid, opts);
    const std::vector<Mat> d = d_matrices(flow, grid);
    const std::string tag = fmt::format("Delta={}", delta);

    out.push_back(worst_over_k(
        "cir Phi_k " + tag, n, [&](int k) { return flow.phi[static_cast<std::size_t>(k - 1)](0, 0); },
        [&](int) { return a; }));
    out.push_back(worst_over_k(
        "cir S_k " + tag, n, [&](int k) { return flow.s_mats[static_cast<std::size_t>(k - 1)](0, 0); },
        [&](int k) { return x0 * beta * beta * (a - 1.0) / (alpha * delta) * std::exp(alpha * k * delta); }));
    out.push_back(worst_over_k(
        "cir D_k " + tag, n, [&](int k) { return d[static_cast<std::size_t>(k - 1)](0, 0); },
        [&](int k) { return -x0 * std::exp(alpha * k * delta); }));

    const double i_delta = info_I_delta(flow, grid)(0, 0);
    const double j_delta = info_J_delta(flow, grid)(0, 0);
    const double la = std::log(a);
    out.push_back(relative("cir I_Delta " + tag, i_delta, ib_expected * (la / (a - 1.0)) * (la / (a - 1.0)) * a));
    const double e = std::exp(alpha * horizon);
    const double jb = 3.0 * x0 / (4.0 * alpha * beta * beta) * (e * e - 1.0) * (e * e - 1.0) / (e * e * e - 1.0);
    const double j_expected =
        jb * (4.0 * a / 3.0) * ((a * a * a - 1.0) / (a - 1.0)) * (la / (a * a - 1.0)) * (la / (a * a - 1.0));
    out.push_back(relative("cir J_Delta " + tag, j_delta, j_expected));

    OracleCheck ineq{"cir J_Delta <= I_Delta " + tag, j_delta, i_delta, 0.0, i_delta - j_delta, false};
    ineq.passed = j_delta <= i_delta * (1.0 + 1e-12);
    out.push_back(ineq);
  }
  return out;
}

std::vector<OracleCheck> ou_oracle_suite() {
  const double alpha = -0.5, beta = 0.8, x0 = 2.0, horizon = 1.0;
  const ModelSpec model = builtin_ou();
  std::vector<OracleCheck> out;
  out.push_back(relative("ou I_b", info_I_b(model, scalar(alpha), scalar(beta), scalar(x0), horizon, kMesh)(0, 0),
                         x0 * x0 * (std::exp(2.0 * alpha * horizon) - 1.0) / (2.0 * alpha * beta * beta)));
  out.push_back(relative("ou I_sigma",
                         info_I_sigma(model, scalar(alpha), scalar(beta), scalar(x0), horizon, kMesh)(0, 0),
                         2.0 / (beta * beta)));
  for (int n : {50, 10, 2}) {
    const SamplingGrid grid(horizon, n);
    const double delta = grid.delta();
    FlowOptions opts;
    opts.substeps = kSubsteps;
    const FlowSolution flow = solve_flow(model, scalar(alpha), scalar(beta), scalar(x0), grid, opts);
    const std::string tag = fmt::format("Delta={}", delta);
    out.push_back(worst_over_k(
        "ou Phi_k " + tag, n, [&](int k) { return flow.phi[static_cast<std::size_t>(k - 1)](0, 0); },
        [&](int) { return std::exp(alpha * delta); }));
    out.push_back(worst_over_k(
        "ou S_k " + tag, n, [&](int k) { return flow.s_mats[static_cast<std::size_t>(k - 1)](0, 0); },
        [&](int) { return beta * beta * (std::exp(2.0 * alpha * delta) - 1.0) / (2.0 * alpha * delta); }));
  }
  return out;
}

}  // namespace smallnoise
