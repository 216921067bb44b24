#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "smallnoise/contrasts.hpp"
#include "smallnoise/flow.hpp"
#include "smallnoise/model.hpp"

namespace testing {

using smallnoise::Mat;
using smallnoise::Vec;

inline Vec vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline double rel_err(double computed, double expected) {
  return std::abs(computed - expected) / std::max(std::abs(expected), 1e-300);
}

/// Observations equal to the deterministic flow (noise-free path).
inline smallnoise::ObservedPath flow_path(const smallnoise::ModelSpec& model, const Vec& alpha, const Vec& x0,
                                          const smallnoise::SamplingGrid& grid, double epsilon = 0.01) {
  smallnoise::FlowOptions opts;
  opts.covariance = false;
  opts.sensitivities = false;
  opts.substeps = 64;
  const smallnoise::FlowSolution flow = smallnoise::solve_flow(model, alpha, Vec(), x0, grid, opts);
  return smallnoise::ObservedPath(grid, flow.x, epsilon);
}

/// b = 0 model on R^p with Sigma = identity.
inline smallnoise::ModelSpec drift_free_model(int p) {
  smallnoise::ModelSpec m;
  m.id = "drift_free";
  m.p = p;
  m.a = 1;
  m.b = 1;
  m.drift = [p](const Vec&, const Vec&) -> Vec { return Vec::Zero(p); };
  m.sigma = [p](const Vec& beta, const Vec&) -> Mat { return beta[0] * Mat::Identity(p, p); };
  return smallnoise::complete_model(std::move(m));
}

/// Independent two-factor skeleton: R(t) = m + (r0 - m) e^{-mu2 t},
/// y(t) = y0 + (mu1 + m) t + (r0 - m)(1 - e^{-mu2 t}) / mu2.
inline Vec two_factor_state(const Vec& alpha, const Vec& x0, double t) {
  const double mu1 = alpha[0], mu2 = alpha[1], m = alpha[2];
  const double e = std::exp(-mu2 * t);
  return vec({x0[0] + (mu1 + m) * t + (x0[1] - m) * (1.0 - e) / mu2, m + (x0[1] - m) * e});
}

}  // namespace testing
