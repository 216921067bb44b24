#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "smallnoise/flow.hpp"
#include "smallnoise/model.hpp"

namespace smallnoise {

/// Discrete observations X_{t_0..t_n} on a regular grid, with known noise scale.
struct ObservedPath {
  SamplingGrid grid;
  std::vector<Vec> obs;  ///< n+1 states, obs[0] is the initial state
  double epsilon = 1.0;

  ObservedPath(SamplingGrid grid, std::vector<Vec> obs, double epsilon);

  [[nodiscard]] int n() const { return grid.n(); }
  [[nodiscard]] int dim() const { return static_cast<int>(obs.front().size()); }
  [[nodiscard]] const Vec& x0() const { return obs.front(); }
  /// Keeps every `stride`-th observation; the horizon is unchanged.
  [[nodiscard]] ObservedPath subsample(int stride) const;
};

enum class ContrastKind { cls, weighted_link, weighted_multiplicative, small_delta, gaussian_loglik };

[[nodiscard]] std::string_view to_string(ContrastKind kind);
[[nodiscard]] ContrastKind parse_contrast_kind(std::string_view name);

/// N_k = X_k - x(t_k) - Phi_k (X_{k-1} - x(t_{k-1})), k = 1..n.
[[nodiscard]] std::vector<Vec> residuals(const ObservedPath& path, const FlowSolution& flow);

/// (1/Delta) sum |N_k|^2. Does not depend on beta.
[[nodiscard]] double contrast_cls(const ObservedPath& path, const FlowSolution& flow);

/// (1/Delta) sum N_k^T S_k^{-1} N_k. The flow must carry the S_k matching the
/// link: S_k^{alpha, f(alpha)} for beta_equals_f_alpha, S_k^{alpha, 0} built from
/// Sigma0 for multiplicative.
[[nodiscard]] double contrast_weighted(const ObservedPath& path, const FlowSolution& flow, const LinkSpec& link);

/// sum log det Sigma(beta, X_{k-1}) + (1/(eps^2 Delta)) sum N_k^T Sigma(beta, X_{k-1})^{-1} N_k,
/// with Sigma evaluated at guarded observed states.
[[nodiscard]] double contrast_small_delta(const ObservedPath& path, const FlowSolution& flow, const Vec& beta,
                                          const ModelSpec& model);

/// Loglikelihood of the Gaussian approximating process at the observed path.
[[nodiscard]] double gaussian_loglik(const ObservedPath& path, const FlowSolution& flow);

/// Flow options a contrast kind needs (covariance, override by Sigma0, ...).
[[nodiscard]] FlowOptions flow_options_for(ContrastKind kind, const LinkSpec& link, int substeps);

/// Solves the flow at (alpha, beta) and evaluates the contrast. For gaussian_loglik the
/// value returned is the negative loglikelihood so that every kind is minimized.
/// `beta` is ignored by cls and the weighted kinds (the link supplies it).
[[nodiscard]] double evaluate_contrast(ContrastKind kind, const ModelSpec& model, const LinkSpec& link,
                                       const ObservedPath& path, const Vec& alpha, const Vec& beta,
                                       int substeps = 64);

}  // namespace smallnoise
