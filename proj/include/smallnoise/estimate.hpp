#pragma once

#include <optional>
#include <vector>

#include "smallnoise/contrasts.hpp"
#include "smallnoise/flow.hpp"
#include "smallnoise/model.hpp"
#include "smallnoise/optimizer.hpp"

namespace smallnoise {

/// Normal quantile used for every reported interval.
inline constexpr double kZ95 = 1.96;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool available = false;

  [[nodiscard]] double half_width() const { return 0.5 * (upper - lower); }
  [[nodiscard]] bool contains(double v) const { return available && lower <= v && v <= upper; }
};

struct OptimizerReport {
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
};

struct EstimationResult {
  ContrastKind kind = ContrastKind::cls;
  Vec alpha_hat;
  /// Set for small_delta and gaussian_loglik (for small_delta under a beta = f(alpha)
  /// link it is f(alpha_hat) and carries no interval).
  std::optional<Vec> beta_hat;
  /// Diffusion parameter at which the alpha information was evaluated.
  Vec beta_plugin;
  double contrast_min = 0.0;

  /// J_Delta for cls, I_Delta for the weighted kinds and gaussian_loglik, I_b for small_delta.
  DMat info_alpha;
  /// I_sigma when beta is estimated, otherwise empty.
  DMat info_beta;
  /// eps^2 * info_alpha^{-1}; empty when singular.
  DMat cov_alpha;
  /// info_beta^{-1} / n; empty when singular or absent.
  DMat cov_beta;

  /// alpha intervals first, then beta intervals when beta is estimated.
  std::vector<Interval> ci_95;
  OptimizerReport optimizer;

  /// Block-diagonal (info_alpha, info_beta).
  [[nodiscard]] DMat info_matrix() const;
  /// Block-diagonal (cov_alpha, cov_beta); empty if either block is unavailable.
  [[nodiscard]] DMat cov_matrix() const;
};

struct EstimateOptions {
  /// RK4 steps per sampling interval for every flow solved during the search.
  int substeps = 64;
  /// Uniform Simpson mesh used by info_I_b / info_I_sigma (rounded up to even).
  int info_mesh_steps = 2000;
  MultiStartOptions search;
  /// gaussian_loglik only: hold alpha at this value and estimate beta alone.
  std::optional<Vec> fixed_alpha;
  /// Diffusion parameter for the information of kinds that do not estimate beta.
  /// When absent and the link does not determine beta, beta is profiled from the
  /// small-Delta contrast at alpha_hat.
  std::optional<Vec> beta_plugin;
  bool compute_information = true;
};

/// Minimum contrast estimation over the parameter boxes.
/// cls / weighted kinds search alpha only. small_delta searches (alpha, beta) jointly,
/// or alpha alone with beta = f(alpha) under a beta_equals_f_alpha link.
/// Throws NoConvergence when every start exhausts its budget and propagates
/// SingularCovariance when no evaluated point had a finite contrast.
[[nodiscard]] EstimationResult minimize(ContrastKind kind, const ModelSpec& model, const LinkSpec& link,
                                        const ObservedPath& path, const ParamBox& alpha_box,
                                        const ParamBox& beta_box, const EstimateOptions& options = {});

/// argmin over beta of the small-Delta contrast with alpha held fixed.
[[nodiscard]] Vec profile_beta(const ModelSpec& model, const ObservedPath& path, const Vec& alpha,
                               const ParamBox& beta_box, const EstimateOptions& options = {});

/// Fisher information of the continuously observed diffusion:
/// int_0^T (db/dalpha)^T Sigma^{-1} (db/dalpha) ds along x_alpha (composite Simpson).
[[nodiscard]] DMat info_I_b(const ModelSpec& model, const Vec& alpha, const Vec& beta, const Vec& x0,
                            double horizon, int mesh_steps = 2000);

/// Delta * sum_k D_k^T S_k^{-1} D_k.
[[nodiscard]] DMat info_I_delta(const FlowSolution& flow, const SamplingGrid& grid);

/// M (Delta sum_k D_k^T S_k D_k)^{-1} M^T with M = Delta sum_k D_k^T D_k.
/// Throws SingularCovariance when the middle matrix is singular.
[[nodiscard]] DMat info_J_delta(const FlowSolution& flow, const SamplingGrid& grid);

/// (1/(2T)) int_0^T Tr(dSigma_i Sigma^{-1} dSigma_j Sigma^{-1}) ds along x_alpha.
[[nodiscard]] DMat info_I_sigma(const ModelSpec& model, const Vec& alpha, const Vec& beta, const Vec& x0,
                                double horizon, int mesh_steps = 2000);

/// Fills cov_alpha / cov_beta / ci_95 of `result` from its information blocks:
/// alpha_i +- 1.96 eps sqrt((I^{-1})_ii), beta_i +- 1.96 sqrt((I_sigma^{-1})_ii / n).
/// Singular blocks leave the corresponding intervals unavailable.
void confidence_intervals(EstimationResult& result, double epsilon, const SamplingGrid& grid);

}  // namespace smallnoise
