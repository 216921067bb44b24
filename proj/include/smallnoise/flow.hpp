#pragma once

#include <functional>
#include <vector>

#include "smallnoise/model.hpp"
#include "smallnoise/types.hpp"

namespace smallnoise {

/// Regular observation times t_k = k * T / n, k = 0..n.
class SamplingGrid {
 public:
  SamplingGrid(double horizon, int n);

  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] double delta() const { return horizon_ / n_; }
  [[nodiscard]] double time(int k) const { return k == n_ ? horizon_ : k * delta(); }

 private:
  double horizon_;
  int n_;
};

struct FlowOptions {
  /// Fixed RK4 steps per sampling interval.
  int substeps = 64;
  /// Integrate the Lyapunov equation for S_k.
  bool covariance = true;
  /// Integrate the forward variational equation for dx/dalpha.
  bool sensitivities = true;
  /// Central differences of the resolvent in alpha (2a extra flow solves).
  bool resolvent_sensitivities = false;
  /// When set, replaces Sigma(beta, x) in the Lyapunov equation (e.g. Sigma0 of a
  /// multiplicative link).
  std::function<Mat(const Vec& x)> covariance_override;
};

/// Deterministic quantities along x_alpha on a sampling grid.
/// Index k of phi / s_mats / dphi_dalpha refers to the interval [t_{k-1}, t_k]
/// and is stored at position k-1.
struct FlowSolution {
  std::vector<Vec> x;                         ///< n+1 states x_alpha(t_k)
  std::vector<Mat> phi;                       ///< n resolvents Phi(t_k, t_{k-1})
  std::vector<Mat> s_mats;                    ///< n matrices S_k (if covariance)
  std::vector<Mat> dx_dalpha;                 ///< n+1 p x a sensitivities (if sensitivities)
  std::vector<std::vector<Mat>> dphi_dalpha;  ///< n lists of a matrices (if resolvent_sensitivities)

  [[nodiscard]] int n() const { return static_cast<int>(phi.size()); }
};

/// Result of integrating the joint system over a single interval.
struct IntervalFlow {
  Vec x;        ///< state at the end of the interval
  Mat phi;      ///< resolvent over the interval
  Mat v;        ///< integral of Phi Sigma Phi^T (not divided by the duration)
  Mat dx_dalpha;
};

/// Integrates x, Phi (from identity), V (from zero) and dx/dalpha (from `dx_start`)
/// over [0, duration] with `steps` RK4 steps. `dx_start` may be empty to skip
/// sensitivities; `beta` may be empty to skip the covariance.
[[nodiscard]] IntervalFlow propagate_interval(const ModelSpec& model, const Vec& alpha, const Vec& beta,
                                              const Vec& x_start, const Mat& dx_start, double duration,
                                              int steps, const FlowOptions& options = {});

/// Solves the deterministic skeleton on every sampling interval.
/// Throws NonFiniteState if the flow diverges and SingularCovariance if an S_k
/// stays indefinite after one ridge repair.
[[nodiscard]] FlowSolution solve_flow(const ModelSpec& model, const Vec& alpha, const Vec& beta, const Vec& x0,
                                      const SamplingGrid& grid, const FlowOptions& options = {});

/// D_k = (1/Delta) [ -dx(t_k)/dalpha + Phi(t_k, t_{k-1}) dx(t_{k-1})/dalpha ], one p x a matrix per interval.
[[nodiscard]] std::vector<Mat> d_matrices(const FlowSolution& flow, const SamplingGrid& grid);

/// States of x_alpha on a uniform mesh of `steps` intervals over [0, horizon].
[[nodiscard]] std::vector<Vec> flow_on_mesh(const ModelSpec& model, const Vec& alpha, const Vec& x0, double horizon,
                                            int steps);

/// Cholesky repair rule shared by every weighted quadratic form: if the factorization
/// fails, add 1e-10 * trace / p to the diagonal once. Returns false on a second failure.
bool repair_positive_definite(Mat& m);

}  // namespace smallnoise
