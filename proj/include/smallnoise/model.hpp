#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "smallnoise/types.hpp"

namespace smallnoise {

/// State floor used by the built-in guards (CIR x, two-factor R, SIR s and i).
inline constexpr double kStateFloor = 1e-8;

/// Two-factor correlation is clamped into [-kRhoClamp, kRhoClamp].
inline constexpr double kRhoClamp = 0.99;

/// Axis-aligned box for a parameter block.
class ParamBox {
 public:
  ParamBox() = default;
  ParamBox(Vec lower, Vec upper);

  [[nodiscard]] int size() const { return static_cast<int>(lower_.size()); }
  [[nodiscard]] const Vec& lower() const { return lower_; }
  [[nodiscard]] const Vec& upper() const { return upper_; }

  [[nodiscard]] Vec project(const Vec& point) const;
  [[nodiscard]] bool contains(const Vec& point) const;

 private:
  Vec lower_;
  Vec upper_;
};

using DriftFn = std::function<Vec(const Vec& alpha, const Vec& x)>;
using MatrixFn = std::function<Mat(const Vec& param, const Vec& x)>;
using MatrixListFn = std::function<std::vector<Mat>(const Vec& beta, const Vec& x)>;
using GuardFn = std::function<Vec(const Vec& x)>;

/// A p-dimensional diffusion dX = b(alpha, X) dt + eps * sigma(beta, X) dB.
///
/// `drift` and `sigma` are mandatory. Any other callable left empty is filled
/// by complete_model(): derivatives by central finite differences with step
/// 1e-6 * (1 + |arg|), big_sigma by sigma * sigma^T, the guard by identity.
/// A completed ModelSpec is immutable and may be shared between threads.
struct ModelSpec {
  std::string id;
  int p = 0;  ///< state dimension
  int a = 0;  ///< drift parameter dimension
  int b = 0;  ///< diffusion parameter dimension

  DriftFn drift;
  MatrixFn drift_jac_x;       ///< p x p, d b / d x
  MatrixFn drift_grad_alpha;  ///< p x a, column i is d b / d alpha_i
  MatrixFn sigma;             ///< p x p
  MatrixFn big_sigma;         ///< p x p, sigma * sigma^T
  MatrixListFn big_sigma_grad_beta;  ///< b matrices d Sigma / d beta_i
  GuardFn domain_guard;       ///< projects a state into the admissible set
};

/// Validates dimensions and fills every missing callable.
/// Throws ConfigError when drift/sigma are missing or a dimension is out of range.
[[nodiscard]] ModelSpec complete_model(ModelSpec spec);

enum class LinkKind { free_beta, beta_equals_f_alpha, multiplicative };

/// Prior knowledge tying the diffusion parameter to the drift parameter.
struct LinkSpec {
  LinkKind kind = LinkKind::free_beta;
  std::function<Vec(const Vec& alpha)> f;            ///< beta = f(alpha)
  std::function<double(const Vec& beta)> f_scalar;   ///< Sigma = f_scalar(beta) * Sigma0(x)
  std::function<Mat(const Vec& x)> sigma0;

  static LinkSpec free();
  static LinkSpec beta_equals(std::function<Vec(const Vec&)> f);
  /// beta held at a known value regardless of alpha.
  static LinkSpec fixed_beta(Vec beta);
  static LinkSpec multiplicative(std::function<double(const Vec&)> f_scalar,
                                 std::function<Mat(const Vec&)> sigma0);
};

[[nodiscard]] std::string_view to_string(LinkKind kind);

/// dX = alpha X dt + eps beta dB.
[[nodiscard]] ModelSpec builtin_ou();
/// dX = alpha X dt + eps beta sqrt(X) dB, guard floors x at kStateFloor.
[[nodiscard]] ModelSpec builtin_cir();
/// State (y, R), alpha = (mu1, mu2, m), beta = (kappa1^2, kappa2^2, rho).
[[nodiscard]] ModelSpec builtin_two_factor();
/// Normalized SIR diffusion, state (s, i), alpha = beta = (lambda, gamma).
[[nodiscard]] ModelSpec builtin_sir();

/// "ou", "cir", "two_factor", "sir". Throws ConfigError on unknown ids.
[[nodiscard]] ModelSpec builtin_model(std::string_view id);

/// The natural link of each built-in: multiplicative for ou/cir,
/// beta = alpha for sir, free for two_factor.
[[nodiscard]] LinkSpec builtin_link(std::string_view id);

[[nodiscard]] std::vector<std::string> builtin_model_ids();

}  // namespace smallnoise
