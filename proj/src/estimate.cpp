#include "smallnoise/estimate.hpp"

#include <cmath>
#include <exception>
#include <limits>

#include <fmt/format.h>

#include "smallnoise/errors.hpp"

namespace smallnoise {

namespace {

DMat block_diag(const DMat& a, const DMat& b) {
  DMat out = DMat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

DVec to_dvec(const Vec& v) { return DVec(v); }

Vec to_vec(const DVec& v) { return Vec(v); }

DVec concat(const Vec& a, const Vec& b) {
  DVec out(a.size() + b.size());
  out << a, b;
  return out;
}

// Turns model failures at a trial point into +inf and remembers the first one.
class GuardedObjective {
 public:
  explicit GuardedObjective(std::function<double(const DVec&)> f) : f_(std::move(f)) {}

  double operator()(const DVec& x) {
    try {
      return f_(x);
    } catch (const SingularCovariance&) {
      if (!first_error_) first_error_ = std::current_exception();
    } catch (const NonFiniteState&) {
      if (!first_error_) first_error_ = std::current_exception();
    }
    return std::numeric_limits<double>::infinity();
  }

  void rethrow_if_nothing_finite(double best) const {
    if (std::isfinite(best)) return;
    if (first_error_) std::rethrow_exception(first_error_);
    throw SingularCovariance("contrast is not finite anywhere in the search box");
  }

 private:
  std::function<double(const DVec&)> f_;
  std::exception_ptr first_error_;
};

MultiStartResult search(GuardedObjective& objective, const DVec& lower, const DVec& upper,
                        const MultiStartOptions& opts) {
  const Objective f = [&objective](const DVec& x) { return objective(x); };
  MultiStartResult best = multistart_minimize(f, lower, upper, opts);
  objective.rethrow_if_nothing_finite(best.value);
  return best;
}

int even_steps(int steps) { return std::max(2, steps + (steps % 2)); }

double simpson_weight(int i, int steps) {
  if (i == 0 || i == steps) return 1.0;
  return i % 2 == 1 ? 4.0 : 2.0;
}

Eigen::LLT<Mat> factor_sigma(Mat sigma) {
  if (!repair_positive_definite(sigma)) {
    throw SingularCovariance("Sigma is not positive definite along the flow");
  }
  return Eigen::LLT<Mat>(sigma);
}

FlowSolution information_flow(const ModelSpec& model, const Vec& alpha, const Vec& beta, const ObservedPath& path,
                              int substeps) {
  FlowOptions opts;
  opts.substeps = substeps;
  opts.covariance = true;
  opts.sensitivities = true;
  return solve_flow(model, alpha, beta, path.x0(), path.grid, opts);
}

}  // namespace

DMat EstimationResult::info_matrix() const {
  return info_beta.size() == 0 ? info_alpha : block_diag(info_alpha, info_beta);
}

DMat EstimationResult::cov_matrix() const {
  if (cov_alpha.size() == 0) return {};
  if (info_beta.size() == 0) return cov_alpha;
  if (cov_beta.size() == 0) return {};
  return block_diag(cov_alpha, cov_beta);
}

DMat info_I_b(const ModelSpec& model, const Vec& alpha, const Vec& beta, const Vec& x0, double horizon,
              int mesh_steps) {
  const int steps = even_steps(mesh_steps);
  const std::vector<Vec> states = flow_on_mesh(model, alpha, x0, horizon, steps);
  const double h = horizon / steps;
  DMat info = DMat::Zero(model.a, model.a);
  for (int i = 0; i <= steps; ++i) {
    const Vec& x = states[static_cast<std::size_t>(i)];
    const Mat grad = model.drift_grad_alpha(alpha, x);
    const Eigen::LLT<Mat> llt = factor_sigma(model.big_sigma(beta, model.domain_guard(x)));
    const Mat solved = llt.solve(grad);
    info += simpson_weight(i, steps) * DMat(grad.transpose() * solved);
  }
  info *= h / 3.0;
  return 0.5 * (info + info.transpose());
}

DMat info_I_delta(const FlowSolution& flow, const SamplingGrid& grid) {
  if (flow.s_mats.size() != flow.phi.size()) throw ConfigError("I_Delta needs a flow solved with covariance");
  const std::vector<Mat> d = d_matrices(flow, grid);
  const auto a = d.front().cols();
  DMat info = DMat::Zero(a, a);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const Eigen::LLT<Mat> llt = factor_sigma(flow.s_mats[k]);
    info += DMat(d[k].transpose() * llt.solve(d[k]));
  }
  info *= grid.delta();
  return 0.5 * (info + info.transpose());
}

DMat info_J_delta(const FlowSolution& flow, const SamplingGrid& grid) {
  if (flow.s_mats.size() != flow.phi.size()) throw ConfigError("J_Delta needs a flow solved with covariance");
  const std::vector<Mat> d = d_matrices(flow, grid);
  const auto a = d.front().cols();
  DMat m = DMat::Zero(a, a);
  DMat middle = DMat::Zero(a, a);
  for (std::size_t k = 0; k < d.size(); ++k) {
    m += DMat(d[k].transpose() * d[k]);
    middle += DMat(d[k].transpose() * flow.s_mats[k] * d[k]);
  }
  m *= grid.delta();
  middle *= grid.delta();
  const Eigen::LDLT<DMat> ldlt(middle);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw SingularCovariance("J_Delta: Delta sum D^T S D is singular");
  }
  const DMat j = m * ldlt.solve(m.transpose());
  return 0.5 * (j + j.transpose());
}

DMat info_I_sigma(const ModelSpec& model, const Vec& alpha, const Vec& beta, const Vec& x0, double horizon,
                  int mesh_steps) {
  const int steps = even_steps(mesh_steps);
  const std::vector<Vec> states = flow_on_mesh(model, alpha, x0, horizon, steps);
  const double h = horizon / steps;
  DMat info = DMat::Zero(model.b, model.b);
  for (int s = 0; s <= steps; ++s) {
    const Vec x = model.domain_guard(states[static_cast<std::size_t>(s)]);
    const Eigen::LLT<Mat> llt = factor_sigma(model.big_sigma(beta, x));
    const std::vector<Mat> grads = model.big_sigma_grad_beta(beta, x);
    std::vector<Mat> scaled;  // dSigma_i Sigma^{-1}
    scaled.reserve(grads.size());
    for (const Mat& g : grads) scaled.emplace_back(llt.solve(g.transpose()).transpose());
    const double w = simpson_weight(s, steps);
    for (int i = 0; i < model.b; ++i) {
      for (int j = i; j < model.b; ++j) {
        const double tr = (scaled[static_cast<std::size_t>(i)] * scaled[static_cast<std::size_t>(j)]).trace();
        info(i, j) += w * tr;
        if (j != i) info(j, i) += w * tr;
      }
    }
  }
  return info * (h / 3.0) / (2.0 * horizon);
}

namespace {

// Inverse of a symmetric positive definite information block, empty if singular.
DMat invert_information(const DMat& info) {
  if (info.size() == 0 || !info.allFinite()) return {};
  const Eigen::LDLT<DMat> ldlt(info);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-300 * std::max(1.0, info.norm())) return {};
  // Relative rank check: reject near-singular blocks.
  const Eigen::SelfAdjointEigenSolver<DMat> eig(info, Eigen::EigenvaluesOnly);
  const double max_ev = eig.eigenvalues().maxCoeff();
  if (!(eig.eigenvalues().minCoeff() > 1e-12 * max_ev)) return {};
  DMat inv = ldlt.solve(DMat::Identity(info.rows(), info.cols()));
  return 0.5 * (inv + inv.transpose());
}

void append_intervals(std::vector<Interval>& out, const Vec& center, const DMat& cov, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) {
    if (cov.size() == 0 || !(cov(i, i) >= 0.0)) {
      out.push_back(Interval{center[i], center[i], false});
      continue;
    }
    const double half = kZ95 * std::sqrt(cov(i, i));
    out.push_back(Interval{center[i] - half, center[i] + half, true});
  }
}

}  // namespace

void confidence_intervals(EstimationResult& result, double epsilon, const SamplingGrid& grid) {
  result.ci_95.clear();
  result.cov_alpha = invert_information(result.info_alpha);
  if (result.cov_alpha.size() != 0) result.cov_alpha *= epsilon * epsilon;
  append_intervals(result.ci_95, result.alpha_hat, result.cov_alpha, result.alpha_hat.size());
  result.cov_beta.resize(0, 0);
  if (result.info_beta.size() != 0 && result.beta_hat) {
    result.cov_beta = invert_information(result.info_beta);
    if (result.cov_beta.size() != 0) result.cov_beta /= static_cast<double>(grid.n());
    append_intervals(result.ci_95, *result.beta_hat, result.cov_beta, result.beta_hat->size());
  }
}

Vec profile_beta(const ModelSpec& model, const ObservedPath& path, const Vec& alpha, const ParamBox& beta_box,
                 const EstimateOptions& options) {
  FlowOptions opts = flow_options_for(ContrastKind::small_delta, LinkSpec::free(), options.substeps);
  const FlowSolution flow = solve_flow(model, alpha, Vec{}, path.x0(), path.grid, opts);
  GuardedObjective objective([&](const DVec& b) { return contrast_small_delta(path, flow, to_vec(b), model); });
  const MultiStartResult best =
      search(objective, to_dvec(beta_box.lower()), to_dvec(beta_box.upper()), options.search);
  return beta_box.project(to_vec(best.x));
}

EstimationResult minimize(ContrastKind kind, const ModelSpec& model, const LinkSpec& link, const ObservedPath& path,
                          const ParamBox& alpha_box, const ParamBox& beta_box, const EstimateOptions& options) {
  if (path.dim() != model.p) {
    throw ConfigError(fmt::format("path has {} state columns, model '{}' has p = {}", path.dim(), model.id, model.p));
  }
  if (alpha_box.size() != model.a) {
    throw ConfigError(fmt::format("alpha box has dimension {}, model '{}' has a = {}", alpha_box.size(), model.id, model.a));
  }
  const bool beta_searched =
      (kind == ContrastKind::small_delta && link.kind != LinkKind::beta_equals_f_alpha) ||
      kind == ContrastKind::gaussian_loglik;
  const bool needs_profile = options.compute_information && !beta_searched && !options.beta_plugin &&
                             link.kind != LinkKind::beta_equals_f_alpha;
  if ((beta_searched || needs_profile) && beta_box.size() != model.b) {
    throw ConfigError(fmt::format("beta box has dimension {}, model '{}' has b = {}", beta_box.size(), model.id, model.b));
  }

  EstimationResult result;
  result.kind = kind;
  const int a = model.a;
  const FlowOptions flow_opts = flow_options_for(kind, link, options.substeps);
  const Vec no_beta;

  std::function<double(const DVec&)> f;
  DVec lower;
  DVec upper;
  switch (kind) {
    case ContrastKind::cls:
    case ContrastKind::weighted_link:
    case ContrastKind::weighted_multiplicative:
      lower = to_dvec(alpha_box.lower());
      upper = to_dvec(alpha_box.upper());
      f = [&](const DVec& x) {
        return evaluate_contrast(kind, model, link, path, alpha_box.project(to_vec(x)), no_beta, options.substeps);
      };
      break;
    case ContrastKind::small_delta:
      if (!beta_searched) {
        lower = to_dvec(alpha_box.lower());
        upper = to_dvec(alpha_box.upper());
        f = [&](const DVec& x) {
          const Vec alpha = alpha_box.project(to_vec(x));
          const FlowSolution flow = solve_flow(model, alpha, no_beta, path.x0(), path.grid, flow_opts);
          return contrast_small_delta(path, flow, link.f(alpha), model);
        };
      } else {
        lower = concat(alpha_box.lower(), beta_box.lower());
        upper = concat(alpha_box.upper(), beta_box.upper());
        f = [&](const DVec& x) {
          const Vec alpha = alpha_box.project(to_vec(x.head(a)));
          const Vec beta = beta_box.project(to_vec(x.tail(model.b)));
          const FlowSolution flow = solve_flow(model, alpha, no_beta, path.x0(), path.grid, flow_opts);
          return contrast_small_delta(path, flow, beta, model);
        };
      }
      break;
    case ContrastKind::gaussian_loglik:
      if (options.fixed_alpha) {
        lower = to_dvec(beta_box.lower());
        upper = to_dvec(beta_box.upper());
        f = [&](const DVec& x) {
          return evaluate_contrast(kind, model, link, path, *options.fixed_alpha, beta_box.project(to_vec(x)),
                                   options.substeps);
        };
      } else {
        lower = concat(alpha_box.lower(), beta_box.lower());
        upper = concat(alpha_box.upper(), beta_box.upper());
        f = [&](const DVec& x) {
          return evaluate_contrast(kind, model, link, path, alpha_box.project(to_vec(x.head(a))),
                                   beta_box.project(to_vec(x.tail(model.b))), options.substeps);
        };
      }
      break;
  }

  GuardedObjective objective(f);
  const MultiStartResult best = search(objective, lower, upper, options.search);
  result.contrast_min = best.value;
  result.optimizer = OptimizerReport{best.iterations, best.restarts, best.converged};

  if (kind == ContrastKind::gaussian_loglik && options.fixed_alpha) {
    result.alpha_hat = *options.fixed_alpha;
    result.beta_hat = beta_box.project(to_vec(best.x));
  } else {
    result.alpha_hat = alpha_box.project(to_vec(best.x.head(a)));
    if (beta_searched) result.beta_hat = beta_box.project(to_vec(best.x.tail(model.b)));
  }
  if (kind == ContrastKind::small_delta && !beta_searched) result.beta_hat = link.f(result.alpha_hat);

  if (!options.compute_information) return result;

  // Diffusion parameter for the alpha information.
  if (result.beta_hat) {
    result.beta_plugin = *result.beta_hat;
  } else if (options.beta_plugin) {
    result.beta_plugin = *options.beta_plugin;
  } else if (link.kind == LinkKind::beta_equals_f_alpha) {
    result.beta_plugin = link.f(result.alpha_hat);
  } else {
    result.beta_plugin = profile_beta(model, path, result.alpha_hat, beta_box, options);
  }

  const double horizon = path.grid.horizon();
  switch (kind) {
    case ContrastKind::cls:
      result.info_alpha =
          info_J_delta(information_flow(model, result.alpha_hat, result.beta_plugin, path, options.substeps), path.grid);
      break;
    case ContrastKind::weighted_link:
    case ContrastKind::weighted_multiplicative:
      result.info_alpha =
          info_I_delta(information_flow(model, result.alpha_hat, result.beta_plugin, path, options.substeps), path.grid);
      break;
    case ContrastKind::small_delta:
      result.info_alpha =
          info_I_b(model, result.alpha_hat, result.beta_plugin, path.x0(), horizon, options.info_mesh_steps);
      if (beta_searched) {
        result.info_beta =
            info_I_sigma(model, result.alpha_hat, result.beta_plugin, path.x0(), horizon, options.info_mesh_steps);
      }
      break;
    case ContrastKind::gaussian_loglik:
      if (!options.fixed_alpha) {
        result.info_alpha = info_I_delta(
            information_flow(model, result.alpha_hat, result.beta_plugin, path, options.substeps), path.grid);
      }
      result.info_beta =
          info_I_sigma(model, result.alpha_hat, result.beta_plugin, path.x0(), horizon, options.info_mesh_steps);
      break;
  }
  confidence_intervals(result, path.epsilon, path.grid);
  return result;
}

}  // namespace smallnoise
