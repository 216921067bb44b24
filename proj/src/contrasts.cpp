#include "smallnoise/contrasts.hpp"

#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "smallnoise/errors.hpp"

namespace smallnoise {

ObservedPath::ObservedPath(SamplingGrid grid_in, std::vector<Vec> obs_in, double epsilon_in)
    : grid(grid_in), obs(std::move(obs_in)), epsilon(epsilon_in) {
  if (static_cast<int>(obs.size()) != grid.n() + 1) {
    throw ConfigError(fmt::format("path has {} observations, grid expects {}", obs.size(), grid.n() + 1));
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError(fmt::format("epsilon must be positive, got {}", epsilon));
  }
  for (const Vec& o : obs) {
    if (o.size() != obs.front().size()) throw ConfigError("observations have inconsistent dimensions");
    if (!o.allFinite()) throw ConfigError("observations must be finite");
  }
}

ObservedPath ObservedPath::subsample(int stride) const {
  if (stride < 1 || grid.n() % stride != 0) {
    throw ConfigError(fmt::format("stride {} does not divide n = {}", stride, grid.n()));
  }
  std::vector<Vec> kept;
  for (int k = 0; k <= grid.n(); k += stride) kept.push_back(obs[static_cast<std::size_t>(k)]);
  return ObservedPath(SamplingGrid(grid.horizon(), grid.n() / stride), std::move(kept), epsilon);
}

std::string_view to_string(ContrastKind kind) {
  switch (kind) {
    case ContrastKind::cls:
      return "cls";
    case ContrastKind::weighted_link:
      return "weighted_link";
    case ContrastKind::weighted_multiplicative:
      return "weighted_multiplicative";
    case ContrastKind::small_delta:
      return "small_delta";
    case ContrastKind::gaussian_loglik:
      return "gaussian_loglik";
  }
  return "unknown";
}

ContrastKind parse_contrast_kind(std::string_view name) {
  for (ContrastKind k : {ContrastKind::cls, ContrastKind::weighted_link, ContrastKind::weighted_multiplicative,
                         ContrastKind::small_delta, ContrastKind::gaussian_loglik}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError(fmt::format("unknown contrast kind '{}'", name));
}

namespace {

void check_compatible(const ObservedPath& path, const FlowSolution& flow) {
  if (flow.n() != path.n() || flow.x.size() != path.obs.size()) {
    throw ConfigError(fmt::format("flow has {} intervals, path has {}", flow.n(), path.n()));
  }
  if (flow.x.front().size() != path.obs.front().size()) {
    throw ConfigError(fmt::format("flow state dimension {} does not match path dimension {}",
                                  flow.x.front().size(), path.obs.front().size()));
  }
}

Eigen::LLT<Mat> factor_or_throw(Mat m, int k) {
  if (!repair_positive_definite(m)) {
    throw SingularCovariance(fmt::format("covariance of interval {} is not positive definite", k));
  }
  return Eigen::LLT<Mat>(m);
}

double log_det(const Eigen::LLT<Mat>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// sum_k N_k^T S_k^{-1} N_k and sum_k log det S_k
std::pair<double, double> weighted_sums(const std::vector<Vec>& res, const std::vector<Mat>& s_mats) {
  if (s_mats.size() != res.size()) throw ConfigError("flow was solved without S_k matrices");
  double quad = 0.0;
  double logdet = 0.0;
  for (std::size_t k = 0; k < res.size(); ++k) {
    const Eigen::LLT<Mat> llt = factor_or_throw(s_mats[k], static_cast<int>(k) + 1);
    quad += res[k].dot(llt.solve(res[k]));
    logdet += log_det(llt);
  }
  return {quad, logdet};
}

}  // namespace

std::vector<Vec> residuals(const ObservedPath& path, const FlowSolution& flow) {
  check_compatible(path, flow);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(path.n()));
  for (std::size_t k = 1; k <= static_cast<std::size_t>(path.n()); ++k) {
    out.emplace_back(path.obs[k] - flow.x[k] - flow.phi[k - 1] * (path.obs[k - 1] - flow.x[k - 1]));
  }
  return out;
}

double contrast_cls(const ObservedPath& path, const FlowSolution& flow) {
  double sum = 0.0;
  for (const Vec& r : residuals(path, flow)) sum += r.squaredNorm();
  return sum / path.grid.delta();
}

double contrast_weighted(const ObservedPath& path, const FlowSolution& flow, const LinkSpec& link) {
  if (link.kind == LinkKind::free_beta) {
    throw ConfigError("weighted contrast needs a beta_equals_f_alpha or multiplicative link");
  }
  return weighted_sums(residuals(path, flow), flow.s_mats).first / path.grid.delta();
}

double contrast_small_delta(const ObservedPath& path, const FlowSolution& flow, const Vec& beta,
                            const ModelSpec& model) {
  if (beta.size() != model.b) {
    throw ConfigError(fmt::format("model '{}' expects {} diffusion parameters, got {}", model.id, model.b, beta.size()));
  }
  const std::vector<Vec> res = residuals(path, flow);
  double logdet = 0.0;
  double quad = 0.0;
  for (std::size_t k = 0; k < res.size(); ++k) {
    const Vec state = model.domain_guard(path.obs[k]);
    const Eigen::LLT<Mat> llt = factor_or_throw(model.big_sigma(beta, state), static_cast<int>(k) + 1);
    logdet += log_det(llt);
    quad += res[k].dot(llt.solve(res[k]));
  }
  return logdet + quad / (path.epsilon * path.epsilon * path.grid.delta());
}

double gaussian_loglik(const ObservedPath& path, const FlowSolution& flow) {
  const auto [quad, logdet] = weighted_sums(residuals(path, flow), flow.s_mats);
  return -0.5 * logdet - quad / (2.0 * path.epsilon * path.epsilon * path.grid.delta());
}

FlowOptions flow_options_for(ContrastKind kind, const LinkSpec& link, int substeps) {
  FlowOptions opts;
  opts.substeps = substeps;
  opts.sensitivities = false;
  switch (kind) {
    case ContrastKind::cls:
    case ContrastKind::small_delta:
      opts.covariance = false;
      break;
    case ContrastKind::weighted_link:
      if (link.kind != LinkKind::beta_equals_f_alpha) {
        throw ConfigError("weighted_link contrast needs a beta_equals_f_alpha link");
      }
      opts.covariance = true;
      break;
    case ContrastKind::weighted_multiplicative:
      if (link.kind != LinkKind::multiplicative || !link.sigma0) {
        throw ConfigError("weighted_multiplicative contrast needs a multiplicative link with sigma0");
      }
      opts.covariance = true;
      opts.covariance_override = link.sigma0;
      break;
    case ContrastKind::gaussian_loglik:
      opts.covariance = true;
      break;
  }
  return opts;
}

double evaluate_contrast(ContrastKind kind, const ModelSpec& model, const LinkSpec& link, const ObservedPath& path,
                         const Vec& alpha, const Vec& beta, int substeps) {
  const FlowOptions opts = flow_options_for(kind, link, substeps);
  const Vec no_beta;
  switch (kind) {
    case ContrastKind::cls:
      return contrast_cls(path, solve_flow(model, alpha, no_beta, path.x0(), path.grid, opts));
    case ContrastKind::weighted_link:
      return contrast_weighted(path, solve_flow(model, alpha, link.f(alpha), path.x0(), path.grid, opts), link);
    case ContrastKind::weighted_multiplicative:
      return contrast_weighted(path, solve_flow(model, alpha, no_beta, path.x0(), path.grid, opts), link);
    case ContrastKind::small_delta:
      return contrast_small_delta(path, solve_flow(model, alpha, no_beta, path.x0(), path.grid, opts), beta, model);
    case ContrastKind::gaussian_loglik:
      return -gaussian_loglik(path, solve_flow(model, alpha, beta, path.x0(), path.grid, opts));
  }
  throw ConfigError("unhandled contrast kind");
}

}  // namespace smallnoise
