#include "smallnoise/flow.hpp"

#include <cmath>

#include <fmt/format.h>

#include "smallnoise/errors.hpp"

namespace smallnoise {

SamplingGrid::SamplingGrid(double horizon, int n) : horizon_(horizon), n_(n) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError(fmt::format("sampling horizon must be positive, got {}", horizon));
  }
  if (n < 1) {
    throw ConfigError(fmt::format("sampling grid needs n >= 1, got {}", n));
  }
}

namespace {

struct JointState {
  Vec x;
  Mat psi;
  Mat v;
  Mat g;
};

class JointSystem {
 public:
  JointSystem(const ModelSpec& model, const Vec& alpha, const Vec& beta, bool covariance, bool sensitivities,
              const FlowOptions& options)
      : model_(model),
        alpha_(alpha),
        beta_(beta),
        covariance_(covariance),
        sensitivities_(sensitivities),
        override_(options.covariance_override) {}

  void derivative(const JointState& y, JointState& dy) const {
    const Mat jac = model_.drift_jac_x(alpha_, y.x);
    dy.x = model_.drift(alpha_, y.x);
    dy.psi.noalias() = jac * y.psi;
    if (covariance_) {
      const Vec guarded = model_.domain_guard(y.x);
      const Mat sig = override_ ? override_(guarded) : model_.big_sigma(beta_, guarded);
      dy.v.noalias() = jac * y.v;
      dy.v += dy.v.transpose().eval();
      dy.v += sig;
    }
    if (sensitivities_) {
      dy.g.noalias() = jac * y.g;
      dy.g += model_.drift_grad_alpha(alpha_, y.x);
    }
  }

  void axpy(JointState& out, const JointState& y, double h, const JointState& k) const {
    out.x = y.x + h * k.x;
    out.psi = y.psi + h * k.psi;
    if (covariance_) out.v = y.v + h * k.v;
    if (sensitivities_) out.g = y.g + h * k.g;
  }

  void rk4_step(JointState& y, double h) {
    derivative(y, k1_);
    axpy(tmp_, y, 0.5 * h, k1_);
    derivative(tmp_, k2_);
    axpy(tmp_, y, 0.5 * h, k2_);
    derivative(tmp_, k3_);
    axpy(tmp_, y, h, k3_);
    derivative(tmp_, k4_);
    const double w = h / 6.0;
    y.x += w * (k1_.x + 2.0 * k2_.x + 2.0 * k3_.x + k4_.x);
    y.psi += w * (k1_.psi + 2.0 * k2_.psi + 2.0 * k3_.psi + k4_.psi);
    if (covariance_) {
      y.v += w * (k1_.v + 2.0 * k2_.v + 2.0 * k3_.v + k4_.v);
      y.v = 0.5 * (y.v + y.v.transpose()).eval();
    }
    if (sensitivities_) {
      y.g += w * (k1_.g + 2.0 * k2_.g + 2.0 * k3_.g + k4_.g);
    }
  }

 private:
  const ModelSpec& model_;
  const Vec& alpha_;
  const Vec& beta_;
  bool covariance_;
  bool sensitivities_;
  const std::function<Mat(const Vec&)>& override_;
  JointState k1_, k2_, k3_, k4_, tmp_;
};

void check_dims(const ModelSpec& model, const Vec& alpha, const Vec& x) {
  if (alpha.size() != model.a) {
    throw ConfigError(fmt::format("model '{}' expects {} drift parameters, got {}", model.id, model.a, alpha.size()));
  }
  if (x.size() != model.p) {
    throw ConfigError(fmt::format("model '{}' expects state dimension {}, got {}", model.id, model.p, x.size()));
  }
}

}  // namespace

IntervalFlow propagate_interval(const ModelSpec& model, const Vec& alpha, const Vec& beta, const Vec& x_start,
                                const Mat& dx_start, double duration, int steps, const FlowOptions& options) {
  check_dims(model, alpha, x_start);
  if (steps < 1) throw ConfigError(fmt::format("substeps must be positive, got {}", steps));
  const bool covariance = beta.size() > 0 || static_cast<bool>(options.covariance_override);
  const bool sensitivities = dx_start.size() > 0;
  if (beta.size() > 0 && beta.size() != model.b) {
    throw ConfigError(fmt::format("model '{}' expects {} diffusion parameters, got {}", model.id, model.b, beta.size()));
  }

  const int p = model.p;
  JointState y;
  y.x = x_start;
  y.psi = Mat::Identity(p, p);
  if (covariance) y.v = Mat::Zero(p, p);
  if (sensitivities) y.g = dx_start;

  JointSystem system(model, alpha, beta, covariance, sensitivities, options);
  const double h = duration / steps;
  for (int s = 0; s < steps; ++s) system.rk4_step(y, h);

  if (!y.x.allFinite() || !y.psi.allFinite()) {
    throw NonFiniteState(fmt::format("flow of model '{}' left the finite range", model.id));
  }
  return IntervalFlow{std::move(y.x), std::move(y.psi), covariance ? y.v : Mat{}, sensitivities ? y.g : Mat{}};
}

bool repair_positive_definite(Mat& m) {
  if (m.llt().info() == Eigen::Success) return true;
  const double ridge = 1e-10 * m.trace() / static_cast<double>(m.rows());
  m.diagonal().array() += std::abs(ridge);
  return m.llt().info() == Eigen::Success;
}

FlowSolution solve_flow(const ModelSpec& model, const Vec& alpha, const Vec& beta, const Vec& x0,
                        const SamplingGrid& grid, const FlowOptions& options) {
  check_dims(model, alpha, x0);
  const int n = grid.n();
  const double delta = grid.delta();
  const bool covariance = options.covariance;
  const Vec no_beta;
  const Vec& beta_used = covariance && !options.covariance_override ? beta : no_beta;

  FlowSolution flow;
  flow.x.reserve(static_cast<std::size_t>(n) + 1);
  flow.phi.reserve(static_cast<std::size_t>(n));
  flow.x.push_back(x0);
  Mat g;
  if (options.sensitivities) {
    g = Mat::Zero(model.p, model.a);
    flow.dx_dalpha.push_back(g);
  }

  FlowOptions interval_options;
  if (covariance) interval_options.covariance_override = options.covariance_override;

  for (int k = 1; k <= n; ++k) {
    IntervalFlow step =
        propagate_interval(model, alpha, beta_used, flow.x.back(), g, delta, options.substeps, interval_options);
    flow.x.push_back(step.x);
    flow.phi.push_back(step.phi);
    if (covariance) {
      Mat s = step.v / delta;
      if (!repair_positive_definite(s)) {
        throw SingularCovariance(fmt::format("S_{} of model '{}' is not positive definite", k, model.id));
      }
      flow.s_mats.push_back(std::move(s));
    }
    if (options.sensitivities) {
      g = step.dx_dalpha;
      flow.dx_dalpha.push_back(g);
    }
  }

  if (options.resolvent_sensitivities) {
    FlowOptions plain;
    plain.substeps = options.substeps;
    plain.covariance = false;
    plain.sensitivities = false;
    flow.dphi_dalpha.assign(static_cast<std::size_t>(n), std::vector<Mat>(static_cast<std::size_t>(model.a)));
    for (int i = 0; i < model.a; ++i) {
      const double h = 1e-5 * (1.0 + std::abs(alpha[i]));
      Vec ap = alpha;
      Vec am = alpha;
      ap[i] += h;
      am[i] -= h;
      const FlowSolution fp = solve_flow(model, ap, beta, x0, grid, plain);
      const FlowSolution fm = solve_flow(model, am, beta, x0, grid, plain);
      for (int k = 0; k < n; ++k) {
        flow.dphi_dalpha[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
            (fp.phi[static_cast<std::size_t>(k)] - fm.phi[static_cast<std::size_t>(k)]) / (2.0 * h);
      }
    }
  }
  return flow;
}

std::vector<Mat> d_matrices(const FlowSolution& flow, const SamplingGrid& grid) {
  if (flow.dx_dalpha.size() != flow.x.size()) {
    throw ConfigError("D matrices need a flow solved with sensitivities");
  }
  const double delta = grid.delta();
  std::vector<Mat> out;
  out.reserve(flow.phi.size());
  for (std::size_t k = 1; k <= flow.phi.size(); ++k) {
    out.emplace_back((flow.phi[k - 1] * flow.dx_dalpha[k - 1] - flow.dx_dalpha[k]) / delta);
  }
  return out;
}

std::vector<Vec> flow_on_mesh(const ModelSpec& model, const Vec& alpha, const Vec& x0, double horizon, int steps) {
  check_dims(model, alpha, x0);
  if (steps < 1) throw ConfigError(fmt::format("mesh needs at least one step, got {}", steps));
  std::vector<Vec> states;
  states.reserve(static_cast<std::size_t>(steps) + 1);
  states.push_back(x0);
  const double h = horizon / steps;
  const Vec no_beta;
  const Mat no_sens;
  for (int s = 0; s < steps; ++s) {
    states.push_back(propagate_interval(model, alpha, no_beta, states.back(), no_sens, h, 1).x);
  }
  return states;
}

}  // namespace smallnoise
