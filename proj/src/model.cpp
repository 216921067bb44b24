#include "smallnoise/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "smallnoise/errors.hpp"

namespace smallnoise {

ParamBox::ParamBox(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) {
    throw ConfigError(fmt::format("box bounds differ in size ({} vs {})", lower_.size(), upper_.size()));
  }
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] < upper_[i])) {
      throw ConfigError(fmt::format("box coordinate {} has lower {} >= upper {}", i, lower_[i], upper_[i]));
    }
  }
}

Vec ParamBox::project(const Vec& point) const {
  return point.cwiseMax(lower_).cwiseMin(upper_);
}

bool ParamBox::contains(const Vec& point) const {
  if (point.size() != lower_.size()) return false;
  return (point.array() >= lower_.array()).all() && (point.array() <= upper_.array()).all();
}

namespace {

double fd_step(double v) { return 1e-6 * (1.0 + std::abs(v)); }

}  // namespace

ModelSpec complete_model(ModelSpec spec) {
  if (!spec.drift || !spec.sigma) {
    throw ConfigError(fmt::format("model '{}' needs both drift and sigma", spec.id));
  }
  for (auto [name, dim] : {std::pair{"p", spec.p}, std::pair{"a", spec.a}, std::pair{"b", spec.b}}) {
    if (dim < 1 || dim > kMaxDim) {
      throw ConfigError(fmt::format("model '{}': dimension {}={} outside [1, {}]", spec.id, name, dim, kMaxDim));
    }
  }
  if (!spec.domain_guard) {
    spec.domain_guard = [](const Vec& x) { return x; };
  }
  if (!spec.big_sigma) {
    spec.big_sigma = [sigma = spec.sigma](const Vec& beta, const Vec& x) -> Mat {
      const Mat s = sigma(beta, x);
      return s * s.transpose();
    };
  }
  if (!spec.drift_jac_x) {
    spec.drift_jac_x = [drift = spec.drift, p = spec.p](const Vec& alpha, const Vec& x) -> Mat {
      Mat jac(p, p);
      Vec xp = x;
      Vec xm = x;
      for (int j = 0; j < p; ++j) {
        const double h = fd_step(x[j]);
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        jac.col(j) = (drift(alpha, xp) - drift(alpha, xm)) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
      }
      return jac;
    };
  }
  if (!spec.drift_grad_alpha) {
    spec.drift_grad_alpha = [drift = spec.drift, p = spec.p, a = spec.a](const Vec& alpha, const Vec& x) -> Mat {
      Mat grad(p, a);
      Vec ap = alpha;
      Vec am = alpha;
      for (int i = 0; i < a; ++i) {
        const double h = fd_step(alpha[i]);
        ap[i] = alpha[i] + h;
        am[i] = alpha[i] - h;
        grad.col(i) = (drift(ap, x) - drift(am, x)) / (2.0 * h);
        ap[i] = alpha[i];
        am[i] = alpha[i];
      }
      return grad;
    };
  }
  if (!spec.big_sigma_grad_beta) {
    spec.big_sigma_grad_beta = [big_sigma = spec.big_sigma, b = spec.b](const Vec& beta, const Vec& x) {
      std::vector<Mat> out;
      out.reserve(static_cast<std::size_t>(b));
      Vec bp = beta;
      Vec bm = beta;
      for (int i = 0; i < b; ++i) {
        const double h = fd_step(beta[i]);
        bp[i] = beta[i] + h;
        bm[i] = beta[i] - h;
        out.emplace_back((big_sigma(bp, x) - big_sigma(bm, x)) / (2.0 * h));
        bp[i] = beta[i];
        bm[i] = beta[i];
      }
      return out;
    };
  }
  return spec;
}

LinkSpec LinkSpec::free() { return LinkSpec{}; }

LinkSpec LinkSpec::beta_equals(std::function<Vec(const Vec&)> f) {
  LinkSpec link;
  link.kind = LinkKind::beta_equals_f_alpha;
  link.f = std::move(f);
  return link;
}

LinkSpec LinkSpec::fixed_beta(Vec beta) {
  return beta_equals([beta = std::move(beta)](const Vec&) { return beta; });
}

LinkSpec LinkSpec::multiplicative(std::function<double(const Vec&)> f_scalar,
                                  std::function<Mat(const Vec&)> sigma0) {
  LinkSpec link;
  link.kind = LinkKind::multiplicative;
  link.f_scalar = std::move(f_scalar);
  link.sigma0 = std::move(sigma0);
  return link;
}

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::free_beta:
      return "free_beta";
    case LinkKind::beta_equals_f_alpha:
      return "beta_equals_f_alpha";
    case LinkKind::multiplicative:
      return "multiplicative";
  }
  return "unknown";
}

ModelSpec builtin_ou() {
  ModelSpec m;
  m.id = "ou";
  m.p = 1;
  m.a = 1;
  m.b = 1;
  m.drift = [](const Vec& alpha, const Vec& x) -> Vec { return alpha[0] * x; };
  m.drift_jac_x = [](const Vec& alpha, const Vec&) -> Mat { return Mat::Constant(1, 1, alpha[0]); };
  m.drift_grad_alpha = [](const Vec&, const Vec& x) -> Mat { return Mat::Constant(1, 1, x[0]); };
  m.sigma = [](const Vec& beta, const Vec&) -> Mat { return Mat::Constant(1, 1, beta[0]); };
  m.big_sigma = [](const Vec& beta, const Vec&) -> Mat { return Mat::Constant(1, 1, beta[0] * beta[0]); };
  m.big_sigma_grad_beta = [](const Vec& beta, const Vec&) {
    return std::vector<Mat>{Mat::Constant(1, 1, 2.0 * beta[0])};
  };
  return complete_model(std::move(m));
}

ModelSpec builtin_cir() {
  ModelSpec m;
  m.id = "cir";
  m.p = 1;
  m.a = 1;
  m.b = 1;
  m.drift = [](const Vec& alpha, const Vec& x) -> Vec { return alpha[0] * x; };
  m.drift_jac_x = [](const Vec& alpha, const Vec&) -> Mat { return Mat::Constant(1, 1, alpha[0]); };
  m.drift_grad_alpha = [](const Vec&, const Vec& x) -> Mat { return Mat::Constant(1, 1, x[0]); };
  m.sigma = [](const Vec& beta, const Vec& x) -> Mat {
    return Mat::Constant(1, 1, beta[0] * std::sqrt(std::max(x[0], kStateFloor)));
  };
  m.big_sigma = [](const Vec& beta, const Vec& x) -> Mat {
    return Mat::Constant(1, 1, beta[0] * beta[0] * std::max(x[0], kStateFloor));
  };
  m.big_sigma_grad_beta = [](const Vec& beta, const Vec& x) {
    return std::vector<Mat>{Mat::Constant(1, 1, 2.0 * beta[0] * std::max(x[0], kStateFloor))};
  };
  m.domain_guard = [](const Vec& x) -> Vec { return x.cwiseMax(kStateFloor); };
  return complete_model(std::move(m));
}

namespace {

double clamp_rho(double rho) { return std::clamp(rho, -kRhoClamp, kRhoClamp); }

}  // namespace

ModelSpec builtin_two_factor() {
  ModelSpec m;
  m.id = "two_factor";
  m.p = 2;
  m.a = 3;
  m.b = 3;
  m.drift = [](const Vec& alpha, const Vec& x) -> Vec {
    Vec out(2);
    out << x[1] + alpha[0], alpha[1] * (alpha[2] - x[1]);
    return out;
  };
  m.drift_jac_x = [](const Vec& alpha, const Vec&) -> Mat {
    Mat jac(2, 2);
    jac << 0.0, 1.0, 0.0, -alpha[1];
    return jac;
  };
  m.drift_grad_alpha = [](const Vec& alpha, const Vec& x) -> Mat {
    Mat grad(2, 3);
    grad << 1.0, 0.0, 0.0, 0.0, alpha[2] - x[1], alpha[1];
    return grad;
  };
  m.sigma = [](const Vec& beta, const Vec& x) -> Mat {
    const double k1 = std::sqrt(std::max(beta[0], 0.0));
    const double k2 = std::sqrt(std::max(beta[1], 0.0));
    const double rho = clamp_rho(beta[2]);
    const double sr = std::sqrt(std::max(x[1], kStateFloor));
    Mat s(2, 2);
    s << k1, 0.0, k2 * sr * rho, k2 * sr * std::sqrt(1.0 - rho * rho);
    return s;
  };
  m.big_sigma = [](const Vec& beta, const Vec& x) -> Mat {
    const double r = std::max(x[1], kStateFloor);
    const double off = clamp_rho(beta[2]) * std::sqrt(std::max(beta[0] * beta[1] * r, 0.0));
    Mat s(2, 2);
    s << beta[0], off, off, beta[1] * r;
    return s;
  };
  m.big_sigma_grad_beta = [](const Vec& beta, const Vec& x) {
    const double r = std::max(x[1], kStateFloor);
    const double rho = clamp_rho(beta[2]);
    const double k1 = std::sqrt(std::max(beta[0], 0.0));
    const double k2 = std::sqrt(std::max(beta[1], 0.0));
    const double sr = std::sqrt(r);
    // d(k1 k2)/d(k1^2) = k2 / (2 k1)
    const double d0 = k1 > 0.0 ? rho * sr * k2 / (2.0 * k1) : 0.0;
    const double d1 = k2 > 0.0 ? rho * sr * k1 / (2.0 * k2) : 0.0;
    const double d2 = std::abs(beta[2]) < kRhoClamp ? k1 * k2 * sr : 0.0;
    std::vector<Mat> grads(3, Mat::Zero(2, 2));
    grads[0] << 1.0, d0, d0, 0.0;
    grads[1] << 0.0, d1, d1, r;
    grads[2] << 0.0, d2, d2, 0.0;
    return grads;
  };
  m.domain_guard = [](const Vec& x) -> Vec {
    Vec out = x;
    out[1] = std::max(out[1], kStateFloor);
    return out;
  };
  return complete_model(std::move(m));
}

ModelSpec builtin_sir() {
  ModelSpec m;
  m.id = "sir";
  m.p = 2;
  m.a = 2;
  m.b = 2;
  m.drift = [](const Vec& alpha, const Vec& x) -> Vec {
    const double inc = alpha[0] * x[0] * x[1];
    Vec out(2);
    out << -inc, inc - alpha[1] * x[1];
    return out;
  };
  m.drift_jac_x = [](const Vec& alpha, const Vec& x) -> Mat {
    const double lam = alpha[0];
    Mat jac(2, 2);
    jac << -lam * x[1], -lam * x[0], lam * x[1], lam * x[0] - alpha[1];
    return jac;
  };
  m.drift_grad_alpha = [](const Vec&, const Vec& x) -> Mat {
    const double si = x[0] * x[1];
    Mat grad(2, 2);
    grad << -si, 0.0, si, -x[1];
    return grad;
  };
  m.sigma = [](const Vec& beta, const Vec& x) -> Mat {
    const double a = std::sqrt(std::max(beta[0] * x[0] * x[1], 0.0));
    const double c = std::sqrt(std::max(beta[1] * x[1], 0.0));
    Mat s(2, 2);
    s << a, 0.0, -a, c;
    return s;
  };
  m.big_sigma = [](const Vec& beta, const Vec& x) -> Mat {
    const double inc = beta[0] * x[0] * x[1];
    Mat s(2, 2);
    s << inc, -inc, -inc, inc + beta[1] * x[1];
    return s;
  };
  m.big_sigma_grad_beta = [](const Vec&, const Vec& x) {
    const double si = x[0] * x[1];
    std::vector<Mat> grads(2, Mat::Zero(2, 2));
    grads[0] << si, -si, -si, si;
    grads[1] << 0.0, 0.0, 0.0, x[1];
    return grads;
  };
  m.domain_guard = [](const Vec& x) -> Vec { return x.cwiseMax(kStateFloor).cwiseMin(1.0); };
  return complete_model(std::move(m));
}

ModelSpec builtin_model(std::string_view id) {
  if (id == "ou") return builtin_ou();
  if (id == "cir") return builtin_cir();
  if (id == "two_factor") return builtin_two_factor();
  if (id == "sir") return builtin_sir();
  throw ConfigError(fmt::format("unknown model id '{}'", id));
}

LinkSpec builtin_link(std::string_view id) {
  if (id == "ou") {
    return LinkSpec::multiplicative([](const Vec& beta) { return beta[0] * beta[0]; },
                                    [](const Vec&) -> Mat { return Mat::Identity(1, 1); });
  }
  if (id == "cir") {
    return LinkSpec::multiplicative([](const Vec& beta) { return beta[0] * beta[0]; },
                                    [](const Vec& x) -> Mat { return Mat::Constant(1, 1, std::max(x[0], kStateFloor)); });
  }
  if (id == "two_factor") return LinkSpec::free();
  if (id == "sir") return LinkSpec::beta_equals([](const Vec& alpha) { return alpha; });
  throw ConfigError(fmt::format("unknown model id '{}'", id));
}

std::vector<std::string> builtin_model_ids() { return {"ou", "cir", "two_factor", "sir"}; }

}  // namespace smallnoise
