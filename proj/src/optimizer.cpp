#include "smallnoise/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "smallnoise/errors.hpp"

namespace smallnoise {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const DVec& x, int& evaluations) {
  ++evaluations;
  const double v = f(x);
  return std::isfinite(v) ? v : kInf;
}

struct Simplex {
  std::vector<DVec> vertices;
  std::vector<double> values;

  void sort() {
    std::vector<std::size_t> order(vertices.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<DVec> v2;
    std::vector<double> f2;
    for (std::size_t i : order) {
      v2.push_back(vertices[i]);
      f2.push_back(values[i]);
    }
    vertices = std::move(v2);
    values = std::move(f2);
  }

  [[nodiscard]] double diameter() const {
    double d = 0.0;
    for (std::size_t i = 1; i < vertices.size(); ++i) {
      d = std::max(d, (vertices[i] - vertices[0]).lpNorm<Eigen::Infinity>());
    }
    return d;
  }
};

Simplex initial_simplex(const Objective& f, const DVec& start, const DVec& lower, const DVec& upper, double frac,
                        int& evaluations) {
  const auto d = start.size();
  Simplex s;
  s.vertices.push_back(start);
  for (Eigen::Index i = 0; i < d; ++i) {
    DVec v = start;
    const double step = frac * (upper[i] - lower[i]);
    v[i] = start[i] + step <= upper[i] ? start[i] + step : start[i] - step;
    v[i] = std::clamp(v[i], lower[i], upper[i]);
    s.vertices.push_back(v);
  }
  for (const DVec& v : s.vertices) s.values.push_back(safe_eval(f, v, evaluations));
  s.sort();
  return s;
}

bool simplex_converged(const Simplex& s, const NelderMeadOptions& opt) {
  const double spread = s.values.back() - s.values.front();
  const double scale = 0.5 * (std::abs(s.values.back()) + std::abs(s.values.front()));
  if (std::isfinite(spread) && spread < opt.f_tol * scale) return true;
  return s.diameter() < opt.x_tol * (1.0 + s.vertices.front().lpNorm<Eigen::Infinity>());
}

// One Nelder-Mead run until convergence or the iteration budget is spent.
void run_simplex(const Objective& f, Simplex& s, const DVec& lower, const DVec& upper, const NelderMeadOptions& opt,
                 NelderMeadResult& out) {
  const auto d = static_cast<double>(s.vertices.front().size());
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / d;
  const double contract = 0.75 - 1.0 / (2.0 * d);
  const double shrink = 1.0 - 1.0 / d;
  const std::size_t worst = s.vertices.size() - 1;
  auto project = [&](const DVec& x) -> DVec { return x.cwiseMax(lower).cwiseMin(upper); };

  while (out.iterations < opt.max_iterations) {
    if (simplex_converged(s, opt)) {
      out.converged = true;
      return;
    }
    ++out.iterations;
    DVec centroid = DVec::Zero(s.vertices.front().size());
    for (std::size_t i = 0; i < worst; ++i) centroid += s.vertices[i];
    centroid /= static_cast<double>(worst);

    const DVec xr = project(centroid + reflect * (centroid - s.vertices[worst]));
    const double fr = safe_eval(f, xr, out.evaluations);
    if (fr < s.values.front()) {
      const DVec xe = project(centroid + expand * (xr - centroid));
      const double fe = safe_eval(f, xe, out.evaluations);
      if (fe < fr) {
        s.vertices[worst] = xe;
        s.values[worst] = fe;
      } else {
        s.vertices[worst] = xr;
        s.values[worst] = fr;
      }
    } else if (fr < s.values[worst - 1]) {
      s.vertices[worst] = xr;
      s.values[worst] = fr;
    } else {
      const bool outside = fr < s.values[worst];
      const DVec xc = outside ? project(centroid + contract * (xr - centroid))
                              : project(centroid + contract * (s.vertices[worst] - centroid));
      const double fc = safe_eval(f, xc, out.evaluations);
      if (fc < std::min(fr, s.values[worst])) {
        s.vertices[worst] = xc;
        s.values[worst] = fc;
      } else {
        for (std::size_t i = 1; i < s.vertices.size(); ++i) {
          s.vertices[i] = project(s.vertices[0] + shrink * (s.vertices[i] - s.vertices[0]));
          s.values[i] = safe_eval(f, s.vertices[i], out.evaluations);
        }
      }
    }
    s.sort();
  }
  out.converged = simplex_converged(s, opt);
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, const DVec& start, const DVec& lower, const DVec& upper,
                             const NelderMeadOptions& options) {
  if (start.size() == 0 || start.size() != lower.size() || start.size() != upper.size()) {
    throw ConfigError("optimizer start and bounds must share a positive dimension");
  }
  NelderMeadResult out;
  Simplex s = initial_simplex(f, start.cwiseMax(lower).cwiseMin(upper), lower, upper, options.initial_step,
                              out.evaluations);
  run_simplex(f, s, lower, upper, options, out);

  for (int r = 0; r < options.polish_restarts && out.converged; ++r) {
    const DVec best = s.vertices.front();
    const double best_value = s.values.front();
    // Restart with an edge a few times the collapsed diameter, floored relative to the box.
    const DVec width = upper - lower;
    const double frac = std::max(10.0 * s.diameter() / width.maxCoeff(), 1e-4);
    Simplex fresh = initial_simplex(f, best, lower, upper, std::min(frac, options.initial_step), out.evaluations);
    out.converged = false;
    run_simplex(f, fresh, lower, upper, options, out);
    s = std::move(fresh);
    const bool stalled = best_value - s.values.front() <= options.f_tol &&
                         (s.vertices.front() - best).lpNorm<Eigen::Infinity>() <=
                             options.x_tol * (1.0 + best.lpNorm<Eigen::Infinity>());
    if (stalled) break;
  }
  out.x = s.vertices.front();
  out.value = s.values.front();
  return out;
}

std::vector<DVec> lattice_starts(const DVec& lower, const DVec& upper, int cap) {
  const auto d = static_cast<int>(lower.size());
  const std::array<double, 3> quart{0.25, 0.5, 0.75};
  auto point = [&](long long index) {
    DVec x(d);
    for (int i = 0; i < d; ++i) {
      x[i] = lower[i] + quart[static_cast<std::size_t>(index % 3)] * (upper[i] - lower[i]);
      index /= 3;
    }
    return x;
  };
  long long total = 1;
  for (int i = 0; i < d; ++i) total *= 3;
  std::vector<DVec> out;
  if (total <= cap) {
    for (long long j = 0; j < total; ++j) out.push_back(point(j));
    return out;
  }
  const long long center = (total - 1) / 2;
  out.push_back(point(center));
  for (long long j = 0; static_cast<int>(out.size()) < cap && j < cap; ++j) {
    const long long idx = j * total / cap;
    if (idx != center) out.push_back(point(idx));
  }
  return out;
}

MultiStartResult multistart_minimize(const Objective& f, const DVec& lower, const DVec& upper,
                                     const MultiStartOptions& options) {
  const std::vector<DVec> starts = lattice_starts(lower, upper, std::max(1, options.max_starts));
  std::vector<double> screened;
  int evaluations = 0;
  for (const DVec& s : starts) screened.push_back(safe_eval(f, s, evaluations));
  std::vector<std::size_t> order(starts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return screened[a] < screened[b]; });

  MultiStartResult best;
  best.value = kInf;
  const auto refine = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(1, options.refine_best)));
  bool any_converged = false;
  for (std::size_t r = 0; r < refine; ++r) {
    const NelderMeadResult local = nelder_mead(f, starts[order[r]], lower, upper, options.local);
    best.iterations += local.iterations;
    ++best.restarts;
    any_converged = any_converged || local.converged;
    if (local.value < best.value || best.x.size() == 0) {
      best.x = local.x;
      best.value = local.value;
      best.converged = local.converged;
    }
  }
  if (!any_converged) {
    throw NoConvergence(fmt::format("Nelder-Mead hit {} iterations at every one of {} starts",
                                    options.local.max_iterations, refine));
  }
  return best;
}

}  // namespace smallnoise
