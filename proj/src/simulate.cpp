#include "smallnoise/simulate.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "smallnoise/errors.hpp"

namespace smallnoise {

std::vector<Vec> simulate_sde_states(const ModelSpec& model, const Vec& alpha, const Vec& beta, double epsilon,
                                     const Vec& x0, const SamplingGrid& grid, int sim_substeps, SeededRng& rng) {
  if (sim_substeps < 1) throw ConfigError(fmt::format("sim_substeps must be >= 1, got {}", sim_substeps));
  if (!(epsilon >= 0.0)) throw ConfigError(fmt::format("epsilon must be non-negative, got {}", epsilon));
  if (x0.size() != model.p || alpha.size() != model.a || beta.size() != model.b) {
    throw ConfigError(fmt::format("simulate: dimensions do not match model '{}'", model.id));
  }
  const int p = model.p;
  const double h = grid.delta() / sim_substeps;
  const double noise_scale = epsilon * std::sqrt(h);

  std::vector<Vec> states;
  states.reserve(static_cast<std::size_t>(grid.n()) + 1);
  states.push_back(x0);
  Vec x = x0;
  Vec z(p);
  for (int k = 1; k <= grid.n(); ++k) {
    for (int s = 0; s < sim_substeps; ++s) {
      for (int i = 0; i < p; ++i) z[i] = rng.normal();
      const Vec drift = model.drift(alpha, x);
      if (epsilon > 0.0) {
        x += h * drift + noise_scale * (model.sigma(beta, model.domain_guard(x)) * z);
      } else {
        x += h * drift;
      }
    }
    if (!x.allFinite()) {
      throw NonFiniteState(fmt::format("simulated path of model '{}' diverged before t = {}", model.id, grid.time(k)));
    }
    states.push_back(x);
  }
  return states;
}

ObservedPath simulate_sde(const ModelSpec& model, const Vec& alpha, const Vec& beta, double epsilon, const Vec& x0,
                          const SamplingGrid& grid, int sim_substeps, SeededRng& rng) {
  return ObservedPath(grid, simulate_sde_states(model, alpha, beta, epsilon, x0, grid, sim_substeps, rng), epsilon);
}

int JumpTrajectory::infections() const {
  return static_cast<int>(std::count(events.begin(), events.end(), JumpEvent::infection));
}

int JumpTrajectory::recoveries() const {
  return static_cast<int>(std::count(events.begin(), events.end(), JumpEvent::recovery));
}

std::array<int, 2> JumpTrajectory::state_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  return states[static_cast<std::size_t>(it - times.begin())];
}

JumpTrajectory simulate_gillespie_sir(int population, int initial_infected, double lambda, double gamma,
                                      double horizon, SeededRng& rng) {
  if (population <= 0 || initial_infected <= 0 || initial_infected >= population) {
    throw ConfigError(fmt::format("Gillespie needs 0 < m < N, got m = {}, N = {}", initial_infected, population));
  }
  if (lambda < 0.0 || gamma < 0.0 || !(horizon > 0.0)) {
    throw ConfigError("Gillespie needs non-negative rates and a positive horizon");
  }
  JumpTrajectory traj;
  traj.population = population;
  traj.initial_infected = initial_infected;
  traj.horizon = horizon;
  int s = population - initial_infected;
  int i = initial_infected;
  traj.states.push_back({s, i});
  double t = 0.0;
  const double n = population;
  while (i > 0) {
    const double infection_rate = lambda * s * i / n;
    const double recovery_rate = gamma * i;
    const double total = infection_rate + recovery_rate;
    if (total <= 0.0) break;
    t += rng.exponential(total);
    if (t > horizon) break;
    if (rng.uniform() * total < infection_rate) {
      --s;
      ++i;
      traj.events.push_back(JumpEvent::infection);
    } else {
      --i;
      traj.events.push_back(JumpEvent::recovery);
    }
    traj.times.push_back(t);
    traj.states.push_back({s, i});
  }
  return traj;
}

ObservedPath discretize(const JumpTrajectory& traj, const SamplingGrid& grid, bool normalize) {
  if (grid.horizon() > traj.horizon * (1.0 + 1e-12)) {
    throw ConfigError(fmt::format("grid horizon {} exceeds trajectory horizon {}", grid.horizon(), traj.horizon));
  }
  const double scale = normalize ? 1.0 / traj.population : 1.0;
  std::vector<Vec> obs;
  obs.reserve(static_cast<std::size_t>(grid.n()) + 1);
  std::size_t next = 0;  // first event strictly after the current sampling time
  for (int k = 0; k <= grid.n(); ++k) {
    const double t = grid.time(k);
    while (next < traj.times.size() && traj.times[next] <= t) ++next;
    const auto& st = traj.states[next];
    Vec o(2);
    o << st[0] * scale, st[1] * scale;
    obs.push_back(o);
  }
  const double epsilon = normalize ? 1.0 / std::sqrt(static_cast<double>(traj.population)) : 1.0;
  return ObservedPath(grid, std::move(obs), epsilon);
}

JumpMle jump_mle(const JumpTrajectory& traj) {
  JumpMle mle;
  double prev = 0.0;
  for (std::size_t j = 0; j <= traj.times.size(); ++j) {
    const double end = j < traj.times.size() ? traj.times[j] : traj.horizon;
    const auto& st = traj.states[j];
    const double dt = std::max(0.0, end - prev);
    mle.si_exposure += static_cast<double>(st[0]) * st[1] * dt;
    mle.i_exposure += st[1] * dt;
    prev = end;
  }
  if (mle.si_exposure <= 0.0 || mle.i_exposure <= 0.0) {
    throw ZeroExposure("jump MLE: exposure integral is zero");
  }
  const int inf = traj.infections();
  const int rec = traj.recoveries();
  if (inf > 0) mle.lambda = static_cast<double>(traj.population) * inf / mle.si_exposure;
  if (rec > 0) mle.gamma = rec / mle.i_exposure;
  return mle;
}

bool emergence_filter(const JumpTrajectory& traj, double threshold_frac) {
  const int ever_infected = traj.population - traj.states.back()[0];
  return ever_infected >= threshold_frac * traj.population;
}

}  // namespace smallnoise
