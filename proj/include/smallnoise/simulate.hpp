#pragma once

#include <array>
#include <optional>
#include <vector>

#include "smallnoise/contrasts.hpp"
#include "smallnoise/model.hpp"
#include "smallnoise/rng.hpp"

namespace smallnoise {

/// Euler-Maruyama states at every grid time (index 0 is x0), step Delta / sim_substeps.
/// sigma is evaluated at the guarded state. epsilon may be zero.
/// Throws NonFiniteState if the path diverges.
[[nodiscard]] std::vector<Vec> simulate_sde_states(const ModelSpec& model, const Vec& alpha, const Vec& beta,
                                                   double epsilon, const Vec& x0, const SamplingGrid& grid,
                                                   int sim_substeps, SeededRng& rng);

/// Same as simulate_sde_states, packaged as an observed path (epsilon > 0).
[[nodiscard]] ObservedPath simulate_sde(const ModelSpec& model, const Vec& alpha, const Vec& beta, double epsilon,
                                        const Vec& x0, const SamplingGrid& grid, int sim_substeps, SeededRng& rng);

enum class JumpEvent { infection, recovery };

/// Exact SIR jump-process trajectory. states[0] is (N - m, m); states[j + 1] is the
/// state right after event j.
struct JumpTrajectory {
  int population = 0;
  int initial_infected = 0;
  double horizon = 0.0;
  std::vector<double> times;
  std::vector<JumpEvent> events;
  std::vector<std::array<int, 2>> states;

  [[nodiscard]] std::size_t event_count() const { return times.size(); }
  [[nodiscard]] int infections() const;
  [[nodiscard]] int recoveries() const;
  /// (S, I) just after the last event at or before t.
  [[nodiscard]] std::array<int, 2> state_at(double t) const;
};

/// Gillespie SSA with rates lambda S I / N (infection) and gamma I (recovery).
/// Stops at `horizon` or when I reaches 0.
[[nodiscard]] JumpTrajectory simulate_gillespie_sir(int population, int initial_infected, double lambda,
                                                    double gamma, double horizon, SeededRng& rng);

/// Samples (S, I) at the grid times. With `normalize` the states are divided by N and
/// epsilon = N^{-1/2}; otherwise raw counts are returned with epsilon = 1.
[[nodiscard]] ObservedPath discretize(const JumpTrajectory& traj, const SamplingGrid& grid, bool normalize);

/// Maximum likelihood estimates of the jump process using every event.
/// An estimate is empty when its event count is zero.
struct JumpMle {
  std::optional<double> lambda;
  std::optional<double> gamma;
  double si_exposure = 0.0;  ///< int_0^T S_t I_t dt
  double i_exposure = 0.0;   ///< int_0^T I_t dt
};

/// lambda = N * #infections / int S I dt, gamma = #recoveries / int I dt.
/// Throws ZeroExposure when an exposure integral is zero.
[[nodiscard]] JumpMle jump_mle(const JumpTrajectory& traj);

/// True when N - S_T, the number ever infected, reaches threshold_frac * N.
[[nodiscard]] bool emergence_filter(const JumpTrajectory& traj, double threshold_frac = 0.10);

}  // namespace smallnoise
