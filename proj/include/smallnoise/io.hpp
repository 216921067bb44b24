#pragma once

#include <iosfwd>
#include <string>

#include "smallnoise/contrasts.hpp"
#include "smallnoise/simulate.hpp"

namespace smallnoise {

/// Round-trip text form of a double.
[[nodiscard]] std::string format_double(double v);

/// Header `t,x1,...,xp`, one row per grid time including t_0.
void write_path_csv(std::ostream& out, const ObservedPath& path);

/// Parses a path CSV. The time column must start at 0 and be evenly spaced.
/// Throws ConfigError on malformed input.
[[nodiscard]] ObservedPath read_path_csv(std::istream& in, double epsilon);

/// Header `t,event,S,I`; the first row carries the initial state with event `start`.
void write_jump_csv(std::ostream& out, const JumpTrajectory& traj);

}  // namespace smallnoise
