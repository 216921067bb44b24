#include "smallnoise/io.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "smallnoise/errors.hpp"

namespace smallnoise {

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write_path_csv(std::ostream& out, const ObservedPath& path) {
  out << 't';
  for (int i = 1; i <= path.dim(); ++i) out << ",x" << i;
  out << '\n';
  for (int k = 0; k <= path.n(); ++k) {
    out << format_double(path.grid.time(k));
    const Vec& o = path.obs[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < o.size(); ++i) out << ',' << format_double(o[i]);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, int row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("path CSV row {}: '{}' is not a number", row, cell));
  }
}

}  // namespace

ObservedPath read_path_csv(std::istream& in, double epsilon) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("path CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  if (header.size() < 2 || header.front() != "t") {
    throw ConfigError("path CSV header must be t,x1,...,xp");
  }
  const int p = static_cast<int>(header.size()) - 1;
  if (p > kMaxDim) throw ConfigError(fmt::format("path CSV has {} state columns, at most {} supported", p, kMaxDim));

  std::vector<double> times;
  std::vector<Vec> obs;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (static_cast<int>(cells.size()) != p + 1) {
      throw ConfigError(fmt::format("path CSV row {} has {} columns, header has {}", row, cells.size(), p + 1));
    }
    times.push_back(parse_cell(cells[0], row));
    Vec o(p);
    for (int i = 0; i < p; ++i) o[i] = parse_cell(cells[static_cast<std::size_t>(i) + 1], row);
    obs.push_back(o);
  }
  if (obs.size() < 2) throw ConfigError("path CSV needs at least two rows");
  const int n = static_cast<int>(obs.size()) - 1;
  const double horizon = times.back();
  if (std::abs(times.front()) > 1e-12) throw ConfigError("path CSV must start at t = 0");
  const double delta = horizon / n;
  for (int k = 0; k <= n; ++k) {
    if (std::abs(times[static_cast<std::size_t>(k)] - k * delta) > 1e-9 * std::max(1.0, horizon)) {
      throw ConfigError(fmt::format("path CSV times are not evenly spaced at row {}", k + 2));
    }
  }
  return ObservedPath(SamplingGrid(horizon, n), std::move(obs), epsilon);
}

void write_jump_csv(std::ostream& out, const JumpTrajectory& traj) {
  out << "t,event,S,I\n";
  out << "0,start," << traj.states.front()[0] << ',' << traj.states.front()[1] << '\n';
  for (std::size_t j = 0; j < traj.times.size(); ++j) {
    const auto& st = traj.states[j + 1];
    out << format_double(traj.times[j]) << ',' << (traj.events[j] == JumpEvent::infection ? "infection" : "recovery")
        << ',' << st[0] << ',' << st[1] << '\n';
  }
}

}  // namespace smallnoise
