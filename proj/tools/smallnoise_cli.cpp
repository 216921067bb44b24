#include <cstdint>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "smallnoise/errors.hpp"
#include "smallnoise/estimate.hpp"
#include "smallnoise/harness.hpp"
#include "smallnoise/io.hpp"
#include "smallnoise/oracle.hpp"
#include "smallnoise/simulate.hpp"

namespace sn = smallnoise;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

json load_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw sn::ConfigError(fmt::format("cannot open config '{}'", file));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw sn::ConfigError(fmt::format("config '{}' is not valid JSON: {}", file, e.what()));
  }
}

void write_to(const std::string& out, const std::function<void(std::ostream&)>& fn) {
  if (out.empty() || out == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw sn::Error(fmt::format("cannot write '{}'", out));
  fn(f);
}

int lcm_of(const std::vector<int>& values) {
  int l = 1;
  for (int v : values) l = std::lcm(l, v);
  return l;
}

// Re-creates the data of one harness replicate at grid size lcm(n_values).
int cmd_simulate(const std::string& config_file, std::optional<std::uint64_t> seed, std::uint64_t stream,
                 const std::string& out, const std::string& jumps_out) {
  sn::ExperimentConfig c = sn::ExperimentConfig::load(config_file);
  if (seed) c.base_seed = *seed;
  sn::SeededRng rng(c.base_seed, stream);
  const sn::SamplingGrid grid(c.horizon, lcm_of(c.n_values));
  if (c.is_jump_model()) {
    const sn::JumpTrajectory traj =
        sn::simulate_gillespie_sir(c.population, c.initial_infected, c.alpha0[0], c.alpha0[1], c.horizon, rng);
    const sn::ObservedPath path = sn::discretize(traj, grid, true);
    write_to(out, [&](std::ostream& o) { sn::write_path_csv(o, path); });
    if (!jumps_out.empty()) write_to(jumps_out, [&](std::ostream& o) { sn::write_jump_csv(o, traj); });
    return kOk;
  }
  if (!jumps_out.empty()) throw sn::ConfigError("--jumps applies to SIR only");
  const sn::ObservedPath path = sn::simulate_sde(sn::builtin_model(c.model), c.alpha0, c.beta0, c.epsilon, c.x0, grid,
                                                 c.sim_substeps, rng);
  write_to(out, [&](std::ostream& o) { sn::write_path_csv(o, path); });
  return kOk;
}

sn::ParamBox box_from(const json& j, const char* key) {
  if (!j.contains(key)) throw sn::ConfigError(fmt::format("config is missing '{}'", key));
  const json& b = j.at(key);
  if (!b.is_object() || !b.contains("lower") || !b.contains("upper")) {
    throw sn::ConfigError(fmt::format("'{}' must be an object with 'lower' and 'upper'", key));
  }
  auto vec = [&](const json& a) {
    sn::Vec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
  };
  return sn::ParamBox(vec(b.at("lower")), vec(b.at("upper")));
}

// Reads model, epsilon (or population), estimators, boxes and search settings; other keys are ignored
// so an experiment config can be reused as is.
int cmd_estimate(const std::string& config_file, const std::string& path_file, const std::string& out) {
  const json doc = load_json(config_file);
  try {
    const std::string model_id = doc.at("model").get<std::string>();
    const sn::ModelSpec model = sn::builtin_model(model_id);
    double epsilon = 0.0;
    if (doc.contains("epsilon")) {
      epsilon = doc.at("epsilon").get<double>();
    } else if (doc.contains("population")) {
      epsilon = 1.0 / std::sqrt(doc.at("population").get<double>());
    } else {
      throw sn::ConfigError("config needs 'epsilon' (or 'population' for SIR)");
    }
    const sn::ParamBox alpha_box = box_from(doc, "alpha_box");
    const sn::ParamBox beta_box =
        doc.contains("beta_box") || model_id != "sir" ? box_from(doc, "beta_box") : alpha_box;
    sn::Vec beta0;
    if (doc.contains("beta0")) {
      const auto b = doc.at("beta0").get<std::vector<double>>();
      beta0 = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    }
    const auto estimators = doc.value("estimators", std::vector<std::string>{"cls"});
    if (estimators.empty()) throw sn::ConfigError("estimator list is empty");

    std::ifstream in(path_file);
    if (!in) throw sn::ConfigError(fmt::format("cannot open path '{}'", path_file));
    const sn::ObservedPath path = sn::read_path_csv(in, epsilon);
    if (path.dim() != model.p) {
      throw sn::ConfigError(fmt::format("path CSV has {} state columns but model '{}' has {}", path.dim(), model_id,
                                        model.p));
    }

    sn::EstimateOptions options;
    options.substeps = doc.value("flow_substeps", 16);
    options.info_mesh_steps = doc.value("info_mesh_steps", 1000);
    options.search.max_starts = doc.value("max_starts", 27);
    options.search.refine_best = doc.value("refine_best", 3);

    json results = json::array();
    for (const std::string& name : estimators) {
      if (name == "mle") continue;
      const sn::EstimatorSetup setup = sn::resolve_estimator(name, model_id, beta0);
      const sn::EstimationResult r = sn::minimize(setup.kind, model, setup.link, path, alpha_box, beta_box, options);
      json j = sn::to_json(r, model_id);
      j["estimator"] = name;
      results.push_back(std::move(j));
    }
    const json report{{"model", model_id}, {"n", path.n()}, {"epsilon", epsilon}, {"results", results}};
    write_to(out, [&](std::ostream& o) { o << report.dump(2) << '\n'; });
    return kOk;
  } catch (const json::exception& e) {
    throw sn::ConfigError(fmt::format("config '{}': {}", config_file, e.what()));
  }
}

int cmd_mc(const std::string& config_file, std::optional<std::uint64_t> seed, std::optional<int> replicates,
           const std::string& out, std::optional<int> jobs) {
  sn::ExperimentConfig c = sn::ExperimentConfig::load(config_file);
  if (seed) c.base_seed = *seed;
  if (replicates) c.replicates = *replicates;
  if (!out.empty()) c.out_dir = out;
  if (jobs) c.jobs = *jobs;
  c.validate();
  const sn::ExperimentOutcome outcome = sn::run_experiment(c);
  sn::report(outcome, c, c.out_dir);
  std::printf("%-24s %5s %-12s %12s %12s %12s %9s %8s\n", "kind", "n", "param", "mean", "sd", "ci_half", "coverage",
              "failures");
  for (const sn::SummaryRow& r : outcome.summary.rows) {
    std::printf("%-24s %5d %-12s %12.6g %12.6g %12.6g %9.3f %8d\n", r.kind.c_str(), r.n, r.param.c_str(), r.mean, r.sd,
                r.ci_halfwidth, r.coverage, r.failures);
  }
  if (outcome.filtered_out > 0) {
    std::printf("emergence filter dropped %d of %d trajectories\n", outcome.filtered_out, outcome.attempted);
  }
  std::printf("wrote %s/summary.csv\n", c.out_dir.c_str());
  return kOk;
}

int cmd_oracle() {
  bool all = true;
  for (const auto& suite : {sn::cir_oracle_suite(), sn::ou_oracle_suite()}) {
    for (const sn::OracleCheck& c : suite) {
      std::printf("%s %-36s computed=%.12g expected=%.12g err=%.3e\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                  c.computed, c.expected, c.error);
      all = all && c.passed;
    }
  }
  return all ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum contrast estimation for small-noise diffusions"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string path_file;
  std::string jumps_out;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<int> jobs;
  std::uint64_t stream = 0;

  auto* sim = app.add_subcommand("simulate", "Simulate one replicate of a config and write its path CSV");
  sim->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "Base seed (overrides the config)");
  sim->add_option("--stream", stream, "Replicate stream id");
  sim->add_option("--out", out, "Output path CSV (default stdout)");
  sim->add_option("--jumps", jumps_out, "SIR only: jump CSV output");

  auto* est = app.add_subcommand("estimate", "Estimate parameters from a path CSV");
  est->add_option("--config", config, "Estimation config (JSON)")->required()->check(CLI::ExistingFile);
  est->add_option("--path", path_file, "Path CSV with header t,x1,...,xp")->required();
  est->add_option("--out", out, "Output JSON (default stdout)");

  auto* mc = app.add_subcommand("mc", "Run a Monte Carlo experiment");
  mc->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  mc->add_option("--seed", seed, "Base seed (overrides the config)");
  mc->add_option("--replicates", replicates, "Replicate count (overrides the config)")->check(CLI::PositiveNumber);
  mc->add_option("--out", out, "Output directory (overrides the config)");
  mc->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  app.add_subcommand("oracle", "Run the closed-form CIR / OU checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config, seed, stream, out, jumps_out);
    if (est->parsed()) return cmd_estimate(config, path_file, out);
    if (mc->parsed()) return cmd_mc(config, seed, replicates, out, jobs);
    return cmd_oracle();
  } catch (const sn::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kRuntime;
  }
}
