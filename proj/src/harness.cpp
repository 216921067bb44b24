#include "smallnoise/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "smallnoise/errors.hpp"
#include "smallnoise/io.hpp"
#include "smallnoise/simulate.hpp"

namespace smallnoise {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using nlohmann::json;

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec to_vec(const json& j, std::string_view key) {
  if (!j.is_array()) throw ConfigError(fmt::format("'{}' must be an array of numbers", key));
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(fmt::format("'{}' must be an array of numbers", key));
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

ParamBox box_from_json(const json& j, std::string_view key) {
  if (!j.is_object() || !j.contains("lower") || !j.contains("upper")) {
    throw ConfigError(fmt::format("'{}' must be an object with 'lower' and 'upper'", key));
  }
  try {
    return ParamBox(to_vec(j.at("lower"), key), to_vec(j.at("upper"), key));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("'{}': {}", key, e.what()));
  }
}

json box_to_json(const ParamBox& box) {
  return json{{"lower", to_std(box.lower())}, {"upper", to_std(box.upper())}};
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("'{}' has the wrong type", key));
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "model",         "alpha0",      "beta0",           "x0",           "epsilon",          "population",
      "initial_infected", "horizon",  "n_values",        "estimators",   "replicates",       "reference_replicates",
      "base_seed",     "out_dir",     "emergence_filter", "emergence_threshold", "alpha_box", "beta_box",
      "sim_substeps",  "flow_substeps", "info_mesh_steps", "max_starts",  "refine_best",      "jobs",
      "comment"};
  return keys;
}

// One estimator as run by the harness: contrast kind, link and reported parameters.
struct EstimatorPlan {
  std::string name;
  ContrastKind kind = ContrastKind::cls;
  LinkSpec link;
  std::vector<std::string> params;
  std::vector<double> truth;
};

struct Plan {
  ModelSpec model;
  std::vector<EstimatorPlan> estimators;
  bool has_mle = false;
};

std::vector<std::string> jump_param_names() { return {"lambda", "gamma"}; }

Plan make_plan(const ExperimentConfig& c) {
  Plan plan;
  plan.model = builtin_model(c.model);
  const std::vector<std::string> an = alpha_names(c.model);
  const std::vector<std::string> bn = beta_names(c.model);
  for (const std::string& name : c.estimators) {
    if (name == "mle") {
      plan.has_mle = true;
      continue;
    }
    EstimatorPlan e;
    e.name = name;
    e.params = an;
    e.truth = to_std(c.alpha0);
    const EstimatorSetup setup = resolve_estimator(name, c.model, c.beta0);
    e.kind = setup.kind;
    e.link = setup.link;
    if (e.kind == ContrastKind::small_delta && e.link.kind != LinkKind::beta_equals_f_alpha) {
      e.params.insert(e.params.end(), bn.begin(), bn.end());
      const std::vector<double> bt = to_std(c.beta0);
      e.truth.insert(e.truth.end(), bt.begin(), bt.end());
    }
    plan.estimators.push_back(std::move(e));
  }
  return plan;
}

std::vector<int> kind_n_values(const ExperimentConfig& c, std::string_view name) {
  if (name == "mle") return {0};
  return c.n_values;
}

std::vector<std::string> kind_params(const Plan& plan, std::string_view name) {
  if (name == "mle") return jump_param_names();
  for (const EstimatorPlan& e : plan.estimators) {
    if (e.name == name) return e.params;
  }
  return {};
}

EstimateOptions estimate_options(const ExperimentConfig& c) {
  EstimateOptions o;
  o.substeps = c.flow_substeps;
  o.info_mesh_steps = c.info_mesh_steps;
  o.search.max_starts = c.max_starts;
  o.search.refine_best = c.refine_best;
  return o;
}

int lcm_of(const std::vector<int>& values) {
  long long l = 1;
  for (int v : values) {
    l = std::lcm(l, static_cast<long long>(v));
    if (l > 1000000) throw ConfigError("least common multiple of n_values exceeds 1e6");
  }
  return static_cast<int>(l);
}

Vec sir_x0(const ExperimentConfig& c) {
  Vec x0(2);
  x0 << 1.0 - static_cast<double>(c.initial_infected) / c.population,
      static_cast<double>(c.initial_infected) / c.population;
  return x0;
}

void run_estimators(const ExperimentConfig& c, const Plan& plan, const ObservedPath& path, int replicate,
                    std::uint64_t stream, std::vector<ReplicateRecord>& out) {
  const EstimateOptions options = estimate_options(c);
  for (const EstimatorPlan& e : plan.estimators) {
    std::string error;
    EstimationResult result;
    try {
      result = minimize(e.kind, plan.model, e.link, path, c.alpha_box, c.beta_box, options);
    } catch (const std::exception& ex) {
      error = ex.what();
    }
    for (std::size_t i = 0; i < e.params.size(); ++i) {
      ReplicateRecord rec;
      rec.replicate = replicate;
      rec.stream = stream;
      rec.kind = e.name;
      rec.n = path.n();
      rec.param = e.params[i];
      rec.truth = e.truth[i];
      rec.error = error;
      if (error.empty()) {
        const auto a = static_cast<std::size_t>(result.alpha_hat.size());
        rec.estimate = i < a ? result.alpha_hat[static_cast<Eigen::Index>(i)]
                             : (*result.beta_hat)[static_cast<Eigen::Index>(i - a)];
        if (i < result.ci_95.size()) rec.ci = result.ci_95[i];
      } else {
        rec.estimate = kNaN;
      }
      out.push_back(std::move(rec));
    }
  }
}

void add_mle_records(const ExperimentConfig& c, const JumpTrajectory& traj, int replicate, std::uint64_t stream,
                     std::vector<ReplicateRecord>& out) {
  std::string error;
  JumpMle mle;
  try {
    mle = jump_mle(traj);
  } catch (const std::exception& ex) {
    error = ex.what();
  }
  const std::vector<std::string> names = jump_param_names();
  const std::array<std::optional<double>, 2> est{mle.lambda, mle.gamma};
  const std::array<int, 2> counts{traj.infections(), traj.recoveries()};
  for (std::size_t i = 0; i < 2; ++i) {
    ReplicateRecord rec;
    rec.replicate = replicate;
    rec.stream = stream;
    rec.kind = "mle";
    rec.n = 0;
    rec.param = names[i];
    rec.truth = c.alpha0[static_cast<Eigen::Index>(i)];
    rec.error = error;
    if (error.empty() && !est[i]) rec.error = fmt::format("no {} events", i == 0 ? "infection" : "recovery");
    if (rec.error.empty()) {
      rec.estimate = *est[i];
      // Observed information of a counting-process rate: count / rate^2.
      const double half = kZ95 * rec.estimate / std::sqrt(static_cast<double>(counts[i]));
      rec.ci = Interval{rec.estimate - half, rec.estimate + half, true};
    } else {
      rec.estimate = kNaN;
    }
    out.push_back(std::move(rec));
  }
}

std::vector<ReplicateRecord> run_replicate(const ExperimentConfig& c, const Plan& plan, int replicate,
                                           std::uint64_t stream) {
  std::vector<ReplicateRecord> out;
  SeededRng rng(c.base_seed, stream);
  if (c.is_jump_model()) {
    const JumpTrajectory traj =
        simulate_gillespie_sir(c.population, c.initial_infected, c.alpha0[0], c.alpha0[1], c.horizon, rng);
    if (plan.has_mle) add_mle_records(c, traj, replicate, stream, out);
    for (int n : c.n_values) {
      run_estimators(c, plan, discretize(traj, SamplingGrid(c.horizon, n), true), replicate, stream, out);
    }
    return out;
  }
  const int n_sim = lcm_of(c.n_values);
  std::optional<ObservedPath> full;
  std::string error;
  try {
    full = simulate_sde(plan.model, c.alpha0, c.beta0, c.epsilon, c.x0, SamplingGrid(c.horizon, n_sim),
                        c.sim_substeps, rng);
  } catch (const std::exception& ex) {
    error = ex.what();
  }
  for (int n : c.n_values) {
    if (full) {
      run_estimators(c, plan, full->subsample(n_sim / n), replicate, stream, out);
      continue;
    }
    for (const EstimatorPlan& e : plan.estimators) {
      for (std::size_t i = 0; i < e.params.size(); ++i) {
        ReplicateRecord rec{replicate, stream, e.name, n, e.params[i], e.truth[i], kNaN, {}, error};
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

// Streams whose trajectory passes the emergence filter, in stream order.
std::vector<std::uint64_t> accepted_streams(const ExperimentConfig& c, int& attempted) {
  std::vector<std::uint64_t> streams;
  attempted = 0;
  if (!c.is_jump_model() || !c.emergence_filter) {
    for (int r = 0; r < c.replicates; ++r) streams.push_back(static_cast<std::uint64_t>(r));
    attempted = c.replicates;
    return streams;
  }
  const long long cap = 1000LL * c.replicates + 1000;
  for (std::uint64_t s = 0; static_cast<int>(streams.size()) < c.replicates; ++s) {
    if (static_cast<long long>(s) >= cap) {
      throw Error(fmt::format("emergence filter kept only {} of {} trajectories", streams.size(), cap));
    }
    ++attempted;
    SeededRng rng(c.base_seed, s);
    const JumpTrajectory traj =
        simulate_gillespie_sir(c.population, c.initial_infected, c.alpha0[0], c.alpha0[1], c.horizon, rng);
    if (emergence_filter(traj, c.emergence_threshold)) streams.push_back(s);
  }
  return streams;
}

std::string csv_safe(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char ch) { return ch == ',' || ch == '\n' || ch == '\r'; }, ';');
  return s;
}

json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

const std::vector<EstimatorInfo>& estimator_catalog() {
  static const std::vector<EstimatorInfo> catalog{
      {"mle", 0},         {"cls", 1},         {"weighted_beta0", 2},
      {"weighted_link", 3}, {"small_delta", 4}, {"weighted_multiplicative", 6}};
  return catalog;
}

EstimatorSetup resolve_estimator(std::string_view name, std::string_view model_id, const Vec& beta0) {
  const LinkSpec builtin = builtin_link(model_id);
  if (name == "cls") return {ContrastKind::cls, builtin};
  if (name == "small_delta") return {ContrastKind::small_delta, builtin};
  if (name == "weighted_beta0") {
    if (beta0.size() != builtin_model(model_id).b) throw ConfigError("weighted_beta0 needs beta0 of the model's dimension");
    return {ContrastKind::weighted_link, LinkSpec::fixed_beta(beta0)};
  }
  if (name == "weighted_link") {
    if (builtin.kind != LinkKind::beta_equals_f_alpha) {
      throw ConfigError(fmt::format("weighted_link needs a beta = f(alpha) model, '{}' is not one", model_id));
    }
    return {ContrastKind::weighted_link, builtin};
  }
  if (name == "weighted_multiplicative") {
    if (builtin.kind != LinkKind::multiplicative) {
      throw ConfigError(fmt::format("weighted_multiplicative needs a multiplicative model, '{}' is not one", model_id));
    }
    return {ContrastKind::weighted_multiplicative, builtin};
  }
  if (name == "mle") throw ConfigError("mle needs the jump trajectory (SIR only)");
  throw ConfigError(fmt::format("unknown estimator '{}'", name));
}

json to_json(const EstimationResult& result, std::string_view model_id) {
  const std::vector<std::string> an = alpha_names(model_id);
  const std::vector<std::string> bn = beta_names(model_id);
  auto matrix = [](const DMat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
      rows.push_back(row);
    }
    return rows;
  };
  auto interval = [&](std::size_t i) {
    if (i >= result.ci_95.size() || !result.ci_95[i].available) return json(nullptr);
    return json{{"lower", result.ci_95[i].lower}, {"upper", result.ci_95[i].upper}};
  };
  json params = json::array();
  for (std::size_t i = 0; i < an.size(); ++i) {
    params.push_back({{"name", an[i]}, {"estimate", result.alpha_hat[static_cast<Eigen::Index>(i)]}, {"ci_95", interval(i)}});
  }
  if (result.beta_hat) {
    for (std::size_t i = 0; i < bn.size(); ++i) {
      const std::size_t slot = an.size() + i;
      params.push_back({{"name", bn[i]},
                        {"estimate", (*result.beta_hat)[static_cast<Eigen::Index>(i)]},
                        {"ci_95", result.ci_95.size() > an.size() ? interval(slot) : json(nullptr)}});
    }
  }
  return json{{"kind", std::string(to_string(result.kind))},
              {"parameters", params},
              {"beta_plugin", to_std(result.beta_plugin)},
              {"contrast_min", nan_to_null(result.contrast_min)},
              {"info_alpha", matrix(result.info_alpha)},
              {"info_beta", matrix(result.info_beta)},
              {"cov_alpha", matrix(result.cov_alpha)},
              {"cov_beta", matrix(result.cov_beta)},
              {"optimizer",
               {{"iterations", result.optimizer.iterations},
                {"restarts", result.optimizer.restarts},
                {"converged", result.optimizer.converged}}}};
}

int estimator_label(std::string_view name) {
  for (const EstimatorInfo& e : estimator_catalog()) {
    if (e.name == name) return e.label;
  }
  throw ConfigError(fmt::format("unknown estimator '{}'", name));
}

std::vector<std::string> alpha_names(std::string_view model_id) {
  if (model_id == "ou" || model_id == "cir") return {"alpha"};
  if (model_id == "two_factor") return {"mu1", "mu2", "m"};
  if (model_id == "sir") return {"lambda", "gamma"};
  throw ConfigError(fmt::format("unknown model '{}'", model_id));
}

std::vector<std::string> beta_names(std::string_view model_id) {
  if (model_id == "ou" || model_id == "cir") return {"beta"};
  if (model_id == "two_factor") return {"kappa1_sq", "kappa2_sq", "rho"};
  if (model_id == "sir") return {"beta_lambda", "beta_gamma"};
  throw ConfigError(fmt::format("unknown model '{}'", model_id));
}

void ExperimentConfig::validate() const {
  const ModelSpec spec = builtin_model(model);
  if (alpha0.size() != spec.a) throw ConfigError(fmt::format("alpha0 needs {} entries for '{}'", spec.a, model));
  if (beta0.size() != spec.b) throw ConfigError(fmt::format("beta0 needs {} entries for '{}'", spec.b, model));
  if (alpha_box.size() != spec.a) throw ConfigError("alpha_box dimension does not match the model");
  if (beta_box.size() != spec.b) throw ConfigError("beta_box dimension does not match the model");
  if (!alpha_box.contains(alpha0)) throw ConfigError("alpha_box does not contain alpha0");
  if (!beta_box.contains(beta0)) throw ConfigError("beta_box does not contain beta0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  if (is_jump_model()) {
    if (!(population > 0 && initial_infected > 0 && initial_infected < population)) {
      throw ConfigError("SIR needs 0 < initial_infected < population");
    }
    if (!(emergence_threshold >= 0.0 && emergence_threshold <= 1.0)) {
      throw ConfigError("emergence_threshold must lie in [0, 1]");
    }
  } else {
    if (x0.size() != spec.p) throw ConfigError(fmt::format("x0 needs {} entries for '{}'", spec.p, model));
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
    if (emergence_filter) throw ConfigError("emergence_filter applies to SIR only");
  }
  if (n_values.empty()) throw ConfigError("n_values is empty");
  for (int n : n_values) {
    if (n < 1) throw ConfigError("every n in n_values must be >= 1");
  }
  if (std::set<int>(n_values.begin(), n_values.end()).size() != n_values.size()) {
    throw ConfigError("n_values contains duplicates");
  }
  if (!is_jump_model()) (void)lcm_of(n_values);
  if (estimators.empty()) throw ConfigError("estimator list is empty");
  std::set<std::string> seen;
  for (const std::string& e : estimators) {
    (void)estimator_label(e);
    if (!seen.insert(e).second) throw ConfigError(fmt::format("estimator '{}' listed twice", e));
    if (e == "mle" && !is_jump_model()) throw ConfigError("mle needs the jump trajectory (SIR only)");
    if (e != "mle") (void)resolve_estimator(e, model, beta0);
  }
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (sim_substeps < 1 || flow_substeps < 1 || info_mesh_steps < 2) throw ConfigError("step counts must be positive");
  if (max_starts < 1 || refine_best < 1) throw ConfigError("max_starts and refine_best must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

json ExperimentConfig::to_json() const {
  json j{{"model", model},
         {"alpha0", to_std(alpha0)},
         {"beta0", to_std(beta0)},
         {"x0", to_std(x0)},
         {"epsilon", epsilon},
         {"population", population},
         {"initial_infected", initial_infected},
         {"horizon", horizon},
         {"n_values", n_values},
         {"estimators", estimators},
         {"replicates", replicates},
         {"reference_replicates", reference_replicates ? json(*reference_replicates) : json(nullptr)},
         {"base_seed", base_seed},
         {"out_dir", out_dir},
         {"emergence_filter", emergence_filter},
         {"emergence_threshold", emergence_threshold},
         {"alpha_box", box_to_json(alpha_box)},
         {"beta_box", box_to_json(beta_box)},
         {"sim_substeps", sim_substeps},
         {"flow_substeps", flow_substeps},
         {"info_mesh_steps", info_mesh_steps},
         {"max_starts", max_starts},
         {"refine_best", refine_best},
         {"jobs", jobs}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known_keys().count(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
  }
  for (const char* key : {"model", "alpha0", "n_values", "estimators", "alpha_box"}) {
    if (!doc.contains(key)) throw ConfigError(fmt::format("config is missing '{}'", key));
  }
  ExperimentConfig c;
  c.model = get_or<std::string>(doc, "model", "");
  (void)builtin_model(c.model);
  c.alpha0 = to_vec(doc.at("alpha0"), "alpha0");
  c.alpha_box = box_from_json(doc.at("alpha_box"), "alpha_box");
  c.horizon = get_or(doc, "horizon", c.horizon);
  c.n_values = get_or<std::vector<int>>(doc, "n_values", {});
  c.estimators = get_or<std::vector<std::string>>(doc, "estimators", {});
  c.replicates = get_or(doc, "replicates", c.replicates);
  if (doc.contains("reference_replicates") && !doc.at("reference_replicates").is_null()) {
    c.reference_replicates = get_or(doc, "reference_replicates", 0);
  }
  c.base_seed = get_or<std::uint64_t>(doc, "base_seed", c.base_seed);
  c.out_dir = get_or(doc, "out_dir", c.out_dir);
  c.emergence_filter = get_or(doc, "emergence_filter", c.emergence_filter);
  c.emergence_threshold = get_or(doc, "emergence_threshold", c.emergence_threshold);
  c.sim_substeps = get_or(doc, "sim_substeps", c.sim_substeps);
  c.flow_substeps = get_or(doc, "flow_substeps", c.flow_substeps);
  c.info_mesh_steps = get_or(doc, "info_mesh_steps", c.info_mesh_steps);
  c.max_starts = get_or(doc, "max_starts", c.max_starts);
  c.refine_best = get_or(doc, "refine_best", c.refine_best);
  c.jobs = get_or(doc, "jobs", c.jobs);

  if (c.is_jump_model()) {
    c.population = get_or(doc, "population", 0);
    c.initial_infected = get_or(doc, "initial_infected", 0);
    c.beta0 = doc.contains("beta0") ? to_vec(doc.at("beta0"), "beta0") : c.alpha0;
    c.beta_box = doc.contains("beta_box") ? box_from_json(doc.at("beta_box"), "beta_box") : c.alpha_box;
    if (c.population > 0 && c.initial_infected > 0 && c.initial_infected < c.population) c.x0 = sir_x0(c);
    if (c.population > 0) c.epsilon = 1.0 / std::sqrt(static_cast<double>(c.population));
  } else {
    for (const char* key : {"beta0", "x0", "epsilon", "beta_box"}) {
      if (!doc.contains(key)) throw ConfigError(fmt::format("config is missing '{}'", key));
    }
    c.beta0 = to_vec(doc.at("beta0"), "beta0");
    c.x0 = to_vec(doc.at("x0"), "x0");
    c.epsilon = get_or(doc, "epsilon", 0.0);
    c.beta_box = box_from_json(doc.at("beta_box"), "beta_box");
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", file.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", file.string(), e.what()));
  }
  return from_json(doc);
}

const SummaryRow* McSummary::find(std::string_view kind, int n, std::string_view param) const {
  for (const SummaryRow& r : rows) {
    if (r.kind == kind && r.n == n && r.param == param) return &r;
  }
  return nullptr;
}

McSummary aggregate(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records) {
  const Plan plan = make_plan(config);
  McSummary summary;
  for (const std::string& name : config.estimators) {
    for (int n : kind_n_values(config, name)) {
      for (const std::string& param : kind_params(plan, name)) {
        SummaryRow row;
        row.kind = name;
        row.n = n;
        row.param = param;
        std::vector<double> values;
        double half_sum = 0.0;
        int available = 0;
        int covered = 0;
        for (const ReplicateRecord& r : records) {
          if (r.kind != name || r.n != n || r.param != param) continue;
          if (!r.error.empty()) {
            ++row.failures;
            continue;
          }
          values.push_back(r.estimate);
          if (r.ci.available) {
            ++available;
            half_sum += r.ci.half_width();
            if (r.ci.contains(r.truth)) ++covered;
          }
        }
        const auto m = static_cast<double>(values.size());
        row.mean = values.empty() ? kNaN : std::accumulate(values.begin(), values.end(), 0.0) / m;
        if (values.size() > 1) {
          double ss = 0.0;
          for (double v : values) ss += (v - row.mean) * (v - row.mean);
          row.sd = std::sqrt(ss / (m - 1.0));
        } else {
          row.sd = values.empty() ? kNaN : 0.0;
        }
        row.ci_halfwidth = available > 0 ? half_sum / available : kNaN;
        row.coverage = available > 0 ? static_cast<double>(covered) / available : kNaN;
        summary.rows.push_back(std::move(row));
      }
    }
  }
  return summary;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Plan plan = make_plan(config);
  ExperimentOutcome outcome;
  const std::vector<std::uint64_t> streams = accepted_streams(config, outcome.attempted);
  outcome.filtered_out = outcome.attempted - static_cast<int>(streams.size());

  const int total = static_cast<int>(streams.size());
  std::vector<std::vector<ReplicateRecord>> slots(static_cast<std::size_t>(total));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < total; r = next++) {
      slots[static_cast<std::size_t>(r)] = run_replicate(config, plan, r, streams[static_cast<std::size_t>(r)]);
    }
  };
  const int threads = std::min(config.jobs, total);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& slot : slots) {
    for (auto& rec : slot) outcome.records.push_back(std::move(rec));
  }
  outcome.summary = aggregate(config, outcome.records);
  return outcome;
}

void write_summary_csv(std::ostream& out, const McSummary& summary) {
  out << "kind,n,param,mean,sd,ci_halfwidth,coverage,failures\n";
  for (const SummaryRow& r : summary.rows) {
    out << r.kind << ',' << r.n << ',' << r.param << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ','
        << format_double(r.ci_halfwidth) << ',' << format_double(r.coverage) << ',' << r.failures << '\n';
  }
}

McSummary read_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "kind,n,param,mean,sd,ci_halfwidth,coverage,failures") {
    throw ConfigError("summary CSV header mismatch");
  }
  McSummary summary;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw ConfigError(fmt::format("summary CSV row has {} columns, expected 8", cells.size()));
    try {
      SummaryRow r;
      r.kind = cells[0];
      r.n = std::stoi(cells[1]);
      r.param = cells[2];
      r.mean = std::stod(cells[3]);
      r.sd = std::stod(cells[4]);
      r.ci_halfwidth = std::stod(cells[5]);
      r.coverage = std::stod(cells[6]);
      r.failures = std::stoi(cells[7]);
      summary.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError(fmt::format("summary CSV row is malformed: {}", line));
    }
  }
  return summary;
}

void report(const ExperimentOutcome& outcome, const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  if (outcome.summary.rows.empty()) throw ConfigError("summary is empty");
  std::filesystem::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) throw Error(fmt::format("cannot write '{}'", (out_dir / name).string()));
    return f;
  };

  {
    std::ofstream f = open("summary.csv");
    write_summary_csv(f, outcome.summary);
  }
  {
    json rows = json::array();
    for (const SummaryRow& r : outcome.summary.rows) {
      rows.push_back(json{{"kind", r.kind},
                          {"label", estimator_label(r.kind)},
                          {"n", r.n},
                          {"param", r.param},
                          {"mean", nan_to_null(r.mean)},
                          {"sd", nan_to_null(r.sd)},
                          {"ci_halfwidth", nan_to_null(r.ci_halfwidth)},
                          {"coverage", nan_to_null(r.coverage)},
                          {"failures", r.failures}});
    }
    const json doc{{"config", config.to_json()},
                   {"replicates", config.replicates},
                   {"attempted", outcome.attempted},
                   {"filtered_out", outcome.filtered_out},
                   {"rows", rows}};
    std::ofstream f = open("summary.json");
    f << doc.dump(2) << '\n';
  }
  {
    std::ofstream f = open("replicates.csv");
    f << "replicate,base_seed,stream,kind,n,param,truth,estimate,ci_lower,ci_upper,ci_available,error\n";
    for (const ReplicateRecord& r : outcome.records) {
      f << r.replicate << ',' << config.base_seed << ',' << r.stream << ',' << r.kind << ',' << r.n << ',' << r.param
        << ',' << format_double(r.truth) << ',' << format_double(r.estimate) << ','
        << format_double(r.ci.available ? r.ci.lower : kNaN) << ','
        << format_double(r.ci.available ? r.ci.upper : kNaN) << ',' << (r.ci.available ? 1 : 0) << ','
        << csv_safe(r.error) << '\n';
    }
  }
  {
    std::ofstream f = open("ci_plot.csv");
    f << "label,kind,n,param,truth,mean,ci_lower,ci_upper\n";
    for (const SummaryRow& r : outcome.summary.rows) {
      double truth = kNaN;
      for (const ReplicateRecord& rec : outcome.records) {
        if (rec.kind == r.kind && rec.param == r.param) {
          truth = rec.truth;
          break;
        }
      }
      f << estimator_label(r.kind) << ',' << r.kind << ',' << r.n << ',' << r.param << ',' << format_double(truth)
        << ',' << format_double(r.mean) << ',' << format_double(r.mean - r.ci_halfwidth) << ','
        << format_double(r.mean + r.ci_halfwidth) << '\n';
    }
  }
}

}  // namespace smallnoise
