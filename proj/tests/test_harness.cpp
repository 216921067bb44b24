#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smallnoise/errors.hpp"
#include "smallnoise/harness.hpp"
#include "smallnoise/rng.hpp"
#include "smallnoise/simulate.hpp"
#include "support.hpp"

using namespace smallnoise;
using nlohmann::json;
using testing::vec;

namespace {

json cir_doc() {
  return json{{"model", "cir"},
              {"alpha0", {1.0}},
              {"beta0", {1.0}},
              {"x0", {1.0}},
              {"epsilon", 0.05},
              {"horizon", 1.0},
              {"n_values", {10, 20}},
              {"estimators", {"cls", "weighted_multiplicative", "small_delta"}},
              {"replicates", 4},
              {"base_seed", 42},
              {"alpha_box", {{"lower", {0.1}}, {"upper", {3.0}}}},
              {"beta_box", {{"lower", {0.1}}, {"upper", {3.0}}}},
              {"sim_substeps", 20},
              {"flow_substeps", 8},
              {"info_mesh_steps", 200}};
}

json sir_doc() {
  return json{{"model", "sir"},
              {"alpha0", {0.9, 0.3}},
              {"population", 100},
              {"initial_infected", 2},
              {"horizon", 20.0},
              {"n_values", {10}},
              {"estimators", {"mle", "cls"}},
              {"replicates", 5},
              {"base_seed", 3},
              {"emergence_filter", true},
              {"alpha_box", {{"lower", {0.05, 0.05}}, {"upper", {3.0, 3.0}}}},
              {"flow_substeps", 8},
              {"info_mesh_steps", 200}};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("smallnoise_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_or_both_nan(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

TEST_CASE("estimator catalog") {
  CHECK(estimator_label("mle") == 0);
  CHECK(estimator_label("cls") == 1);
  CHECK(estimator_label("weighted_beta0") == 2);
  CHECK(estimator_label("weighted_link") == 3);
  CHECK(estimator_label("small_delta") == 4);
  CHECK_THROWS_AS((void)estimator_label("nope"), ConfigError);

  CHECK(resolve_estimator("weighted_link", "sir", Vec()).link.kind == LinkKind::beta_equals_f_alpha);
  CHECK(resolve_estimator("weighted_beta0", "two_factor", vec({1.0, 1.0, 0.3})).kind == ContrastKind::weighted_link);
  CHECK(resolve_estimator("weighted_multiplicative", "cir", Vec()).kind == ContrastKind::weighted_multiplicative);
  CHECK_THROWS_AS((void)resolve_estimator("weighted_link", "two_factor", Vec()), ConfigError);
  CHECK_THROWS_AS((void)resolve_estimator("weighted_multiplicative", "sir", Vec()), ConfigError);
  CHECK_THROWS_AS((void)resolve_estimator("weighted_beta0", "two_factor", vec({1.0})), ConfigError);
  CHECK_THROWS_AS((void)resolve_estimator("mle", "sir", Vec()), ConfigError);
  CHECK(alpha_names("two_factor") == std::vector<std::string>{"mu1", "mu2", "m"});
  CHECK(beta_names("sir").size() == 2);
}

TEST_CASE("config parsing and validation") {
  const ExperimentConfig c = ExperimentConfig::from_json(cir_doc());
  CHECK(c.n_values == std::vector<int>{10, 20});
  CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());

  const ExperimentConfig s = ExperimentConfig::from_json(sir_doc());
  CHECK(s.epsilon == doctest::Approx(0.1));
  CHECK(s.x0 == vec({0.98, 0.02}));
  CHECK(s.beta0 == s.alpha0);

  auto rejects = [](json doc) {
    CHECK_THROWS_AS((void)ExperimentConfig::from_json(doc), ConfigError);
  };
  json d = cir_doc();
  d["typo"] = 1;
  rejects(d);
  d = cir_doc();
  d.erase("x0");
  rejects(d);
  d = cir_doc();
  d["alpha0"] = {5.0};
  rejects(d);
  d = cir_doc();
  d["estimators"] = json::array();
  rejects(d);
  d = cir_doc();
  d["estimators"] = {"mle"};
  rejects(d);
  d = cir_doc();
  d["estimators"] = {"cls", "cls"};
  rejects(d);
  d = cir_doc();
  d["n_values"] = {10, 10};
  rejects(d);
  d = cir_doc();
  d["replicates"] = 0;
  rejects(d);
  d = cir_doc();
  d["model"] = "heston";
  rejects(d);
  d = cir_doc();
  d["epsilon"] = "small";
  rejects(d);
  d = cir_doc();
  d["emergence_filter"] = true;
  rejects(d);
  d = sir_doc();
  d["initial_infected"] = 100;
  rejects(d);
  d = cir_doc();
  d["comment"] = "free text";
  CHECK_NOTHROW((void)ExperimentConfig::from_json(d));

  CHECK_THROWS_AS((void)ExperimentConfig::load("/nonexistent/config.json"), ConfigError);
  const auto dir = scratch("badjson");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "c.json") << "{ not json";
  CHECK_THROWS_AS((void)ExperimentConfig::load(dir / "c.json"), ConfigError);

  for (const auto& entry : std::filesystem::directory_iterator(std::filesystem::path(SMALLNOISE_CONFIG_DIR))) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW((void)ExperimentConfig::load(entry.path()));
  }
}

TEST_CASE("one replicate equals a direct estimate on stream 0") {
  json d = cir_doc();
  d["replicates"] = 1;
  d["n_values"] = {10};
  d["estimators"] = {"cls", "small_delta"};
  const ExperimentConfig c = ExperimentConfig::from_json(d);
  const ExperimentOutcome out = run_experiment(c);

  SeededRng rng(42, 0);
  const ObservedPath path =
      simulate_sde(builtin_cir(), c.alpha0, c.beta0, c.epsilon, c.x0, SamplingGrid(1.0, 10), c.sim_substeps, rng);
  EstimateOptions o;
  o.substeps = c.flow_substeps;
  o.info_mesh_steps = c.info_mesh_steps;
  const EstimationResult cls = minimize(ContrastKind::cls, builtin_cir(), builtin_link("cir"), path, c.alpha_box,
                                        c.beta_box, o);
  const EstimationResult sd = minimize(ContrastKind::small_delta, builtin_cir(), builtin_link("cir"), path,
                                       c.alpha_box, c.beta_box, o);

  const SummaryRow* row = out.summary.find("cls", 10, "alpha");
  REQUIRE(row);
  CHECK(row->mean == cls.alpha_hat[0]);
  CHECK(row->ci_halfwidth == cls.ci_95[0].half_width());
  CHECK(row->failures == 0);
  CHECK(row->sd == 0.0);
  REQUIRE(out.summary.find("small_delta", 10, "beta"));
  CHECK(out.summary.find("small_delta", 10, "beta")->mean == (*sd.beta_hat)[0]);
  CHECK(out.summary.find("small_delta", 10, "alpha")->mean == sd.alpha_hat[0]);
}

TEST_CASE("experiment invariants, determinism and reports") {
  const ExperimentConfig c = ExperimentConfig::from_json(cir_doc());
  const ExperimentOutcome a = run_experiment(c);
  ExperimentConfig c2 = c;
  c2.jobs = 2;
  const ExperimentOutcome b = run_experiment(c2);

  // cls and weighted: alpha at two n; small_delta: alpha and beta at two n.
  CHECK(a.summary.rows.size() == 8);
  for (const SummaryRow& r : a.summary.rows) {
    CAPTURE(r.kind);
    int successes = 0;
    for (const ReplicateRecord& rec : a.records) {
      if (rec.kind == r.kind && rec.n == r.n && rec.param == r.param && rec.error.empty()) ++successes;
    }
    CHECK(successes + r.failures == c.replicates);
    if (!std::isnan(r.coverage)) {
      CHECK(r.coverage >= 0.0);
      CHECK(r.coverage <= 1.0);
    }
  }

  std::ostringstream sa, sb;
  write_summary_csv(sa, a.summary);
  write_summary_csv(sb, b.summary);
  CHECK(sa.str() == sb.str());

  std::istringstream in(sa.str());
  const McSummary back = read_summary_csv(in);
  REQUIRE(back.rows.size() == a.summary.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    const SummaryRow& x = back.rows[i];
    const SummaryRow& y = a.summary.rows[i];
    CHECK(x.kind == y.kind);
    CHECK(x.n == y.n);
    CHECK(x.param == y.param);
    CHECK(same_or_both_nan(x.mean, y.mean));
    CHECK(same_or_both_nan(x.sd, y.sd));
    CHECK(same_or_both_nan(x.ci_halfwidth, y.ci_halfwidth));
    CHECK(same_or_both_nan(x.coverage, y.coverage));
    CHECK(x.failures == y.failures);
  }
  std::istringstream bad("kind,n\n");
  CHECK_THROWS_AS((void)read_summary_csv(bad), ConfigError);

  const auto d1 = scratch("report1");
  const auto d2 = scratch("report2");
  report(a, c, d1);
  report(b, c, d2);
  for (const char* f : {"summary.csv", "summary.json", "replicates.csv", "ci_plot.csv"}) {
    CAPTURE(f);
    REQUIRE(std::filesystem::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  const json doc = json::parse(slurp(d1 / "summary.json"));
  const json config_json = c.to_json();
  for (const auto& [key, value] : config_json.items()) {
    CAPTURE(key);
    CHECK(doc.at("config").contains(key));
  }
  CHECK(doc.at("rows").size() == 8);
  CHECK(doc.at("attempted") == 4);

  ExperimentOutcome empty;
  CHECK_THROWS_AS(report(empty, c, scratch("empty")), ConfigError);
}

TEST_CASE("SIR N = 100 with the emergence filter") {
  const ExperimentConfig c = ExperimentConfig::from_json(sir_doc());
  const ExperimentOutcome out = run_experiment(c);
  CHECK(out.attempted - out.filtered_out == c.replicates);
  std::set<std::uint64_t> streams;
  for (const ReplicateRecord& r : out.records) streams.insert(r.stream);
  CHECK(streams.size() == static_cast<std::size_t>(c.replicates));
  for (std::uint64_t s : streams) {
    SeededRng rng(c.base_seed, s);
    const JumpTrajectory t = simulate_gillespie_sir(100, 2, 0.9, 0.3, 20.0, rng);
    CHECK(100 - t.states.back()[0] >= 10);
  }
  REQUIRE(out.summary.find("mle", 0, "lambda"));
  REQUIRE(out.summary.find("cls", 10, "gamma"));
  CHECK(out.summary.find("mle", 0, "lambda")->failures <= c.replicates);
}
