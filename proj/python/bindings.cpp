#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "smallnoise/errors.hpp"
#include "smallnoise/estimate.hpp"
#include "smallnoise/harness.hpp"
#include "smallnoise/oracle.hpp"
#include "smallnoise/rng.hpp"
#include "smallnoise/simulate.hpp"

namespace py = pybind11;
namespace sn = smallnoise;

namespace {

sn::Vec to_vec(const std::vector<double>& v) {
  if (v.size() > static_cast<std::size_t>(sn::kMaxDim)) throw sn::ConfigError("vector longer than the supported maximum");
  sn::Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

py::array_t<double> states_to_array(const std::vector<sn::Vec>& states) {
  const auto rows = static_cast<py::ssize_t>(states.size());
  const auto cols = static_cast<py::ssize_t>(states.front().size());
  py::array_t<double> out({rows, cols});
  auto m = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < rows; ++i) {
    for (py::ssize_t j = 0; j < cols; ++j) m(i, j) = states[static_cast<std::size_t>(i)][j];
  }
  return out;
}

sn::ObservedPath path_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& obs,
                                 double horizon, double epsilon) {
  if (obs.ndim() != 2 || obs.shape(0) < 2) throw sn::ConfigError("observations must be a 2-D array with >= 2 rows");
  auto m = obs.unchecked<2>();
  std::vector<sn::Vec> states;
  for (py::ssize_t i = 0; i < obs.shape(0); ++i) {
    sn::Vec x(obs.shape(1));
    for (py::ssize_t j = 0; j < obs.shape(1); ++j) x[j] = m(i, j);
    states.push_back(x);
  }
  return sn::ObservedPath(sn::SamplingGrid(horizon, static_cast<int>(obs.shape(0)) - 1), std::move(states), epsilon);
}

py::array_t<double> grid_times(const sn::SamplingGrid& grid) {
  py::array_t<double> t(grid.n() + 1);
  auto m = t.mutable_unchecked<1>();
  for (int k = 0; k <= grid.n(); ++k) m(k) = grid.time(k);
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Minimum contrast estimation for small-noise diffusions";

  // Translators are tried newest first, so the subclass is registered last.
  py::register_exception<sn::Error>(m, "SmallNoiseError", PyExc_RuntimeError);
  py::register_exception<sn::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("model_ids", &sn::builtin_model_ids, "Identifiers of the built-in models.");

  m.def(
      "simulate_sde",
      [](const std::string& model, const std::vector<double>& alpha, const std::vector<double>& beta, double epsilon,
         const std::vector<double>& x0, double horizon, int n, int sim_substeps, std::uint64_t seed,
         std::uint64_t stream) {
        const sn::SamplingGrid grid(horizon, n);
        sn::SeededRng rng(seed, stream);
        std::vector<sn::Vec> states;
        {
          py::gil_scoped_release release;
          states = sn::simulate_sde_states(sn::builtin_model(model), to_vec(alpha), to_vec(beta), epsilon, to_vec(x0),
                                           grid, sim_substeps, rng);
        }
        return py::make_tuple(grid_times(grid), states_to_array(states));
      },
      py::arg("model"), py::arg("alpha"), py::arg("beta"), py::arg("epsilon"), py::arg("x0"), py::arg("horizon"),
      py::arg("n"), py::arg("sim_substeps") = 100, py::arg("seed") = 1, py::arg("stream") = 0,
      "Euler-Maruyama path sampled on n intervals; returns (t, states).");

  m.def(
      "simulate_sir",
      [](int population, int initial_infected, double lambda, double gamma, double horizon, std::uint64_t seed,
         std::uint64_t stream) {
        sn::SeededRng rng(seed, stream);
        const sn::JumpTrajectory t =
            sn::simulate_gillespie_sir(population, initial_infected, lambda, gamma, horizon, rng);
        std::vector<std::string> events;
        for (sn::JumpEvent e : t.events) events.emplace_back(e == sn::JumpEvent::infection ? "infection" : "recovery");
        std::vector<std::array<int, 2>> states(t.states.begin(), t.states.end());
        py::dict out;
        out["times"] = t.times;
        out["events"] = events;
        out["states"] = states;
        out["ever_infected"] = population - t.states.back()[0];
        const sn::JumpMle mle = sn::jump_mle(t);
        out["mle_lambda"] = mle.lambda ? py::cast(*mle.lambda) : py::none();
        out["mle_gamma"] = mle.gamma ? py::cast(*mle.gamma) : py::none();
        return out;
      },
      py::arg("population"), py::arg("initial_infected"), py::arg("lam"), py::arg("gamma"), py::arg("horizon"),
      py::arg("seed") = 1, py::arg("stream") = 0, "Gillespie SIR trajectory with its jump-process MLE.");

  m.def(
      "estimate_json",
      [](const std::string& model, const std::string& estimator,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& obs, double horizon, double epsilon,
         const std::vector<double>& alpha_lower, const std::vector<double>& alpha_upper,
         const std::vector<double>& beta_lower, const std::vector<double>& beta_upper,
         const std::vector<double>& beta0, int flow_substeps, int info_mesh_steps) {
        const sn::ObservedPath path = path_from_array(obs, horizon, epsilon);
        const sn::ModelSpec spec = sn::builtin_model(model);
        if (path.dim() != spec.p) throw sn::ConfigError("observation columns do not match the model dimension");
        const sn::EstimatorSetup setup = sn::resolve_estimator(estimator, model, to_vec(beta0));
        sn::EstimateOptions options;
        options.substeps = flow_substeps;
        options.info_mesh_steps = info_mesh_steps;
        const sn::ParamBox abox(to_vec(alpha_lower), to_vec(alpha_upper));
        const sn::ParamBox bbox(to_vec(beta_lower), to_vec(beta_upper));
        sn::EstimationResult r;
        {
          py::gil_scoped_release release;
          r = sn::minimize(setup.kind, spec, setup.link, path, abox, bbox, options);
        }
        nlohmann::json j = sn::to_json(r, model);
        j["estimator"] = estimator;
        return j.dump();
      },
      py::arg("model"), py::arg("estimator"), py::arg("obs"), py::arg("horizon"), py::arg("epsilon"),
      py::arg("alpha_lower"), py::arg("alpha_upper"), py::arg("beta_lower"), py::arg("beta_upper"),
      py::arg("beta0") = std::vector<double>{}, py::arg("flow_substeps") = 16, py::arg("info_mesh_steps") = 1000,
      "Minimum contrast estimate of an evenly sampled path; returns a JSON document.");

  m.def(
      "run_mc_json",
      [](const std::string& config_json, const std::string& out_dir) {
        const sn::ExperimentConfig c = sn::ExperimentConfig::from_json(nlohmann::json::parse(config_json));
        sn::ExperimentOutcome outcome;
        {
          py::gil_scoped_release release;
          outcome = sn::run_experiment(c);
          if (!out_dir.empty()) sn::report(outcome, c, out_dir);
        }
        nlohmann::json rows = nlohmann::json::array();
        for (const sn::SummaryRow& r : outcome.summary.rows) {
          auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
          rows.push_back({{"kind", r.kind}, {"n", r.n}, {"param", r.param}, {"mean", num(r.mean)}, {"sd", num(r.sd)},
                          {"ci_halfwidth", num(r.ci_halfwidth)}, {"coverage", num(r.coverage)},
                          {"failures", r.failures}});
        }
        return nlohmann::json{{"attempted", outcome.attempted}, {"filtered_out", outcome.filtered_out}, {"rows", rows}}
            .dump();
      },
      py::arg("config_json"), py::arg("out_dir") = std::string(),
      "Runs a Monte Carlo experiment from a JSON config; returns the summary as JSON.");

  m.def(
      "oracle",
      [] {
        py::list out;
        for (const auto& suite : {sn::cir_oracle_suite(), sn::ou_oracle_suite()}) {
          for (const sn::OracleCheck& c : suite) {
            py::dict d;
            d["name"] = c.name;
            d["computed"] = c.computed;
            d["expected"] = c.expected;
            d["error"] = c.error;
            d["passed"] = c.passed;
            out.append(d);
          }
        }
        return out;
      },
      "Closed-form CIR / OU checks.");

  m.def(
      "fisher_information",
      [](const std::string& model, const std::vector<double>& alpha, const std::vector<double>& beta,
         const std::vector<double>& x0, double horizon, int mesh_steps) {
        const sn::ModelSpec spec = sn::builtin_model(model);
        const sn::DMat ib = sn::info_I_b(spec, to_vec(alpha), to_vec(beta), to_vec(x0), horizon, mesh_steps);
        const sn::DMat is = sn::info_I_sigma(spec, to_vec(alpha), to_vec(beta), to_vec(x0), horizon, mesh_steps);
        auto to_array = [](const sn::DMat& mat) {
          py::array_t<double> a({mat.rows(), mat.cols()});
          auto v = a.mutable_unchecked<2>();
          for (Eigen::Index i = 0; i < mat.rows(); ++i)
            for (Eigen::Index j = 0; j < mat.cols(); ++j) v(i, j) = mat(i, j);
          return a;
        };
        return py::make_tuple(to_array(ib), to_array(is));
      },
      py::arg("model"), py::arg("alpha"), py::arg("beta"), py::arg("x0"), py::arg("horizon"),
      py::arg("mesh_steps") = 2000, "Continuous-observation information matrices (I_b, I_sigma).");
}
