#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "noisyei/acq.hpp"
#include "noisyei/bench.hpp"
#include "noisyei/errors.hpp"
#include "noisyei/normal.hpp"
#include "noisyei/problems.hpp"
#include "noisyei/study.hpp"

namespace py = pybind11;
using namespace nei;

namespace {

MetricModels make_models(const GPModel& objective, const std::vector<GPModel>& constraints) {
  return MetricModels{objective, constraints};
}

// Study wrapper holding a value-typed state so Python sees a mutable object.
class Study {
 public:
  Study(const std::vector<std::tuple<std::string, double, double, bool>>& dims, std::size_t num_constraints,
        std::uint64_t seed, bool maximize, std::size_t init_size) {
    SearchSpace space;
    for (const auto& [name, lo, hi, integer] : dims) space.dims.push_back({name, lo, hi, integer});
    StudyConfig config;
    config.seed = seed;
    config.maximize = maximize;
    config.init_size = init_size;
    state_ = create_study(std::move(space), num_constraints, config);
  }
  explicit Study(StudyState state) : state_(std::move(state)) {}

  std::vector<Vector> suggest(std::size_t q) {
    auto s = nei::suggest(state_, q);
    state_ = std::move(s.state);
    return s.candidates;
  }

  void tell(const Vector& x, std::pair<double, double> objective,
            const std::vector<std::pair<double, double>>& constraints, const std::string& tag) {
    TrialRecord t;
    t.x = x;
    t.status = TrialStatus::completed;
    t.objective = Measurement{objective.first, objective.second};
    for (const auto& [m, s] : constraints) t.constraints.push_back({m, s});
    t.tag = tag;
    state_ = nei::tell(state_, {t});
  }

  py::dict best(const std::string& rule, std::optional<double> baseline, double delta) const {
    std::optional<IdentifiedTrial> pick;
    if (rule == "expected-reduction") {
      pick = identify_best_expected_reduction(state_, baseline);
    } else if (rule == "confident-feasible") {
      pick = identify_best_confident_feasible(state_, delta);
    } else {
      throw InvalidArgument("unknown rule '" + rule + "'");
    }
    py::dict out;
    if (!pick) return out;
    out["trial"] = pick->trial;
    out["x"] = state_.trials[pick->trial].x;
    out["score"] = pick->score;
    out["feasibility"] = pick->feasibility;
    out["mu_f"] = pick->mu_f;
    return out;
  }

  std::size_t completed() const { return state_.count(TrialStatus::completed); }
  std::size_t pending() const { return state_.count(TrialStatus::pending); }
  std::string to_json() const { return nei::to_json(state_); }
  static Study from_json(const std::string& text) { return Study(nei::from_json(text)); }
  void save(const std::string& path) const { nei::save(state_, path); }
  static Study load(const std::string& path) { return Study(nei::load(path)); }

 private:
  StudyState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Noisy expected improvement for constrained Bayesian optimization";

  py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<InsufficientData>(m, "InsufficientData");
  py::register_exception<ConditioningError>(m, "ConditioningError");
  py::register_exception<UnsupportedDimension>(m, "UnsupportedDimension", PyExc_ValueError);
  py::register_exception<OptimizationFailure>(m, "OptimizationFailure");
  py::register_exception<ParseError>(m, "ParseError");
  py::register_exception<IncompatibleVersion>(m, "IncompatibleVersion");

  m.def("normal_cdf", &normal_cdf);
  m.def("inv_normal_cdf", &inv_normal_cdf);

  py::class_<SobolGenerator>(m, "SobolGenerator")
      .def(py::init<std::size_t, std::optional<std::uint64_t>, std::size_t>(), py::arg("dimension"),
           py::arg("scramble_seed") = std::nullopt, py::arg("skip") = 0)
      .def("draw", &SobolGenerator::draw, py::arg("count"))
      .def_property_readonly("dimension", &SobolGenerator::dimension);

  py::class_<KernelParams>(m, "KernelParams")
      .def(py::init([](Vector ls, double sv, double mean) { return KernelParams{std::move(ls), sv, mean}; }),
           py::arg("lengthscales"), py::arg("signal_variance") = 1.0, py::arg("mean_constant") = 0.0)
      .def_readwrite("lengthscales", &KernelParams::lengthscales)
      .def_readwrite("signal_variance", &KernelParams::signal_variance)
      .def_readwrite("mean_constant", &KernelParams::mean_constant);

  py::class_<NoisyDataset>(m, "NoisyDataset")
      .def(py::init([](Matrix x, Vector y, Vector sd) { return NoisyDataset{std::move(x), std::move(y), std::move(sd)}; }),
           py::arg("points"), py::arg("means"), py::arg("noise_sds"))
      .def_readonly("points", &NoisyDataset::points)
      .def_readonly("means", &NoisyDataset::means)
      .def_readonly("noise_sds", &NoisyDataset::noise_sds);

  py::class_<Bounds>(m, "Bounds")
      .def(py::init([](Vector lo, Vector hi) { return Bounds{std::move(lo), std::move(hi)}; }), py::arg("lower"),
           py::arg("upper"))
      .def_static("unit_cube", &Bounds::unit_cube)
      .def_readonly("lower", &Bounds::lower)
      .def_readonly("upper", &Bounds::upper);

  m.def("matern52", &matern52, py::arg("x"), py::arg("x2"), py::arg("params"));

  py::class_<GPModel>(m, "GPModel")
      .def(py::init<KernelParams, NoisyDataset>(), py::arg("params"), py::arg("data"))
      .def_property_readonly("params", &GPModel::params)
      .def("posterior", [](const GPModel& g, const Matrix& q) {
        auto p = g.posterior(q);
        return py::make_tuple(p.mean, p.cov);
      })
      .def("predict", [](const GPModel& g, const Vector& x) {
        auto p = g.predict(x);
        return py::make_tuple(p.mean, p.variance);
      });

  m.def(
      "fit_map",
      [](const NoisyDataset& data, const Bounds& bounds, std::uint64_t seed) {
        FitOptions o;
        o.seed = seed;
        return fit_map(data, bounds, o);
      },
      py::arg("data"), py::arg("bounds"), py::arg("seed") = 0);

  m.def("ei_analytic", &ei_analytic, py::arg("mu"), py::arg("sigma"), py::arg("best"));
  m.def(
      "eix",
      [](double mu_f, double sigma_f, const std::vector<std::pair<double, double>>& constraints,
         std::optional<double> incumbent, double penalty_m) {
        EIxInputs in{mu_f, sigma_f, {}, incumbent, penalty_m};
        for (const auto& [mu, sd] : constraints) in.constraints.push_back({mu, sd});
        return eix(in);
      },
      py::arg("mu_f"), py::arg("sigma_f"), py::arg("constraints") = std::vector<std::pair<double, double>>{},
      py::arg("incumbent") = std::nullopt, py::arg("penalty_m") = 0.0);

  py::enum_<FantasyMode>(m, "FantasyMode")
      .value("noisy_ei", FantasyMode::noisy_ei)
      .value("plug_in", FantasyMode::plug_in);
  py::enum_<SamplingMethod>(m, "SamplingMethod").value("qmc", SamplingMethod::qmc).value("mc", SamplingMethod::mc);

  m.def(
      "nei_at",
      [](const GPModel& objective, const std::vector<GPModel>& constraints, const Matrix& pending,
         const Matrix& queries, std::size_t samples, std::uint64_t seed, double penalty_m, FantasyMode mode) {
        const auto models = make_models(objective, constraints);
        SobolGenerator source(fantasy_dimension(models, pending.rows()), seed);
        const auto fs = prepare_fantasies(models, pending, samples, source, penalty_m, mode);
        Vector out(queries.rows());
        for (Eigen::Index i = 0; i < queries.rows(); ++i) out(i) = nei::nei(queries.row(i).transpose(), fs);
        return out;
      },
      py::arg("objective"), py::arg("constraints"), py::arg("pending"), py::arg("queries"),
      py::arg("samples") = 32, py::arg("seed") = 0, py::arg("penalty_m") = 0.0,
      py::arg("mode") = FantasyMode::noisy_ei);

  py::class_<BatchOptions>(m, "BatchOptions")
      .def(py::init<>())
      .def_readwrite("bounds", &BatchOptions::bounds)
      .def_readwrite("q", &BatchOptions::q)
      .def_readwrite("restarts", &BatchOptions::restarts)
      .def_readwrite("samples", &BatchOptions::samples)
      .def_readwrite("scan_points", &BatchOptions::scan_points)
      .def_readwrite("seed", &BatchOptions::seed)
      .def_readwrite("mode", &BatchOptions::mode)
      .def_readwrite("sampling", &BatchOptions::sampling);

  m.def(
      "generate_batch",
      [](const GPModel& objective, const std::vector<GPModel>& constraints, const Matrix& pending,
         const BatchOptions& options) { return generate_batch(make_models(objective, constraints), pending, options); },
      py::arg("objective"), py::arg("constraints"), py::arg("pending"), py::arg("options"));

  m.def("problem_names", &problem_names);
  m.def("problem_info", [](const std::string& name) {
    const auto& p = get_problem(name);
    py::dict d;
    d["name"] = p.name;
    d["dim"] = p.dim();
    d["lower"] = p.space.bounds().lower;
    d["upper"] = p.space.bounds().upper;
    d["num_constraints"] = p.num_constraints;
    d["objective_noise_sd"] = p.objective_noise_sd;
    d["constraint_noise_sds"] = p.constraint_noise_sds;
    d["optimum_x"] = p.optimum.x;
    d["optimum_f"] = p.optimum.f;
    return d;
  });
  m.def("evaluate_true", [](const std::string& name, const Vector& x) {
    const auto e = evaluate_true(get_problem(name), x);
    return py::make_tuple(e.objective, e.constraints);
  });

  py::class_<Study>(m, "Study")
      .def(py::init<const std::vector<std::tuple<std::string, double, double, bool>>&, std::size_t, std::uint64_t,
                    bool, std::size_t>(),
           py::arg("dims"), py::arg("num_constraints") = 0, py::arg("seed") = 0, py::arg("maximize") = false,
           py::arg("init_size") = 0)
      .def("suggest", &Study::suggest, py::arg("q") = 1)
      .def("tell", &Study::tell, py::arg("x"), py::arg("objective"),
           py::arg("constraints") = std::vector<std::pair<double, double>>{}, py::arg("tag") = "")
      .def("best", &Study::best, py::arg("rule") = "expected-reduction", py::arg("baseline") = std::nullopt,
           py::arg("delta") = 0.05)
      .def_property_readonly("completed", &Study::completed)
      .def_property_readonly("pending", &Study::pending)
      .def("to_json", &Study::to_json)
      .def_static("from_json", &Study::from_json)
      .def("save", &Study::save)
      .def_static("load", &Study::load);

  m.def(
      "run_qmc_study_csv",
      [](const std::string& problem, std::vector<std::size_t> sizes, std::size_t replicates, std::uint64_t seed,
         bool optimize) {
        QmcStudyOptions o;
        o.problem = problem;
        o.sample_sizes = std::move(sizes);
        o.replicates = replicates;
        o.seed = seed;
        o.optimize = optimize;
        py::gil_scoped_release release;
        return to_csv(run_qmc_study(o));
      },
      py::arg("problem") = "gramacy", py::arg("sample_sizes") = std::vector<std::size_t>{4, 8, 16, 32, 50, 64, 128},
      py::arg("replicates") = 100, py::arg("seed") = 0, py::arg("optimize") = true);

  m.def(
      "run_opt_benchmark_csv",
      [](std::vector<std::string> problems, std::size_t replicates, std::size_t batches, std::size_t batch_size,
         std::uint64_t seed, double noise_scale) {
        OptBenchmarkOptions o;
        o.problems = std::move(problems);
        o.replicates = replicates;
        o.batches = batches;
        o.batch_size = batch_size;
        o.seed = seed;
        o.noise_scale = noise_scale;
        py::gil_scoped_release release;
        return to_csv(run_opt_benchmark(o));
      },
      py::arg("problems") = std::vector<std::string>{"gramacy", "hartmann6"}, py::arg("replicates") = 20,
      py::arg("batches") = 9, py::arg("batch_size") = 5, py::arg("seed") = 0, py::arg("noise_scale") = 1.0);
}
