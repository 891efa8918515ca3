#include "iwkrr/error.hpp"
#include "iwkrr/estimators.hpp"
#include "iwkrr/experiment.hpp"
#include "iwkrr/kernel.hpp"
#include "iwkrr/model_io.hpp"
#include "iwkrr/sampling.hpp"
#include "iwkrr/simulation.hpp"
#include "iwkrr/weights.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace iwkrr;

namespace {

SampleSet samples(const Matrix& X, const std::optional<Vector>& y) {
    SampleSet s;
    s.X = X;
    s.y = y;
    return s;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Importance-weighted kernel ridge regression with Nyström subsampling";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::enum_<EstimatorKind>(m, "EstimatorKind")
        .value("KRR", EstimatorKind::KRR)
        .value("WKRR", EstimatorKind::WKRR)
        .value("NYSTROM_WKRR", EstimatorKind::NystromWKRR);
    py::enum_<SamplingMethod>(m, "SamplingMethod")
        .value("UNIFORM", SamplingMethod::Uniform)
        .value("ALS", SamplingMethod::ALS);

    m.def("gram", [](double gamma, const Matrix& A, const Matrix& B) { return gram(rbf(gamma), A, B); },
          py::arg("gamma"), py::arg("rows"), py::arg("cols"), "RBF Gram matrix exp(-gamma |a - b|^2).");

    py::class_<FittedModel>(m, "FittedModel")
        .def_readonly("kind", &FittedModel::kind)
        .def_readonly("lambda_", &FittedModel::lambda)
        .def_property_readonly("gamma", [](const FittedModel& f) { return f.kernel.gamma; })
        .def_readonly("centers", &FittedModel::centers)
        .def_readonly("coefficients", &FittedModel::coefficients)
        .def("predict", &FittedModel::predict, py::arg("X"))
        .def("to_json", [](const FittedModel& f) { return model_to_json(f); })
        .def_static("from_json", &model_from_json, py::arg("text"))
        .def("save", [](const FittedModel& f, const std::filesystem::path& p) { save_model(f, p); }, py::arg("path"))
        .def_static("load", &load_model, py::arg("path"));

    m.def("fit_krr",
          [](const Matrix& X, const Vector& y, double gamma, double lam) { return fit_krr(samples(X, y), rbf(gamma), lam); },
          py::arg("X"), py::arg("y"), py::arg("gamma"), py::arg("lam"));
    m.def("fit_wkrr",
          [](const Matrix& X, const Vector& y, const Vector& w, double gamma, double lam) {
              return fit_wkrr(samples(X, y), w, rbf(gamma), lam);
          },
          py::arg("X"), py::arg("y"), py::arg("weights"), py::arg("gamma"), py::arg("lam"));
    m.def("fit_nystrom_wkrr",
          [](const Matrix& X, const Vector& y, const Vector& w, const std::vector<Index>& centers, double gamma,
             double lam) {
              NystromBasis basis;
              basis.indices = centers;
              basis.m_requested = static_cast<Index>(centers.size());
              return fit_nystrom_wkrr(samples(X, y), w, basis, rbf(gamma), lam);
          },
          py::arg("X"), py::arg("y"), py::arg("weights"), py::arg("centers"), py::arg("gamma"), py::arg("lam"),
          "Nyström fit on the rows of X listed in `centers` (sorted, distinct, 0-based).");

    m.def("exact_leverage_scores", [](const Matrix& K, double t) { return exact_leverage_scores(K, t).scores; },
          py::arg("K"), py::arg("t"));
    m.def("approx_leverage_scores",
          [](const Matrix& X, double gamma, double t, Index m0, std::uint64_t seed) {
              return approx_leverage_scores(X, rbf(gamma), t, m0, seed).scores;
          },
          py::arg("X"), py::arg("gamma"), py::arg("t"), py::arg("m0"), py::arg("seed") = 0);
    m.def("sample_uniform", [](Index n, Index k, std::uint64_t seed) { return sample_uniform(n, k, seed).indices; },
          py::arg("n"), py::arg("m"), py::arg("seed") = 0);
    m.def("sample_als",
          [](const Vector& scores, Index k, std::uint64_t seed) {
              LeverageProfile p;
              p.scores = scores;
              return sample_als(p, k, seed).indices;
          },
          py::arg("scores"), py::arg("m"), py::arg("seed") = 0);
    m.def("effective_dimension", &empirical_effective_dimension, py::arg("K_w"), py::arg("lam"));

    m.def("gaussian_ratio",
          [](const Matrix& X, const Vector& mu_tr, const Vector& var_tr, const Vector& mu_te, const Vector& var_te) {
              return WeightFunction::gaussian_ratio({mu_tr, var_tr}, {mu_te, var_te}).evaluate(X);
          },
          py::arg("X"), py::arg("mu_tr"), py::arg("var_tr"), py::arg("mu_te"), py::arg("var_te"),
          "Exact density ratio N_test / N_train at the rows of X.");
    m.def("rulsif_weights",
          [](const Matrix& train_X, const Matrix& test_X, const Matrix& eval_X, double alpha, std::uint64_t seed) {
              RulsifOptions opt;
              opt.alpha = alpha;
              opt.seed = seed;
              return fit_rulsif_auto(train_X, test_X, opt).weights.evaluate(eval_X);
          },
          py::arg("train_X"), py::arg("test_X"), py::arg("eval_X"), py::arg("alpha") = 0.1, py::arg("seed") = 0,
          "Fit RuLSIF with default hyperparameter selection and evaluate it at eval_X.");

    m.def("simulate",
          [](Index n_train, Index n_test, std::uint64_t seed) {
              SimulationConfig cfg;
              cfg.n_train = n_train;
              cfg.n_test = n_test;
              cfg.seed = seed;
              const auto d = generate_dataset(cfg);
              return py::dict(py::arg("X_train") = d.train.X, py::arg("y_train") = *d.train.y,
                              py::arg("X_test") = d.test.X, py::arg("y_test") = *d.test.y,
                              py::arg("weights") = d.exact_weights.evaluate(d.train.X));
          },
          py::arg("n_train") = 1000, py::arg("n_test") = 2000, py::arg("seed") = 0,
          "Draw the default two-dimensional covariate-shift problem.");
    m.def("mse", py::overload_cast<VectorRef, VectorRef>(&mse), py::arg("predictions"), py::arg("targets"));

    m.def("geometric_grid", &geometric_grid, py::arg("lambda_min"), py::arg("lambda_max"), py::arg("count"));
    m.def("gamma_grid", &gamma_grid);

    m.def("run_config",
          [](const std::string& json_text) {
              const auto cfg = parse_config(json_text);
              cfg.validate();
              py::gil_scoped_release release;
              auto files = run_experiment(cfg).files;
              std::vector<std::string> out;
              for (const auto& f : files) out.push_back(f.string());
              return out;
          },
          py::arg("config_json"), "Run an experiment config (JSON text); returns the written file paths.");
}
