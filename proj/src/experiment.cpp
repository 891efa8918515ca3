#include "iwkrr/experiment.hpp"

#include "iwkrr/csv.hpp"
#include "iwkrr/error.hpp"
#include "iwkrr/model_io.hpp"
#include "iwkrr/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace iwkrr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

std::vector<double> geometric_grid(double lambda_min, double lambda_max, int Q) {
    detail::require(std::isfinite(lambda_min) && std::isfinite(lambda_max) && lambda_min > 0.0 &&
                        lambda_min < lambda_max,
                    "geometric grid needs 0 < lambda_min < lambda_max");
    detail::require(Q >= 2, "geometric grid needs at least two values");
    const double b = std::pow(lambda_max / lambda_min, 1.0 / (Q - 1));
    std::vector<double> grid(static_cast<std::size_t>(Q));
    for (int q = 0; q < Q; ++q) grid[static_cast<std::size_t>(q)] = std::pow(b, q) * lambda_min;
    grid.back() = lambda_max;
    return grid;
}

std::vector<double> gamma_grid() {
    std::vector<double> out;
    for (int k = 1; k <= 6; ++k) {
        if (k % 2 == 1)
            out.push_back(std::pow(10.0, -3 + (k - 1) / 2));
        else
            out.push_back(5.0 * std::pow(10.0, -3 + (k - 2) / 2));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Estimator plumbing shared by CV, sweeps and single fits
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

NystromBasis select_basis(MatrixRef X, const KernelSpec& spec, double lambda, Index m, SamplingMethod method,
                          std::optional<Index> dictionary_size, double lambda0, std::uint64_t seed) {
    const Index n = X.rows();
    m = std::min(m, n);
    if (method == SamplingMethod::Uniform) return sample_uniform(n, m, seed);
    const Index m0 = std::clamp<Index>(dictionary_size.value_or(m), 1, n);
    const auto profile = approx_leverage_scores(X, spec, lambda, m0, seed, lambda0);
    return sample_als(profile, m, seed);
}

Matrix take_cols(MatrixRef A, const std::vector<Index>& idx) {
    Matrix out(A.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = A.col(idx[j]);
    return out;
}

double validation_score(VectorRef pred, VectorRef y, VectorRef w, bool weighted) {
    const Vector r2 = (pred - y).array().square();
    if (weighted) {
        const double total = w.sum();
        if (total > 0.0) return r2.dot(w) / total;
    }
    return r2.mean();
}

struct FitSettings {
    SamplingMethod sampling = SamplingMethod::ALS;
    std::optional<Index> dictionary_size;
    double lambda0 = 1e-6;
};

FittedModel fit_estimator(EstimatorKind est, const SampleSet& train, VectorRef weights, double gamma,
                          double lambda, Index m, const FitSettings& fs, std::uint64_t seed) {
    const KernelSpec spec = rbf(gamma);
    switch (est) {
    case EstimatorKind::KRR: return fit_krr(train, spec, lambda);
    case EstimatorKind::WKRR: return fit_wkrr(train, weights, spec, lambda);
    case EstimatorKind::NystromWKRR: {
        const auto basis =
            select_basis(train.X, spec, lambda, m, fs.sampling, fs.dictionary_size, fs.lambda0, seed);
        return fit_nystrom_wkrr(train, weights, basis, spec, lambda);
    }
    }
    throw InputError("unknown estimator");
}

Index default_nystrom_size(Index n) {
    const double nn = static_cast<double>(n);
    return std::clamp<Index>(static_cast<Index>(std::ceil(std::sqrt(nn) * std::log(std::max(nn, 2.0)))), 1, n);
}

} // namespace

// ---------------------------------------------------------------------------
// Hold-out cross-validation
// ---------------------------------------------------------------------------

CvResult holdout_cv(const SampleSet& train, VectorRef weights, EstimatorKind estimator,
                    const std::vector<double>& lambda_grid, const std::vector<double>& gamma_grid,
                    std::optional<Index> m, const CvOptions& options) {
    train.validate();
    detail::require(train.labeled(), "holdout_cv needs training targets");
    detail::require(!lambda_grid.empty() && !gamma_grid.empty(), "holdout_cv: grids must be nonempty");
    detail::require(options.fraction > 0.0 && options.fraction < 1.0, "cv fraction must lie in (0, 1)");
    solvers::validate_weights(weights, train.size());
    for (double l : lambda_grid) detail::require(l > 0.0 && std::isfinite(l), "lambda grid values must be positive");
    for (double g : gamma_grid) detail::require(g > 0.0 && std::isfinite(g), "gamma grid values must be positive");
    detail::require(estimator != EstimatorKind::NystromWKRR || (m && *m >= 1),
                    "holdout_cv: the Nyström estimator needs m >= 1");

    const Index n = train.size();
    detail::require(n >= 2, "holdout_cv needs at least two training points");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    auto eng = make_engine(options.seed, {stream::kSplit});
    std::shuffle(perm.begin(), perm.end(), eng);
    const Index n_fit = std::clamp<Index>(static_cast<Index>(std::llround(options.fraction * static_cast<double>(n))), 1, n - 1);
    std::vector<Index> fit_rows(perm.begin(), perm.begin() + n_fit);
    std::vector<Index> val_rows(perm.begin() + n_fit, perm.end());
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(val_rows.begin(), val_rows.end());

    const SampleSet fit = train.subset(fit_rows);
    const SampleSet val = train.subset(val_rows);
    Vector w_fit(n_fit), w_val(static_cast<Index>(val_rows.size()));
    for (Index i = 0; i < n_fit; ++i) w_fit[i] = weights[fit_rows[static_cast<std::size_t>(i)]];
    for (Index i = 0; i < w_val.size(); ++i) w_val[i] = weights[val_rows[static_cast<std::size_t>(i)]];
    if (estimator == EstimatorKind::KRR) w_fit.setOnes();
    if (w_fit.maxCoeff() <= 0.0) w_fit.setOnes();

    CvResult result;
    const FitSettings fs{options.sampling, options.dictionary_size, options.lambda0};
    for (double gamma : gamma_grid) {
        const KernelSpec spec = rbf(gamma);
        const Matrix K_ff = gram(spec, fit.X, fit.X);
        const Matrix K_vf = gram(spec, val.X, fit.X);
        for (double lambda : lambda_grid) {
            CvRow row{lambda, gamma, std::numeric_limits<double>::infinity(), false};
            try {
                Vector pred;
                if (estimator == EstimatorKind::NystromWKRR) {
                    const auto basis = select_basis(fit.X, spec, lambda, *m, fs.sampling, fs.dictionary_size,
                                                    fs.lambda0, derive_seed(options.seed, {stream::kBasis}));
                    const Matrix K_nm = take_cols(K_ff, basis.indices);
                    Matrix K_mm(basis.size(), basis.size());
                    for (Index j = 0; j < basis.size(); ++j) K_mm.row(j) = K_nm.row(basis.indices[static_cast<std::size_t>(j)]);
                    const Vector c = solvers::nystrom_coefficients(K_nm, K_mm, *fit.y, w_fit, lambda);
                    pred = take_cols(K_vf, basis.indices) * c;
                } else {
                    pred = K_vf * solvers::wkrr_coefficients(K_ff, *fit.y, w_fit, lambda);
                }
                row.score = validation_score(pred, *val.y, w_val, options.weighted_validation);
                row.ok = std::isfinite(row.score);
                if (!row.ok) row.score = std::numeric_limits<double>::infinity();
            } catch (const NumericalError&) {
                row.ok = false;
            }
            result.table.push_back(row);
        }
    }

    const CvRow* best = nullptr;
    for (const auto& row : result.table) {
        if (!row.ok) continue;
        if (!best || row.score < best->score ||
            (row.score == best->score &&
             (row.lambda > best->lambda || (row.lambda == best->lambda && row.gamma < best->gamma)))) {
            best = &row;
        }
    }
    if (!best) throw NumericalError("holdout_cv: every grid cell failed", 0.0);
    result.best_lambda = best->lambda;
    result.best_gamma = best->gamma;
    result.best_score = best->score;
    return result;
}

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

namespace {

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

} // namespace

std::string to_string(Mode m) {
    switch (m) {
    case Mode::Simulate: return "simulate";
    case Mode::Fit: return "fit";
    case Mode::Predict: return "predict";
    case Mode::Sweep: return "sweep";
    case Mode::Weights: return "weights";
    case Mode::Diagnose: return "diagnose";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    const auto u = upper(s);
    if (u == "SIMULATE") return Mode::Simulate;
    if (u == "FIT") return Mode::Fit;
    if (u == "PREDICT") return Mode::Predict;
    if (u == "SWEEP") return Mode::Sweep;
    if (u == "WEIGHTS") return Mode::Weights;
    if (u == "DIAGNOSE") return Mode::Diagnose;
    throw InputError("unknown mode '" + s + "'");
}

std::string to_string(WeightSource w) {
    switch (w) {
    case WeightSource::Exact: return "EXACT";
    case WeightSource::Rulsif: return "RULSIF";
    case WeightSource::ConstantOne: return "CONSTANT_ONE";
    case WeightSource::File: return "FILE";
    }
    return "?";
}

WeightSource weight_source_from_string(const std::string& s) {
    const auto u = upper(s);
    if (u == "EXACT") return WeightSource::Exact;
    if (u == "RULSIF") return WeightSource::Rulsif;
    if (u == "CONSTANT_ONE") return WeightSource::ConstantOne;
    if (u == "FILE") return WeightSource::File;
    throw InputError("unknown weight source '" + s + "'");
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (mode == Mode::Predict) {
        detail::require(!model_path.empty(), "predict: config needs a 'model' path");
        detail::require(data && !data->test.empty(), "predict: config needs data.test (the query points)");
        return;
    }
    detail::require(simulation.has_value() != data.has_value(),
                    "config must set exactly one of 'simulation' or 'data'");
    if (simulation) simulation->validate();
    if (data) detail::require(!data->train.empty(), "data.train path is required");
    detail::require(!estimators.empty(), "at least one estimator is required");
    detail::require(!seeds.empty(), "at least one seed is required");
    detail::require(cv_fraction > 0.0 && cv_fraction < 1.0, "cv_fraction must lie in (0, 1)");
    detail::require(!lambda_grid.empty() && !gamma_grid.empty(), "lambda_grid and gamma_grid must be nonempty");
    for (double l : lambda_grid) detail::require(l > 0.0 && std::isfinite(l), "lambda_grid values must be positive");
    for (double g : gamma_grid) detail::require(g > 0.0 && std::isfinite(g), "gamma_grid values must be positive");
    for (Index v : m_grid) detail::require(v >= 1, "m_grid values must be >= 1");
    for (Index v : n_grid) detail::require(v >= 1, "n_grid values must be >= 1");
    detail::require(n_grid.empty() || simulation.has_value(), "n_grid is only meaningful for simulated data");
    if (lambda) detail::require(*lambda > 0.0, "lambda must be positive");
    if (gamma) detail::require(*gamma > 0.0, "gamma must be positive");
    if (m) detail::require(*m >= 1, "m must be >= 1");
    if (clip_threshold) detail::require(*clip_threshold > 0.0, "clip_threshold must be positive");
    detail::require(lambda0 > 0.0, "lambda0 must be positive");
    if (weight_source == WeightSource::Exact)
        detail::require(simulation.has_value(), "weight_source EXACT is only available for simulated data");
    if (weight_source == WeightSource::File)
        detail::require(data && !data->weights.empty(), "weight_source FILE needs data.weights");
    if (weight_source == WeightSource::Rulsif) {
        detail::require(simulation || (data && !data->test.empty()), "weight_source RULSIF needs test covariates");
        detail::require(rulsif.alpha >= 0.0 && rulsif.alpha < 1.0, "rulsif.alpha must lie in [0, 1)");
        detail::require(rulsif.estimation_fraction > 0.0 && rulsif.estimation_fraction < 1.0,
                        "rulsif.estimation_fraction must lie in (0, 1)");
    }
    if (mode == Mode::Sweep) {
        const bool nys = std::find(estimators.begin(), estimators.end(), EstimatorKind::NystromWKRR) != estimators.end();
        detail::require(!nys || !m_grid.empty() || m.has_value(), "sweep with the Nyström estimator needs m_grid");
    }
}

namespace {

template <class T>
std::vector<T> get_vector(const json& j, const char* key) {
    try {
        return j.at(key).get<std::vector<T>>();
    } catch (const json::exception&) {
        throw InputError(std::string("config field '") + key + "' must be an array of numbers");
    }
}

Vector to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

std::vector<double> from_eigen(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw InputError("unknown config field '" + where + key + "'");
    }
}

SimulationConfig parse_simulation(const json& j) {
    reject_unknown(j, {"k", "c1", "c2", "mu_tr", "mu_te", "cov_tr_diag", "cov_te_diag", "noise_var", "n_train",
                       "n_test", "seed"},
                   "simulation.");
    SimulationConfig s;
    if (j.contains("k")) s.k = j["k"].get<int>();
    if (j.contains("c1")) s.c1 = j["c1"].get<double>();
    if (j.contains("c2")) s.c2 = j["c2"].get<double>();
    if (j.contains("mu_tr")) s.mu_tr = to_eigen(get_vector<double>(j, "mu_tr"));
    if (j.contains("mu_te")) s.mu_te = to_eigen(get_vector<double>(j, "mu_te"));
    if (j.contains("cov_tr_diag")) s.cov_tr_diag = to_eigen(get_vector<double>(j, "cov_tr_diag"));
    if (j.contains("cov_te_diag")) s.cov_te_diag = to_eigen(get_vector<double>(j, "cov_te_diag"));
    if (j.contains("noise_var")) s.noise_var = j["noise_var"].get<double>();
    if (j.contains("n_train")) s.n_train = j["n_train"].get<Index>();
    if (j.contains("n_test")) s.n_test = j["n_test"].get<Index>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    return s;
}

json simulation_to_json(const SimulationConfig& s) {
    return json{{"k", s.k},
                {"c1", s.c1},
                {"c2", s.c2},
                {"mu_tr", from_eigen(s.mu_tr)},
                {"mu_te", from_eigen(s.mu_te)},
                {"cov_tr_diag", from_eigen(s.cov_tr_diag)},
                {"cov_te_diag", from_eigen(s.cov_te_diag)},
                {"noise_var", s.noise_var},
                {"n_train", s.n_train},
                {"n_test", s.n_test},
                {"seed", s.seed}};
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    detail::require(j.is_object(), "config must be a JSON object");
    reject_unknown(j,
                   {"mode", "simulation", "data", "estimator", "estimators", "weight_source", "lambda_grid",
                    "gamma_grid", "m_grid", "n_grid", "cv_fraction", "weighted_validation", "tuning", "seeds",
                    "output", "lambda", "gamma", "m", "sampling", "dictionary_size", "lambda0", "clip_threshold",
                    "rulsif", "model", "workers"},
                   "");
    ExperimentConfig cfg;
    try {
        if (j.contains("mode")) cfg.mode = mode_from_string(j["mode"].get<std::string>());
        if (j.contains("simulation")) cfg.simulation = parse_simulation(j["simulation"]);
        if (j.contains("data")) {
            const auto& d = j["data"];
            reject_unknown(d, {"train", "test", "weights"}, "data.");
            cfg.data = DataPaths{d.value("train", ""), d.value("test", ""), d.value("weights", "")};
        }
        for (const char* key : {"estimator", "estimators"}) {
            if (!j.contains(key)) continue;
            cfg.estimators.clear();
            if (j[key].is_array()) {
                for (const auto& e : j[key]) cfg.estimators.push_back(estimator_kind_from_string(e.get<std::string>()));
            } else {
                cfg.estimators.push_back(estimator_kind_from_string(j[key].get<std::string>()));
            }
        }
        if (j.contains("weight_source")) cfg.weight_source = weight_source_from_string(j["weight_source"].get<std::string>());
        if (j.contains("lambda_grid")) {
            const auto& g = j["lambda_grid"];
            if (g.is_object()) {
                reject_unknown(g, {"min", "max", "count"}, "lambda_grid.");
                cfg.lambda_grid = geometric_grid(g.at("min").get<double>(), g.at("max").get<double>(), g.at("count").get<int>());
            } else {
                cfg.lambda_grid = get_vector<double>(j, "lambda_grid");
            }
        }
        if (j.contains("gamma_grid")) cfg.gamma_grid = get_vector<double>(j, "gamma_grid");
        if (j.contains("m_grid")) cfg.m_grid = get_vector<Index>(j, "m_grid");
        if (j.contains("n_grid")) cfg.n_grid = get_vector<Index>(j, "n_grid");
        if (j.contains("cv_fraction")) cfg.cv_fraction = j["cv_fraction"].get<double>();
        if (j.contains("weighted_validation")) cfg.weighted_validation = j["weighted_validation"].get<bool>();
        if (j.contains("tuning")) {
            const auto t = upper(j["tuning"].get<std::string>());
            detail::require(t == "GRID" || t == "CV", "tuning must be 'grid' or 'cv'");
            cfg.tuning = t == "CV" ? Tuning::CV : Tuning::Grid;
        }
        if (j.contains("seeds")) cfg.seeds = get_vector<std::uint64_t>(j, "seeds");
        if (j.contains("output")) cfg.output = j["output"].get<std::string>();
        if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
        if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
        if (j.contains("m")) cfg.m = j["m"].get<Index>();
        if (j.contains("sampling")) cfg.sampling = sampling_method_from_string(upper(j["sampling"].get<std::string>()));
        if (j.contains("dictionary_size")) cfg.dictionary_size = j["dictionary_size"].get<Index>();
        if (j.contains("lambda0")) cfg.lambda0 = j["lambda0"].get<double>();
        if (j.contains("clip_threshold")) cfg.clip_threshold = j["clip_threshold"].get<double>();
        if (j.contains("rulsif")) {
            const auto& r = j["rulsif"];
            reject_unknown(r, {"alpha", "centers", "gamma_w", "lambda_w", "estimation_fraction"}, "rulsif.");
            if (r.contains("alpha")) cfg.rulsif.alpha = r["alpha"].get<double>();
            if (r.contains("centers")) cfg.rulsif.centers = r["centers"].get<Index>();
            if (r.contains("gamma_w")) cfg.rulsif.gamma_w = r["gamma_w"].get<double>();
            if (r.contains("lambda_w")) cfg.rulsif.lambda_w = r["lambda_w"].get<double>();
            if (r.contains("estimation_fraction")) cfg.rulsif.estimation_fraction = r["estimation_fraction"].get<double>();
        }
        if (j.contains("model")) cfg.model_path = j["model"].get<std::string>();
        if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    if (cfg.simulation) j["simulation"] = simulation_to_json(*cfg.simulation);
    if (cfg.data) j["data"] = json{{"train", cfg.data->train}, {"test", cfg.data->test}, {"weights", cfg.data->weights}};
    json est = json::array();
    for (auto e : cfg.estimators) est.push_back(to_string(e));
    j["estimators"] = est;
    j["weight_source"] = to_string(cfg.weight_source);
    j["lambda_grid"] = cfg.lambda_grid;
    j["gamma_grid"] = cfg.gamma_grid;
    j["m_grid"] = cfg.m_grid;
    j["n_grid"] = cfg.n_grid;
    j["cv_fraction"] = cfg.cv_fraction;
    j["weighted_validation"] = cfg.weighted_validation;
    j["tuning"] = cfg.tuning == Tuning::CV ? "cv" : "grid";
    j["seeds"] = cfg.seeds;
    j["output"] = cfg.output;
    if (cfg.lambda) j["lambda"] = *cfg.lambda;
    if (cfg.gamma) j["gamma"] = *cfg.gamma;
    if (cfg.m) j["m"] = *cfg.m;
    j["sampling"] = to_string(cfg.sampling);
    if (cfg.dictionary_size) j["dictionary_size"] = *cfg.dictionary_size;
    j["lambda0"] = cfg.lambda0;
    if (cfg.clip_threshold) j["clip_threshold"] = *cfg.clip_threshold;
    json r{{"alpha", cfg.rulsif.alpha}, {"estimation_fraction", cfg.rulsif.estimation_fraction}};
    if (cfg.rulsif.centers) r["centers"] = *cfg.rulsif.centers;
    if (cfg.rulsif.gamma_w) r["gamma_w"] = *cfg.rulsif.gamma_w;
    if (cfg.rulsif.lambda_w) r["lambda_w"] = *cfg.rulsif.lambda_w;
    j["rulsif"] = r;
    if (!cfg.model_path.empty()) j["model"] = cfg.model_path;
    j["workers"] = cfg.workers;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

namespace {

struct PreparedData {
    SampleSet train;
    SampleSet eval; ///< evaluation split of the test sample (may be unlabeled or empty)
    Vector weights; ///< per training row
    std::optional<RulsifFit> rulsif;
    Index weight_slice = 0;
};

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed, std::optional<Index> n) {
    PreparedData out;
    std::optional<WeightFunction> exact;
    if (cfg.simulation) {
        SimulationConfig s = *cfg.simulation;
        s.seed = seed;
        if (n) s.n_train = *n;
        auto data = generate_dataset(s);
        out.train = std::move(data.train);
        out.eval = std::move(data.test);
        exact = data.exact_weights;
    } else {
        out.train = read_samples_csv(cfg.data->train, true);
        if (!cfg.data->test.empty()) out.eval = read_samples_csv(cfg.data->test);
        if (out.eval.size() > 0)
            detail::require(out.eval.dim() == out.train.dim(), "test CSV has a different number of features than train CSV");
    }
    out.train.validate();
    const Index n_tr = out.train.size();

    switch (cfg.weight_source) {
    case WeightSource::Exact: out.weights = exact->evaluate(out.train.X); break;
    case WeightSource::ConstantOne: out.weights = Vector::Ones(n_tr); break;
    case WeightSource::File: {
        out.weights = read_weights_csv(cfg.data->weights);
        detail::require(out.weights.size() == n_tr, cfg.data->weights + ": has " + std::to_string(out.weights.size()) +
                                                        " weights for " + std::to_string(n_tr) + " training rows");
        break;
    }
    case WeightSource::Rulsif: {
        const Index n_te = out.eval.size();
        detail::require(n_te >= 3, "RULSIF needs at least three test points");
        std::vector<Index> perm(static_cast<std::size_t>(n_te));
        std::iota(perm.begin(), perm.end(), Index{0});
        auto eng = make_engine(seed, {stream::kWeightSlice});
        std::shuffle(perm.begin(), perm.end(), eng);
        const Index k = std::clamp<Index>(
            static_cast<Index>(std::ceil(cfg.rulsif.estimation_fraction * static_cast<double>(n_te))), 2, n_te - 1);
        std::vector<Index> slice(perm.begin(), perm.begin() + k), rest(perm.begin() + k, perm.end());
        std::sort(slice.begin(), slice.end());
        std::sort(rest.begin(), rest.end());
        std::vector<Index> overlap;
        std::set_intersection(slice.begin(), slice.end(), rest.begin(), rest.end(), std::back_inserter(overlap));
        if (!overlap.empty()) throw std::logic_error("weight-estimation slice overlaps the evaluation slice");

        const SampleSet est = out.eval.subset(slice);
        out.eval = out.eval.subset(rest);
        RulsifOptions opt;
        opt.alpha = cfg.rulsif.alpha;
        opt.centers = cfg.rulsif.centers ? std::optional<Index>(std::min(*cfg.rulsif.centers, k)) : std::nullopt;
        opt.gamma_w = cfg.rulsif.gamma_w;
        opt.lambda_w = cfg.rulsif.lambda_w;
        opt.seed = derive_seed(seed, {stream::kRulsif});
        out.rulsif = fit_rulsif_auto(out.train.X, est.X, opt);
        out.weights = out.rulsif->weights.evaluate(out.train.X);
        out.weight_slice = k;
        break;
    }
    }
    if (cfg.clip_threshold) out.weights = out.weights.cwiseMin(*cfg.clip_threshold);
    if (out.weights.maxCoeff() <= 0.0)
        throw InputError("all training weights are zero; cannot fit a weighted estimator");
    return out;
}

FitSettings fit_settings(const ExperimentConfig& cfg) { return {cfg.sampling, cfg.dictionary_size, cfg.lambda0}; }

CvOptions cv_options(const ExperimentConfig& cfg, std::uint64_t seed) {
    CvOptions o;
    o.fraction = cfg.cv_fraction;
    o.seed = seed;
    o.weighted_validation = cfg.weighted_validation;
    o.sampling = cfg.sampling;
    o.dictionary_size = cfg.dictionary_size;
    o.lambda0 = cfg.lambda0;
    return o;
}

template <class F>
void parallel_for(std::size_t count, int workers, F&& body) {
    std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers) : std::thread::hardware_concurrency();
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(count);
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
}

} // namespace

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::string text = std::string(kResultsHeader) + '\n';
    for (const auto& r : rows) {
        text += std::to_string(r.seed) + ',' + std::to_string(r.n) + ',' + std::to_string(r.m) + ',' +
                format_double(r.lambda) + ',' + format_double(r.gamma) + ',' + to_string(r.estimator) + ',' +
                to_string(r.weight_source) + ',' + format_double(r.mse) + ',' + format_double(r.fit_seconds) + ',' +
                format_double(r.predict_seconds) + ',' + r.status + '\n';
    }
    return text;
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    struct Job {
        std::uint64_t seed;
        std::optional<Index> n;
        EstimatorKind est;
        Index m;
    };
    const std::vector<double> lambdas = cfg.lambda ? std::vector<double>{*cfg.lambda} : cfg.lambda_grid;
    const std::vector<double> gammas = cfg.gamma ? std::vector<double>{*cfg.gamma} : cfg.gamma_grid;
    const std::vector<Index> ms = cfg.m ? std::vector<Index>{*cfg.m} : cfg.m_grid;
    std::vector<std::optional<Index>> ns;
    if (cfg.simulation && !cfg.n_grid.empty())
        for (Index n : cfg.n_grid) ns.emplace_back(n);
    else
        ns.emplace_back(std::nullopt);

    std::vector<Job> jobs;
    for (auto seed : cfg.seeds)
        for (auto n : ns)
            for (auto est : cfg.estimators) {
                if (est == EstimatorKind::NystromWKRR)
                    for (Index m : ms) jobs.push_back({seed, n, est, m});
                else
                    jobs.push_back({seed, n, est, 0});
            }

    std::vector<std::vector<ResultRow>> out(jobs.size());
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
        const Job& job = jobs[j];
        const PreparedData data = prepare_data(cfg, job.seed, job.n);
        detail::require(data.eval.size() > 0 && data.eval.labeled(), "sweep needs a labeled test set");
        const Index n = data.train.size();
        const bool unweighted = job.est == EstimatorKind::KRR;
        const Vector weights = unweighted ? Vector::Ones(n) : data.weights;
        const WeightSource source = unweighted ? WeightSource::ConstantOne : cfg.weight_source;
        const Index m = job.est == EstimatorKind::NystromWKRR ? job.m : n;
        const std::uint64_t fit_seed = derive_seed(job.seed, {stream::kBasis, static_cast<std::uint64_t>(n),
                                                              static_cast<std::uint64_t>(m)});

        auto run_cell = [&](double lambda, double gamma) {
            ResultRow row{job.seed, n, m, lambda, gamma, job.est, source, std::numeric_limits<double>::quiet_NaN(),
                          0.0, 0.0, "ok"};
            try {
                const auto t0 = Clock::now();
                const FittedModel model = fit_estimator(job.est, data.train, weights, gamma, lambda, m, fit_settings(cfg), fit_seed);
                row.fit_seconds = seconds_since(t0);
                const auto t1 = Clock::now();
                const Vector pred = model.predict(data.eval.X);
                row.predict_seconds = seconds_since(t1);
                row.mse = mse(pred, *data.eval.y);
                if (!std::isfinite(row.mse)) row.status = "numerical_error";
            } catch (const NumericalError&) {
                row.status = "numerical_error";
            }
            return row;
        };

        if (cfg.tuning == Tuning::CV) {
            try {
                const auto cv = holdout_cv(data.train, weights, job.est, lambdas, gammas,
                                           job.est == EstimatorKind::NystromWKRR ? std::optional<Index>(m) : std::nullopt,
                                           cv_options(cfg, derive_seed(job.seed, {stream::kSplit, static_cast<std::uint64_t>(n)})));
                out[j].push_back(run_cell(cv.best_lambda, cv.best_gamma));
            } catch (const NumericalError&) {
                out[j].push_back(ResultRow{job.seed, n, m, std::numeric_limits<double>::quiet_NaN(),
                                           std::numeric_limits<double>::quiet_NaN(), job.est, source,
                                           std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, "numerical_error"});
            }
        } else {
            for (double lambda : lambdas)
                for (double gamma : gammas) out[j].push_back(run_cell(lambda, gamma));
        }
    });

    std::vector<ResultRow> rows;
    for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
    return rows;
}

// ---------------------------------------------------------------------------
// Modes
// ---------------------------------------------------------------------------

namespace {

std::filesystem::path out_file(const ExperimentConfig& cfg, const char* name) {
    std::filesystem::create_directories(cfg.output);
    return std::filesystem::path(cfg.output) / name;
}

json cv_table_json(const CvResult& cv) {
    json t = json::array();
    for (const auto& r : cv.table)
        t.push_back({{"lambda", r.lambda}, {"gamma", r.gamma}, {"score", r.ok ? json(r.score) : json(nullptr)}, {"ok", r.ok}});
    return t;
}

RunSummary run_simulate(const ExperimentConfig& cfg) {
    detail::require(cfg.simulation.has_value(), "simulate needs a 'simulation' section");
    SimulationConfig s = *cfg.simulation;
    s.seed = cfg.seeds.front();
    const auto data = generate_dataset(s);
    RunSummary sum;
    sum.files = {out_file(cfg, "train.csv"), out_file(cfg, "test.csv"), out_file(cfg, "train_weights.csv")};
    write_samples_csv(sum.files[0], data.train);
    write_samples_csv(sum.files[1], data.test);
    write_weights_csv(sum.files[2], data.exact_weights.evaluate(data.train.X));
    return sum;
}

struct SelectedFit {
    FittedModel model;
    double lambda, gamma;
    Index m;
    std::optional<CvResult> cv;
    double fit_seconds = 0.0;
};

SelectedFit select_and_fit(const ExperimentConfig& cfg, const PreparedData& data, EstimatorKind est,
                           std::uint64_t seed) {
    const Index n = data.train.size();
    const Vector weights = est == EstimatorKind::KRR ? Vector::Ones(n) : data.weights;
    SelectedFit sf;
    sf.m = est == EstimatorKind::NystromWKRR
               ? std::min(n, cfg.m.value_or(cfg.m_grid.empty() ? default_nystrom_size(n) : cfg.m_grid.front()))
               : n;
    if (cfg.lambda && cfg.gamma) {
        sf.lambda = *cfg.lambda;
        sf.gamma = *cfg.gamma;
    } else {
        const auto lambdas = cfg.lambda ? std::vector<double>{*cfg.lambda} : cfg.lambda_grid;
        const auto gammas = cfg.gamma ? std::vector<double>{*cfg.gamma} : cfg.gamma_grid;
        sf.cv = holdout_cv(data.train, weights, est, lambdas, gammas,
                           est == EstimatorKind::NystromWKRR ? std::optional<Index>(sf.m) : std::nullopt,
                           cv_options(cfg, derive_seed(seed, {stream::kSplit, static_cast<std::uint64_t>(n)})));
        sf.lambda = sf.cv->best_lambda;
        sf.gamma = sf.cv->best_gamma;
    }
    const auto t0 = Clock::now();
    sf.model = fit_estimator(est, data.train, weights, sf.gamma, sf.lambda, sf.m, fit_settings(cfg),
                             derive_seed(seed, {stream::kBasis, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(sf.m)}));
    sf.fit_seconds = seconds_since(t0);
    return sf;
}

RunSummary run_fit(const ExperimentConfig& cfg) {
    const std::uint64_t seed = cfg.seeds.front();
    const auto data = prepare_data(cfg, seed, std::nullopt);
    const EstimatorKind est = cfg.estimators.front();
    const auto sf = select_and_fit(cfg, data, est, seed);

    json report{{"estimator", to_string(est)},
                {"weight_source", to_string(est == EstimatorKind::KRR ? WeightSource::ConstantOne : cfg.weight_source)},
                {"n", data.train.size()},
                {"lambda", sf.lambda},
                {"gamma", sf.gamma},
                {"m", sf.m},
                {"centers", sf.model.centers.rows()},
                {"fit_seconds", sf.fit_seconds}};
    if (sf.cv) report["cv"] = cv_table_json(*sf.cv);
    if (data.rulsif) report["rulsif"] = {{"gamma_w", data.rulsif->gamma_w}, {"lambda_w", data.rulsif->lambda_w},
                                         {"centers", data.rulsif->centers}, {"estimation_points", data.weight_slice}};
    if (data.eval.size() > 0 && data.eval.labeled()) {
        const auto t0 = Clock::now();
        const Vector pred = sf.model.predict(data.eval.X);
        report["predict_seconds"] = seconds_since(t0);
        report["test_mse"] = mse(pred, *data.eval.y);
        report["test_points"] = data.eval.size();
    }
    RunSummary sum;
    sum.files = {out_file(cfg, "model.json"), out_file(cfg, "fit_report.json")};
    save_model(sf.model, sum.files[0]);
    write_text_file(sum.files[1], report.dump(2) + '\n');
    return sum;
}

RunSummary run_predict(const ExperimentConfig& cfg) {
    const FittedModel model = load_model(cfg.model_path);
    const SampleSet query = read_samples_csv(cfg.data->test);
    const Vector pred = model.predict(query.X);
    std::string text = "prediction\n";
    for (Index i = 0; i < pred.size(); ++i) text += format_double(pred[i]) + '\n';
    RunSummary sum;
    sum.files = {out_file(cfg, "predictions.csv")};
    write_text_file(sum.files[0], text);
    if (query.labeled()) {
        sum.files.push_back(out_file(cfg, "predict_report.json"));
        write_text_file(sum.files[1], json{{"mse", mse(pred, *query.y)}, {"points", query.size()}}.dump(2) + '\n');
    }
    return sum;
}

RunSummary run_weights(const ExperimentConfig& cfg) {
    const auto data = prepare_data(cfg, cfg.seeds.front(), std::nullopt);
    const Vector& w = data.weights;
    const double ess = w.sum() * w.sum() / w.squaredNorm();
    json report{{"weight_source", to_string(cfg.weight_source)},
                {"n", w.size()},
                {"mean", w.mean()},
                {"max", w.maxCoeff()},
                {"min", w.minCoeff()},
                {"effective_sample_size", ess}};
    if (data.rulsif) report["rulsif"] = {{"gamma_w", data.rulsif->gamma_w}, {"lambda_w", data.rulsif->lambda_w},
                                         {"centers", data.rulsif->centers}, {"estimation_points", data.weight_slice}};
    RunSummary sum;
    sum.files = {out_file(cfg, "weights.csv"), out_file(cfg, "weights_report.json")};
    write_weights_csv(sum.files[0], w);
    write_text_file(sum.files[1], report.dump(2) + '\n');
    return sum;
}

constexpr Index kDiagnoseMaxPoints = 3000;

RunSummary run_diagnose(const ExperimentConfig& cfg) {
    const std::uint64_t seed = cfg.seeds.front();
    PreparedData data = prepare_data(cfg, seed, std::nullopt);
    json report;
    report["points_total"] = data.train.size();
    if (data.train.size() > kDiagnoseMaxPoints) {
        std::vector<Index> perm(static_cast<std::size_t>(data.train.size()));
        std::iota(perm.begin(), perm.end(), Index{0});
        auto eng = make_engine(seed, {stream::kSplit, 99});
        std::shuffle(perm.begin(), perm.end(), eng);
        perm.resize(static_cast<std::size_t>(kDiagnoseMaxPoints));
        std::sort(perm.begin(), perm.end());
        Vector w(kDiagnoseMaxPoints);
        for (Index i = 0; i < kDiagnoseMaxPoints; ++i) w[i] = data.weights[perm[static_cast<std::size_t>(i)]];
        data.train = data.train.subset(perm);
        data.weights = w;
    }
    const Index n = data.train.size();
    const Vector& w = data.weights;

    double lambda = 0.0, gamma = 0.0;
    if (cfg.lambda && cfg.gamma) {
        lambda = *cfg.lambda;
        gamma = *cfg.gamma;
    } else {
        const auto cv = holdout_cv(data.train, w, EstimatorKind::WKRR,
                                   cfg.lambda ? std::vector<double>{*cfg.lambda} : cfg.lambda_grid,
                                   cfg.gamma ? std::vector<double>{*cfg.gamma} : cfg.gamma_grid, std::nullopt,
                                   cv_options(cfg, derive_seed(seed, {stream::kSplit, static_cast<std::uint64_t>(n)})));
        lambda = cv.best_lambda;
        gamma = cv.best_gamma;
    }
    const KernelSpec spec = rbf(gamma);
    const Matrix K = gram(spec, data.train.X, data.train.X);
    const Matrix K_w = weighted_gram(K, w);
    report["n"] = n;
    report["lambda"] = lambda;
    report["gamma"] = gamma;
    report["weight_source"] = to_string(cfg.weight_source);

    const Index m = std::min(n, cfg.m.value_or(cfg.m_grid.empty() ? default_nystrom_size(n) : cfg.m_grid.front()));
    const auto exact = exact_leverage_scores(K, lambda);
    const Index m0 = std::clamp<Index>(cfg.dictionary_size.value_or(m), 1, n);
    const auto approx = approx_leverage_scores(data.train.X, spec, lambda, m0, derive_seed(seed, {stream::kDictionary}), cfg.lambda0);
    const double T = leverage_approximation_factor(approx, exact);
    report["leverage"] = {{"dictionary_size", m0}, {"approximation_factor_T", T}, {"floored_at_lambda0", approx.floored}};

    json eff = json::array();
    for (double l : cfg.lambda_grid)
        eff.push_back({{"lambda", l},
                       {"weighted", empirical_effective_dimension(K_w, l)},
                       {"unweighted", empirical_effective_dimension(K, l)}});
    report["effective_dimension"] = eff;
    const double n_eff = empirical_effective_dimension(K_w, lambda);

    json moments = json::array();
    for (double q : {0.0, 0.5, 1.0})
        for (int p : {2, 3, 4}) {
            const auto md = moment_diagnostic(w, q, p);
            moments.push_back({{"q", q}, {"p", p}, {"value", md.value}, {"essential_sup", md.essential_sup}});
        }
    report["moments"] = moments;

    json dom = json::array();
    auto add_domination = [&](const char* label, const Vector& v) {
        const auto r = covariance_domination_check(K, w, v);
        dom.push_back({{"v", label}, {"ratio_sup", r.ratio_sup}, {"top_eigenvalue", r.top_eigenvalue},
                       {"tolerance", r.tolerance}, {"passed", r.passed}});
    };
    add_domination("CONSTANT_ONE", Vector::Ones(n));
    if (w.minCoeff() > 0.0) {
        std::vector<double> sorted(w.data(), w.data() + n);
        std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
        add_domination("CLIPPED_AT_MEDIAN", w.cwiseMin(sorted[static_cast<std::size_t>(n / 2)]));
    }
    report["covariance_domination"] = dom;

    const auto basis = sample_als(approx, m, derive_seed(seed, {stream::kBasis}));
    const auto pr = projection_residual(data.train, spec, basis, lambda);
    report["projection_residual"] = {{"m", m},
                                     {"basis_size", basis.size()},
                                     {"residual", pr.residual},
                                     {"residual_plus_lambda", pr.scaled},
                                     {"reference_6lambda", pr.reference},
                                     {"within_6lambda", pr.within_reference},
                                     {"within_3lambda", pr.scaled <= 3.0 * lambda}};

    const auto sched = nystrom_size_schedule(lambda, 0.0, std::max(n_eff, 1e-12), T, n, 0.1);
    report["size_schedule"] = {{"T", T}, {"Q_effective_dimension", n_eff}, {"delta", 0.1},
                               {"required", sched.required}, {"m", sched.m}};

    RunSummary sum;
    sum.files = {out_file(cfg, "leverage.csv"), out_file(cfg, "diagnostics.json")};
    write_text_file(sum.files[0], leverage_profile_csv(exact));
    write_text_file(sum.files[1], report.dump(2) + '\n');
    return sum;
}

RunSummary run_sweep_mode(const ExperimentConfig& cfg) {
    const auto rows = run_sweep(cfg);
    RunSummary sum;
    sum.total_cells = rows.size();
    sum.failed_cells = static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return r.status != "ok"; }));
    sum.files = {out_file(cfg, "results.csv")};
    write_text_file(sum.files[0], results_csv(rows));
    return sum;
}

} // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    switch (cfg.mode) {
    case Mode::Simulate: return run_simulate(cfg);
    case Mode::Fit: return run_fit(cfg);
    case Mode::Predict: return run_predict(cfg);
    case Mode::Sweep: return run_sweep_mode(cfg);
    case Mode::Weights: return run_weights(cfg);
    case Mode::Diagnose: return run_diagnose(cfg);
    }
    throw InputError("unknown mode");
}

} // namespace iwkrr
