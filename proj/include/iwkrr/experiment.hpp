#pragma once

#include "iwkrr/estimators.hpp"
#include "iwkrr/sampling.hpp"
#include "iwkrr/simulation.hpp"
#include "iwkrr/weights.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iwkrr {

/// lambda_q = b^{q-1} lambda_min with b = (lambda_max / lambda_min)^{1/(Q-1)}.
std::vector<double> geometric_grid(double lambda_min, double lambda_max, int Q);

/// The six RBF gammas 1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1.
std::vector<double> gamma_grid();

struct CvRow {
    double lambda = 0.0;
    double gamma = 0.0;
    double score = 0.0; ///< validation MSE (weighted when requested); +inf on failure
    bool ok = true;
};

struct CvResult {
    double best_lambda = 0.0;
    double best_gamma = 0.0;
    double best_score = 0.0;
    std::vector<CvRow> table;
};

struct CvOptions {
    double fraction = 0.7;
    std::uint64_t seed = 0;
    /// Weight validation residuals by the importance weights.
    bool weighted_validation = true;
    SamplingMethod sampling = SamplingMethod::ALS;
    std::optional<Index> dictionary_size;
    double lambda0 = 1e-6;
};

/// Hold-out selection of (lambda, gamma): fits every grid pair on a random
/// `fraction` of `train` and scores it on the rest. Ties go to the larger
/// lambda, then the smaller gamma. `m` is required for the Nyström estimator.
CvResult holdout_cv(const SampleSet& train, VectorRef weights, EstimatorKind estimator,
                    const std::vector<double>& lambda_grid, const std::vector<double>& gamma_grid,
                    std::optional<Index> m, const CvOptions& options);

enum class Mode { Simulate, Fit, Predict, Sweep, Weights, Diagnose };
enum class WeightSource { Exact, Rulsif, ConstantOne, File };
enum class Tuning { Grid, CV };

std::string to_string(Mode m);
std::string to_string(WeightSource w);
Mode mode_from_string(const std::string& s);
WeightSource weight_source_from_string(const std::string& s);

struct DataPaths {
    std::string train;
    std::string test;
    std::string weights;
};

struct RulsifSettings {
    double alpha = 0.1;
    std::optional<Index> centers;
    std::optional<double> gamma_w;
    std::optional<double> lambda_w;
    /// Share of the test sample reserved for weight estimation.
    double estimation_fraction = 0.01;
};

struct ExperimentConfig {
    Mode mode = Mode::Fit;
    std::optional<SimulationConfig> simulation;
    std::optional<DataPaths> data;
    std::vector<EstimatorKind> estimators{EstimatorKind::WKRR};
    WeightSource weight_source = WeightSource::Exact;
    std::vector<double> lambda_grid = geometric_grid(1e-4, 1.0, 10);
    std::vector<double> gamma_grid = iwkrr::gamma_grid();
    std::vector<Index> m_grid;
    /// Training sizes to sweep (simulation only); empty means simulation.n_train.
    std::vector<Index> n_grid;
    double cv_fraction = 0.7;
    bool weighted_validation = true;
    Tuning tuning = Tuning::Grid;
    std::vector<std::uint64_t> seeds{0};
    std::string output = "iwkrr-out";

    std::optional<double> lambda;
    std::optional<double> gamma;
    std::optional<Index> m;

    SamplingMethod sampling = SamplingMethod::ALS;
    std::optional<Index> dictionary_size;
    double lambda0 = 1e-6;
    std::optional<double> clip_threshold;
    RulsifSettings rulsif;

    std::string model_path; ///< predict: model to load
    int workers = 0;        ///< sweep worker threads; 0 = hardware concurrency

    /// Throws InputError on inconsistent settings.
    void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// Column order of the sweep results file.
inline constexpr const char* kResultsHeader =
    "seed,n,m,lambda,gamma,estimator,weight_source,mse,fit_seconds,predict_seconds,status";

struct ResultRow {
    std::uint64_t seed = 0;
    Index n = 0;
    Index m = 0;
    double lambda = 0.0;
    double gamma = 0.0;
    EstimatorKind estimator = EstimatorKind::KRR;
    WeightSource weight_source = WeightSource::ConstantOne;
    double mse = 0.0;
    double fit_seconds = 0.0;
    double predict_seconds = 0.0;
    std::string status = "ok";
};

std::string results_csv(const std::vector<ResultRow>& rows);

/// Runs the sweep described by cfg and returns rows in deterministic
/// (seed, n, estimator, m, lambda, gamma) order regardless of worker count.
std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg);

struct RunSummary {
    std::vector<std::filesystem::path> files;
    /// Sweep cells that failed numerically.
    std::size_t failed_cells = 0;
    std::size_t total_cells = 0;
};

/// Executes cfg.mode, writing its outputs under cfg.output (a directory).
RunSummary run_experiment(const ExperimentConfig& cfg);

} // namespace iwkrr
