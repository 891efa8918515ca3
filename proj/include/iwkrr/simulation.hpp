#pragma once

#include "iwkrr/estimators.hpp"
#include "iwkrr/kernel.hpp"
#include "iwkrr/sampling.hpp"
#include "iwkrr/types.hpp"
#include "iwkrr/weights.hpp"

#include <cstdint>

namespace iwkrr {

/// Synthetic covariate-shift regression problem. Defaults reproduce the
/// two-dimensional Gaussian shift with a near step-shaped target.
struct SimulationConfig {
    int k = 50;
    double c1 = 10.0;
    double c2 = 10.0;
    Vector mu_tr = Vector::Constant(2, 0.7);
    Vector cov_tr_diag = Vector::Constant(2, 0.7);
    Vector mu_te = Vector::Constant(2, 1.8);
    Vector cov_te_diag = Vector::Constant(2, 0.5);
    double noise_var = 0.2;
    Index n_train = 1000;
    Index n_test = 2000;
    std::uint64_t seed = 0;

    void validate() const;
    GaussianParams train_distribution() const { return {mu_tr, cov_tr_diag}; }
    GaussianParams test_distribution() const { return {mu_te, cov_te_diag}; }
};

/// g(x) = c1 exp(-c2 / |x|^{2k}), with g(0) = 0 and underflow mapped to 0.
double target_function(VectorRef x, double c1, double c2, int k);

struct SimulatedData {
    SampleSet train;  ///< noisy targets
    SampleSet test;   ///< noiseless targets
    WeightFunction exact_weights = WeightFunction::constant(1.0);
};

/// Draws train ~ N(mu_tr, cov_tr) with y = g + N(0, noise_var) and
/// test ~ N(mu_te, cov_te) with y = g. Fully determined by cfg.seed; train
/// covariates, train noise and test covariates use separate streams.
SimulatedData generate_dataset(const SimulationConfig& cfg);

/// Draws n points from N(mean, diag(cov)).
Matrix sample_gaussian(const GaussianParams& g, Index n, std::uint64_t seed, std::uint64_t stream_tag);

/// Mean squared error of model predictions against test targets.
double mse(const FittedModel& model, const SampleSet& test);
double mse(VectorRef predictions, VectorRef targets);

struct CovarianceDominationReport {
    double ratio_sup = 0.0;      ///< max_i w_i / v_i over the sample
    double top_eigenvalue = 0.0; ///< lambda_max(K (M_w - ratio_sup M_v) K)
    double tolerance = 0.0;      ///< 1e-8 * trace(ratio_sup K M_v K)
    bool passed = false;
};

/// Empirical check of Sigma_w <= |w/v|_inf Sigma_v. On the span of the
/// sample's kernel sections the quadratic form of Sigma_w is a^T K M_w K a / n,
/// so the check is lambda_max(K (M_w - r M_v) K) <= tolerance.
CovarianceDominationReport covariance_domination_check(MatrixRef K, VectorRef w_values, VectorRef v_values);

struct ProjectionResidual {
    double residual = 0.0;  ///< lambda_max((K - K_nm K_mm^+ K_mn) / n)
    double scaled = 0.0;    ///< residual + lambda: |(I - P_m)(Sigma + lambda)^{1/2}|^2
    double reference = 0.0; ///< 6 lambda
    bool within_reference = false;
};

/// Squared operator norm of the empirical covariance left outside the span of
/// the basis points.
ProjectionResidual projection_residual(const SampleSet& train, const KernelSpec& spec,
                                       const NystromBasis& basis, double lambda);

} // namespace iwkrr
