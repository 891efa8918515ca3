#pragma once

#include "iwkrr/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace iwkrr {

/// Axis-aligned Gaussian N(mean, diag(cov_diag)).
struct GaussianParams {
    Vector mean;
    Vector cov_diag;

    void validate() const;
    double log_density(VectorRef x) const;
};

/// Fitted RuLSIF model: r(x) = max(0, sum_l theta_l exp(-gamma_w |x - c_l|^2)).
struct RulsifModel {
    Matrix centers;
    Vector theta;
    double gamma_w = 1.0;
    double alpha = 0.0;
    double lambda_w = 0.0;
};

enum class WeightKind { Constant, GaussianRatio, Rulsif, Clipped };

/// Evaluable importance-weight function. Immutable; copies share state.
class WeightFunction {
public:
    static WeightFunction constant(double value);
    static WeightFunction gaussian_ratio(GaussianParams train, GaussianParams test);
    static WeightFunction rulsif(RulsifModel model);

    WeightKind kind() const;
    double operator()(VectorRef x) const;
    /// One weight per row of X.
    Vector evaluate(MatrixRef X) const;

    /// Threshold of a CLIPPED function (nullopt otherwise).
    std::optional<double> threshold() const;
    const RulsifModel* rulsif_model() const;

private:
    struct Ratio {
        GaussianParams train, test;
    };
    struct Clip {
        std::shared_ptr<const WeightFunction> inner;
        double threshold;
    };
    using Impl = std::variant<double, Ratio, RulsifModel, Clip>;

    explicit WeightFunction(Impl impl) : impl_(std::make_shared<const Impl>(std::move(impl))) {}
    std::shared_ptr<const Impl> impl_;

    friend WeightFunction clip_weights(const WeightFunction& w, double threshold);
};

/// Density ratio N_test(x) / N_train(x), evaluated in log space.
double gaussian_ratio_weight(const GaussianParams& train, const GaussianParams& test, VectorRef x);

/// min(w(x), threshold).
WeightFunction clip_weights(const WeightFunction& w, double threshold);

/// RuLSIF with fixed hyperparameters. Centers are centers_k distinct rows of
/// test_X drawn uniformly under `seed`; theta = (H + lambda_w I)^{-1} h with
/// H = alpha/n_te Phi_te^T Phi_te + (1 - alpha)/n_tr Phi_tr^T Phi_tr and h the
/// column means of Phi_te.
WeightFunction fit_rulsif(MatrixRef train_X, MatrixRef test_X, double alpha, Index centers_k,
                          double gamma_w, double lambda_w, std::uint64_t seed);

/// Kernel gamma from the median pairwise distance of the pooled samples
/// (gamma = 1 / (2 median^2)), using at most `max_points` rows of each.
double median_heuristic_gamma(MatrixRef A, MatrixRef B, std::uint64_t seed, Index max_points = 500);

struct RulsifOptions {
    double alpha = 0.1;
    std::optional<Index> centers;   ///< default min(100, n_te)
    std::optional<double> gamma_w;  ///< default median heuristic
    std::optional<double> lambda_w; ///< default: k-fold CV over lambda_grid
    std::vector<double> lambda_grid{1e-3, 1e-2, 1e-1, 1.0, 10.0};
    int folds = 5;
    std::uint64_t seed = 0;
};

struct RulsifFit {
    WeightFunction weights = WeightFunction::constant(1.0);
    double gamma_w = 0.0;
    double lambda_w = 0.0;
    Index centers = 0;
    /// Held-out RuLSIF objective per lambda_grid entry (empty if lambda_w was fixed).
    std::vector<double> cv_scores;
};

/// RuLSIF with defaults filled in: median-heuristic gamma_w and lambda_w by
/// k-fold cross-validation of the alpha-relative squared loss.
RulsifFit fit_rulsif_auto(MatrixRef train_X, MatrixRef test_X, const RulsifOptions& options);

struct MomentDiagnostic {
    double value = 0.0;
    bool essential_sup = false;       ///< q = 0: max(w)^{p-1} was used
    std::optional<double> reference;  ///< (1/2) p! W^{p-2} sigma^2, when W and sigma^2 are given
    std::optional<bool> within_bound; ///< value <= reference
};

/// Plug-in (mean_i w_i^{(p-1)/q + 1})^q over training-sample weights, i.e. the
/// test-distribution moment of w^{(p-1)/q} via importance sampling.
MomentDiagnostic moment_diagnostic(VectorRef w_values, double q, int p,
                                   std::optional<double> W = std::nullopt,
                                   std::optional<double> sigma2 = std::nullopt);

} // namespace iwkrr
