#include "iwkrr/simulation.hpp"

#include "iwkrr/error.hpp"
#include "iwkrr/linalg.hpp"
#include "iwkrr/rng.hpp"

#include <cmath>
#include <limits>

namespace iwkrr {

void SimulationConfig::validate() const {
    detail::require(k >= 1, "simulation k must be >= 1");
    detail::require(c1 > 0.0 && c2 > 0.0, "simulation c1 and c2 must be positive");
    train_distribution().validate();
    test_distribution().validate();
    detail::require(mu_tr.size() == mu_te.size(), "train and test means differ in dimension");
    detail::require(std::isfinite(noise_var) && noise_var >= 0.0, "noise variance must be nonnegative");
    detail::require(n_train >= 1 && n_test >= 1, "simulation sample sizes must be >= 1");
}

double target_function(VectorRef x, double c1, double c2, int k) {
    detail::require(c1 > 0.0 && c2 > 0.0, "target_function needs positive c1, c2");
    detail::require(k >= 1, "target_function needs k >= 1");
    const double r2 = x.squaredNorm();
    if (r2 == 0.0) return 0.0;
    const double p = std::pow(r2, k);
    if (p == 0.0) return 0.0; // |x|^{2k} underflowed: exp(-c2 / 0+) = 0
    return c1 * std::exp(-c2 / p);
}

Matrix sample_gaussian(const GaussianParams& g, Index n, std::uint64_t seed, std::uint64_t stream_tag) {
    g.validate();
    auto eng = make_engine(seed, {stream_tag});
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index d = g.mean.size();
    Matrix X(n, d);
    // Row-major draw order so a prefix of a larger sample is a smaller sample.
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < d; ++k) X(i, k) = g.mean[k] + std::sqrt(g.cov_diag[k]) * normal(eng);
    return X;
}

SimulatedData generate_dataset(const SimulationConfig& cfg) {
    cfg.validate();
    SimulatedData out;
    out.train.X = sample_gaussian(cfg.train_distribution(), cfg.n_train, cfg.seed, stream::kTrainX);
    out.test.X = sample_gaussian(cfg.test_distribution(), cfg.n_test, cfg.seed, stream::kTestX);

    Vector y_tr(cfg.n_train);
    auto noise_eng = make_engine(cfg.seed, {stream::kTrainNoise});
    std::normal_distribution<double> noise(0.0, 1.0);
    const double sd = std::sqrt(cfg.noise_var);
    for (Index i = 0; i < cfg.n_train; ++i) {
        const double xi = noise(noise_eng);
        y_tr[i] = target_function(out.train.X.row(i).transpose(), cfg.c1, cfg.c2, cfg.k) + sd * xi;
    }
    Vector y_te(cfg.n_test);
    for (Index i = 0; i < cfg.n_test; ++i)
        y_te[i] = target_function(out.test.X.row(i).transpose(), cfg.c1, cfg.c2, cfg.k);
    out.train.y = std::move(y_tr);
    out.test.y = std::move(y_te);
    out.exact_weights = WeightFunction::gaussian_ratio(cfg.train_distribution(), cfg.test_distribution());
    return out;
}

double mse(VectorRef predictions, VectorRef targets) {
    detail::require(targets.size() >= 1, "mse of an empty test set");
    detail::require(predictions.size() == targets.size(), "predictions and targets differ in length");
    return (predictions - targets).squaredNorm() / static_cast<double>(targets.size());
}

double mse(const FittedModel& model, const SampleSet& test) {
    detail::require(test.size() >= 1, "mse of an empty test set");
    detail::require(test.labeled(), "test set has no targets");
    return mse(model.predict(test.X), *test.y);
}

CovarianceDominationReport covariance_domination_check(MatrixRef K, VectorRef w_values, VectorRef v_values) {
    require_symmetric(K, "covariance_domination_check");
    const Index n = K.rows();
    detail::require(w_values.size() == n && v_values.size() == n, "weights do not match the Gram matrix");
    detail::require(v_values.allFinite() && v_values.minCoeff() > 0.0, "reference weights v must be positive");
    detail::require(w_values.allFinite() && w_values.minCoeff() >= 0.0, "weights w must be nonnegative");

    CovarianceDominationReport r;
    r.ratio_sup = w_values.cwiseQuotient(v_values).maxCoeff();
    const Vector diff = w_values - r.ratio_sup * v_values;
    Matrix A = K * diff.asDiagonal() * K;
    A = 0.5 * (A + A.transpose());
    r.top_eigenvalue = top_eigenvalue(A);
    const double scale = r.ratio_sup * (K.array().square().colwise().sum().transpose() * v_values.array()).sum();
    r.tolerance = 1e-8 * std::max(scale, std::numeric_limits<double>::min());
    r.passed = r.top_eigenvalue <= r.tolerance;
    return r;
}

ProjectionResidual projection_residual(const SampleSet& train, const KernelSpec& spec,
                                       const NystromBasis& basis, double lambda) {
    train.validate();
    spec.validate();
    detail::require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
    basis.validate(train.size());
    const Index n = train.size();
    const Matrix K = gram(spec, train.X, train.X);
    Matrix K_mn(basis.size(), n);
    Matrix K_mm(basis.size(), basis.size());
    for (Index j = 0; j < basis.size(); ++j) K_mn.row(j) = K.row(basis.indices[static_cast<std::size_t>(j)]);
    for (Index j = 0; j < basis.size(); ++j) K_mm.col(j) = K_mn.col(basis.indices[static_cast<std::size_t>(j)]);

    const Matrix C = psd_inverse_root(K_mm).transpose() * K_mn;
    Matrix S = K;
    S.selfadjointView<Eigen::Lower>().rankUpdate(C.transpose(), -1.0);
    S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
    S /= static_cast<double>(n);

    ProjectionResidual out;
    out.residual = std::max(top_eigenvalue(S), 0.0);
    out.scaled = out.residual + lambda;
    out.reference = 6.0 * lambda;
    out.within_reference = out.scaled <= out.reference;
    return out;
}

} // namespace iwkrr
