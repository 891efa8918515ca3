#include "iwkrr/estimators.hpp"

#include "iwkrr/error.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace iwkrr {

void SampleSet::validate() const {
    detail::require(X.rows() >= 1, "sample set is empty");
    detail::require(X.cols() >= 1, "sample set has no feature columns");
    detail::require(X.allFinite(), "sample set contains non-finite covariates");
    if (y) {
        detail::require(y->size() == X.rows(), "targets have " + std::to_string(y->size()) +
                                                   " entries for " + std::to_string(X.rows()) +
                                                   " rows");
        detail::require(y->allFinite(), "sample set contains non-finite targets");
    }
}

SampleSet SampleSet::subset(const std::vector<Index>& rows) const {
    SampleSet out;
    out.X.resize(static_cast<Index>(rows.size()), X.cols());
    if (y) out.y = Vector(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        detail::require(rows[r] >= 0 && rows[r] < X.rows(), "subset row out of range");
        out.X.row(static_cast<Index>(r)) = X.row(rows[r]);
        if (y) (*out.y)[static_cast<Index>(r)] = (*y)[rows[r]];
    }
    return out;
}

std::string to_string(EstimatorKind kind) {
    switch (kind) {
    case EstimatorKind::KRR: return "KRR";
    case EstimatorKind::WKRR: return "W-KRR";
    case EstimatorKind::NystromWKRR: return "NYSTROM-W-KRR";
    }
    return "?";
}

EstimatorKind estimator_kind_from_string(const std::string& s) {
    if (s == "KRR") return EstimatorKind::KRR;
    if (s == "W-KRR" || s == "WKRR") return EstimatorKind::WKRR;
    if (s == "NYSTROM-W-KRR" || s == "NYSTROM_WKRR") return EstimatorKind::NystromWKRR;
    throw InputError("unknown estimator '" + s + "'");
}

Vector FittedModel::predict(MatrixRef points) const {
    detail::require(points.cols() == centers.cols(),
                    "query points have " + std::to_string(points.cols()) +
                        " features, model expects " + std::to_string(centers.cols()));
    detail::require(coefficients.size() == centers.rows(), "model coefficients do not match centers");
    Vector out(points.rows());
    if (points.rows() == 0) return out;
    Matrix panel;
    for (Index begin = 0; begin < points.rows(); begin += kPanelRows) {
        const Index len = std::min(kPanelRows, points.rows() - begin);
        panel.resize(len, centers.rows());
        gram_panel(kernel, points, centers, begin, panel);
        out.segment(begin, len).noalias() = panel * coefficients;
    }
    return out;
}

Vector predict(const FittedModel& model, MatrixRef points) { return model.predict(points); }

namespace solvers {

namespace {
constexpr double kNystromEigenFloor = 1e-16;
}

void validate_weights(VectorRef weights, Index n) {
    detail::require(weights.size() == n, "weights have " + std::to_string(weights.size()) +
                                             " entries for " + std::to_string(n) + " points");
    detail::require(weights.allFinite(), "weights must be finite");
    detail::require(weights.minCoeff() >= 0.0, "weights must be nonnegative");
    detail::require(weights.maxCoeff() > 0.0, "weights are all zero");
}

namespace {

void validate_lambda(double lambda) {
    detail::require(std::isfinite(lambda) && lambda > 0.0,
                    "lambda must be positive, got " + std::to_string(lambda));
}

} // namespace

Vector wkrr_coefficients(MatrixRef K, VectorRef y, VectorRef weights, double lambda) {
    validate_lambda(lambda);
    const Index n = K.rows();
    validate_weights(weights, n);
    detail::require(y.size() == n, "targets do not match the Gram matrix");
    const Vector s = weights.cwiseSqrt();
    Matrix A = s.asDiagonal() * K * s.asDiagonal();
    A.diagonal().array() += static_cast<double>(n) * lambda;
    const Vector rhs = s.cwiseProduct(y);
    // A >= n lambda I, so no jitter is needed unless the factorization fails.
    const PsdSolve z = solve_psd(A, rhs, 0.0);
    return s.cwiseProduct(z.solution.col(0));
}

Vector nystrom_coefficients(MatrixRef K_nm, MatrixRef K_mm, VectorRef y, VectorRef weights,
                            double lambda) {
    validate_lambda(lambda);
    const Index n = K_nm.rows();
    const Index m = K_nm.cols();
    detail::require(m >= 1, "Nyström basis is empty");
    detail::require(K_mm.rows() == m && K_mm.cols() == m, "K_mm does not match K_nm");
    validate_weights(weights, n);
    detail::require(y.size() == n, "targets do not match K_nm");

    // Factor K_mm = R R^T and solve in the features F = W^{1/2} K_nm R^{-T}:
    // F^T F + n lambda I has condition ~ 1/lambda, where the direct normal
    // equations would square K_mm's. R is the Cholesky factor when K_mm is
    // numerically PD, else U diag(sqrt(max(s_i, floor))) from an eigensolve.
    const Vector sw = weights.cwiseSqrt();
    Matrix F;
    std::function<Vector(const Vector&)> back; // c = R^{-T} beta
    Eigen::LLT<Matrix> chol(K_mm);
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    Vector root;
    if (chol.info() == Eigen::Success) {
        F = sw.asDiagonal() * chol.matrixL().solve(K_nm.transpose()).transpose();
        back = [&](const Vector& beta) -> Vector { return chol.matrixU().solve(beta); };
    } else {
        eig.compute(K_mm);
        if (eig.info() != Eigen::Success) throw NumericalError("K_mm eigendecomposition failed", 0.0);
        const double top = std::max(eig.eigenvalues().maxCoeff(), std::numeric_limits<double>::min());
        root = eig.eigenvalues().cwiseMax(kNystromEigenFloor * top).cwiseSqrt();
        F = sw.asDiagonal() * (K_nm * eig.eigenvectors()) * root.cwiseInverse().asDiagonal();
        back = [&](const Vector& beta) -> Vector { return eig.eigenvectors() * beta.cwiseQuotient(root); };
    }
    Matrix A = Matrix::Identity(m, m) * (static_cast<double>(n) * lambda);
    A.selfadjointView<Eigen::Lower>().rankUpdate(F.transpose());
    Eigen::LLT<Matrix> reduced(A.selfadjointView<Eigen::Lower>());
    if (reduced.info() != Eigen::Success) throw NumericalError("Nyström reduced system is not positive definite", 0.0);
    const Vector c = back(reduced.solve(F.transpose() * sw.cwiseProduct(y)));
    if (!c.allFinite()) throw NumericalError("Nyström coefficients are not finite", 0.0);
    return c;
}

} // namespace solvers

namespace {

void require_labeled(const SampleSet& train) {
    train.validate();
    detail::require(train.labeled(), "training set has no targets");
}

} // namespace

FittedModel fit_wkrr(const SampleSet& train, VectorRef weights, const KernelSpec& spec, double lambda) {
    require_labeled(train);
    spec.validate();
    FittedModel model;
    model.kind = EstimatorKind::WKRR;
    model.kernel = spec;
    model.lambda = lambda;
    model.centers = train.X;
    const Matrix K = gram(spec, train.X, train.X);
    model.coefficients = solvers::wkrr_coefficients(K, *train.y, weights, lambda);
    return model;
}

FittedModel fit_krr(const SampleSet& train, const KernelSpec& spec, double lambda) {
    require_labeled(train);
    FittedModel model = fit_wkrr(train, Vector::Ones(train.size()), spec, lambda);
    model.kind = EstimatorKind::KRR;
    return model;
}

FittedModel fit_nystrom_wkrr(const SampleSet& train, VectorRef weights, const NystromBasis& basis,
                             const KernelSpec& spec, double lambda) {
    require_labeled(train);
    spec.validate();
    detail::require(!basis.indices.empty(), "Nyström basis is empty");
    basis.validate(train.size());

    FittedModel model;
    model.kind = EstimatorKind::NystromWKRR;
    model.kernel = spec;
    model.lambda = lambda;
    model.centers.resize(basis.size(), train.dim());
    for (Index j = 0; j < basis.size(); ++j) model.centers.row(j) = train.X.row(basis.indices[j]);

    const Matrix K_nm = gram(spec, train.X, model.centers);
    Matrix K_mm(basis.size(), basis.size());
    for (Index j = 0; j < basis.size(); ++j) K_mm.row(j) = K_nm.row(basis.indices[j]);
    model.coefficients = solvers::nystrom_coefficients(K_nm, K_mm, *train.y, weights, lambda);
    return model;
}

} // namespace iwkrr
