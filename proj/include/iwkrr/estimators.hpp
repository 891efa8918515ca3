#pragma once

#include "iwkrr/kernel.hpp"
#include "iwkrr/linalg.hpp"
#include "iwkrr/sampling.hpp"
#include "iwkrr/types.hpp"

#include <string>

namespace iwkrr {

enum class EstimatorKind { KRR, WKRR, NystromWKRR };

/// "KRR", "W-KRR", "NYSTROM-W-KRR".
std::string to_string(EstimatorKind kind);
/// Accepts the names above plus the config spellings "WKRR" and "NYSTROM_WKRR".
EstimatorKind estimator_kind_from_string(const std::string& s);

/// f(x) = sum_i coefficients_i K(centers_i, x).
struct FittedModel {
    EstimatorKind kind = EstimatorKind::KRR;
    KernelSpec kernel;
    double lambda = 0.0;
    Matrix centers;
    Vector coefficients;

    Vector predict(MatrixRef points) const;
};

Vector predict(const FittedModel& model, MatrixRef points);

/// c = (K + n lambda I)^{-1} y. Runs the weighted path with unit weights.
FittedModel fit_krr(const SampleSet& train, const KernelSpec& spec, double lambda);

/// Importance-weighted KRR: c solves (M_w K + n lambda I) c = M_w y.
///
/// Solved in the symmetric form c = M_w^{1/2} (M_w^{1/2} K M_w^{1/2} + n lambda I)^{-1} M_w^{1/2} y,
/// which is algebraically the same system and admits zero weights.
FittedModel fit_wkrr(const SampleSet& train, VectorRef weights, const KernelSpec& spec, double lambda);

/// Nyström IW-KRR on the centers of `basis`:
/// c = (K_nm^T M_w K_nm + n lambda K_mm)^+ K_nm^T M_w y.
///
/// Solved in the features F = M_w^{1/2} K_nm R^{-T}, where K_mm = R R^T, as
/// (F^T F + n lambda I) b = F^T M_w^{1/2} y and c = R^{-T} b. R is the
/// Cholesky factor when K_mm is numerically positive definite, otherwise
/// U diag(sqrt(s)) over the eigenpairs above 1e-16 s_max.
FittedModel fit_nystrom_wkrr(const SampleSet& train, VectorRef weights, const NystromBasis& basis,
                             const KernelSpec& spec, double lambda);

/// Lower-level entry points taking precomputed kernel blocks, used when many
/// fits share one Gram matrix (hyperparameter searches).
namespace solvers {

/// Coefficients of the weighted system given the full n x n Gram.
Vector wkrr_coefficients(MatrixRef K, VectorRef y, VectorRef weights, double lambda);

/// Coefficients of the Nyström system given K_nm (n x m) and K_mm (m x m).
Vector nystrom_coefficients(MatrixRef K_nm, MatrixRef K_mm, VectorRef y, VectorRef weights,
                            double lambda);

/// Throws InputError unless weights has length n, is finite, nonnegative and
/// not all zero.
void validate_weights(VectorRef weights, Index n);

} // namespace solvers

} // namespace iwkrr
