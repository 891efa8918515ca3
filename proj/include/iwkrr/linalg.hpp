#pragma once

#include "iwkrr/types.hpp"

#include <optional>

namespace iwkrr {

/// Outcome of solve_psd. `jitter` is the diagonal shift of the factorization
/// that succeeded; when `pseudo_inverse` is set the solution is the
/// minimum-norm least-squares solution of the unshifted system.
struct PsdSolve {
    Matrix solution;
    double jitter = 0.0;
    bool pseudo_inverse = false;
};

/// 1e-10 * trace(A) / dim(A), floored at the smallest positive double.
double default_jitter(MatrixRef A);

/// Solves (A + jitter I) Z = B for symmetric positive semidefinite A.
///
/// Tries a Cholesky factorization at the requested jitter (default_jitter(A)
/// when not given). On failure the jitter is multiplied by 10 up to three
/// times; a jitter of 0 is not escalated. If every attempt fails, falls back
/// to the minimum-norm least-squares solution of A Z = B.
///
/// Throws InputError for non-square, mismatched, or asymmetric A and
/// NumericalError (carrying the last jitter tried) if even the fallback
/// produces non-finite values.
PsdSolve solve_psd(MatrixRef A, MatrixRef B, std::optional<double> jitter = std::nullopt);

/// Cholesky factor L of (A + jitter I) with the same escalation policy as
/// solve_psd. Returns the jitter that succeeded. Throws NumericalError when no
/// attempt succeeds.
double cholesky_with_jitter(MatrixRef A, Eigen::LLT<Matrix>& llt,
                            std::optional<double> jitter = std::nullopt);

/// T = U diag(s^{-1/2}) over the eigenpairs of the symmetric PSD matrix A with
/// s > rel_floor * s_max, so that T T^T is the pseudo-inverse of A with the
/// numerically null directions dropped. Rows K_nm T are Nyström features.
Matrix psd_inverse_root(MatrixRef A, double rel_floor = 1e-16);

/// Largest eigenvalue of the symmetric matrix A.
double top_eigenvalue(MatrixRef A);

/// Throws InputError unless A is square and symmetric to a relative 1e-10.
void require_symmetric(MatrixRef A, const char* what);

} // namespace iwkrr
