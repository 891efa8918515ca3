#include "iwkrr/linalg.hpp"

#include "iwkrr/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace iwkrr {

void require_symmetric(MatrixRef A, const char* what) {
    if (A.rows() != A.cols()) {
        throw InputError(std::string(what) + ": matrix must be square, got " +
                         std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
    }
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= 1e-10 * scale)) {
        throw InputError(std::string(what) + ": matrix is not symmetric (max asymmetry " +
                         std::to_string(asym) + ")");
    }
}

double default_jitter(MatrixRef A) {
    if (A.rows() == 0) return std::numeric_limits<double>::min();
    const double j = 1e-10 * std::abs(A.trace()) / static_cast<double>(A.rows());
    return std::max(j, std::numeric_limits<double>::min());
}

namespace {

constexpr int kMaxEscalations = 3;

bool try_factor(MatrixRef A, double jitter, Eigen::LLT<Matrix>& llt) {
    Matrix shifted = A;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() != Eigen::Success) return false;
    // LLT accepts tiny positive pivots; reject factors that cannot be inverted.
    const auto d = llt.matrixLLT().diagonal();
    return d.allFinite() && d.minCoeff() > 0.0;
}

} // namespace

double cholesky_with_jitter(MatrixRef A, Eigen::LLT<Matrix>& llt, std::optional<double> jitter) {
    require_symmetric(A, "cholesky");
    double j = jitter.value_or(default_jitter(A));
    detail::require(std::isfinite(j) && j >= 0.0, "jitter must be nonnegative");
    if (try_factor(A, j, llt)) return j;
    // A zero jitter cannot be escalated; the caller asked for the exact system.
    for (int attempt = 0; attempt < kMaxEscalations && j > 0.0; ++attempt) {
        j *= 10.0;
        if (try_factor(A, j, llt)) return j;
    }
    throw NumericalError("Cholesky factorization failed after jitter escalation", j);
}

PsdSolve solve_psd(MatrixRef A, MatrixRef B, std::optional<double> jitter) {
    require_symmetric(A, "solve_psd");
    if (B.rows() != A.rows()) {
        throw InputError("solve_psd: right-hand side has " + std::to_string(B.rows()) +
                         " rows, expected " + std::to_string(A.rows()));
    }
    if (jitter) detail::require(std::isfinite(*jitter) && *jitter >= 0.0, "jitter must be nonnegative");

    PsdSolve out;
    Eigen::LLT<Matrix> llt;
    double last = jitter.value_or(default_jitter(A));
    try {
        out.jitter = cholesky_with_jitter(A, llt, jitter);
        out.solution = llt.solve(B);
        if (out.solution.allFinite()) return out;
        last = out.jitter;
    } catch (const NumericalError& e) {
        last = e.final_jitter();
    }

    // Minimum-norm least squares, i.e. the pseudo-inverse applied to B.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    out.solution = cod.solve(B);
    out.jitter = last;
    out.pseudo_inverse = true;
    if (!out.solution.allFinite()) {
        throw NumericalError("solve_psd: pseudo-inverse fallback produced non-finite values", last);
    }
    return out;
}

Matrix psd_inverse_root(MatrixRef A, double rel_floor) {
    require_symmetric(A, "psd_inverse_root");
    detail::require(rel_floor >= 0.0 && rel_floor < 1.0, "rel_floor must lie in [0, 1)");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed", 0.0);
    const Vector& s = eig.eigenvalues(); // ascending
    const double cut = rel_floor * std::max(s.maxCoeff(), 0.0);
    Index first = 0;
    while (first < s.size() && !(s[first] > cut)) ++first;
    const Index r = s.size() - first;
    return eig.eigenvectors().rightCols(r) * s.tail(r).cwiseSqrt().cwiseInverse().asDiagonal();
}

namespace {

// Lanczos with full reorthogonalization; adequate for the extreme eigenvalue
// of the moderately sized symmetric matrices used by the diagnostics.
double lanczos_top(MatrixRef A) {
    const Index n = A.rows();
    const Index max_steps = std::min<Index>(n, 300);
    Matrix Q(n, max_steps + 1);
    Vector alpha(max_steps), beta(max_steps);
    Vector q = Vector::Ones(n);
    for (Index i = 0; i < n; ++i) q[i] += 1e-3 * std::sin(static_cast<double>(i) + 1.0);
    Q.col(0) = q.normalized();
    const double scale = std::max(A.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    double ritz = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < max_steps; ++k) {
        Vector v = A * Q.col(k);
        alpha[k] = Q.col(k).dot(v);
        v -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * v);
        v -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * v);
        beta[k] = v.norm();
        const bool last = k + 1 == max_steps || beta[k] <= 1e-14 * scale;
        if (!last && (k + 1) % 8 != 0) {
            Q.col(k + 1) = v / beta[k];
            continue;
        }

        Matrix T = Matrix::Zero(k + 1, k + 1);
        for (Index i = 0; i <= k; ++i) {
            T(i, i) = alpha[i];
            if (i < k) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(T);
        ritz = es.eigenvalues()[k];
        const double resid = std::abs(beta[k] * es.eigenvectors()(k, k));
        if (last || resid <= 1e-12 * scale * static_cast<double>(n)) break;
        Q.col(k + 1) = v / beta[k];
    }
    return ritz;
}

} // namespace

double top_eigenvalue(MatrixRef A) {
    require_symmetric(A, "top_eigenvalue");
    detail::require(A.rows() > 0, "top_eigenvalue of an empty matrix");
    if (A.rows() <= 400) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
        return es.eigenvalues().maxCoeff();
    }
    return lanczos_top(A);
}

} // namespace iwkrr
