#pragma once

#include "iwkrr/types.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

namespace iwkrr::test {

inline Matrix random_points(Index n, Index d, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> g(0.0, scale);
    return Matrix::NullaryExpr(n, d, [&] { return g(eng); });
}

inline Vector random_vector(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    return Vector::NullaryExpr(n, [&] { return u(eng); });
}

inline SampleSet random_samples(Index n, Index d, std::uint64_t seed) {
    SampleSet s;
    s.X = random_points(n, d, seed);
    s.y = random_vector(n, seed + 1);
    return s;
}

// Brute-force RBF Gram, independent of the library's kernel module.
inline Matrix loop_gram(double gamma, const Matrix& A, const Matrix& B) {
    Matrix K(A.rows(), B.rows());
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < B.rows(); ++j) {
            double d2 = 0.0;
            for (Index k = 0; k < A.cols(); ++k) d2 += (A(i, k) - B(j, k)) * (A(i, k) - B(j, k));
            K(i, j) = std::exp(-gamma * d2);
        }
    return K;
}

inline double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

} // namespace iwkrr::test
