#pragma once

#include "iwkrr/kernel.hpp"
#include "iwkrr/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace iwkrr {

enum class SamplingMethod { Uniform, ALS };

std::string to_string(SamplingMethod m);
SamplingMethod sampling_method_from_string(const std::string& s);

/// Nyström centers: sorted, unique row indices (0-based) into a training set.
struct NystromBasis {
    std::vector<Index> indices;
    Index m_requested = 0;
    SamplingMethod method = SamplingMethod::Uniform;
    std::uint64_t seed = 0;

    Index size() const { return static_cast<Index>(indices.size()); }
    /// Throws InputError if empty, unsorted, duplicated, or out of [0, n).
    void validate(Index n) const;
};

/// Basis made of every row 0..n-1 (the full Nyström subspace).
NystromBasis full_basis(Index n);

struct LeverageProfile {
    double t = 0.0;
    Vector scores;
    bool exact = false;
    /// Set when t was below lambda0 and the scores were computed at lambda0.
    bool floored = false;
};

/// l_i(t) = (K (K + t n I)^{-1})_ii.
LeverageProfile exact_leverage_scores(MatrixRef K, double t);

/// Approximate leverage scores from a uniformly drawn dictionary of m0 distinct
/// rows. Each x_i is mapped to its m0-dimensional Nyström feature phi_i and
/// l_i = phi_i^T (Phi^T Phi + t n I)^{-1} phi_i, clipped to [1/n^2, 1].
/// Requests with t < lambda0 are computed at lambda0 and flagged.
LeverageProfile approx_leverage_scores(MatrixRef X, const KernelSpec& spec, double t, Index m0,
                                       std::uint64_t seed, double lambda0 = 1e-6);

/// Realized approximation factor max_i max(a_i / e_i, e_i / a_i).
double leverage_approximation_factor(const LeverageProfile& approx, const LeverageProfile& exact);

/// m draws with replacement from {0..n-1}, deduplicated.
NystromBasis sample_uniform(Index n, Index m, std::uint64_t seed);

/// m draws with replacement with P(i) proportional to scores_i, deduplicated.
NystromBasis sample_als(const LeverageProfile& profile, Index m, std::uint64_t seed);

/// Tr(K_w (K_w + n lambda I)^{-1}), computed from a Cholesky factor as
/// n - n lambda |L^{-1}|_F^2.
double empirical_effective_dimension(MatrixRef K_w, double lambda);

/// sum_i s_i / (s_i + lambda).
double effective_dimension_from_spectrum(VectorRef eigs, double lambda);

/// (K_w)_ij = sqrt(w_i) sqrt(w_j) K_ij.
Matrix weighted_gram(MatrixRef K, VectorRef w);

/// Effective dimension of the (optionally weighted) empirical covariance of a
/// large sample, approximated through `landmarks` uniformly drawn Nyström
/// centers so that no n x n matrix is formed. Returns one value per lambda.
/// Pass an empty `w` for unit weights.
Vector large_sample_effective_dimension(MatrixRef X, VectorRef w, const KernelSpec& spec,
                                        VectorRef lambdas, Index landmarks, std::uint64_t seed);

struct SizeSchedule {
    double required = 0.0; ///< ceil(144 T^2 Q lambda^{-gamma} log(8n/delta))
    Index m = 0;           ///< required, capped at n
};

/// Nyström subspace size sufficient for the excess-risk guarantee.
SizeSchedule nystrom_size_schedule(double lambda, double gamma_cap, double Q, double T, Index n,
                                   double delta);

/// Leverage profile as CSV with header `index,score`.
std::string leverage_profile_csv(const LeverageProfile& profile);

} // namespace iwkrr
