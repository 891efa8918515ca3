#include "iwkrr/sampling.hpp"

#include "iwkrr/error.hpp"
#include "iwkrr/linalg.hpp"
#include "iwkrr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace iwkrr {

std::string to_string(SamplingMethod m) { return m == SamplingMethod::ALS ? "ALS" : "UNIFORM"; }

SamplingMethod sampling_method_from_string(const std::string& s) {
    if (s == "ALS") return SamplingMethod::ALS;
    if (s == "UNIFORM") return SamplingMethod::Uniform;
    throw InputError("unknown sampling method '" + s + "' (expected ALS or UNIFORM)");
}

void NystromBasis::validate(Index n) const {
    detail::require(!indices.empty(), "Nyström basis is empty");
    for (std::size_t k = 0; k < indices.size(); ++k) {
        detail::require(indices[k] >= 0 && indices[k] < n,
                        "Nyström basis index " + std::to_string(indices[k]) + " outside [0, " +
                            std::to_string(n) + ")");
        detail::require(k == 0 || indices[k - 1] < indices[k], "Nyström basis must be sorted and unique");
    }
    if (m_requested > 0) detail::require(size() <= m_requested, "Nyström basis larger than requested");
}

NystromBasis full_basis(Index n) {
    NystromBasis b;
    b.indices.resize(static_cast<std::size_t>(n));
    std::iota(b.indices.begin(), b.indices.end(), Index{0});
    b.m_requested = n;
    return b;
}

namespace {

void require_positive(double v, const char* name) {
    detail::require(std::isfinite(v) && v > 0.0, std::string(name) + " must be positive, got " + std::to_string(v));
}

// m0 distinct indices drawn uniformly without replacement, sorted.
std::vector<Index> uniform_dictionary(Index n, Index m0, std::uint64_t seed) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    auto eng = make_engine(seed, {stream::kDictionary});
    for (Index i = 0; i < m0; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(eng))]);
    }
    all.resize(static_cast<std::size_t>(m0));
    std::sort(all.begin(), all.end());
    return all;
}

Matrix rows_of(MatrixRef X, const std::vector<Index>& idx) {
    Matrix out(static_cast<Index>(idx.size()), X.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = X.row(idx[k]);
    return out;
}

NystromBasis dedup(std::vector<Index> draws, Index m, SamplingMethod method, std::uint64_t seed) {
    std::sort(draws.begin(), draws.end());
    draws.erase(std::unique(draws.begin(), draws.end()), draws.end());
    NystromBasis b;
    b.indices = std::move(draws);
    b.m_requested = m;
    b.method = method;
    b.seed = seed;
    return b;
}

} // namespace

LeverageProfile exact_leverage_scores(MatrixRef K, double t) {
    require_positive(t, "leverage-score regularization t");
    require_symmetric(K, "exact_leverage_scores");
    const Index n = K.rows();
    Matrix A = K;
    A.diagonal().array() += t * static_cast<double>(n);
    Eigen::LLT<Matrix> llt;
    cholesky_with_jitter(A, llt, 0.0);
    const Matrix S = llt.solve(K);
    LeverageProfile p;
    p.t = t;
    p.exact = true;
    p.scores = S.diagonal().cwiseMax(0.0);
    return p;
}

LeverageProfile approx_leverage_scores(MatrixRef X, const KernelSpec& spec, double t, Index m0,
                                       std::uint64_t seed, double lambda0) {
    require_positive(t, "leverage-score regularization t");
    require_positive(lambda0, "lambda0");
    const Index n = X.rows();
    detail::require(n >= 1, "approx_leverage_scores on an empty sample");
    detail::require(m0 >= 1 && m0 <= n, "dictionary size m0 must lie in [1, n], got " + std::to_string(m0));

    LeverageProfile p;
    p.exact = false;
    p.floored = t < lambda0;
    p.t = std::max(t, lambda0);

    const auto dict = uniform_dictionary(n, m0, seed);
    const Matrix D = rows_of(X, dict);
    const Matrix K_nd = gram(spec, X, D);
    Matrix K_dd(m0, m0);
    for (Index j = 0; j < m0; ++j) K_dd.row(j) = K_nd.row(dict[static_cast<std::size_t>(j)]);

    // Nyström features: Phi^T = T^T K_dn with T T^T = K_dd^+.
    const Matrix PhiT = psd_inverse_root(K_dd).transpose() * K_nd.transpose();

    Matrix M = Matrix::Zero(PhiT.rows(), PhiT.rows());
    M.selfadjointView<Eigen::Lower>().rankUpdate(PhiT);
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    M.diagonal().array() += p.t * static_cast<double>(n);
    Eigen::LLT<Matrix> inner;
    cholesky_with_jitter(M, inner, 0.0);
    const Matrix Z = inner.matrixL().solve(PhiT);

    const double lo = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    p.scores = Z.colwise().squaredNorm().transpose().cwiseMax(lo).cwiseMin(1.0);
    return p;
}

double leverage_approximation_factor(const LeverageProfile& approx, const LeverageProfile& exact) {
    detail::require(approx.scores.size() == exact.scores.size(), "leverage profiles differ in length");
    double T = 1.0;
    for (Index i = 0; i < approx.scores.size(); ++i) {
        const double a = approx.scores[i];
        const double e = exact.scores[i];
        if (a <= 0.0 || e <= 0.0) return std::numeric_limits<double>::infinity();
        T = std::max({T, a / e, e / a});
    }
    return T;
}

NystromBasis sample_uniform(Index n, Index m, std::uint64_t seed) {
    detail::require(n >= 1 && m >= 1 && m <= n,
                    "sample_uniform requires 1 <= m <= n, got m=" + std::to_string(m) + ", n=" + std::to_string(n));
    auto eng = make_engine(seed, {stream::kBasis, 1});
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> draws(static_cast<std::size_t>(m));
    for (auto& d : draws) d = pick(eng);
    return dedup(std::move(draws), m, SamplingMethod::Uniform, seed);
}

NystromBasis sample_als(const LeverageProfile& profile, Index m, std::uint64_t seed) {
    detail::require(m >= 1, "sample_als requires m >= 1");
    const auto& s = profile.scores;
    detail::require(s.size() >= 1 && s.allFinite() && s.minCoeff() >= 0.0,
                    "leverage scores must be finite and nonnegative");
    detail::require(s.sum() > 0.0, "leverage scores have nonpositive sum");
    auto eng = make_engine(seed, {stream::kBasis, 2});
    std::discrete_distribution<Index> pick(s.data(), s.data() + s.size());
    std::vector<Index> draws(static_cast<std::size_t>(m));
    for (auto& d : draws) d = pick(eng);
    return dedup(std::move(draws), m, SamplingMethod::ALS, seed);
}

double empirical_effective_dimension(MatrixRef K_w, double lambda) {
    require_positive(lambda, "lambda");
    require_symmetric(K_w, "empirical_effective_dimension");
    const Index n = K_w.rows();
    const double shift = static_cast<double>(n) * lambda;
    Matrix A = K_w;
    A.diagonal().array() += shift;
    Eigen::LLT<Matrix> llt;
    cholesky_with_jitter(A, llt, 0.0);
    const Matrix Linv = llt.matrixL().solve(Matrix::Identity(n, n));
    const double value = static_cast<double>(n) - shift * Linv.squaredNorm();
    return std::max(value, 0.0);
}

double effective_dimension_from_spectrum(VectorRef eigs, double lambda) {
    require_positive(lambda, "lambda");
    detail::require(eigs.allFinite(), "eigenvalues must be finite");
    detail::require(eigs.size() == 0 || eigs.minCoeff() >= 0.0, "eigenvalues must be nonnegative");
    return (eigs.array() / (eigs.array() + lambda)).sum();
}

Matrix weighted_gram(MatrixRef K, VectorRef w) {
    detail::require(K.rows() == K.cols() && K.rows() == w.size(), "weighted_gram: size mismatch");
    detail::require(w.allFinite() && (w.size() == 0 || w.minCoeff() >= 0.0), "weights must be nonnegative");
    const Vector s = w.cwiseSqrt();
    return s.asDiagonal() * K * s.asDiagonal();
}

Vector large_sample_effective_dimension(MatrixRef X, VectorRef w, const KernelSpec& spec,
                                        VectorRef lambdas, Index landmarks, std::uint64_t seed) {
    const Index n = X.rows();
    detail::require(n >= 1, "large_sample_effective_dimension on an empty sample");
    detail::require(w.size() == 0 || w.size() == n, "weights do not match the sample");
    detail::require(landmarks >= 1 && landmarks <= n, "landmark count must lie in [1, n]");
    for (Index k = 0; k < lambdas.size(); ++k) require_positive(lambdas[k], "lambda");

    const auto idx = uniform_dictionary(n, landmarks, seed);
    const Matrix C = rows_of(X, idx);
    // Features phi = T^T k_C(x) with T T^T = K_CC^+, so the weighted
    // covariance in feature coordinates is T^T K_CX W K_XC T / n.
    const Matrix T = psd_inverse_root(gram(spec, C, C));
    const Index r = T.cols();

    Matrix M = Matrix::Zero(r, r);
    Matrix panel;
    for (Index begin = 0; begin < n; begin += kPanelRows) {
        const Index len = std::min(kPanelRows, n - begin);
        panel.resize(len, landmarks);
        gram_panel(spec, X, C, begin, panel);
        if (w.size() == n) panel = w.segment(begin, len).cwiseSqrt().asDiagonal() * panel;
        M.selfadjointView<Eigen::Lower>().rankUpdate((panel * T).transpose());
    }
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    M /= static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    const Vector mu = es.eigenvalues().cwiseMax(0.0);
    Vector out(lambdas.size());
    for (Index k = 0; k < lambdas.size(); ++k) out[k] = effective_dimension_from_spectrum(mu, lambdas[k]);
    return out;
}

SizeSchedule nystrom_size_schedule(double lambda, double gamma_cap, double Q, double T, Index n,
                                   double delta) {
    require_positive(lambda, "lambda");
    detail::require(gamma_cap >= 0.0 && gamma_cap <= 1.0, "capacity exponent must lie in [0, 1]");
    require_positive(Q, "Q");
    detail::require(std::isfinite(T) && T >= 1.0, "T must be >= 1");
    detail::require(n >= 1, "n must be >= 1");
    detail::require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    SizeSchedule s;
    s.required = std::ceil(144.0 * T * T * Q * std::pow(lambda, -gamma_cap) *
                           std::log(8.0 * static_cast<double>(n) / delta));
    s.m = s.required >= static_cast<double>(n) ? n : static_cast<Index>(s.required);
    return s;
}

std::string leverage_profile_csv(const LeverageProfile& profile) {
    std::ostringstream out;
    out.precision(17);
    out << "index,score\n";
    for (Index i = 0; i < profile.scores.size(); ++i) out << i << ',' << profile.scores[i] << '\n';
    return out.str();
}

} // namespace iwkrr
