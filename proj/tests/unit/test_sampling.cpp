#include "iwkrr/error.hpp"
#include "iwkrr/kernel.hpp"
#include "iwkrr/sampling.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>

#include <map>

using namespace iwkrr;
using test::random_points;

namespace {

Matrix rbf_gram(Index n, std::uint64_t seed, double gamma = 0.5) {
    const Matrix X = random_points(n, 2, seed);
    return gram(rbf(gamma), X, X);
}

// Tr(K (K + n t I)^{-1}) through an eigendecomposition.
double spectral_trace(const Matrix& K, double t) {
    const Vector s = Eigen::SelfAdjointEigenSolver<Matrix>(K, Eigen::EigenvaluesOnly).eigenvalues().cwiseMax(0.0);
    const double nt = static_cast<double>(K.rows()) * t;
    return (s.array() / (s.array() + nt)).sum();
}

} // namespace

TEST_CASE("exact leverage scores on the identity") {
    const auto p = exact_leverage_scores(Matrix::Identity(6, 6), 0.1);
    CHECK(p.exact);
    CHECK(p.t == 0.1);
    for (Index i = 0; i < 6; ++i) CHECK(p.scores[i] == doctest::Approx(1.0 / (1.0 + 0.6)).epsilon(1e-14));
}

TEST_CASE("exact leverage scores vanish for huge t") {
    CHECK(exact_leverage_scores(rbf_gram(20, 1), 1e12).scores.maxCoeff() < 1e-10);
}

TEST_CASE("exact leverage scores sum to the trace") {
    const Matrix K = rbf_gram(40, 2);
    for (double t : {1e-4, 1e-2, 1.0}) {
        const double s = exact_leverage_scores(K, t).scores.sum();
        CHECK(s == doctest::Approx(spectral_trace(K, t)).epsilon(1e-10));
        CHECK(s == doctest::Approx(empirical_effective_dimension(K, t)).epsilon(1e-10));
    }
    CHECK_THROWS_AS(exact_leverage_scores(K, 0.0), InputError);
    CHECK_THROWS_AS(exact_leverage_scores(K, -1.0), InputError);
}

TEST_CASE("leverage score bounds and monotonicity in t") {
    const Matrix K = rbf_gram(60, 3, 1.0);
    Vector previous = Vector::Constant(60, 2.0);
    double previous_n = 1e300;
    for (double t : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
        const Vector s = exact_leverage_scores(K, t).scores;
        CHECK(s.minCoeff() >= 0.0);
        CHECK(s.maxCoeff() < 1.0);
        CHECK((s.array() < previous.array()).all());
        previous = s;
        const double n_eff = empirical_effective_dimension(K, t);
        CHECK(n_eff < previous_n);
        previous_n = n_eff;
    }
}

TEST_CASE("approximate leverage scores with the whole dictionary are exact") {
    const Matrix X = random_points(80, 2, 4);
    const Matrix K = gram(rbf(0.5), X, X);
    for (double t : {1e-3, 1e-1}) {
        const auto a = approx_leverage_scores(X, rbf(0.5), t, 80, 9);
        const auto e = exact_leverage_scores(K, t);
        CHECK_FALSE(a.exact);
        CHECK((a.scores - e.scores).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("approximate leverage scores: realized factor and clipping") {
    const Matrix X = random_points(200, 2, 5);
    const auto e = exact_leverage_scores(gram(rbf(0.5), X, X), 1e-3);
    const auto a = approx_leverage_scores(X, rbf(0.5), 1e-3, 50, 10);
    const double T = leverage_approximation_factor(a, e);
    CHECK(std::isfinite(T));
    CHECK(T >= 1.0);
    CHECK(a.scores.minCoeff() >= 1.0 / (200.0 * 200.0));
    CHECK(a.scores.maxCoeff() <= 1.0);
}

TEST_CASE("approximate leverage scores: duplicates share scores, lambda0 floor, validation") {
    Matrix X = random_points(50, 2, 6);
    X.row(10) = X.row(30);
    const auto a = approx_leverage_scores(X, rbf(0.5), 1e-2, 20, 3);
    CHECK(a.scores[10] == a.scores[30]);
    CHECK_FALSE(a.floored);

    const auto low = approx_leverage_scores(X, rbf(0.5), 1e-9, 20, 3);
    CHECK(low.floored);
    CHECK(low.t == 1e-6);
    const auto custom = approx_leverage_scores(X, rbf(0.5), 1e-9, 20, 3, 1e-4);
    CHECK(custom.t == 1e-4);

    CHECK_THROWS_AS(approx_leverage_scores(X, rbf(0.5), 1e-2, 0, 3), InputError);
    CHECK_THROWS_AS(approx_leverage_scores(X, rbf(0.5), 1e-2, 51, 3), InputError);
    CHECK_THROWS_AS(approx_leverage_scores(X, rbf(0.5), 0.0, 10, 3), InputError);
}

TEST_CASE("sample_uniform basics") {
    const auto b = sample_uniform(1, 1, 0);
    CHECK(b.indices == std::vector<Index>{0});
    CHECK(b.method == SamplingMethod::Uniform);
    CHECK(sample_uniform(500, 60, 42).indices == sample_uniform(500, 60, 42).indices);
    CHECK(sample_uniform(500, 60, 42).indices != sample_uniform(500, 60, 43).indices);
    const auto c = sample_uniform(100, 80, 7);
    CHECK(c.m_requested == 80);
    CHECK(c.size() <= 80);
    CHECK(std::is_sorted(c.indices.begin(), c.indices.end()));
    CHECK(std::adjacent_find(c.indices.begin(), c.indices.end()) == c.indices.end());
    CHECK_NOTHROW(c.validate(100));
    CHECK_THROWS_AS(sample_uniform(10, 0, 1), InputError);
    CHECK_THROWS_AS(sample_uniform(10, 11, 1), InputError);
}

TEST_CASE("sample_uniform selection frequencies stay in binomial bands") {
    const Index n = 10000, m = 100, trials = 10000;
    std::vector<int> hits(static_cast<std::size_t>(n), 0);
    for (Index t = 0; t < trials; ++t)
        for (Index i : sample_uniform(n, m, static_cast<std::uint64_t>(t)).indices) ++hits[static_cast<std::size_t>(i)];
    // P(index selected in one trial) for m draws with replacement, deduplicated.
    const double p = 1.0 - std::pow(1.0 - 1.0 / n, m);
    const double mean = trials * p, sd = std::sqrt(trials * p * (1.0 - p));
    Index outside = 0;
    double total = 0.0;
    for (int h : hits) {
        outside += std::abs(h - mean) > 3.0 * sd;
        total += h;
    }
    // 0.27% of indices are expected outside 3 sigma.
    CHECK(outside <= n / 100);
    CHECK(total / n == doctest::Approx(mean).epsilon(0.01));
}

TEST_CASE("sample_als examples") {
    LeverageProfile one;
    one.scores = Vector::Zero(8);
    one.scores[5] = 1.0;
    const auto b = sample_als(one, 20, 1);
    CHECK(b.indices == std::vector<Index>{5});
    CHECK(b.method == SamplingMethod::ALS);

    LeverageProfile two;
    two.scores = Vector(2);
    two.scores << 3.0, 1.0;
    int first = 0;
    for (std::uint64_t s = 0; s < 10000; ++s) first += sample_als(two, 1, s).indices.front() == 0;
    CHECK(first / 10000.0 == doctest::Approx(0.75).epsilon(0.02 / 0.75));

    LeverageProfile zero;
    zero.scores = Vector::Zero(4);
    CHECK_THROWS_AS(sample_als(zero, 2, 0), InputError);
    LeverageProfile negative;
    negative.scores = Vector::Ones(4);
    negative.scores[2] = -1.0;
    CHECK_THROWS_AS(sample_als(negative, 2, 0), InputError);
    CHECK_THROWS_AS(sample_als(two, 0, 0), InputError);
}

TEST_CASE("sample_als with uniform scores behaves like uniform sampling") {
    const Index n = 50, trials = 20000;
    LeverageProfile flat;
    flat.scores = Vector::Constant(n, 0.3);
    std::vector<int> hits(static_cast<std::size_t>(n), 0);
    for (Index t = 0; t < trials; ++t) ++hits[static_cast<std::size_t>(sample_als(flat, 1, static_cast<std::uint64_t>(t)).indices.front())];
    // Pearson chi-square against uniform, 49 dof: the 99.9% quantile is about 85.4.
    double chi2 = 0.0;
    const double e = static_cast<double>(trials) / n;
    for (int h : hits) chi2 += (h - e) * (h - e) / e;
    CHECK(chi2 < 85.4);
}

TEST_CASE("sample_als is deterministic") {
    const Matrix X = random_points(120, 2, 8);
    const auto p = approx_leverage_scores(X, rbf(0.5), 1e-2, 40, 2);
    CHECK(sample_als(p, 30, 5).indices == sample_als(p, 30, 5).indices);
}

TEST_CASE("empirical effective dimension examples") {
    CHECK(empirical_effective_dimension(Matrix::Zero(5, 5), 0.1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(empirical_effective_dimension(Matrix::Identity(5, 5), 0.1) == doctest::Approx(5.0 / 1.5).epsilon(1e-12));
    CHECK_THROWS_AS(empirical_effective_dimension(Matrix::Identity(3, 3), 0.0), InputError);
    const double v = empirical_effective_dimension(rbf_gram(30, 7), 1e-3);
    CHECK(v >= 0.0);
    CHECK(v < 30.0);
}

TEST_CASE("weighted_gram rescales entries") {
    const Matrix K = rbf_gram(6, 9);
    const Vector w = test::random_vector(6, 10, 0.0, 3.0);
    const Matrix Kw = weighted_gram(K, w);
    for (Index i = 0; i < 6; ++i)
        for (Index j = 0; j < 6; ++j) CHECK(Kw(i, j) == doctest::Approx(std::sqrt(w[i] * w[j]) * K(i, j)).epsilon(1e-14));
}

TEST_CASE("effective dimension from a spectrum") {
    CHECK(effective_dimension_from_spectrum(Vector::Zero(4), 0.5) == 0.0);
    CHECK(effective_dimension_from_spectrum(Vector::Ones(1), 1.0) == doctest::Approx(0.5));
    Vector s(1000000);
    for (Index i = 0; i < s.size(); ++i) s[i] = 1.0 / std::pow(static_cast<double>(i + 1), 2.0);
    CHECK(effective_dimension_from_spectrum(s, 0.01) <= 20.0);
    Vector bad = Vector::Ones(3);
    bad[1] = -0.5;
    CHECK_THROWS_AS(effective_dimension_from_spectrum(bad, 1.0), InputError);
    CHECK_THROWS_AS(effective_dimension_from_spectrum(Vector::Ones(3), 0.0), InputError);
}

TEST_CASE("large-sample effective dimension agrees with the exact value when every point is a landmark") {
    const Matrix X = random_points(300, 2, 11);
    const Vector w = test::random_vector(300, 12, 0.2, 2.0);
    Vector lambdas(3);
    lambdas << 1e-3, 1e-2, 1e-1;
    const Matrix K = gram(rbf(0.5), X, X);
    const Vector unweighted = large_sample_effective_dimension(X, Vector(), rbf(0.5), lambdas, 300, 1);
    const Vector weighted = large_sample_effective_dimension(X, w, rbf(0.5), lambdas, 300, 1);
    for (Index j = 0; j < 3; ++j) {
        CHECK(unweighted[j] == doctest::Approx(empirical_effective_dimension(K, lambdas[j])).epsilon(1e-6));
        CHECK(weighted[j] == doctest::Approx(empirical_effective_dimension(weighted_gram(K, w), lambdas[j])).epsilon(1e-6));
    }
}

TEST_CASE("nystrom_size_schedule") {
    const auto s = nystrom_size_schedule(1.0, 0.0, 1.0, 1.0, 1, 0.5);
    CHECK(s.required == 400.0);
    CHECK(s.m == 1);
    CHECK(nystrom_size_schedule(1e-3, 0.0, 2.0, 1.5, 100000, 0.1).required ==
          nystrom_size_schedule(0.7, 0.0, 2.0, 1.5, 100000, 0.1).required);
    for (Index n : {1, 10, 1000, 100000000}) CHECK(nystrom_size_schedule(1e-2, 0.5, 10.0, 2.0, n, 0.1).m <= n);
    CHECK_THROWS_AS(nystrom_size_schedule(0.0, 0.0, 1.0, 1.0, 10, 0.5), InputError);
    CHECK_THROWS_AS(nystrom_size_schedule(1.0, 1.5, 1.0, 1.0, 10, 0.5), InputError);
    CHECK_THROWS_AS(nystrom_size_schedule(1.0, 0.0, 0.0, 1.0, 10, 0.5), InputError);
    CHECK_THROWS_AS(nystrom_size_schedule(1.0, 0.0, 1.0, 0.5, 10, 0.5), InputError);
    CHECK_THROWS_AS(nystrom_size_schedule(1.0, 0.0, 1.0, 1.0, 0, 0.5), InputError);
    CHECK_THROWS_AS(nystrom_size_schedule(1.0, 0.0, 1.0, 1.0, 10, 1.0), InputError);
}

TEST_CASE("leverage profile CSV") {
    LeverageProfile p;
    p.scores = Vector(2);
    p.scores << 0.25, 0.125;
    CHECK(leverage_profile_csv(p) == "index,score\n0,0.25\n1,0.125\n");
}

TEST_CASE("full_basis and basis validation") {
    const auto b = full_basis(4);
    CHECK(b.indices == std::vector<Index>{0, 1, 2, 3});
    CHECK_NOTHROW(b.validate(4));
    CHECK_THROWS_AS(b.validate(3), InputError);
    NystromBasis dup;
    dup.indices = {1, 1};
    CHECK_THROWS_AS(dup.validate(4), InputError);
}
