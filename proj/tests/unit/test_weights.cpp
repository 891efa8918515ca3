#include "iwkrr/error.hpp"
#include "iwkrr/simulation.hpp"
#include "iwkrr/weights.hpp"
#include "support.hpp"

#include <algorithm>

using namespace iwkrr;

namespace {

GaussianParams gauss(std::initializer_list<double> mean, std::initializer_list<double> var) {
    GaussianParams g;
    g.mean = Eigen::Map<const Vector>(mean.begin(), static_cast<Index>(mean.size()));
    g.cov_diag = Eigen::Map<const Vector>(var.begin(), static_cast<Index>(var.size()));
    return g;
}

double pearson(const Vector& a, const Vector& b) {
    const Vector da = a.array() - a.mean(), db = b.array() - b.mean();
    return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

} // namespace

TEST_CASE("gaussian_ratio_weight examples") {
    const auto g = gauss({0.3, -1.0}, {0.5, 2.0});
    const Matrix X = test::random_points(20, 2, 1, 3.0);
    for (Index i = 0; i < X.rows(); ++i) CHECK(gaussian_ratio_weight(g, g, X.row(i).transpose()) == doctest::Approx(1.0).epsilon(1e-14));

    CHECK(gaussian_ratio_weight(gauss({0}, {1}), gauss({0}, {1}), Vector::Constant(1, 5.0)) == 1.0);
    CHECK(gaussian_ratio_weight(gauss({0}, {1}), gauss({1}, {1}), Vector::Zero(1)) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(gaussian_ratio_weight(gauss({0}, {1}), gauss({1}, {1}), Vector::Zero(1)) == doctest::Approx(0.60653).epsilon(1e-5));
    // exp(x - 1/2) for this pair
    CHECK(gaussian_ratio_weight(gauss({0}, {1}), gauss({1}, {1}), Vector::Constant(1, 2.5)) ==
          doctest::Approx(std::exp(2.0)).epsilon(1e-14));
}

TEST_CASE("gaussian_ratio_weight validation") {
    CHECK_THROWS_AS(gaussian_ratio_weight(gauss({0}, {0}), gauss({0}, {1}), Vector::Zero(1)), InputError);
    CHECK_THROWS_AS(gaussian_ratio_weight(gauss({0}, {1}), gauss({0}, {-1}), Vector::Zero(1)), InputError);
    CHECK_THROWS_AS(gaussian_ratio_weight(gauss({0}, {1}), gauss({0, 0}, {1, 1}), Vector::Zero(1)), InputError);
    CHECK_THROWS_AS(gaussian_ratio_weight(gauss({0}, {1}), gauss({0}, {1}), Vector::Zero(2)), InputError);
    CHECK_THROWS_AS(WeightFunction::gaussian_ratio(gauss({0}, {1}), gauss({0}, {0})), InputError);
}

TEST_CASE("gaussian ratio satisfies the importance-sampling identity") {
    SimulationConfig cfg;
    const Index n = 100000;
    const Matrix tr = sample_gaussian(cfg.train_distribution(), n, 1, 1);
    const Matrix te = sample_gaussian(cfg.test_distribution(), n, 2, 1);
    const Vector w = WeightFunction::gaussian_ratio(cfg.train_distribution(), cfg.test_distribution()).evaluate(tr);
    auto f = [](const Matrix& X) -> Vector { return (X.col(0).array() + X.col(1).array().square()).matrix(); };
    const Vector fw = f(tr).cwiseProduct(w);
    const Vector ft = f(te);
    const double se_tr = std::sqrt((fw.array() - fw.mean()).square().sum() / (n - 1) / n);
    const double se_te = std::sqrt((ft.array() - ft.mean()).square().sum() / (n - 1) / n);
    CHECK(std::abs(fw.mean() - ft.mean()) <= 3.0 * std::hypot(se_tr, se_te));
}

TEST_CASE("WeightFunction kinds and evaluation") {
    const auto c = WeightFunction::constant(2.5);
    CHECK(c.kind() == WeightKind::Constant);
    CHECK(c(Vector::Zero(3)) == 2.5);
    CHECK(c.evaluate(Matrix::Zero(4, 3)) == Vector::Constant(4, 2.5));
    CHECK_FALSE(c.threshold().has_value());
    CHECK(c.rulsif_model() == nullptr);
    CHECK_THROWS_AS(WeightFunction::constant(-1.0), InputError);
    CHECK(WeightFunction::gaussian_ratio(gauss({0}, {1}), gauss({1}, {1})).kind() == WeightKind::GaussianRatio);
}

TEST_CASE("clip_weights examples") {
    const Matrix X = test::random_points(10, 2, 3);
    CHECK(clip_weights(WeightFunction::constant(5.0), 3.0).evaluate(X) == Vector::Constant(10, 3.0));
    CHECK(clip_weights(WeightFunction::constant(1.0), 3.0).evaluate(X) == Vector::Ones(10));
    const auto clipped = clip_weights(WeightFunction::constant(5.0), 3.0);
    CHECK(clipped.kind() == WeightKind::Clipped);
    CHECK(clipped.threshold() == 3.0);
    CHECK_THROWS_AS(clip_weights(WeightFunction::constant(1.0), 0.0), InputError);
    CHECK_THROWS_AS(clip_weights(WeightFunction::constant(1.0), -2.0), InputError);
}

TEST_CASE("clipping the exact ratio at its sample median") {
    SimulationConfig cfg;
    for (Index n : {1000, 1001}) {
        cfg.n_train = n;
        const auto d = generate_dataset(cfg);
        const Vector w = d.exact_weights.evaluate(d.train.X);
        std::vector<double> sorted(w.data(), w.data() + n);
        std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
        const double median = sorted[static_cast<std::size_t>(n / 2)];
        const Vector c = clip_weights(d.exact_weights, median).evaluate(d.train.X);
        const Index at = (c.array() == median).count();
        CHECK(std::abs(static_cast<double>(at) - n / 2.0) <= 1.0);
        CHECK(c.maxCoeff() <= median);
    }
}

TEST_CASE("clip_weights is idempotent and order-preserving") {
    SimulationConfig cfg;
    const auto w = WeightFunction::gaussian_ratio(cfg.train_distribution(), cfg.test_distribution());
    const Matrix X = sample_gaussian(cfg.train_distribution(), 500, 4, 1);
    for (double tau : {0.1, 1.0, 10.0}) {
        const auto once = clip_weights(w, tau);
        const auto twice = clip_weights(once, tau);
        CHECK(once.evaluate(X) == twice.evaluate(X));
        CHECK(clip_weights(clip_weights(w, 2 * tau), tau).evaluate(X) == once.evaluate(X));
        const Vector raw = w.evaluate(X), cl = once.evaluate(X);
        for (Index i = 0; i + 1 < X.rows(); ++i)
            if (raw[i] <= raw[i + 1]) CHECK(cl[i] <= cl[i + 1]);
    }
}

TEST_CASE("fit_rulsif recovers unit weights when the marginals agree") {
    SimulationConfig cfg;
    std::vector<double> means;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix tr = sample_gaussian(cfg.train_distribution(), 500, seed, 1);
        const Matrix te = sample_gaussian(cfg.train_distribution(), 500, seed, 2);
        const Matrix held_out = sample_gaussian(cfg.train_distribution(), 500, seed, 3);
        const double g = median_heuristic_gamma(tr, te, seed);
        const auto w = fit_rulsif(tr, te, 0.0, 100, g, 0.1, seed);
        means.push_back(w.evaluate(held_out).mean());
    }
    for (double m : means) {
        CHECK(m >= 0.8);
        CHECK(m <= 1.2);
    }
}

TEST_CASE("fit_rulsif with heavy regularization collapses to zero") {
    SimulationConfig cfg;
    const Matrix tr = sample_gaussian(cfg.train_distribution(), 200, 1, 1);
    const Matrix te = sample_gaussian(cfg.test_distribution(), 200, 1, 2);
    const auto w = fit_rulsif(tr, te, 0.0, 50, 0.5, 1e12, 3);
    CHECK(w.evaluate(tr).maxCoeff() < 1e-9);
    CHECK(w.evaluate(tr).minCoeff() >= 0.0);
    REQUIRE(w.rulsif_model() != nullptr);
    CHECK(w.rulsif_model()->theta.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fit_rulsif tracks the exact ratio under the simulated shift") {
    SimulationConfig cfg;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix tr = sample_gaussian(cfg.train_distribution(), 1000, seed, 1);
        const Matrix te = sample_gaussian(cfg.test_distribution(), 200, seed, 2);
        const Matrix held_out = sample_gaussian(cfg.train_distribution(), 1000, seed, 3);
        RulsifOptions opt;
        opt.seed = seed;
        const auto fit = fit_rulsif_auto(tr, te, opt);
        const Vector est = fit.weights.evaluate(held_out);
        const Vector exact = WeightFunction::gaussian_ratio(cfg.train_distribution(), cfg.test_distribution()).evaluate(held_out);
        CHECK(pearson(est, exact) >= 0.5);
        CHECK(est.minCoeff() >= 0.0);
        CHECK(fit.cv_scores.size() == opt.lambda_grid.size());
        CHECK(std::find(opt.lambda_grid.begin(), opt.lambda_grid.end(), fit.lambda_w) != opt.lambda_grid.end());
    }
}

TEST_CASE("fit_rulsif is deterministic and validates its inputs") {
    SimulationConfig cfg;
    const Matrix tr = sample_gaussian(cfg.train_distribution(), 150, 1, 1);
    const Matrix te = sample_gaussian(cfg.test_distribution(), 60, 1, 2);
    const auto a = fit_rulsif(tr, te, 0.1, 30, 0.5, 0.1, 9);
    const auto b = fit_rulsif(tr, te, 0.1, 30, 0.5, 0.1, 9);
    CHECK(a.evaluate(tr) == b.evaluate(tr));
    CHECK(a.kind() == WeightKind::Rulsif);
    RulsifOptions opt;
    opt.seed = 4;
    CHECK(fit_rulsif_auto(tr, te, opt).weights.evaluate(tr) == fit_rulsif_auto(tr, te, opt).weights.evaluate(tr));

    CHECK_THROWS_AS(fit_rulsif(Matrix::Zero(0, 2), te, 0.1, 10, 0.5, 0.1, 1), InputError);
    CHECK_THROWS_AS(fit_rulsif(tr, Matrix::Zero(0, 2), 0.1, 10, 0.5, 0.1, 1), InputError);
    CHECK_THROWS_AS(fit_rulsif(tr, te, 0.1, 61, 0.5, 0.1, 1), InputError);
    CHECK_THROWS_AS(fit_rulsif(tr, te, 1.0, 10, 0.5, 0.1, 1), InputError);
    CHECK_THROWS_AS(fit_rulsif(tr, te, 0.1, 10, 0.0, 0.1, 1), InputError);
    CHECK_THROWS_AS(fit_rulsif(tr, te, 0.1, 10, 0.5, 0.0, 1), InputError);
    CHECK_THROWS_AS(fit_rulsif(tr, Matrix::Zero(5, 3), 0.1, 2, 0.5, 0.1, 1), InputError);
}

TEST_CASE("median heuristic matches a brute-force median") {
    const Matrix A = test::random_points(15, 2, 5), B = test::random_points(10, 2, 6);
    Matrix P(25, 2);
    P << A, B;
    std::vector<double> d2;
    for (Index i = 0; i < 25; ++i)
        for (Index j = i + 1; j < 25; ++j) d2.push_back((P.row(i) - P.row(j)).squaredNorm());
    std::sort(d2.begin(), d2.end());
    CHECK(median_heuristic_gamma(A, B, 0) == doctest::Approx(1.0 / (2.0 * d2[d2.size() / 2])).epsilon(1e-14));
}

TEST_CASE("moment diagnostic examples") {
    for (double q : {0.25, 0.5, 1.0})
        for (int p : {2, 3, 5}) CHECK(moment_diagnostic(Vector::Ones(7), q, p).value == doctest::Approx(1.0));
    CHECK(moment_diagnostic(Vector::Constant(5, 3.0), 1.0, 2).value == doctest::Approx(9.0));

    SimulationConfig cfg;
    cfg.n_train = 5000;
    const auto d = generate_dataset(cfg);
    const Vector w = d.exact_weights.evaluate(d.train.X);
    double previous = 0.0;
    for (int p = 2; p <= 5; ++p) {
        const double v = moment_diagnostic(w, 1.0, p).value;
        CHECK(std::isfinite(v));
        CHECK(v > previous);
        previous = v;
    }
}

TEST_CASE("moment diagnostic: essential supremum, reference and validation") {
    Vector w(3);
    w << 0.5, 2.0, 1.0;
    const auto sup = moment_diagnostic(w, 0.0, 3);
    CHECK(sup.essential_sup);
    CHECK(sup.value == doctest::Approx(4.0));
    const auto ref = moment_diagnostic(w, 1.0, 3, 2.0, 0.5);
    REQUIRE(ref.reference.has_value());
    CHECK(*ref.reference == doctest::Approx(0.5 * 6.0 * 2.0 * 0.5));
    CHECK(ref.within_bound.has_value());
    CHECK_FALSE(moment_diagnostic(w, 1.0, 3).reference.has_value());
    CHECK_THROWS_AS(moment_diagnostic(w, 1.5, 2), InputError);
    CHECK_THROWS_AS(moment_diagnostic(w, 0.5, 1), InputError);
    w[0] = -1.0;
    CHECK_THROWS_AS(moment_diagnostic(w, 0.5, 2), InputError);
}
