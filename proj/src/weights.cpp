#include "iwkrr/weights.hpp"

#include "iwkrr/error.hpp"
#include "iwkrr/kernel.hpp"
#include "iwkrr/linalg.hpp"
#include "iwkrr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace iwkrr {

void GaussianParams::validate() const {
    detail::require(mean.size() >= 1, "Gaussian mean is empty");
    detail::require(cov_diag.size() == mean.size(), "Gaussian mean and covariance dimensions differ");
    detail::require(mean.allFinite(), "Gaussian mean must be finite");
    detail::require(cov_diag.allFinite() && cov_diag.minCoeff() > 0.0,
                    "Gaussian covariance entries must be positive");
}

double GaussianParams::log_density(VectorRef x) const {
    detail::require(x.size() == mean.size(), "point dimension does not match the Gaussian");
    double acc = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
        const double d = x[k] - mean[k];
        acc += d * d / cov_diag[k] + std::log(2.0 * std::numbers::pi * cov_diag[k]);
    }
    return -0.5 * acc;
}

double gaussian_ratio_weight(const GaussianParams& train, const GaussianParams& test, VectorRef x) {
    train.validate();
    test.validate();
    detail::require(train.mean.size() == test.mean.size(), "train and test Gaussians differ in dimension");
    return std::exp(test.log_density(x) - train.log_density(x));
}

WeightFunction WeightFunction::constant(double value) {
    detail::require(std::isfinite(value) && value >= 0.0, "constant weight must be nonnegative");
    return WeightFunction(Impl{value});
}

WeightFunction WeightFunction::gaussian_ratio(GaussianParams train, GaussianParams test) {
    train.validate();
    test.validate();
    detail::require(train.mean.size() == test.mean.size(), "train and test Gaussians differ in dimension");
    return WeightFunction(Impl{Ratio{std::move(train), std::move(test)}});
}

WeightFunction WeightFunction::rulsif(RulsifModel model) {
    detail::require(model.centers.rows() == model.theta.size() && model.theta.size() >= 1,
                    "RuLSIF model centers and coefficients disagree");
    detail::require(model.gamma_w > 0.0, "RuLSIF kernel gamma must be positive");
    return WeightFunction(Impl{std::move(model)});
}

WeightKind WeightFunction::kind() const {
    switch (impl_->index()) {
    case 0: return WeightKind::Constant;
    case 1: return WeightKind::GaussianRatio;
    case 2: return WeightKind::Rulsif;
    default: return WeightKind::Clipped;
    }
}

std::optional<double> WeightFunction::threshold() const {
    if (const auto* c = std::get_if<Clip>(impl_.get())) return c->threshold;
    return std::nullopt;
}

const RulsifModel* WeightFunction::rulsif_model() const { return std::get_if<RulsifModel>(impl_.get()); }

double WeightFunction::operator()(VectorRef x) const {
    struct Visitor {
        VectorRef x;
        double operator()(double c) const { return c; }
        double operator()(const Ratio& r) const { return std::exp(r.test.log_density(x) - r.train.log_density(x)); }
        double operator()(const RulsifModel& m) const {
            detail::require(x.size() == m.centers.cols(), "point dimension does not match the RuLSIF model");
            const KernelSpec k = rbf(m.gamma_w);
            double acc = 0.0;
            for (Index l = 0; l < m.centers.rows(); ++l)
                acc += m.theta[l] * eval_kernel(k, x, m.centers.row(l).transpose());
            return std::max(acc, 0.0);
        }
        double operator()(const Clip& c) const { return std::min((*c.inner)(x), c.threshold); }
    };
    return std::visit(Visitor{x}, *impl_);
}

Vector WeightFunction::evaluate(MatrixRef X) const {
    if (const auto* m = std::get_if<RulsifModel>(impl_.get())) {
        detail::require(X.cols() == m->centers.cols(), "point dimension does not match the RuLSIF model");
        if (X.rows() == 0) return Vector(0);
        return (gram(rbf(m->gamma_w), X, m->centers) * m->theta).cwiseMax(0.0);
    }
    if (const auto* c = std::get_if<Clip>(impl_.get())) return c->inner->evaluate(X).cwiseMin(c->threshold);
    Vector out(X.rows());
    for (Index i = 0; i < X.rows(); ++i) out[i] = (*this)(X.row(i).transpose());
    return out;
}

WeightFunction clip_weights(const WeightFunction& w, double threshold) {
    detail::require(std::isfinite(threshold) && threshold > 0.0, "clipping threshold must be positive");
    // Clipping an already clipped function at tau' keeps min(tau, tau').
    if (const auto* c = std::get_if<WeightFunction::Clip>(w.impl_.get()))
        return WeightFunction(WeightFunction::Impl{WeightFunction::Clip{c->inner, std::min(threshold, c->threshold)}});
    return WeightFunction(
        WeightFunction::Impl{WeightFunction::Clip{std::make_shared<const WeightFunction>(w), threshold}});
}

namespace {

std::vector<Index> distinct_rows(Index n, Index k, Engine& eng) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(eng))]);
    }
    all.resize(static_cast<std::size_t>(k));
    std::sort(all.begin(), all.end());
    return all;
}

Matrix take_rows(MatrixRef X, const std::vector<Index>& idx) {
    Matrix out(static_cast<Index>(idx.size()), X.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = X.row(idx[k]);
    return out;
}

struct RulsifSystem {
    Matrix H;
    Vector h;
};

RulsifSystem rulsif_system(MatrixRef phi_tr, MatrixRef phi_te, double alpha) {
    const double n_tr = static_cast<double>(phi_tr.rows());
    const double n_te = static_cast<double>(phi_te.rows());
    RulsifSystem s;
    s.H = (alpha / n_te) * (phi_te.transpose() * phi_te) + ((1.0 - alpha) / n_tr) * (phi_tr.transpose() * phi_tr);
    s.H = 0.5 * (s.H + s.H.transpose());
    s.h = phi_te.colwise().mean().transpose();
    return s;
}

Vector rulsif_theta(const RulsifSystem& s, double lambda_w) {
    Matrix A = s.H;
    A.diagonal().array() += lambda_w;
    return solve_psd(A, s.h, 0.0).solution.col(0);
}

void validate_rulsif_inputs(MatrixRef train_X, MatrixRef test_X, double alpha) {
    detail::require(train_X.rows() >= 1 && test_X.rows() >= 1, "RuLSIF needs nonempty train and test samples");
    detail::require(train_X.cols() == test_X.cols(), "RuLSIF train and test dimensions differ");
    detail::require(alpha >= 0.0 && alpha < 1.0, "RuLSIF alpha must lie in [0, 1)");
}

} // namespace

WeightFunction fit_rulsif(MatrixRef train_X, MatrixRef test_X, double alpha, Index centers_k,
                          double gamma_w, double lambda_w, std::uint64_t seed) {
    validate_rulsif_inputs(train_X, test_X, alpha);
    detail::require(centers_k >= 1 && centers_k <= test_X.rows(), "RuLSIF center count must lie in [1, n_te]");
    detail::require(gamma_w > 0.0, "RuLSIF gamma_w must be positive");
    detail::require(lambda_w > 0.0, "RuLSIF lambda_w must be positive");

    auto eng = make_engine(seed, {stream::kRulsif});
    RulsifModel model;
    model.centers = take_rows(test_X, distinct_rows(test_X.rows(), centers_k, eng));
    model.gamma_w = gamma_w;
    model.alpha = alpha;
    model.lambda_w = lambda_w;
    const KernelSpec k = rbf(gamma_w);
    const auto sys = rulsif_system(gram(k, train_X, model.centers), gram(k, test_X, model.centers), alpha);
    model.theta = rulsif_theta(sys, lambda_w);
    return WeightFunction::rulsif(std::move(model));
}

double median_heuristic_gamma(MatrixRef A, MatrixRef B, std::uint64_t seed, Index max_points) {
    detail::require(A.cols() == B.cols(), "median heuristic: dimensions differ");
    auto eng = make_engine(seed, {stream::kRulsif, 1});
    const auto ia = distinct_rows(A.rows(), std::min(A.rows(), max_points), eng);
    const auto ib = distinct_rows(B.rows(), std::min(B.rows(), max_points), eng);
    Matrix P(static_cast<Index>(ia.size() + ib.size()), A.cols());
    P.topRows(static_cast<Index>(ia.size())) = take_rows(A, ia);
    P.bottomRows(static_cast<Index>(ib.size())) = take_rows(B, ib);
    std::vector<double> d2;
    d2.reserve(static_cast<std::size_t>(P.rows() * (P.rows() - 1) / 2));
    for (Index i = 0; i < P.rows(); ++i)
        for (Index j = i + 1; j < P.rows(); ++j) d2.push_back((P.row(i) - P.row(j)).squaredNorm());
    detail::require(!d2.empty(), "median heuristic needs at least two points");
    auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    const double med2 = *mid;
    detail::require(med2 > 0.0, "median heuristic: all points coincide");
    return 1.0 / (2.0 * med2);
}

RulsifFit fit_rulsif_auto(MatrixRef train_X, MatrixRef test_X, const RulsifOptions& options) {
    validate_rulsif_inputs(train_X, test_X, options.alpha);
    RulsifFit fit;
    fit.centers = options.centers.value_or(std::min<Index>(100, test_X.rows()));
    fit.gamma_w = options.gamma_w ? *options.gamma_w : median_heuristic_gamma(train_X, test_X, options.seed);

    if (options.lambda_w) {
        fit.lambda_w = *options.lambda_w;
    } else {
        detail::require(!options.lambda_grid.empty(), "RuLSIF lambda grid is empty");
        const int folds = static_cast<int>(std::min<Index>({options.folds, train_X.rows(), test_X.rows()}));
        detail::require(folds >= 2, "RuLSIF cross-validation needs at least two points per sample");

        auto eng = make_engine(options.seed, {stream::kRulsif, 2});
        const Matrix centers = take_rows(test_X, distinct_rows(test_X.rows(), fit.centers, eng));
        const KernelSpec k = rbf(fit.gamma_w);
        const Matrix phi_tr = gram(k, train_X, centers);
        const Matrix phi_te = gram(k, test_X, centers);
        auto fold_of = [&](Index n) {
            std::vector<int> f(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = static_cast<int>(i % folds);
            std::shuffle(f.begin(), f.end(), eng);
            return f;
        };
        const auto f_tr = fold_of(train_X.rows());
        const auto f_te = fold_of(test_X.rows());
        auto split = [](MatrixRef phi, const std::vector<int>& f, int fold, bool held) {
            std::vector<Index> rows;
            for (std::size_t i = 0; i < f.size(); ++i)
                if ((f[i] == fold) == held) rows.push_back(static_cast<Index>(i));
            return take_rows(phi, rows);
        };

        fit.cv_scores.assign(options.lambda_grid.size(), 0.0);
        for (int fold = 0; fold < folds; ++fold) {
            const Matrix tr_fit = split(phi_tr, f_tr, fold, false), tr_out = split(phi_tr, f_tr, fold, true);
            const Matrix te_fit = split(phi_te, f_te, fold, false), te_out = split(phi_te, f_te, fold, true);
            const auto sys = rulsif_system(tr_fit, te_fit, options.alpha);
            for (std::size_t g = 0; g < options.lambda_grid.size(); ++g) {
                const Vector theta = rulsif_theta(sys, options.lambda_grid[g]);
                const Vector r_tr = tr_out * theta;
                const Vector r_te = te_out * theta;
                const double loss = 0.5 * options.alpha * r_te.squaredNorm() / static_cast<double>(r_te.size()) +
                                    0.5 * (1.0 - options.alpha) * r_tr.squaredNorm() / static_cast<double>(r_tr.size()) -
                                    r_te.mean();
                fit.cv_scores[g] += loss / folds;
            }
        }
        const auto best = std::min_element(fit.cv_scores.begin(), fit.cv_scores.end());
        fit.lambda_w = options.lambda_grid[static_cast<std::size_t>(best - fit.cv_scores.begin())];
    }

    fit.weights = fit_rulsif(train_X, test_X, options.alpha, fit.centers, fit.gamma_w, fit.lambda_w, options.seed);
    return fit;
}

MomentDiagnostic moment_diagnostic(VectorRef w_values, double q, int p, std::optional<double> W,
                                   std::optional<double> sigma2) {
    detail::require(w_values.size() >= 1, "moment diagnostic needs at least one weight");
    detail::require(w_values.allFinite() && w_values.minCoeff() >= 0.0, "weights must be finite and nonnegative");
    detail::require(q >= 0.0 && q <= 1.0, "moment exponent q must lie in [0, 1]");
    detail::require(p >= 2, "moment order p must be >= 2");

    MomentDiagnostic out;
    if (q == 0.0) {
        out.essential_sup = true;
        out.value = std::pow(w_values.maxCoeff(), p - 1);
    } else {
        const double expo = (p - 1) / q + 1.0;
        out.value = std::pow(w_values.array().pow(expo).mean(), q);
    }
    if (W && sigma2) {
        detail::require(*W > 0.0 && *sigma2 > 0.0, "W and sigma^2 must be positive");
        out.reference = 0.5 * std::tgamma(p + 1.0) * std::pow(*W, p - 2) * *sigma2;
        out.within_bound = out.value <= *out.reference;
    }
    return out;
}

} // namespace iwkrr
