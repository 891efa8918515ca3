#include "iwkrr/kernel.hpp"

#include "iwkrr/error.hpp"

#include <cmath>
#include <string>

namespace iwkrr {

void KernelSpec::validate() const {
    detail::require(std::isfinite(gamma) && gamma > 0.0,
                    "kernel gamma must be positive, got " + std::to_string(gamma));
}

namespace {

void require_same_dim(Index a, Index b) {
    if (a != b) {
        throw InputError("kernel inputs have different dimensions: " + std::to_string(a) +
                         " vs " + std::to_string(b));
    }
}

} // namespace

double eval_kernel(const KernelSpec& spec, VectorRef x, VectorRef x2) {
    spec.validate();
    require_same_dim(x.size(), x2.size());
    double sq = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
        const double diff = x[k] - x2[k];
        sq += diff * diff;
    }
    return std::exp(-spec.gamma * sq);
}

void gram_panel(const KernelSpec& spec, MatrixRef rows, MatrixRef cols, Index begin,
                Eigen::Ref<Matrix> out) {
    spec.validate();
    require_same_dim(rows.cols(), cols.cols());
    detail::require(begin >= 0 && begin + out.rows() <= rows.rows() && out.cols() == cols.rows(),
                    "gram panel out of range");
    const Index d = rows.cols();
    const double g = spec.gamma;
    for (Index j = 0; j < cols.rows(); ++j) {
        for (Index i = 0; i < out.rows(); ++i) {
            double sq = 0.0;
            for (Index k = 0; k < d; ++k) {
                const double diff = rows(begin + i, k) - cols(j, k);
                sq += diff * diff;
            }
            out(i, j) = std::exp(-g * sq);
        }
    }
}

Matrix gram(const KernelSpec& spec, MatrixRef rows, MatrixRef cols) {
    detail::require(rows.rows() > 0 && cols.rows() > 0, "gram requires nonempty point sets");
    Matrix out(rows.rows(), cols.rows());
    for (Index begin = 0; begin < rows.rows(); begin += kPanelRows) {
        const Index len = std::min(kPanelRows, rows.rows() - begin);
        gram_panel(spec, rows, cols, begin, out.middleRows(begin, len));
    }
    return out;
}

} // namespace iwkrr
