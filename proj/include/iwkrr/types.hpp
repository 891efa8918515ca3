#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace iwkrr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using MatrixRef = Eigen::Ref<const Matrix>;
using VectorRef = Eigen::Ref<const Vector>;

/// Rows of covariates with optional targets. One point per row of X.
struct SampleSet {
    Matrix X;
    std::optional<Vector> y;

    Index size() const { return X.rows(); }
    Index dim() const { return X.cols(); }
    bool labeled() const { return y.has_value(); }

    /// Throws InputError unless n >= 1 and targets (when present) are finite
    /// and row-aligned.
    void validate() const;

    /// Rows selected by `rows`, in that order.
    SampleSet subset(const std::vector<Index>& rows) const;
};

} // namespace iwkrr
