#pragma once

#include "iwkrr/types.hpp"

namespace iwkrr {

enum class KernelFamily { RBF };

/// Gaussian kernel K(x, x') = exp(-gamma * |x - x'|^2).
///
/// gamma is an inverse squared length-scale, not a bandwidth.
struct KernelSpec {
    KernelFamily family = KernelFamily::RBF;
    double gamma = 1.0;

    void validate() const;
};

inline KernelSpec rbf(double gamma) { return KernelSpec{KernelFamily::RBF, gamma}; }

double eval_kernel(const KernelSpec& spec, VectorRef x, VectorRef x2);

/// Kernel matrix with entry (i, j) = K(rows_i, cols_j).
///
/// Entries use the same scalar arithmetic as eval_kernel, so
/// gram(X, Z) == gram(Z, X)^T bit for bit and gram(X, X) has an exact unit
/// diagonal.
Matrix gram(const KernelSpec& spec, MatrixRef rows, MatrixRef cols);

/// Rows [begin, begin + out.rows()) of gram(spec, rows, cols), written into
/// `out`. Lets callers stream an n x m product without holding n x n.
void gram_panel(const KernelSpec& spec, MatrixRef rows, MatrixRef cols, Index begin,
                Eigen::Ref<Matrix> out);

/// Number of rows per panel used by streaming helpers.
inline constexpr Index kPanelRows = 512;

} // namespace iwkrr
