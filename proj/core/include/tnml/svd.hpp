#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tnml/tensor.hpp"

namespace tnml {

/// Truncation policy for svd(). Singular values with sigma_k < cutoff * sigma_1
/// are discarded; at most max_rank and at least min_rank values are kept.
/// Values below 1e-14 * sigma_1 never count toward the kept rank regardless
/// of cutoff (noise-rank clamp), except when min_rank forces them.
struct TruncParams {
    std::size_t max_rank = std::numeric_limits<std::size_t>::max();
    double cutoff = 0.0;
    std::size_t min_rank = 1;
};

template <typename T>
struct SvdResult {
    Tensor<T> U;             // (row extents..., kept_rank); orthonormal columns
    std::vector<double> S;   // kept singular values, descending, >= 0
    Tensor<T> V;             // (kept_rank, col extents...); orthonormal rows
    double discarded_weight = 0.0;  // sum of squared truncated singular values
    std::size_t kept_rank = 0;
};

/// SVD of `t` matricized with `row_indices` as the collective row index and
/// `col_indices` as the collective column index (the two must partition all
/// indices of t). U * diag(S) * V reconstructs the matricization up to the
/// discarded weight.
///
/// Matrices with at most 64 columns go through a one-sided Jacobi
/// orthogonalization (high relative accuracy at the small sizes that dominate
/// sweeping); larger ones through LAPACK's Golub-Kahan bidiagonalization.
template <typename T>
SvdResult<T> svd(const Tensor<T>& t, std::span<const std::size_t> row_indices,
                 std::span<const std::size_t> col_indices,
                 const TruncParams& trunc = {});

template <typename T>
SvdResult<T> svd(const Tensor<T>& t, std::initializer_list<std::size_t> row_indices,
                 std::initializer_list<std::size_t> col_indices,
                 const TruncParams& trunc = {}) {
    return svd(t, std::span<const std::size_t>(row_indices.begin(), row_indices.size()),
               std::span<const std::size_t>(col_indices.begin(), col_indices.size()),
               trunc);
}

namespace detail {
/// Economy SVD of a row-major r x c matrix: fills sigma (descending, one per
/// min(r,c)), u (r x min, orthonormal columns) and vt (min x c, orthonormal
/// rows). Columns of u matching exact-zero singular values are completed to
/// an orthonormal set.
void dense_svd(std::size_t rows, std::size_t cols, std::vector<double> a,
               std::vector<double>& sigma, std::vector<double>& u,
               std::vector<double>& vt);
void dense_svd(std::size_t rows, std::size_t cols, std::vector<cplx> a,
               std::vector<double>& sigma, std::vector<cplx>& u,
               std::vector<cplx>& vt);
}  // namespace detail

}  // namespace tnml
