#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>

#include "tnml/svd.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tnml {

namespace {

constexpr std::size_t kJacobiMaxCols = 64;
constexpr double kRankClamp = 1e-14;  // sigma below this (relative) never adds rank

template <typename T>
T conj_val(const T& x) {
    if constexpr (std::is_same_v<T, double>)
        return x;
    else
        return std::conj(x);
}

template <typename T>
double col_dot_real(const T* x, const T* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::real(conj_val(x[i]) * y[i]);
    return acc;
}

template <typename T>
T col_dot(const T* x, const T* y, std::size_t n) {
    T acc{};
    for (std::size_t i = 0; i < n; ++i) acc += conj_val(x[i]) * y[i];
    return acc;
}

// One-sided Jacobi on the columns of A (r x c, column-major in `a`), with the
// accumulated right factor in `v` (c x c, column-major, starts as identity).
// On return the columns of A are mutually orthogonal and M = A_final * V^H.
template <typename T>
void jacobi_orthogonalize(std::size_t r, std::size_t c, std::vector<T>& a,
                          std::vector<T>& v) {
    constexpr double eps = 1e-15;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p < c; ++p) {
            for (std::size_t q = p + 1; q < c; ++q) {
                T* ap = a.data() + p * r;
                T* aq = a.data() + q * r;
                const double alpha = col_dot_real(ap, ap, r);
                const double beta = col_dot_real(aq, aq, r);
                if (alpha == 0.0 || beta == 0.0) continue;
                T gamma = col_dot(ap, aq, r);
                const double g = std::abs(gamma);
                if (g <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;

                T* vp = v.data() + p * c;
                T* vq = v.data() + q * c;
                if constexpr (!std::is_same_v<T, double>) {
                    // Absorb the phase into column q so the rotation is real.
                    const T ph = std::conj(gamma) / g;
                    for (std::size_t i = 0; i < r; ++i) aq[i] *= ph;
                    for (std::size_t i = 0; i < c; ++i) vq[i] *= ph;
                } else if (gamma < 0) {
                    for (std::size_t i = 0; i < r; ++i) aq[i] = -aq[i];
                    for (std::size_t i = 0; i < c; ++i) vq[i] = -vq[i];
                }

                const double zeta = (beta - alpha) / (2.0 * g);
                const double t =
                    1.0 / (zeta + std::copysign(std::sqrt(1.0 + zeta * zeta), zeta >= 0 ? 1.0 : -1.0));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < r; ++i) {
                    const T xp = ap[i], xq = aq[i];
                    ap[i] = cs * xp - sn * xq;
                    aq[i] = sn * xp + cs * xq;
                }
                for (std::size_t i = 0; i < c; ++i) {
                    const T xp = vp[i], xq = vq[i];
                    vp[i] = cs * xp - sn * xq;
                    vq[i] = sn * xp + cs * xq;
                }
            }
        }
        if (!rotated) break;
    }
}

// Replace flagged columns of u (r x k, row-major) with vectors orthonormal to
// the good ones (needed when min_rank forces keeping exact-zero singular values).
template <typename T>
void complete_basis(std::size_t r, std::size_t k, std::vector<T>& u,
                    const std::vector<bool>& good_in) {
    std::vector<bool> good = good_in;
    for (std::size_t j = 0; j < k; ++j) {
        if (good[j]) continue;
        for (std::size_t trial = 0; trial < r; ++trial) {
            std::vector<T> v(r, T{});
            v[trial] = T{1.0};
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t g = 0; g < k; ++g) {
                    if (!good[g]) continue;
                    T proj{};
                    for (std::size_t i = 0; i < r; ++i)
                        proj += conj_val(u[i * k + g]) * v[i];
                    for (std::size_t i = 0; i < r; ++i) v[i] -= proj * u[i * k + g];
                }
            }
            double nrm = 0.0;
            for (const T& x : v) nrm += std::norm(x);
            nrm = std::sqrt(nrm);
            if (nrm > 0.3) {
                for (std::size_t i = 0; i < r; ++i) u[i * k + j] = v[i] / nrm;
                good[j] = true;
                break;
            }
        }
        if (!good[j])
            throw std::runtime_error("svd: failed to complete orthonormal basis");
    }
}

template <typename T>
void jacobi_dense_svd(std::size_t rows, std::size_t cols, const std::vector<T>& m_rowmajor,
                      std::vector<double>& sigma, std::vector<T>& u, std::vector<T>& vt) {
    // Column-major working copies.
    std::vector<T> a(rows * cols), v(cols * cols, T{});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) a[j * rows + i] = m_rowmajor[i * cols + j];
    for (std::size_t j = 0; j < cols; ++j) v[j * cols + j] = T{1.0};

    jacobi_orthogonalize(rows, cols, a, v);

    std::vector<double> norms(cols);
    for (std::size_t j = 0; j < cols; ++j)
        norms[j] = std::sqrt(col_dot_real(a.data() + j * rows, a.data() + j * rows, rows));
    std::vector<std::size_t> ord(cols);
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    const std::size_t k = std::min(rows, cols);
    sigma.resize(k);
    u.assign(rows * k, T{});
    vt.assign(k * cols, T{});
    std::vector<bool> good(k, false);
    for (std::size_t jj = 0; jj < k; ++jj) {
        const std::size_t j = ord[jj];
        sigma[jj] = norms[j];
        if (norms[j] > 0.0) {
            const T* col = a.data() + j * rows;
            for (std::size_t i = 0; i < rows; ++i) u[i * k + jj] = col[i] / norms[j];
            good[jj] = true;
        }
        const T* vcol = v.data() + j * cols;
        for (std::size_t i = 0; i < cols; ++i) vt[jj * cols + i] = conj_val(vcol[i]);
    }
    if (std::find(good.begin(), good.end(), false) != good.end())
        complete_basis(rows, k, u, good);
}

void lapack_dense_svd(std::size_t rows, std::size_t cols, std::vector<double>& a,
                      std::vector<double>& sigma, std::vector<double>& u,
                      std::vector<double>& vt) {
    const std::size_t k = std::min(rows, cols);
    sigma.resize(k);
    u.resize(rows * k);
    vt.resize(k * cols);
    std::vector<double> superb(k > 1 ? k - 1 : 1);
    const lapack_int info = LAPACKE_dgesvd(
        LAPACK_ROW_MAJOR, 'S', 'S', static_cast<lapack_int>(rows),
        static_cast<lapack_int>(cols), a.data(), static_cast<lapack_int>(cols),
        sigma.data(), u.data(), static_cast<lapack_int>(k), vt.data(),
        static_cast<lapack_int>(cols), superb.data());
    if (info != 0) throw std::runtime_error("svd: LAPACK dgesvd failed to converge");
}

void lapack_dense_svd(std::size_t rows, std::size_t cols, std::vector<cplx>& a,
                      std::vector<double>& sigma, std::vector<cplx>& u,
                      std::vector<cplx>& vt) {
    const std::size_t k = std::min(rows, cols);
    sigma.resize(k);
    u.resize(rows * k);
    vt.resize(k * cols);
    std::vector<double> superb(k > 1 ? k - 1 : 1);
    const lapack_int info = LAPACKE_zgesvd(
        LAPACK_ROW_MAJOR, 'S', 'S', static_cast<lapack_int>(rows),
        static_cast<lapack_int>(cols), a.data(), static_cast<lapack_int>(cols),
        sigma.data(), u.data(), static_cast<lapack_int>(k), vt.data(),
        static_cast<lapack_int>(cols), superb.data());
    if (info != 0) throw std::runtime_error("svd: LAPACK zgesvd failed to converge");
}

}  // namespace

namespace detail {

void dense_svd(std::size_t rows, std::size_t cols, std::vector<double> a,
               std::vector<double>& sigma, std::vector<double>& u,
               std::vector<double>& vt) {
    if (cols <= kJacobiMaxCols)
        jacobi_dense_svd(rows, cols, a, sigma, u, vt);
    else
        lapack_dense_svd(rows, cols, a, sigma, u, vt);
}

void dense_svd(std::size_t rows, std::size_t cols, std::vector<cplx> a,
               std::vector<double>& sigma, std::vector<cplx>& u,
               std::vector<cplx>& vt) {
    if (cols <= kJacobiMaxCols)
        jacobi_dense_svd(rows, cols, a, sigma, u, vt);
    else
        lapack_dense_svd(rows, cols, a, sigma, u, vt);
}

}  // namespace detail

template <typename T>
SvdResult<T> svd(const Tensor<T>& t, std::span<const std::size_t> row_indices,
                 std::span<const std::size_t> col_indices, const TruncParams& trunc) {
    if (row_indices.empty() || col_indices.empty())
        throw std::invalid_argument("svd: row and column index sets must be non-empty");
    if (trunc.min_rank < 1 || trunc.min_rank > trunc.max_rank || trunc.cutoff < 0)
        throw std::invalid_argument("svd: invalid truncation parameters");
    const std::size_t ord = t.order();
    if (row_indices.size() + col_indices.size() != ord)
        throw std::invalid_argument("svd: index sets must partition all tensor indices");
    std::vector<bool> seen(ord, false);
    std::vector<std::size_t> perm;
    perm.reserve(ord);
    for (std::size_t i : row_indices) perm.push_back(i);
    for (std::size_t i : col_indices) perm.push_back(i);
    for (std::size_t i : perm) {
        if (i >= ord || seen[i])
            throw std::invalid_argument("svd: index sets must partition all tensor indices");
        seen[i] = true;
    }
    if (!t.finite()) throw std::invalid_argument("svd: tensor has non-finite values");

    Tensor<T> m = permute(t, perm);
    std::size_t rows = 1, cols = 1;
    std::vector<std::size_t> row_shape, col_shape;
    for (std::size_t i : row_indices) {
        row_shape.push_back(t.shape()[i]);
        rows *= t.shape()[i];
    }
    for (std::size_t i : col_indices) {
        col_shape.push_back(t.shape()[i]);
        cols *= t.shape()[i];
    }

    std::vector<double> sigma;
    std::vector<T> u, vt;
    detail::dense_svd(rows, cols,
                      std::vector<T>(m.values().begin(), m.values().end()), sigma, u, vt);

    const std::size_t k0 = sigma.size();
    const double smax = k0 ? sigma[0] : 0.0;
    std::size_t keep;
    if (smax <= 0.0) {
        keep = std::min(trunc.min_rank, k0);
    } else {
        std::size_t n_clamp = 0;
        while (n_clamp < k0 && sigma[n_clamp] >= kRankClamp * smax) ++n_clamp;
        std::size_t n_cut = 0;
        while (n_cut < k0 && sigma[n_cut] >= trunc.cutoff * smax) ++n_cut;
        keep = std::min({n_clamp, n_cut, trunc.max_rank, k0});
        keep = std::max(keep, std::min(trunc.min_rank, k0));
    }

    SvdResult<T> res;
    res.kept_rank = keep;
    res.S.assign(sigma.begin(), sigma.begin() + keep);
    res.discarded_weight = 0.0;
    for (std::size_t i = keep; i < k0; ++i)
        res.discarded_weight += sigma[i] * sigma[i];

    std::vector<T> u_kept(rows * keep), vt_kept(keep * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < keep; ++j) u_kept[i * keep + j] = u[i * k0 + j];
    std::copy(vt.begin(), vt.begin() + keep * cols, vt_kept.begin());

    row_shape.push_back(keep);
    col_shape.insert(col_shape.begin(), keep);
    res.U = Tensor<T>(std::move(row_shape), std::move(u_kept));
    res.V = Tensor<T>(std::move(col_shape), std::move(vt_kept));
    return res;
}

template SvdResult<double> svd(const Tensor<double>&, std::span<const std::size_t>,
                               std::span<const std::size_t>, const TruncParams&);
template SvdResult<cplx> svd(const Tensor<cplx>&, std::span<const std::size_t>,
                             std::span<const std::size_t>, const TruncParams&);

}  // namespace tnml
