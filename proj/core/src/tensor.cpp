#include "tnml/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tnml {

namespace {

std::size_t checked_volume(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw std::invalid_argument("tensor extent must be >= 1");
        if (e != 0 && n > static_cast<std::size_t>(-1) / e)
            throw std::invalid_argument("tensor volume overflows size_t");
        n *= e;
    }
    return n;
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_volume(shape_), T{}) {}

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_volume(shape_))
        throw std::invalid_argument("tensor data length does not match extents");
}

template <typename T>
std::size_t Tensor<T>::extent(std::size_t axis) const {
    if (axis >= shape_.size()) throw std::out_of_range("tensor axis out of range");
    return shape_[axis];
}

template <typename T>
std::size_t Tensor<T>::flat_index(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size())
        throw std::invalid_argument("index order does not match tensor order");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= shape_[k]) throw std::out_of_range("tensor index out of range");
        flat = flat * shape_[k] + idx[k];
    }
    return flat;
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::size_t> idx) {
    return data_[flat_index({idx.begin(), idx.size()})];
}

template <typename T>
const T& Tensor<T>::at(std::initializer_list<std::size_t> idx) const {
    return data_[flat_index({idx.begin(), idx.size()})];
}

template <typename T>
bool Tensor<T>::finite() const {
    for (const T& v : data_) {
        if constexpr (std::is_same_v<T, double>) {
            if (!std::isfinite(v)) return false;
        } else {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        }
    }
    return true;
}

namespace detail {

void gemm(std::size_t m, std::size_t k, std::size_t n,
          const double* a, const double* b, double* c) {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k),
                1.0, a, static_cast<int>(k), b, static_cast<int>(n),
                0.0, c, static_cast<int>(n));
}

void gemm(std::size_t m, std::size_t k, std::size_t n,
          const cplx* a, const cplx* b, cplx* c) {
    const cplx one(1.0, 0.0), zero(0.0, 0.0);
    cblas_zgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k),
                &one, a, static_cast<int>(k), b, static_cast<int>(n),
                &zero, c, static_cast<int>(n));
}

}  // namespace detail

template <typename T>
Tensor<T> permute(const Tensor<T>& a, std::span<const std::size_t> perm) {
    const std::size_t ord = a.order();
    if (perm.size() != ord) throw std::invalid_argument("permutation length mismatch");
    std::vector<bool> seen(ord, false);
    bool identity = true;
    for (std::size_t k = 0; k < ord; ++k) {
        if (perm[k] >= ord || seen[perm[k]])
            throw std::invalid_argument("invalid permutation");
        seen[perm[k]] = true;
        if (perm[k] != k) identity = false;
    }
    if (identity) return a;

    std::vector<std::size_t> out_shape(ord);
    for (std::size_t k = 0; k < ord; ++k) out_shape[k] = a.shape()[perm[k]];

    // Input strides mapped onto output axes.
    std::vector<std::size_t> in_stride(ord, 1);
    for (std::size_t k = ord; k-- > 1;)
        in_stride[k - 1] = in_stride[k] * a.shape()[k];
    std::vector<std::size_t> step(ord);
    for (std::size_t k = 0; k < ord; ++k) step[k] = in_stride[perm[k]];

    Tensor<T> out(out_shape);
    std::vector<std::size_t> idx(ord, 0);
    const T* src = a.data();
    T* dst = out.data();
    std::size_t src_off = 0;
    const std::size_t total = out.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
        dst[flat] = src[src_off];
        for (std::size_t k = ord; k-- > 0;) {
            src_off += step[k];
            if (++idx[k] < out_shape[k]) break;
            src_off -= step[k] * out_shape[k];
            idx[k] = 0;
        }
    }
    return out;
}

template <typename T>
Tensor<T> contract(const Tensor<T>& a, const Tensor<T>& b,
                   std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    const std::size_t oa = a.order(), ob = b.order();
    std::vector<bool> used_a(oa, false), used_b(ob, false);
    for (const auto& [ia, ib] : pairs) {
        if (ia >= oa || ib >= ob)
            throw std::invalid_argument("contraction index out of range");
        if (used_a[ia] || used_b[ib])
            throw std::invalid_argument("repeated index in contraction pairs");
        if (a.shape()[ia] != b.shape()[ib])
            throw std::invalid_argument("contracted extents do not match: " +
                                        std::to_string(a.shape()[ia]) + " vs " +
                                        std::to_string(b.shape()[ib]));
        used_a[ia] = true;
        used_b[ib] = true;
    }

    std::vector<std::size_t> perm_a, perm_b, out_shape;
    perm_a.reserve(oa);
    perm_b.reserve(ob);
    std::size_t m = 1, k = 1, n = 1;
    for (std::size_t i = 0; i < oa; ++i)
        if (!used_a[i]) {
            perm_a.push_back(i);
            out_shape.push_back(a.shape()[i]);
            m *= a.shape()[i];
        }
    for (const auto& [ia, ib] : pairs) {
        perm_a.push_back(ia);
        k *= a.shape()[ia];
    }
    for (const auto& [ia, ib] : pairs) perm_b.push_back(ib);
    for (std::size_t i = 0; i < ob; ++i)
        if (!used_b[i]) {
            perm_b.push_back(i);
            out_shape.push_back(b.shape()[i]);
            n *= b.shape()[i];
        }

    Tensor<T> am = permute(a, perm_a);
    Tensor<T> bm = permute(b, perm_b);
    Tensor<T> out(out_shape);
    detail::gemm(m, k, n, am.data(), bm.data(), out.data());
    return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<std::size_t> shape) {
    if (checked_volume(shape) != a.size())
        throw std::invalid_argument("reshape volume mismatch");
    return Tensor<T>(std::move(shape), std::vector<T>(a.values().begin(), a.values().end()));
}

template <typename T>
double frobenius_norm(const Tensor<T>& a) {
    double acc = 0.0;
    for (const T& v : a.values()) acc += std::norm(v);
    return std::sqrt(acc);
}

template <typename T>
Tensor<T> conjugate(Tensor<T> a) {
    if constexpr (!std::is_same_v<T, double>) {
        for (T& v : a.values()) v = std::conj(v);
    }
    return a;
}

template <typename T>
void axpy(Tensor<T>& y, T alpha, const Tensor<T>& x) {
    if (y.shape() != x.shape()) throw std::invalid_argument("axpy shape mismatch");
    T* yp = y.data();
    const T* xp = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) yp[i] += alpha * xp[i];
}

template <typename T>
void scale(Tensor<T>& a, T factor) {
    for (T& v : a.values()) v *= factor;
}

template class Tensor<double>;
template class Tensor<cplx>;

template Tensor<double> contract(const Tensor<double>&, const Tensor<double>&,
                                 std::span<const std::pair<std::size_t, std::size_t>>);
template Tensor<cplx> contract(const Tensor<cplx>&, const Tensor<cplx>&,
                               std::span<const std::pair<std::size_t, std::size_t>>);
template Tensor<double> permute(const Tensor<double>&, std::span<const std::size_t>);
template Tensor<cplx> permute(const Tensor<cplx>&, std::span<const std::size_t>);
template Tensor<double> reshape(const Tensor<double>&, std::vector<std::size_t>);
template Tensor<cplx> reshape(const Tensor<cplx>&, std::vector<std::size_t>);
template double frobenius_norm(const Tensor<double>&);
template double frobenius_norm(const Tensor<cplx>&);
template Tensor<double> conjugate(Tensor<double>);
template Tensor<cplx> conjugate(Tensor<cplx>);
template void axpy(Tensor<double>&, double, const Tensor<double>&);
template void axpy(Tensor<cplx>&, cplx, const Tensor<cplx>&);
template void scale(Tensor<double>&, double);
template void scale(Tensor<cplx>&, cplx);

}  // namespace tnml
