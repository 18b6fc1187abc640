#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace tnml {

using cplx = std::complex<double>;

/// Dense row-major tensor over real or complex double-precision scalars.
/// All extents are >= 1; an order-0 tensor holds exactly one value.
/// Tensors are plain values: copyable, movable, and safe to share between
/// threads once constructed.
template <typename T>
class Tensor {
public:
    Tensor() : data_(1, T{}) {}

    /// Zero-filled tensor with the given extents.
    explicit Tensor(std::vector<std::size_t> shape);

    /// Takes ownership of `data`, which must have exactly prod(shape) entries.
    Tensor(std::vector<std::size_t> shape, std::vector<T> data);

    std::size_t order() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t extent(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    std::size_t flat_index(std::span<const std::size_t> idx) const;
    T& at(std::initializer_list<std::size_t> idx);
    const T& at(std::initializer_list<std::size_t> idx) const;

    bool finite() const;

private:
    std::vector<std::size_t> shape_;  // empty => order 0
    std::vector<T> data_;
};

/// Contract `a` and `b` over the given (index-of-a, index-of-b) pairs.
/// Free indices of `a` precede free indices of `b` in the result, each in
/// their original relative order. An empty pair list is the outer product.
template <typename T>
Tensor<T> contract(const Tensor<T>& a, const Tensor<T>& b,
                   std::span<const std::pair<std::size_t, std::size_t>> pairs);

template <typename T>
Tensor<T> contract(const Tensor<T>& a, const Tensor<T>& b,
                   std::initializer_list<std::pair<std::size_t, std::size_t>> pairs) {
    return contract(a, b, std::span<const std::pair<std::size_t, std::size_t>>(
                              pairs.begin(), pairs.size()));
}

/// Reindex so that result axis k is input axis perm[k] (numpy convention).
template <typename T>
Tensor<T> permute(const Tensor<T>& a, std::span<const std::size_t> perm);

template <typename T>
Tensor<T> permute(const Tensor<T>& a, std::initializer_list<std::size_t> perm) {
    return permute(a, std::span<const std::size_t>(perm.begin(), perm.size()));
}

/// Same data, new extents; prod(shape) must equal a.size().
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<std::size_t> shape);

template <typename T>
double frobenius_norm(const Tensor<T>& a);

template <typename T>
Tensor<T> conjugate(Tensor<T> a);

/// y += alpha * x, elementwise; shapes must match.
template <typename T>
void axpy(Tensor<T>& y, T alpha, const Tensor<T>& x);

template <typename T>
void scale(Tensor<T>& a, T factor);

namespace detail {
/// C = A(m x k) * B(k x n), all row-major, C overwritten.
void gemm(std::size_t m, std::size_t k, std::size_t n,
          const double* a, const double* b, double* c);
void gemm(std::size_t m, std::size_t k, std::size_t n,
          const cplx* a, const cplx* b, cplx* c);
}  // namespace detail

extern template class Tensor<double>;
extern template class Tensor<cplx>;

}  // namespace tnml
