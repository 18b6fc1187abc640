#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnml/tensor.hpp"

namespace tnml {

/// Local feature map families. All produce unit d-vectors for x in [0,1].
///   half_angle      [cos(pi x/2), sin(pi x/2)], d = 2
///   spin_coherent   binomial cos/sin powers, any d >= 2 (reduces to
///                   half_angle at d = 2)
///   full_angle      [cos(pi x), sin(pi x)], d = 2; orthonormal under 2dx but
///                   anti-periodic on [0,1]
///   phase_modulated [e^{i 3pi x/2} cos(pi x/2), e^{-i 3pi x/2} sin(pi x/2)],
///                   d = 2, complex; orthonormal under 2dx and non-periodic
enum class FeatureKind : std::uint8_t {
    half_angle = 0,
    spin_coherent = 1,
    full_angle = 2,
    phase_modulated = 3,
};

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

class LocalFeatureMap {
public:
    LocalFeatureMap(FeatureKind kind, std::size_t d);

    FeatureKind kind() const { return kind_; }
    std::size_t dim() const { return d_; }
    bool is_complex() const { return kind_ == FeatureKind::phase_modulated; }

    /// Weight of the integration measure d_mu = weight * dx on [0,1] under
    /// which this family is (or is tested for being) orthonormal.
    double measure_weight() const;

    /// Evaluate phi(x) into `out` (size d). Throws for x outside [0,1]; no
    /// clamping. The real overload rejects complex-valued kinds.
    void eval(double x, std::span<double> out) const;
    void eval(double x, std::span<cplx> out) const;

    std::vector<double> operator()(double x) const;

private:
    FeatureKind kind_;
    std::size_t d_;
};

/// An input vector mapped through a local feature map, stored in factored
/// form: one unit d-vector per component (never the d^N tensor product).
template <typename T>
struct EncodedInput {
    std::size_t n_sites = 0;
    std::size_t d = 0;
    std::vector<T> values;  // n_sites x d, row-major
    std::optional<int> label;

    std::span<const T> site(std::size_t j) const {
        return std::span<const T>(values.data() + j * d, d);
    }
};

template <typename T>
EncodedInput<T> encode(std::span<const double> xs, const LocalFeatureMap& map);

/// Gauss-Legendre nodes and weights on [0,1].
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

/// Numerical Gram matrix G[s][s'] = integral of conj(phi^s) phi^s' d_mu over
/// [0,1] by n_nodes-point Gauss-Legendre quadrature (n_nodes >= 16).
/// Orthonormal families return the identity to quadrature accuracy.
Tensor<cplx> gram_matrix(const LocalFeatureMap& map, std::size_t n_nodes);

}  // namespace tnml
