#include "tnml/feature_map.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tnml {

namespace {

constexpr double kPi = std::numbers::pi;

void check_domain(double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::domain_error("feature map input outside [0,1]: " + std::to_string(x));
}

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i)
        r *= static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

}  // namespace

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::half_angle: return "half_angle";
        case FeatureKind::spin_coherent: return "spin_coherent";
        case FeatureKind::full_angle: return "full_angle";
        case FeatureKind::phase_modulated: return "phase_modulated";
    }
    throw std::invalid_argument("unknown feature kind");
}

FeatureKind feature_kind_from_string(const std::string& name) {
    if (name == "half_angle") return FeatureKind::half_angle;
    if (name == "spin_coherent") return FeatureKind::spin_coherent;
    if (name == "full_angle") return FeatureKind::full_angle;
    if (name == "phase_modulated") return FeatureKind::phase_modulated;
    throw std::invalid_argument("unknown feature kind: " + name);
}

LocalFeatureMap::LocalFeatureMap(FeatureKind kind, std::size_t d) : kind_(kind), d_(d) {
    if (d < 2) throw std::invalid_argument("local dimension must be >= 2");
    if (kind != FeatureKind::spin_coherent && d != 2)
        throw std::invalid_argument(to_string(kind) + " requires d = 2");
}

double LocalFeatureMap::measure_weight() const {
    return (kind_ == FeatureKind::full_angle || kind_ == FeatureKind::phase_modulated)
               ? 2.0
               : 1.0;
}

void LocalFeatureMap::eval(double x, std::span<double> out) const {
    check_domain(x);
    if (out.size() != d_) throw std::invalid_argument("feature output size mismatch");
    switch (kind_) {
        case FeatureKind::half_angle:
            out[0] = std::cos(kPi / 2.0 * x);
            out[1] = std::sin(kPi / 2.0 * x);
            return;
        case FeatureKind::full_angle:
            out[0] = std::cos(kPi * x);
            out[1] = std::sin(kPi * x);
            return;
        case FeatureKind::spin_coherent: {
            const double c = std::cos(kPi / 2.0 * x);
            const double s = std::sin(kPi / 2.0 * x);
            for (std::size_t k = 1; k <= d_; ++k)
                out[k - 1] = std::sqrt(binomial(d_ - 1, k - 1)) *
                             std::pow(c, static_cast<double>(d_ - k)) *
                             std::pow(s, static_cast<double>(k - 1));
            return;
        }
        case FeatureKind::phase_modulated:
            throw std::invalid_argument("phase_modulated map is complex-valued");
    }
}

void LocalFeatureMap::eval(double x, std::span<cplx> out) const {
    if (kind_ != FeatureKind::phase_modulated) {
        std::vector<double> tmp(d_);
        eval(x, std::span<double>(tmp));
        for (std::size_t k = 0; k < d_; ++k) out[k] = tmp[k];
        return;
    }
    check_domain(x);
    if (out.size() != d_) throw std::invalid_argument("feature output size mismatch");
    const double phase = 3.0 * kPi / 2.0 * x;
    out[0] = std::polar(std::cos(kPi / 2.0 * x), phase);
    out[1] = std::polar(std::sin(kPi / 2.0 * x), -phase);
}

std::vector<double> LocalFeatureMap::operator()(double x) const {
    std::vector<double> out(d_);
    eval(x, std::span<double>(out));
    return out;
}

template <typename T>
EncodedInput<T> encode(std::span<const double> xs, const LocalFeatureMap& map) {
    EncodedInput<T> enc;
    enc.n_sites = xs.size();
    enc.d = map.dim();
    enc.values.resize(enc.n_sites * enc.d);
    for (std::size_t j = 0; j < enc.n_sites; ++j)
        map.eval(xs[j], std::span<T>(enc.values.data() + j * enc.d, enc.d));
    return enc;
}

template EncodedInput<double> encode(std::span<const double>, const LocalFeatureMap&);
template EncodedInput<cplx> encode(std::span<const double>, const LocalFeatureMap&);

void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n == 0) throw std::invalid_argument("quadrature needs at least one node");
    nodes.resize(n);
    weights.resize(n);
    // Newton iteration on P_n over [-1,1], then map to [0,1].
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
}

Tensor<cplx> gram_matrix(const LocalFeatureMap& map, std::size_t n_nodes) {
    if (n_nodes < 16) throw std::invalid_argument("gram_matrix requires >= 16 nodes");
    std::vector<double> x, w;
    gauss_legendre(n_nodes, x, w);
    const std::size_t d = map.dim();
    Tensor<cplx> g({d, d});
    std::vector<cplx> phi(d);
    const double mu = map.measure_weight();
    for (std::size_t q = 0; q < n_nodes; ++q) {
        map.eval(x[q], std::span<cplx>(phi));
        for (std::size_t s = 0; s < d; ++s)
            for (std::size_t t = 0; t < d; ++t)
                g.at({s, t}) += w[q] * mu * std::conj(phi[s]) * phi[t];
    }
    return g;
}

}  // namespace tnml
