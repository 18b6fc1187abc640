#include "tnml/toy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace tnml {

namespace {

void check_toy_weight(std::span<const std::size_t> shape, const LocalFeatureMap& map) {
    if (shape.size() != 3) throw std::invalid_argument("toy weight must have order 3");
    if (shape[1] != map.dim() || shape[2] != map.dim())
        throw std::invalid_argument("toy weight does not match the feature map dimension");
}

void check_two_pixels(const LabeledDataset& pts) {
    if (pts.n_features != 2)
        throw std::invalid_argument("toy models require two-pixel inputs");
}

double norm2(const Tensor<cplx>& w) {
    double acc = 0;
    for (const auto& v : w.values()) acc += std::norm(v);
    return acc;
}

}  // namespace

template <typename T>
std::vector<T> toy_scores(const Tensor<T>& w, const LocalFeatureMap& map, double x1,
                          double x2) {
    check_toy_weight(w.shape(), map);
    const std::size_t nl = w.shape()[0], d = map.dim();
    std::vector<T> p1(d), p2(d);
    map.eval(x1, std::span<T>(p1));
    map.eval(x2, std::span<T>(p2));
    std::vector<T> f(nl, T{});
    for (std::size_t l = 0; l < nl; ++l)
        for (std::size_t s = 0; s < d; ++s) {
            const T c = p1[s];
            const T* row = w.data() + (l * d + s) * d;
            T acc{};
            for (std::size_t t = 0; t < d; ++t) acc += row[t] * p2[t];
            f[l] += c * acc;
        }
    return f;
}

template std::vector<double> toy_scores(const Tensor<double>&, const LocalFeatureMap&,
                                        double, double);
template std::vector<cplx> toy_scores(const Tensor<cplx>&, const LocalFeatureMap&, double,
                                      double);

double toy_quadratic_cost(const Tensor<double>& w, const LabeledDataset& pts,
                          const LocalFeatureMap& map) {
    check_two_pixels(pts);
    const std::size_t nl = w.shape()[0];
    double cost = 0;
    for (std::size_t n = 0; n < pts.size(); ++n) {
        const auto f = toy_scores(w, map, pts.input(n)[0], pts.input(n)[1]);
        for (std::size_t l = 0; l < nl; ++l) {
            const double target = static_cast<int>(l) == pts.labels[n] ? 1.0 : 0.0;
            cost += 0.5 * (f[l] - target) * (f[l] - target);
        }
    }
    return cost;
}

Tensor<double> toy_quadratic_gradient(const Tensor<double>& w, const LabeledDataset& pts,
                                      const LocalFeatureMap& map) {
    check_two_pixels(pts);
    const std::size_t nl = w.shape()[0], d = map.dim();
    Tensor<double> g(w.shape());
    std::vector<double> p1(d), p2(d);
    for (std::size_t n = 0; n < pts.size(); ++n) {
        const double x1 = pts.input(n)[0], x2 = pts.input(n)[1];
        const auto f = toy_scores(w, map, x1, x2);
        map.eval(x1, std::span<double>(p1));
        map.eval(x2, std::span<double>(p2));
        for (std::size_t l = 0; l < nl; ++l) {
            const double target = static_cast<int>(l) == pts.labels[n] ? 1.0 : 0.0;
            const double r = f[l] - target;
            for (std::size_t s = 0; s < d; ++s)
                for (std::size_t t = 0; t < d; ++t)
                    g.at({l, s, t}) += r * p1[s] * p2[t];
        }
    }
    scale(g, 1.0 / static_cast<double>(pts.size()));
    return g;
}

Tensor<double> train_full_quadratic(const LabeledDataset& pts, const LocalFeatureMap& map,
                                    std::size_t iters, double rate, std::uint64_t seed) {
    check_two_pixels(pts);
    if (rate <= 0) throw std::invalid_argument("train_full_quadratic: rate must be positive");
    const std::size_t nl =
        1 + static_cast<std::size_t>(*std::max_element(pts.labels.begin(), pts.labels.end()));
    const std::size_t d = map.dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    Tensor<double> w({nl, d, d});
    for (auto& v : w.values()) v = u(rng);

    double cost = toy_quadratic_cost(w, pts, map);
    for (std::size_t it = 0; it < iters; ++it) {
        auto g = toy_quadratic_gradient(w, pts, map);
        if (frobenius_norm(g) < 1e-14) break;
        double eta = rate;
        bool accepted = false;
        for (int halvings = 0; halvings <= 30; ++halvings) {
            Tensor<double> cand = w;
            axpy(cand, -eta, g);
            const double c = toy_quadratic_cost(cand, pts, map);
            if (std::isfinite(c) && c <= cost) {
                w = std::move(cand);
                cost = c;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;
    }
    return w;
}

DecisionGrid decision_grid(const Tensor<double>& w, const LocalFeatureMap& map,
                           std::size_t grid) {
    if (grid == 0) throw std::invalid_argument("decision_grid: empty grid");
    DecisionGrid out;
    out.grid = grid;
    out.labels.resize(grid * grid);
    out.margins.resize(grid * grid);
    for (std::size_t ix = 0; ix < grid; ++ix)
        for (std::size_t iy = 0; iy < grid; ++iy) {
            const double x1 = (ix + 0.5) / static_cast<double>(grid);
            const double x2 = (iy + 0.5) / static_cast<double>(grid);
            const auto f = toy_scores(w, map, x1, x2);
            std::size_t best = 0, second = f.size() > 1 ? 1 : 0;
            if (std::abs(f[second]) > std::abs(f[best])) std::swap(best, second);
            for (std::size_t l = 2; l < f.size(); ++l) {
                if (std::abs(f[l]) > std::abs(f[best])) {
                    second = best;
                    best = l;
                } else if (std::abs(f[l]) > std::abs(f[second])) {
                    second = l;
                }
            }
            out.labels[ix * grid + iy] = static_cast<int>(best);
            out.margins[ix * grid + iy] = std::abs(f[best]) - std::abs(f[second]);
        }
    return out;
}

void write_csv(const DecisionGrid& g, std::ostream& os) {
    os.precision(17);
    os << "x1,x2,label,margin\n";
    for (std::size_t ix = 0; ix < g.grid; ++ix)
        for (std::size_t iy = 0; iy < g.grid; ++iy) {
            const double x1 = (ix + 0.5) / static_cast<double>(g.grid);
            const double x2 = (iy + 0.5) / static_cast<double>(g.grid);
            os << x1 << ',' << x2 << ',' << g.labels[ix * g.grid + iy] << ','
               << g.margins[ix * g.grid + iy] << '\n';
        }
}

double grid_disagreement(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("grid_disagreement: size mismatch");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Generative path

Tensor<cplx> random_hidden_model(std::size_t d, std::uint64_t seed) {
    if (d < 2) throw std::invalid_argument("random_hidden_model: d must be >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Tensor<cplx> w({2, d, d});
    for (auto& v : w.values()) v = cplx{gauss(rng), gauss(rng)};
    scale(w, cplx{1.0 / std::sqrt(norm2(w)), 0.0});
    return w;
}

std::array<double, 2> label_probabilities(const Tensor<cplx>& w) {
    if (w.order() != 3 || w.shape()[0] != 2)
        throw std::invalid_argument("label_probabilities: expected a two-label toy weight");
    const double total = norm2(w);
    if (std::abs(total - 1.0) > 1e-8)
        throw std::invalid_argument("label_probabilities: weight tensor is not normalized");
    const std::size_t block = w.size() / 2;
    double pa = 0;
    for (std::size_t i = 0; i < block; ++i) pa += std::norm(w[i]);
    return {pa / total, 1.0 - pa / total};
}

double born_normalization(const Tensor<cplx>& w, const LocalFeatureMap& map,
                          std::size_t grid) {
    check_toy_weight(w.shape(), map);
    const double mu = map.measure_weight();
    const double cell = (mu / grid) * (mu / grid);
    double total = 0;
    for (std::size_t ix = 0; ix < grid; ++ix)
        for (std::size_t iy = 0; iy < grid; ++iy) {
            const auto f = toy_scores(w, map, (ix + 0.5) / grid, (iy + 0.5) / grid);
            for (const auto& v : f) total += std::norm(v) * cell;
        }
    return total;
}

LabeledDataset sample_points(const Tensor<cplx>& w, const LocalFeatureMap& map,
                             std::size_t n_samples, std::size_t grid, std::uint64_t seed) {
    check_toy_weight(w.shape(), map);
    if (grid < 64)
        throw std::invalid_argument("sample_points: grid below the discretization floor (64)");
    const auto probs = label_probabilities(w);

    // Cell masses of p(x|l) at midpoint resolution, normalized per label.
    std::vector<std::vector<double>> mass(2, std::vector<double>(grid * grid));
    std::vector<std::vector<double>> marginal(2, std::vector<double>(grid, 0.0));
    for (int l = 0; l < 2; ++l) {
        double total = 0;
        for (std::size_t ix = 0; ix < grid; ++ix)
            for (std::size_t iy = 0; iy < grid; ++iy) {
                const auto f = toy_scores(w, map, (ix + 0.5) / grid, (iy + 0.5) / grid);
                const double m = std::norm(f[l]);
                mass[l][ix * grid + iy] = m;
                total += m;
            }
        for (auto& m : mass[l]) m /= total;
        for (std::size_t ix = 0; ix < grid; ++ix)
            for (std::size_t iy = 0; iy < grid; ++iy) marginal[l][ix] += mass[l][ix * grid + iy];
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LabeledDataset ds;
    ds.n_features = 2;
    ds.provenance = "born_samples";
    for (std::size_t n = 0; n < n_samples; ++n) {
        const int label = u(rng) < probs[0] ? 0 : 1;
        // Inverse CDF over the x1 marginal, then the conditional column.
        double r = u(rng);
        std::size_t ix = grid - 1;
        for (std::size_t i = 0; i < grid; ++i) {
            if (r < marginal[label][i]) {
                ix = i;
                break;
            }
            r -= marginal[label][i];
        }
        double r2 = u(rng) * marginal[label][ix];
        std::size_t iy = grid - 1;
        for (std::size_t i = 0; i < grid; ++i) {
            const double m = mass[label][ix * grid + i];
            if (r2 < m) {
                iy = i;
                break;
            }
            r2 -= m;
        }
        ds.inputs.push_back((ix + u(rng)) / grid);
        ds.inputs.push_back((iy + u(rng)) / grid);
        ds.labels.push_back(label);
    }
    return ds;
}

double toy_nll(const Tensor<cplx>& w, const LabeledDataset& pts, const LocalFeatureMap& map) {
    check_two_pixels(pts);
    double cost = 0;
    for (std::size_t n = 0; n < pts.size(); ++n) {
        const auto f = toy_scores(w, map, pts.input(n)[0], pts.input(n)[1]);
        const double p = std::norm(f[pts.labels[n]]);
        if (p < 1e-300) return std::numeric_limits<double>::infinity();
        cost -= std::log(p);
    }
    return cost;
}

Tensor<cplx> toy_nll_gradient(const Tensor<cplx>& w, const LabeledDataset& pts,
                              const LocalFeatureMap& map) {
    check_two_pixels(pts);
    const std::size_t d = map.dim();
    Tensor<cplx> g(w.shape());
    std::vector<cplx> p1(d), p2(d);
    for (std::size_t n = 0; n < pts.size(); ++n) {
        const double x1 = pts.input(n)[0], x2 = pts.input(n)[1];
        const auto f = toy_scores(w, map, x1, x2);
        const int l = pts.labels[n];
        const double p = std::norm(f[l]);
        if (p < 1e-300)
            throw std::runtime_error("toy_nll_gradient: vanishing likelihood at a training point");
        map.eval(x1, std::span<cplx>(p1));
        map.eval(x2, std::span<cplx>(p2));
        // dC/dconj(W^l_st) = -f * conj(phi_s phi_t) / |f|^2; packed gradient
        // is twice that (d/dRe + i d/dIm).
        const cplx factor = -2.0 * f[l] / p;
        for (std::size_t s = 0; s < d; ++s)
            for (std::size_t t = 0; t < d; ++t)
                g.at({static_cast<std::size_t>(l), s, t}) +=
                    factor * std::conj(p1[s] * p2[t]);
    }
    scale(g, cplx{1.0 / static_cast<double>(pts.size()), 0.0});
    return g;
}

Tensor<cplx> train_full_nll(const LabeledDataset& pts, const LocalFeatureMap& map,
                            std::size_t iters, double rate, std::uint64_t seed) {
    check_two_pixels(pts);
    if (rate <= 0) throw std::invalid_argument("train_full_nll: rate must be positive");
    Tensor<cplx> w = random_hidden_model(map.dim(), seed);
    double cost = toy_nll(w, pts, map);
    for (std::size_t it = 0; it < iters; ++it) {
        auto g = toy_nll_gradient(w, pts, map);
        if (frobenius_norm(g) < 1e-13) break;
        double eta = rate;
        bool accepted = false;
        for (int halvings = 0; halvings <= 30; ++halvings) {
            Tensor<cplx> cand = w;
            axpy(cand, cplx{-eta, 0.0}, g);
            scale(cand, cplx{1.0 / std::sqrt(norm2(cand)), 0.0});
            const double c = toy_nll(cand, pts, map);
            if (std::isfinite(c) && c <= cost) {
                w = std::move(cand);
                cost = c;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;
    }
    return w;
}

double kl_divergence(const Tensor<cplx>& w_true, const Tensor<cplx>& w_learned,
                     const LocalFeatureMap& map, std::size_t grid) {
    check_toy_weight(w_true.shape(), map);
    check_toy_weight(w_learned.shape(), map);
    const double mu = map.measure_weight();
    const double cell = (mu / grid) * (mu / grid);
    double kl = 0;
    for (std::size_t ix = 0; ix < grid; ++ix)
        for (std::size_t iy = 0; iy < grid; ++iy) {
            const double x1 = (ix + 0.5) / grid, x2 = (iy + 0.5) / grid;
            const auto ft = toy_scores(w_true, map, x1, x2);
            const auto fl = toy_scores(w_learned, map, x1, x2);
            for (std::size_t l = 0; l < ft.size(); ++l) {
                const double p = std::norm(ft[l]);
                if (p < 1e-15) continue;
                const double q = std::max(std::norm(fl[l]), 1e-300);
                kl += cell * p * std::log(p / q);
            }
        }
    return kl;
}

KlScanResult kl_scan(std::span<const std::size_t> sizes, const KlScanConfig& cfg) {
    if (sizes.empty()) throw std::invalid_argument("kl_scan: no sample sizes");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1])
            throw std::invalid_argument("kl_scan: sizes must be strictly increasing");
    if (cfg.trials == 0) throw std::invalid_argument("kl_scan: need at least one trial");

    LocalFeatureMap map(FeatureKind::phase_modulated, cfg.d);
    std::mt19937_64 master(cfg.seed);

    KlScanResult out;
    out.sizes.assign(sizes.begin(), sizes.end());
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        double sum = 0, sum2 = 0;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            const std::uint64_t s_hidden = master();
            const std::uint64_t s_sample = master();
            const std::uint64_t s_train = master();
            const auto hidden = random_hidden_model(cfg.d, s_hidden);
            const auto pts = sample_points(hidden, map, sizes[si], cfg.grid_sample, s_sample);
            const auto learned =
                train_full_nll(pts, map, cfg.train_iters, cfg.train_rate, s_train);
            const double kl = kl_divergence(hidden, learned, map, cfg.grid_kl);
            sum += kl;
            sum2 += kl * kl;
        }
        const double mean = sum / cfg.trials;
        out.mean_kl.push_back(mean);
        out.std_kl.push_back(
            cfg.trials > 1 ? std::sqrt(std::max(0.0, sum2 / cfg.trials - mean * mean)) : 0.0);
    }

    double num = 0, den = 0;
    for (std::size_t i = 0; i < out.sizes.size(); ++i) {
        const double x = 1.0 / std::sqrt(static_cast<double>(out.sizes[i]));
        num += out.mean_kl[i] * x;
        den += x * x;
    }
    out.sigma = den > 0 ? num / den : 0.0;
    double rss = 0;
    for (std::size_t i = 0; i < out.sizes.size(); ++i) {
        const double x = 1.0 / std::sqrt(static_cast<double>(out.sizes[i]));
        const double r = out.mean_kl[i] - out.sigma * x;
        rss += r * r;
    }
    out.fit_residual = std::sqrt(rss / out.sizes.size());
    return out;
}

void write_csv(const KlScanResult& r, std::ostream& os) {
    os.precision(17);
    os << "n_samples,mean_kl,std_kl\n";
    for (std::size_t i = 0; i < r.sizes.size(); ++i)
        os << r.sizes[i] << ',' << r.mean_kl[i] << ',' << r.std_kl[i] << '\n';
}

}  // namespace tnml
