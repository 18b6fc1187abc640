#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support/test_util.hpp"
#include "tnml/toy.hpp"

using namespace tnml;
using namespace tnml::testutil;

namespace {

LabeledDataset two_pixel_points(std::initializer_list<std::array<double, 3>> rows) {
    LabeledDataset ds;
    ds.n_features = 2;
    for (const auto& r : rows) {
        ds.inputs.push_back(r[0]);
        ds.inputs.push_back(r[1]);
        ds.labels.push_back(static_cast<int>(r[2]));
    }
    return ds;
}

int toy_argmax(const std::vector<double>& f) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < f.size(); ++l)
        if (std::abs(f[l]) > std::abs(f[best])) best = l;
    return static_cast<int>(best);
}

}  // namespace

TEST_CASE("train_full_quadratic: single point is fit") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    auto pts = two_pixel_points({{0.3, 0.6, 1}});
    auto w = train_full_quadratic(pts, map, 500, 1.0, 3);
    auto f = toy_scores(w, map, 0.3, 0.6);
    CHECK(toy_argmax(f) == 1);
    CHECK(std::abs(f[1] - 1.0) < 1e-3);
    CHECK(std::abs(f[0]) < 1e-3);
}

TEST_CASE("train_full_quadratic: separable binary pair reaches zero error") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    auto pts = two_pixel_points({{0, 0, 0}, {1, 1, 1}});
    auto w = train_full_quadratic(pts, map, 800, 1.0, 5);
    for (std::size_t n = 0; n < pts.size(); ++n) {
        auto f = toy_scores(w, map, pts.input(n)[0], pts.input(n)[1]);
        CHECK(toy_argmax(f) == pts.labels[n]);
    }
}

TEST_CASE("quadratic gradient matches central finite differences") {
    std::mt19937_64 rng(401);
    LocalFeatureMap map(FeatureKind::spin_coherent, 3);
    auto pts = two_pixel_points({{0.1, 0.9, 0}, {0.4, 0.2, 1}, {0.8, 0.7, 0}, {0.55, 0.35, 1}});
    auto w = random_tensor<double>({2, 3, 3}, rng);
    auto g = toy_quadratic_gradient(w, pts, map);
    const double h = 1e-6;
    const double n = static_cast<double>(pts.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        Tensor<double> wp = w, wm = w;
        wp[k] += h;
        wm[k] -= h;
        const double fd =
            (toy_quadratic_cost(wp, pts, map) - toy_quadratic_cost(wm, pts, map)) / (2 * h);
        CHECK(rel_err(n * g[k], fd) <= 1e-6);
    }
}

TEST_CASE("decision_grid: single-label support and self-consistency") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    Tensor<double> w({2, 2, 2});
    w.at({0, 0, 0}) = 0.7;
    w.at({0, 1, 1}) = -0.4;  // label A only
    auto grid = decision_grid(w, map, 21);
    for (int v : grid.labels) CHECK(v == 0);

    std::mt19937_64 rng(403);
    auto wr = random_tensor<double>({2, 2, 2}, rng);
    auto g = decision_grid(wr, map, 11);
    for (std::size_t ix = 0; ix < 11; ++ix)
        for (std::size_t iy = 0; iy < 11; ++iy) {
            auto f = toy_scores(wr, map, (ix + 0.5) / 11, (iy + 0.5) / 11);
            CHECK(g.labels[ix * 11 + iy] == toy_argmax(f));
            CHECK(g.margins[ix * 11 + iy] >= 0.0);
        }
}

TEST_CASE("grid_disagreement counts differing cells") {
    std::vector<int> a{0, 0, 1, 1};
    std::vector<int> b{0, 1, 1, 0};
    CHECK(grid_disagreement(a, b) == doctest::Approx(0.5));
    CHECK_THROWS_AS((void)grid_disagreement(a, std::vector<int>{0}), std::invalid_argument);
}

TEST_CASE("random_hidden_model: unit norm, determinism") {
    auto w = random_hidden_model(2, 42);
    CHECK(std::abs(frobenius_norm(w) - 1.0) < 1e-12);
    auto w2 = random_hidden_model(2, 42);
    for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(w[i] == w2[i]);
    auto probs = label_probabilities(w);
    CHECK(probs[0] + probs[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("label_probabilities: support, symmetry, normalization guard") {
    auto w = random_hidden_model(2, 7);
    // Zero out label B and renormalize: all probability on A.
    for (std::size_t i = w.size() / 2; i < w.size(); ++i) w[i] = 0;
    double n2 = 0;
    for (const auto& v : w.values()) n2 += std::norm(v);
    scale(w, cplx{1.0 / std::sqrt(n2), 0.0});
    auto probs = label_probabilities(w);
    CHECK(probs[0] == doctest::Approx(1.0).epsilon(1e-12));

    // Equal-magnitude labels split evenly.
    Tensor<cplx> sym({2, 2, 2});
    for (std::size_t i = 0; i < 8; ++i) sym[i] = cplx{std::sqrt(1.0 / 8.0), 0.0};
    auto half = label_probabilities(sym);
    CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-12));

    scale(sym, cplx{2.0, 0.0});
    CHECK_THROWS_AS((void)label_probabilities(sym), std::invalid_argument);
}

TEST_CASE("Parseval: sum formula equals the quadrature integral per label") {
    LocalFeatureMap map(FeatureKind::phase_modulated, 2);
    auto w = random_hidden_model(2, 11);
    auto probs = label_probabilities(w);
    const std::size_t g = 256;
    const double cell = (2.0 / g) * (2.0 / g);
    double quad_a = 0;
    for (std::size_t ix = 0; ix < g; ++ix)
        for (std::size_t iy = 0; iy < g; ++iy) {
            auto f = toy_scores(w, map, (ix + 0.5) / g, (iy + 0.5) / g);
            quad_a += std::norm(f[0]) * cell;
        }
    CHECK(std::abs(quad_a - probs[0]) < 1e-6);
}

TEST_CASE("Born normalization at G=256") {
    LocalFeatureMap map(FeatureKind::phase_modulated, 2);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto w = random_hidden_model(2, seed);
        CHECK(std::abs(born_normalization(w, map, 256) - 1.0) < 1e-6);
    }
}

TEST_CASE("sample_points: support, frequencies, and goodness of fit") {
    LocalFeatureMap map(FeatureKind::phase_modulated, 2);

    auto wa = random_hidden_model(2, 13);
    for (std::size_t i = wa.size() / 2; i < wa.size(); ++i) wa[i] = 0;
    double n2 = 0;
    for (const auto& v : wa.values()) n2 += std::norm(v);
    scale(wa, cplx{1.0 / std::sqrt(n2), 0.0});
    auto only_a = sample_points(wa, map, 500, 64, 17);
    for (int l : only_a.labels) CHECK(l == 0);

    CHECK_THROWS_AS((void)sample_points(wa, map, 10, 32, 1), std::invalid_argument);

    auto w = random_hidden_model(2, 19);
    const auto probs = label_probabilities(w);
    const std::size_t n = 100000;
    auto ds = sample_points(w, map, n, 64, 23);
    std::size_t count_a = 0;
    for (int l : ds.labels) count_a += l == 0;
    const double freq = static_cast<double>(count_a) / n;
    const double tol = 4.0 * std::sqrt(probs[0] * probs[1] / n);
    CHECK(std::abs(freq - probs[0]) < tol);
    for (double v : ds.inputs) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }

    // Chi-squared against the discretized cell masses (cells with small
    // expectation pooled), normal approximation for the p-value.
    const std::size_t g = 64;
    std::vector<double> mass(g * g, 0.0);
    double total = 0;
    for (std::size_t ix = 0; ix < g; ++ix)
        for (std::size_t iy = 0; iy < g; ++iy) {
            auto f = toy_scores(w, map, (ix + 0.5) / g, (iy + 0.5) / g);
            mass[ix * g + iy] = std::norm(f[0]);
            total += mass[ix * g + iy];
        }
    for (auto& m : mass) m /= total;
    std::vector<double> observed(g * g, 0.0);
    std::size_t n_a = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] != 0) continue;
        ++n_a;
        const auto ix = std::min<std::size_t>(g - 1, static_cast<std::size_t>(ds.input(i)[0] * g));
        const auto iy = std::min<std::size_t>(g - 1, static_cast<std::size_t>(ds.input(i)[1] * g));
        observed[ix * g + iy] += 1.0;
    }
    double chi2 = 0, pooled_obs = 0, pooled_exp = 0;
    std::size_t buckets = 0;
    for (std::size_t c = 0; c < g * g; ++c) {
        const double expect = mass[c] * n_a;
        if (expect < 5.0) {
            pooled_obs += observed[c];
            pooled_exp += expect;
            continue;
        }
        chi2 += (observed[c] - expect) * (observed[c] - expect) / expect;
        ++buckets;
    }
    if (pooled_exp > 0) {
        chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++buckets;
    }
    const double dof = static_cast<double>(buckets - 1);
    const double z = (chi2 - dof) / std::sqrt(2.0 * dof);
    CHECK(z < 2.33);  // one-sided p > 0.01
}

TEST_CASE("NLL gradient matches finite differences in Re and Im") {
    LocalFeatureMap map(FeatureKind::phase_modulated, 2);
    auto pts = two_pixel_points({{0.15, 0.85, 0}, {0.5, 0.4, 1}, {0.75, 0.3, 0}});
    auto w = random_hidden_model(2, 29);
    auto g = toy_nll_gradient(w, pts, map);
    const double h = 1e-6;
    const double n = static_cast<double>(pts.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        Tensor<cplx> wp = w, wm = w;
        wp[k] += h;
        wm[k] -= h;
        const double fd_re = (toy_nll(wp, pts, map) - toy_nll(wm, pts, map)) / (2 * h);
        CHECK(rel_err(n * g[k].real(), fd_re) <= 1e-5);
        wp = w;
        wm = w;
        wp[k] += cplx{0, h};
        wm[k] -= cplx{0, h};
        const double fd_im = (toy_nll(wp, pts, map) - toy_nll(wm, pts, map)) / (2 * h);
        CHECK(rel_err(n * g[k].imag(), fd_im) <= 1e-5);
    }
}

TEST_CASE("train_full_nll: descent on a single point") {
    LocalFeatureMap map(FeatureKind::phase_modulated, 2);
    auto pts = two_pixel_points({{0.35, 0.6, 1}});
    auto w0 = random_hidden_model(2, 31);
    const double c0 = toy_nll(w0, pts, map);
    auto w = train_full_nll(pts, map, 200, 0.25, 31);
    const double c1 = toy_nll(w, pts, map);
    CHECK(c1 <= c0);
    CHECK(std::abs(frobenius_norm(w) - 1.0) < 1e-10);
}

TEST_CASE("kl_divergence: identity, positivity, quadrature convergence") {
    LocalFeatureMap map(FeatureKind::phase_modulated, 2);
    auto w = random_hidden_model(2, 37);
    CHECK(std::abs(kl_divergence(w, w, map, 128)) <= 1e-10);

    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 5; ++rep) {
        auto a = random_hidden_model(2, rng());
        auto b = random_hidden_model(2, rng());
        const double k256 = kl_divergence(a, b, map, 256);
        CHECK(k256 >= -1e-10);
        const double k512 = kl_divergence(a, b, map, 512);
        CHECK(std::abs(k256 - k512) < 1e-4);
    }
}

TEST_CASE("kl_scan: reproducible and decreasing on a small scan") {
    std::vector<std::size_t> sizes{20, 200};
    KlScanConfig cfg;
    cfg.trials = 3;
    cfg.train_iters = 300;
    cfg.seed = 5;
    auto a = kl_scan(sizes, cfg);
    auto b = kl_scan(sizes, cfg);
    REQUIRE(a.mean_kl.size() == 2);
    CHECK(a.mean_kl == b.mean_kl);
    CHECK(a.std_kl == b.std_kl);
    CHECK(a.sigma == b.sigma);
    CHECK(a.mean_kl[0] > a.mean_kl[1]);
    CHECK(a.sigma > 0.0);

    std::ostringstream os;
    write_csv(a, os);
    CHECK(os.str().find("n_samples,mean_kl,std_kl") == 0);

    CHECK_THROWS_AS((void)kl_scan(std::vector<std::size_t>{100, 100}, cfg),
                    std::invalid_argument);
}
