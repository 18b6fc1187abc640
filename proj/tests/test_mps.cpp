#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "support/test_util.hpp"
#include "tnml/mps.hpp"

using namespace tnml;
using namespace tnml::testutil;

namespace {

LocalFeatureMap map_for_dim(std::size_t d) {
    return d == 2 ? LocalFeatureMap(FeatureKind::half_angle, 2)
                  : LocalFeatureMap(FeatureKind::spin_coherent, d);
}

EncodedInput<double> random_input(const Mps<double>& m, std::mt19937_64& rng) {
    std::vector<double> xs(m.n_sites());
    for (auto& x : xs) x = uniform(rng, 0.0, 1.0);
    return encode<double>(xs, map_for_dim(m.local_dim()));
}

// Independent oracle: score every label by brute-force summation over the
// full tensor produced by to_full_tensor, with direct index arithmetic.
std::vector<double> oracle_scores(const Tensor<double>& w, const EncodedInput<double>& in,
                                  std::size_t n_labels) {
    const std::size_t n = in.n_sites;
    const std::size_t d = in.d;
    std::vector<double> f(n_labels, 0.0);
    std::vector<std::size_t> s(n, 0);
    const std::size_t combos = w.size() / n_labels;
    for (std::size_t c = 0; c < combos; ++c) {
        double weight = 1.0;
        for (std::size_t j = 0; j < n; ++j) weight *= in.site(j)[s[j]];
        for (std::size_t l = 0; l < n_labels; ++l) f[l] += weight * w[c * n_labels + l];
        for (std::size_t j = n; j-- > 0;) {
            if (++s[j] < d) break;
            s[j] = 0;
        }
    }
    return f;
}

double oracle_frobenius(const Tensor<double>& w) {
    double acc = 0;
    for (double v : w.values()) acc += v * v;
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("init_random caps bond dimensions at exact ranks") {
    auto m = Mps<double>::random(4, 2, 2, 1000, 1);
    CHECK(m.bond_dims() == std::vector<std::size_t>({2, 4, 2}));
    auto m2 = Mps<double>::random(6, 2, 10, 8, 1);
    CHECK(m2.bond_dims() == std::vector<std::size_t>({2, 4, 8, 4, 2}));
}

TEST_CASE("init_random is deterministic under the seed") {
    auto a = Mps<double>::random(5, 2, 3, 6, 42);
    auto b = Mps<double>::random(5, 2, 3, 6, 42);
    for (std::size_t j = 0; j < a.n_sites(); ++j) {
        REQUIRE(a.site(j).shape() == b.site(j).shape());
        for (std::size_t i = 0; i < a.site(j).size(); ++i)
            REQUIRE(a.site(j)[i] == b.site(j)[i]);
    }
    auto c = Mps<double>::random(5, 2, 3, 6, 43);
    CHECK(c.site(0)[0] != a.site(0)[0]);
}

TEST_CASE("init_random normalizes the represented W to unit norm") {
    auto m = Mps<double>::random(6, 2, 2, 8, 7);
    auto w = to_full_tensor(m);
    CHECK(rel_err(oracle_frobenius(w), 1.0) < 1e-10);
    CHECK(rel_err(m.norm(), 1.0) < 1e-10);
}

TEST_CASE("evaluate matches the full-tensor oracle") {
    std::mt19937_64 rng(101);
    auto m = Mps<double>::random(6, 2, 2, 5, 3);
    auto w = to_full_tensor(m);
    for (int rep = 0; rep < 10; ++rep) {
        auto in = random_input(m, rng);
        auto got = evaluate(m, in);
        auto want = oracle_scores(w, in, m.n_labels());
        for (std::size_t l = 0; l < got.size(); ++l) CHECK(rel_err(got[l], want[l]) < 1e-11);
    }
}

TEST_CASE("oracle equivalence across N, d, n_labels") {
    std::mt19937_64 rng(103);
    for (std::size_t n : {2, 3, 5, 6})
        for (std::size_t d : {2, 3})
            for (std::size_t nl : {1, 2, 3}) {
                auto m = Mps<double>::random(n, d, nl, 4, 17 * n + d + nl);
                auto w = to_full_tensor(m);
                auto in = random_input(m, rng);
                auto got = evaluate(m, in);
                auto want = oracle_scores(w, in, nl);
                for (std::size_t l = 0; l < nl; ++l)
                    CHECK(rel_err(got[l], want[l]) < 1e-11);
            }
}

TEST_CASE("binary inputs select single components of W") {
    std::mt19937_64 rng(107);
    auto m = Mps<double>::random(5, 2, 2, 4, 11);
    auto w = to_full_tensor(m);
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> xs(5);
        std::vector<std::size_t> idx(6);
        for (std::size_t j = 0; j < 5; ++j) {
            const int b = bit(rng);
            xs[j] = b;
            idx[j] = static_cast<std::size_t>(b);
        }
        auto f = evaluate(m, encode<double>(xs, map));
        for (std::size_t l = 0; l < 2; ++l) {
            idx[5] = l;
            CHECK(std::abs(f[l] - w.at({idx[0], idx[1], idx[2], idx[3], idx[4], l})) <= 1e-12);
        }
    }
}

TEST_CASE("model with an all-zero site scores zero") {
    auto m = Mps<double>::random(4, 2, 2, 3, 5);
    std::vector<Tensor<double>> sites;
    for (std::size_t j = 0; j < 4; ++j) sites.push_back(m.site(j));
    sites[2] = Tensor<double>(sites[2].shape());  // zero it
    Mps<double> z(std::move(sites), m.label_site(), m.n_labels(), m.map_kind());
    std::mt19937_64 rng(5);
    auto f = evaluate(z, random_input(z, rng));
    for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("predict: magnitude rule and tie break") {
    // N=1 model with x=0 selects the first physical row of W directly.
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    auto make = [&](double f0, double f1) {
        Tensor<double> site({1, 2, 1, 2});
        site.at({0, 0, 0, 0}) = f0;
        site.at({0, 0, 0, 1}) = f1;
        std::vector<Tensor<double>> sites;
        sites.push_back(site);
        return Mps<double>(std::move(sites), 0, 2, FeatureKind::half_angle);
    };
    std::vector<double> x0{0.0};
    CHECK(predict(make(0.1, -0.9), encode<double>(x0, map)) == 1);
    CHECK(predict(make(0.5, 0.5), encode<double>(x0, map)) == 0);

    std::mt19937_64 rng(109);
    auto m = Mps<double>::random(4, 2, 3, 4, 23);
    for (int rep = 0; rep < 100; ++rep) {
        auto in = random_input(m, rng);
        auto f = evaluate(m, in);
        std::size_t best = 0;
        for (std::size_t l = 1; l < f.size(); ++l)
            if (std::abs(f[l]) > std::abs(f[best])) best = l;
        CHECK(predict(m, in) == static_cast<int>(best));
    }
}

TEST_CASE("move_label: no-op target keeps scores") {
    std::mt19937_64 rng(113);
    auto m = Mps<double>::random(5, 2, 2, 4, 31);
    auto in = random_input(m, rng);
    auto before = evaluate(m, in);
    move_label(m, m.label_site());
    auto after = evaluate(m, in);
    for (std::size_t l = 0; l < before.size(); ++l)
        CHECK(rel_err(after[l], before[l]) < 1e-12);
}

TEST_CASE("move_label: round trip end to end") {
    std::mt19937_64 rng(127);
    auto m = Mps<double>::random(6, 2, 3, 5, 37);
    auto in = random_input(m, rng);
    auto before = evaluate(m, in);
    move_label(m, 5);
    CHECK(m.label_site() == 5);
    move_label(m, 0);
    CHECK(m.label_site() == 0);
    auto after = evaluate(m, in);
    for (std::size_t l = 0; l < before.size(); ++l)
        CHECK(rel_err(after[l], before[l]) < 1e-10);
}

TEST_CASE("move_label: represented W unchanged (full-tensor oracle)") {
    auto m = Mps<double>::random(5, 2, 2, 4, 41);
    auto w0 = to_full_tensor(m);
    for (std::size_t target : {4, 2, 0, 3}) {
        move_label(m, target);
        CHECK(m.label_site() == target);
        auto w = to_full_tensor(m);
        CHECK(rel_frob_err(w, w0) < 1e-10);
    }
}

TEST_CASE("canonicalize: per-site orthogonality residuals") {
    auto m = Mps<double>::random(8, 2, 3, 6, 43);
    for (std::size_t core : {std::size_t{0}, std::size_t{3}, std::size_t{7}}) {
        auto canon = canonicalize(m, core);
        for (std::size_t j = 0; j < canon.sites.size(); ++j) {
            const auto& a = canon.sites[j];
            Tensor<double> gram;
            if (j < canon.core_pos) {
                gram = contract(a, a, {{0, 0}, {1, 1}});  // U^T U
            } else {
                gram = contract(a, a, {{1, 1}, {2, 2}});  // V V^T
            }
            const std::size_t k = gram.shape()[0];
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t q = 0; q < k; ++q) {
                    const double want = p == q ? 1.0 : 0.0;
                    CHECK(std::abs(gram.at({p, q}) - want) < 1e-10);
                }
        }
    }
}

TEST_CASE("canonicalize: scores and norm preserved") {
    std::mt19937_64 rng(131);
    auto m = Mps<double>::random(7, 2, 2, 5, 47);
    auto in = random_input(m, rng);
    auto before = evaluate(m, in);
    for (std::size_t core : {std::size_t{0}, std::size_t{4}, std::size_t{6}}) {
        auto canon = canonicalize(m, core);
        auto after = evaluate(canon, in);
        for (std::size_t l = 0; l < before.size(); ++l)
            CHECK(rel_err(after[l], before[l]) < 1e-10);
        CHECK(rel_err(frobenius_norm(canon.core), m.norm()) < 1e-10);
    }
}

TEST_CASE("reduced_features: degenerate left wing and reconstruction") {
    std::mt19937_64 rng(137);
    auto m = Mps<double>::random(6, 2, 2, 4, 53);
    auto canon0 = canonicalize(m, 0);
    auto in = random_input(m, rng);
    auto phi0 = reduced_features(canon0, in);
    CHECK(phi0.shape()[0] == 1);  // no left wing

    for (std::size_t core : {std::size_t{0}, std::size_t{2}, std::size_t{5}}) {
        auto canon = canonicalize(m, core);
        for (int rep = 0; rep < 17; ++rep) {
            auto x = random_input(m, rng);
            auto via_core = evaluate(canon, x);
            auto direct = evaluate(m, x);
            for (std::size_t l = 0; l < direct.size(); ++l)
                CHECK(rel_err(via_core[l], direct[l]) < 1e-10);
            // Projection of a unit-norm product state never gains norm.
            CHECK(frobenius_norm(reduced_features(canon, x)) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("to_full_tensor: single site and product state") {
    Tensor<double> site({1, 2, 1, 2});
    site.at({0, 0, 0, 0}) = 1;
    site.at({0, 0, 0, 1}) = 2;
    site.at({0, 1, 0, 0}) = 3;
    site.at({0, 1, 0, 1}) = 4;
    std::vector<Tensor<double>> sites;
    sites.push_back(site);
    Mps<double> m1(std::move(sites), 0, 2, FeatureKind::half_angle);
    auto w1 = to_full_tensor(m1);
    REQUIRE(w1.shape() == std::vector<std::size_t>({2, 2}));
    CHECK(w1.at({0, 0}) == 1);
    CHECK(w1.at({0, 1}) == 2);
    CHECK(w1.at({1, 0}) == 3);
    CHECK(w1.at({1, 1}) == 4);

    // Product state: all bonds have extent 1.
    std::vector<Tensor<double>> ps;
    Tensor<double> s0({1, 2, 1, 1});
    s0.at({0, 0, 0, 0}) = 0.25;
    s0.at({0, 1, 0, 0}) = -0.5;
    Tensor<double> s1({1, 2, 1});
    s1.at({0, 0, 0}) = 3.0;
    s1.at({0, 1, 0}) = 7.0;
    ps.push_back(s0);
    ps.push_back(s1);
    Mps<double> m2(std::move(ps), 0, 1, FeatureKind::half_angle);
    auto w2 = to_full_tensor(m2);
    REQUIRE(w2.shape() == std::vector<std::size_t>({2, 2, 1}));
    CHECK(w2.at({0, 0, 0}) == doctest::Approx(0.75));
    CHECK(w2.at({0, 1, 0}) == doctest::Approx(1.75));
    CHECK(w2.at({1, 0, 0}) == doctest::Approx(-1.5));
    CHECK(w2.at({1, 1, 0}) == doctest::Approx(-3.5));
}

TEST_CASE("to_full_tensor: size guard") {
    auto m = Mps<double>::random(40, 2, 2, 2, 3);
    CHECK_THROWS_AS((void)to_full_tensor(m), std::invalid_argument);
}

TEST_CASE("merge and split bond round trip preserves W") {
    auto m = Mps<double>::random(4, 2, 2, 4, 59);
    auto w0 = to_full_tensor(m);
    for (std::size_t j : {std::size_t{0}, std::size_t{1}, std::size_t{2}}) {
        move_label(m, j);
        auto sp = split_bond(merge_bond(m, j), Direction::right, TruncParams{});
        m.set_bond_sites(j, std::move(sp.left_site), std::move(sp.right_site), j + 1);
        CHECK(rel_frob_err(to_full_tensor(m), w0) < 1e-10);
    }
}

TEST_CASE("save/load: bitwise round trip") {
    const std::filesystem::path path = std::filesystem::temp_directory_path() / "tnml_rt.mpsc";
    auto m = Mps<double>::random(6, 2, 10, 7, 61, FeatureKind::half_angle);
    move_label(m, 3);
    save_mps(m, path);
    auto r = load_mps<double>(path);
    CHECK(r.n_sites() == m.n_sites());
    CHECK(r.label_site() == 3);
    CHECK(r.n_labels() == 10);
    CHECK(r.map_kind() == FeatureKind::half_angle);
    for (std::size_t j = 0; j < m.n_sites(); ++j) {
        REQUIRE(r.site(j).shape() == m.site(j).shape());
        for (std::size_t i = 0; i < m.site(j).size(); ++i)
            REQUIRE(r.site(j)[i] == m.site(j)[i]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("save/load: corrupted magic and truncation rejected") {
    const std::filesystem::path path = std::filesystem::temp_directory_path() / "tnml_bad.mpsc";
    auto m = Mps<double>::random(3, 2, 2, 3, 67);
    save_mps(m, path);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_WITH_AS((void)load_mps<double>(path), "mps file: bad magic",
                         std::runtime_error);

    save_mps(m, path);
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 5);
    CHECK_THROWS_AS((void)load_mps<double>(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("save: file size follows the format arithmetic") {
    const std::filesystem::path path = std::filesystem::temp_directory_path() / "tnml_sz.mpsc";
    std::mt19937_64 rng(71);
    for (int rep = 0; rep < 3; ++rep) {
        std::uniform_int_distribution<std::size_t> nd(2, 6), md(1, 5), ld(1, 4);
        const std::size_t n = nd(rng), m0 = md(rng), nl = ld(rng);
        auto m = Mps<double>::random(n, 2, nl, m0, rep);
        save_mps(m, path);
        std::size_t want = 4 + 4 + 1 + 4 * 4 + 1;  // header
        for (std::size_t j = 0; j < n; ++j) want += 8 + 8 * m.site(j).size();
        CHECK(std::filesystem::file_size(path) == want);
    }
    std::filesystem::remove(path);
}

TEST_CASE("complex models round trip and refuse kind mismatch") {
    const std::filesystem::path path = std::filesystem::temp_directory_path() / "tnml_z.mpsc";
    auto m = Mps<cplx>::random(4, 2, 2, 3, 73, FeatureKind::phase_modulated);
    save_mps(m, path);
    CHECK(mps_file_scalar_kind(path) == 1);
    auto r = load_mps<cplx>(path);
    for (std::size_t j = 0; j < m.n_sites(); ++j)
        for (std::size_t i = 0; i < m.site(j).size(); ++i)
            REQUIRE(r.site(j)[i] == m.site(j)[i]);
    CHECK_THROWS_AS((void)load_mps<double>(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("bond spectra: descending values whose squares sum to the norm") {
    auto m = Mps<double>::random(6, 2, 3, 5, 83);
    const double w2 = m.norm() * m.norm();
    auto spectra = bond_spectra(m);
    REQUIRE(spectra.size() == 5);
    for (std::size_t k = 0; k < spectra.size(); ++k) {
        double sum2 = 0;
        for (std::size_t i = 0; i < spectra[k].size(); ++i) {
            if (i) CHECK(spectra[k][i] <= spectra[k][i - 1]);
            CHECK(spectra[k][i] >= 0.0);
            sum2 += spectra[k][i] * spectra[k][i];
        }
        CHECK(rel_err(sum2, w2) < 1e-8);
    }
}

TEST_CASE("gauge invariance under label moves and canonicalization") {
    std::mt19937_64 rng(139);
    for (std::size_t n : {3, 5, 6}) {
        auto m = Mps<double>::random(n, 2, 3, 4, 79 + n);
        auto in = random_input(m, rng);
        auto base = evaluate(m, in);
        std::uniform_int_distribution<std::size_t> site(0, n - 1);
        for (int rep = 0; rep < 8; ++rep) {
            move_label(m, site(rng));
            auto f = evaluate(m, in);
            for (std::size_t l = 0; l < base.size(); ++l)
                CHECK(rel_err(f[l], base[l]) < 1e-10);
        }
        auto canon = canonicalize(m, site(rng));
        auto f = evaluate(canon, in);
        for (std::size_t l = 0; l < base.size(); ++l)
            CHECK(rel_err(f[l], base[l]) < 1e-10);
    }
}
