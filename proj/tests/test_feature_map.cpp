#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support/test_util.hpp"
#include "tnml/feature_map.hpp"

using namespace tnml;
using namespace tnml::testutil;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("half_angle endpoints and midpoint") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    auto v0 = map(0.0);
    CHECK(v0[0] == doctest::Approx(1.0));
    CHECK(v0[1] == doctest::Approx(0.0));
    auto v1 = map(1.0);
    CHECK(v1[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(v1[1] == doctest::Approx(1.0));
    auto vh = map(0.5);
    CHECK(vh[0] == doctest::Approx(std::sqrt(2.0) / 2.0));
    CHECK(vh[1] == doctest::Approx(std::sqrt(2.0) / 2.0));
}

TEST_CASE("spin_coherent d=3 midpoint") {
    LocalFeatureMap map(FeatureKind::spin_coherent, 3);
    auto v = map(0.5);
    CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(0.7071067811865476).epsilon(1e-14));
    CHECK(v[2] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("phase_modulated endpoints") {
    LocalFeatureMap map(FeatureKind::phase_modulated, 2);
    std::vector<cplx> v(2);
    map.eval(0.0, std::span<cplx>(v));
    CHECK(std::abs(v[0] - cplx{1.0, 0.0}) < 1e-15);
    CHECK(std::abs(v[1]) < 1e-15);
    CHECK_THROWS_AS(map(0.5), std::invalid_argument);  // real eval rejected
}

TEST_CASE("inputs outside [0,1] are rejected, not clamped") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    CHECK_THROWS_AS(map(-0.1), std::domain_error);
    CHECK_THROWS_AS(map(1.0 + 1e-9), std::domain_error);
    CHECK_THROWS_AS(map(std::nan("")), std::domain_error);
}

TEST_CASE("dimension constraints per kind") {
    CHECK_THROWS_AS(LocalFeatureMap(FeatureKind::half_angle, 3), std::invalid_argument);
    CHECK_THROWS_AS(LocalFeatureMap(FeatureKind::half_angle, 1), std::invalid_argument);
    CHECK_THROWS_AS(LocalFeatureMap(FeatureKind::phase_modulated, 3), std::invalid_argument);
    CHECK_NOTHROW(LocalFeatureMap(FeatureKind::spin_coherent, 6));
}

TEST_CASE("unit norm on a 1001-point grid for every kind") {
    std::vector<LocalFeatureMap> maps;
    maps.emplace_back(FeatureKind::half_angle, 2);
    maps.emplace_back(FeatureKind::full_angle, 2);
    maps.emplace_back(FeatureKind::phase_modulated, 2);
    maps.emplace_back(FeatureKind::spin_coherent, 2);
    maps.emplace_back(FeatureKind::spin_coherent, 3);
    maps.emplace_back(FeatureKind::spin_coherent, 6);
    for (const auto& map : maps) {
        std::vector<cplx> phi(map.dim());
        double worst = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double x = i / 1000.0;
            map.eval(x, std::span<cplx>(phi));
            double n2 = 0.0;
            for (const auto& c : phi) n2 += std::norm(c);
            worst = std::max(worst, std::abs(n2 - 1.0));
        }
        CAPTURE(to_string(map.kind()));
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("spin_coherent at d=2 coincides with half_angle") {
    LocalFeatureMap sc(FeatureKind::spin_coherent, 2);
    LocalFeatureMap ha(FeatureKind::half_angle, 2);
    for (int i = 0; i <= 100; ++i) {
        const double x = i / 100.0;
        auto a = sc(x);
        auto b = ha(x);
        CHECK(a[0] == b[0]);
        CHECK(a[1] == b[1]);
    }
}

TEST_CASE("encode basics") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    std::vector<double> xs{0.0, 1.0};
    auto enc = encode<double>(xs, map);
    REQUIRE(enc.n_sites == 2);
    CHECK(enc.site(0)[0] == doctest::Approx(1.0));
    CHECK(enc.site(0)[1] == doctest::Approx(0.0));
    CHECK(enc.site(1)[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(enc.site(1)[1] == doctest::Approx(1.0));

    std::vector<double> bad{0.5, 1.5};
    CHECK_THROWS_AS((void)encode<double>(bad, map), std::domain_error);
}

TEST_CASE("encode: implicit tensor product matches component oracle") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    std::mt19937_64 rng(61);
    std::vector<double> xs{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)};
    auto enc = encode<double>(xs, map);

    double norm2 = 1.0;
    for (std::size_t j = 0; j < 3; ++j) {
        double n = 0.0;
        for (double v : enc.site(j)) n += v * v;
        norm2 *= n;
    }
    CHECK(std::abs(norm2 - 1.0) <= 1e-12);

    for (std::size_t s1 = 0; s1 < 2; ++s1)
        for (std::size_t s2 = 0; s2 < 2; ++s2)
            for (std::size_t s3 = 0; s3 < 2; ++s3) {
                const double want = map(xs[0])[s1] * map(xs[1])[s2] * map(xs[2])[s3];
                const double got = enc.site(0)[s1] * enc.site(1)[s2] * enc.site(2)[s3];
                CHECK(got == doctest::Approx(want).epsilon(1e-13));
            }
}

TEST_CASE("Gauss-Legendre sanity on monomials") {
    std::vector<double> x, w;
    gauss_legendre(24, x, w);
    double s0 = 0, s1 = 0, s3 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s0 += w[i];
        s1 += w[i] * x[i];
        s3 += w[i] * x[i] * x[i] * x[i];
    }
    CHECK(rel_err(s0, 1.0) < 1e-14);
    CHECK(rel_err(s1, 0.5) < 1e-14);
    CHECK(rel_err(s3, 0.25) < 1e-14);
}

TEST_CASE("gram matrix: phase_modulated and full_angle are orthonormal") {
    for (FeatureKind kind : {FeatureKind::phase_modulated, FeatureKind::full_angle}) {
        LocalFeatureMap map(kind, 2);
        auto g = gram_matrix(map, 64);
        CAPTURE(to_string(kind));
        CHECK(std::abs(g.at({0, 0}) - cplx{1.0}) < 1e-10);
        CHECK(std::abs(g.at({1, 1}) - cplx{1.0}) < 1e-10);
        CHECK(std::abs(g.at({0, 1})) < 1e-10);
        CHECK(std::abs(g.at({1, 0})) < 1e-10);
    }
}

TEST_CASE("gram matrix: half_angle is not orthonormal") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    auto g = gram_matrix(map, 64);
    // Analytic values: diagonal 1/2, off-diagonal 1/pi.
    CHECK(std::abs(g.at({0, 0}) - cplx{0.5}) < 1e-10);
    CHECK(std::abs(g.at({1, 1}) - cplx{0.5}) < 1e-10);
    CHECK(std::abs(g.at({0, 1}) - cplx{1.0 / kPi}) < 1e-10);
    CHECK(std::abs(g.at({0, 1})) > 0.1);
}

TEST_CASE("gram matrix: node floor enforced") {
    LocalFeatureMap map(FeatureKind::half_angle, 2);
    CHECK_THROWS_AS((void)gram_matrix(map, 8), std::invalid_argument);
}
