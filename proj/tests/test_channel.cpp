// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mimoce/channel.hpp"
#include "mimoce/rng.hpp"

using namespace mimoce;

TEST_CASE("ula positions") {
    const ArrayGeometry g = ula(4, 0.5, Axis::X);
    REQUIRE(g.count() == 4);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(g.elements[l].x == 0.5 * static_cast<double>(l));
        CHECK(g.elements[l].y == 0.0);
        CHECK(g.elements[l].z == 0.0);
    }
    CHECK(ula(1, 0.5).elements[0].x == 0.0);
    CHECK(ula(64, 0.5).elements[63].x == 31.5);
    CHECK_THROWS_AS(ula(0, 0.5), ConfigError);
    CHECK_THROWS_AS(ula(4, 0.0), ConfigError);
}

TEST_CASE("upa positions") {
    const ArrayGeometry g = upa(2, 3, 0.5);
    REQUIRE(g.count() == 6);
    CHECK(g.elements[0].x == 0.0);
    CHECK(g.elements[2].y == 1.0);
    CHECK(g.elements[5].x == 0.5);
    CHECK(g.elements[5].y == 1.0);
}

TEST_CASE("steering phases: zenith arrival sees a flat x-array") {
    const auto ph = steering_phase(ula(8, 0.5, Axis::X), 0.0, 0.0);
    for (const cplx& p : ph) {
        CHECK_THAT(p.real(), Catch::Matchers::WithinAbs(1.0, 1e-15));
        CHECK_THAT(p.imag(), Catch::Matchers::WithinAbs(0.0, 1e-15));
    }
}

TEST_CASE("steering phases: broadside ULA alternates sign") {
    const auto ph = steering_phase(ula(6, 0.5, Axis::X), std::numbers::pi / 2.0, 0.0);
    for (std::size_t l = 0; l < ph.size(); ++l) {
        const double expected = (l % 2 == 0) ? 1.0 : -1.0;
        CHECK_THAT(ph[l].real(), Catch::Matchers::WithinAbs(expected, 1e-12));
        CHECK_THAT(ph[l].imag(), Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("steering phases are unit modulus for random geometry and angles") {
    SeededRng rng(3, 0);
    for (int trial = 0; trial < 100; ++trial) {
        ArrayGeometry g;
        const std::size_t n = 1 + rng.next_below(16);
        for (std::size_t l = 0; l < n; ++l)
            g.elements.push_back({rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
                                  rng.uniform(-4.0, 4.0)});
        const double theta = rng.uniform(0.0, std::numbers::pi);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (const cplx& p : steering_phase(g, theta, phi))
            REQUIRE(std::abs(std::abs(p) - 1.0) <= 1e-12);
    }
}

TEST_CASE("rayleigh channel second moment and determinism") {
    SeededRng rng(10, 0);
    const ChannelRealization ch = gen_rayleigh(1000, 1000, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < ch.h.size(); ++i) acc += std::norm(ch.h.data()[i]);
    acc /= static_cast<double>(ch.h.size());
    CHECK_THAT(acc, Catch::Matchers::WithinAbs(1.0, 0.01));

    SeededRng r1(10, 0), r2(10, 0);
    const CMatrix a = gen_rayleigh(4, 8, r1).h;
    const CMatrix b = gen_rayleigh(4, 8, r2).h;
    CHECK(a.max_abs_diff(b) == 0.0);
    CHECK(!gen_rayleigh(4, 8, r1).structured.has_value());
}

namespace {

StructuredChannelParams one_ray(std::size_t nt, const ArrayGeometry& g,
                                const std::vector<cplx>& beta, double theta, double phi) {
    StructuredChannelParams p;
    p.ray_count = 1;
    p.geometry = g;
    p.gains = beta;
    p.zenith.assign(nt, theta);
    p.azimuth.assign(nt, phi);
    return p;
}

} // namespace

TEST_CASE("structured channel: unit gains from zenith give the all-ones matrix") {
    const std::size_t nt = 3, nr = 5;
    const auto p = one_ray(nt, ula(nr, 0.5), std::vector<cplx>(nt, 1.0), 0.0, 0.0);
    const ChannelRealization ch = gen_structured(p, nt);
    for (std::size_t i = 0; i < ch.h.size(); ++i) {
        CHECK_THAT(ch.h.data()[i].real(), Catch::Matchers::WithinAbs(1.0, 1e-12));
        CHECK_THAT(ch.h.data()[i].imag(), Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
    REQUIRE(ch.phases.has_value());
    REQUIRE(ch.structured.has_value());
}

TEST_CASE("structured channel: broadside ray alternates columns") {
    const std::size_t nt = 2, nr = 6;
    const std::vector<cplx> beta{{0.7, -0.2}, {-1.1, 0.4}};
    const auto p = one_ray(nt, ula(nr, 0.5), beta, std::numbers::pi / 2.0, 0.0);
    const ChannelRealization ch = gen_structured(p, nt);
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t l = 0; l < nr; ++l) {
            const cplx expected = (l % 2 == 0) ? beta[t] : -beta[t];
            REQUIRE(std::abs(ch.h(t, l) - expected) <= 1e-12);
        }
}

TEST_CASE("structured channel: two rays superpose") {
    SeededRng rng(21, 0);
    const std::size_t nt = 4, nr = 8;
    const ArrayGeometry g = ula(nr, 0.5);
    StructuredChannelParams p2;
    p2.ray_count = 2;
    p2.geometry = g;
    for (std::size_t i = 0; i < 2 * nt; ++i) {
        p2.gains.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
        p2.zenith.push_back(rng.uniform(0.0, std::numbers::pi));
        p2.azimuth.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    }
    const CMatrix h2 = gen_structured(p2, nt).h;

    // oracle: sum of the two single-ray channels built separately
    StructuredChannelParams a = p2, b = p2;
    a.ray_count = b.ray_count = 1;
    a.gains.assign(p2.gains.begin(), p2.gains.begin() + nt);
    a.zenith.assign(p2.zenith.begin(), p2.zenith.begin() + nt);
    a.azimuth.assign(p2.azimuth.begin(), p2.azimuth.begin() + nt);
    b.gains.assign(p2.gains.begin() + nt, p2.gains.end());
    b.zenith.assign(p2.zenith.begin() + nt, p2.zenith.end());
    b.azimuth.assign(p2.azimuth.begin() + nt, p2.azimuth.end());
    const CMatrix sum = gen_structured(a, nt).h + gen_structured(b, nt).h;
    CHECK(h2.max_abs_diff(sum) <= 1e-12);
    CHECK(!gen_structured(p2, nt).phases.has_value()); // no factorization beyond one ray
}

TEST_CASE("structured channel rejects inconsistent shapes") {
    StructuredChannelParams p;
    p.ray_count = 1;
    p.geometry = ula(4, 0.5);
    p.gains = {1.0, 1.0};
    p.zenith = {0.0};
    p.azimuth = {0.0, 0.0};
    CHECK_THROWS_AS(gen_structured(p, 2), DimensionError);
}

TEST_CASE("gen_structured is linear in the gains for fixed angles") {
    SeededRng rng(33, 0);
    const std::size_t nt = 3, nr = 8;
    auto p = one_ray(nt, ula(nr, 0.5), std::vector<cplx>(nt), 1.1, 2.2);
    for (std::size_t t = 0; t < nt; ++t)
        p.gains[t] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const CMatrix h1 = gen_structured(p, nt).h;
    for (auto& g : p.gains) g *= cplx{2.0, 0.0};
    const CMatrix h2 = gen_structured(p, nt).h;
    const CMatrix scaled = h1 * cplx{2.0, 0.0};
    CHECK(h2.max_abs_diff(scaled) <= 1e-12);
}

TEST_CASE("remove_phases") {
    SeededRng rng(44, 0);
    const std::size_t nt = 3, nr = 6;

    SECTION("identity phases leave the channel untouched") {
        const CMatrix h = gen_rayleigh(nt, nr, rng).h;
        const CMatrix ones(nt, nr, cplx{1.0, 0.0});
        CHECK(remove_phases(h, ones).max_abs_diff(h) == 0.0);
    }
    SECTION("single-ray channels factor into constant rows") {
        auto p = one_ray(nt, ula(nr, 0.5), std::vector<cplx>(nt), 0.0, 0.0);
        for (std::size_t t = 0; t < nt; ++t) {
            p.gains[t] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            p.zenith[t] = rng.uniform(0.0, std::numbers::pi);
            p.azimuth[t] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        const ChannelRealization ch = gen_structured(p, nt);
        REQUIRE(ch.phases.has_value());
        const CMatrix beta = remove_phases(ch.h, *ch.phases);
        for (std::size_t t = 0; t < nt; ++t)
            for (std::size_t l = 0; l < nr; ++l)
                REQUIRE(std::abs(beta(t, l) - p.gains[t]) <= 1e-12);

        CMatrix back(nt, nr);
        for (std::size_t i = 0; i < back.size(); ++i)
            back.data()[i] = beta.data()[i] * ch.phases->data()[i];
        CHECK(back.max_abs_diff(ch.h) <= 1e-12);
    }
    SECTION("non-unit phases are rejected") {
        const CMatrix h = gen_rayleigh(nt, nr, rng).h;
        CMatrix bad(nt, nr, cplx{1.0, 0.0});
        bad(1, 2) = {0.9, 0.0};
        CHECK_THROWS_AS(remove_phases(h, bad), NumericError);
        const CMatrix wrong_shape(nt, nr + 1, cplx{1.0, 0.0});
        CHECK_THROWS_AS(remove_phases(h, wrong_shape), DimensionError);
    }
}
