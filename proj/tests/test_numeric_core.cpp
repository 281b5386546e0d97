// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <vector>

#include "mimoce/composite.hpp"
#include "mimoce/matrix.hpp"
#include "mimoce/rng.hpp"

using namespace mimoce;

namespace {

CMatrix random_cmatrix(std::size_t r, std::size_t c, SeededRng& rng) {
    CMatrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    return m;
}

// Independent oracle: plain triple-loop complex multiplication over raw
// std::complex values, no library matmul involved.
CMatrix naive_complex_mul(const CMatrix& a, const CMatrix& b) {
    CMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            std::complex<double> s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

} // namespace

TEST_CASE("compose_rowspace basics") {
    CMatrix m(1, 1);
    m(0, 0) = {1.0, 2.0};
    const Matrix r = compose_rowspace(m);
    REQUIRE(r.rows() == 1);
    REQUIRE(r.cols() == 2);
    CHECK(r(0, 0) == 1.0);
    CHECK(r(0, 1) == 2.0);

    const Matrix z = compose_rowspace(CMatrix(3, 4));
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 8);
    CHECK(z.frobenius_sq() == 0.0);
}

TEST_CASE("rowspace round trip is exact") {
    SeededRng rng(42, 0);
    const CMatrix m = random_cmatrix(3, 2, rng);
    const CMatrix back = decompose_rowspace(compose_rowspace(m));
    CHECK(back.max_abs_diff(m) == 0.0);
}

TEST_CASE("channelspace of complex identity is real identity") {
    const Matrix c = compose_channelspace(CMatrix::identity(2));
    CHECK(c.max_abs_diff(Matrix::identity(4)) == 0.0);
}

TEST_CASE("hand-computed 1x1 product (1+i)(2-i) = 3+i") {
    CMatrix x(1, 1), h(1, 1);
    x(0, 0) = {1.0, 1.0};
    h(0, 0) = {2.0, -1.0};
    const Matrix prod = matmul(compose_rowspace(x), compose_channelspace(h));
    REQUIRE(prod.cols() == 2);
    CHECK_THAT(prod(0, 0), Catch::Matchers::WithinAbs(3.0, 1e-15));
    CHECK_THAT(prod(0, 1), Catch::Matchers::WithinAbs(1.0, 1e-15));
}

TEST_CASE("rowspace/channelspace homomorphism vs complex oracle") {
    SeededRng rng(7, 1);
    SECTION("1x4 by 4x8") {
        const CMatrix x = random_cmatrix(1, 4, rng);
        const CMatrix h = random_cmatrix(4, 8, rng);
        const Matrix lhs = compose_rowspace(naive_complex_mul(x, h));
        const Matrix rhs = matmul(compose_rowspace(x), compose_channelspace(h));
        CHECK(lhs.max_abs_diff(rhs) <= 1e-12);
    }
    SECTION("many random shapes") {
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t m = 1 + rng.next_below(5);
            const std::size_t k = 1 + rng.next_below(5);
            const std::size_t n = 1 + rng.next_below(8);
            const CMatrix x = random_cmatrix(m, k, rng);
            const CMatrix h = random_cmatrix(k, n, rng);
            const Matrix lhs = compose_rowspace(naive_complex_mul(x, h));
            const Matrix rhs = matmul(compose_rowspace(x), compose_channelspace(h));
            REQUIRE(lhs.max_abs_diff(rhs) <= 1e-12);
        }
    }
}

TEST_CASE("channelspace is a ring homomorphism") {
    SeededRng rng(11, 2);
    const CMatrix a = random_cmatrix(3, 5, rng);
    const CMatrix b = random_cmatrix(5, 4, rng);
    const Matrix lhs = compose_channelspace(naive_complex_mul(a, b));
    const Matrix rhs = matmul(compose_channelspace(a), compose_channelspace(b));
    CHECK(lhs.max_abs_diff(rhs) <= 1e-12);
}

TEST_CASE("decompose_channelspace") {
    SeededRng rng(13, 3);
    const CMatrix h = random_cmatrix(3, 6, rng);

    SECTION("inverse of compose on structured input") {
        CHECK(decompose_channelspace(compose_channelspace(h)).max_abs_diff(h) == 0.0);
    }
    SECTION("zeros map to zeros") {
        const CMatrix z = decompose_channelspace(Matrix(6, 12));
        CHECK(z.frobenius_sq() == 0.0);
    }
    SECTION("structured-orthogonal perturbation is annihilated") {
        Matrix m = compose_channelspace(h);
        const std::size_t nt = h.rows(), nr = h.cols();
        for (std::size_t r = 0; r < nt; ++r)
            for (std::size_t c = 0; c < nr; ++c) {
                const double e = rng.uniform(-3.0, 3.0), f = rng.uniform(-3.0, 3.0);
                m(r, c) += e;
                m(nt + r, nr + c) -= e;
                m(r, nr + c) += f;
                m(nt + r, c) += f;
            }
        CHECK(decompose_channelspace(m).max_abs_diff(h) <= 1e-12);
    }
    SECTION("odd dimensions are rejected") {
        CHECK_THROWS_AS(decompose_channelspace(Matrix(3, 4)), DimensionError);
        CHECK_THROWS_AS(decompose_channelspace(Matrix(4, 5)), DimensionError);
    }
}

TEST_CASE("Frobenius relation: ||cs(H)||^2 == 2 ||H||^2") {
    SeededRng rng(17, 4);
    const CMatrix h = random_cmatrix(4, 7, rng);
    const double lhs = compose_channelspace(h).frobenius_sq();
    const double rhs = 2.0 * h.frobenius_sq();
    CHECK_THAT(lhs, Catch::Matchers::WithinRel(rhs, 1e-12));
}

TEST_CASE("rng determinism: identical (seed, stream) give identical draws") {
    SeededRng a(123, 9), b(123, 9);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    SeededRng c(123, 9), d(123, 9);
    const auto ga = c.gaussian(257, 1.5, 2.0);
    const auto gb = d.gaussian(257, 1.5, 2.0);
    CHECK(ga == gb);
}

TEST_CASE("rng substreams differ") {
    SeededRng a(123, 0), b(123, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("gaussian with zero std collapses to the mean") {
    SeededRng rng(5, 0);
    for (double v : rng.gaussian(100, 3.25, 0.0)) REQUIRE(v == 3.25);
}

TEST_CASE("gaussian sample statistics at n = 1e6") {
    SeededRng rng(2024, 0);
    const auto xs = rng.gaussian(1000000);
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double v : xs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(xs.size());
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 0.01);
}

TEST_CASE("uniform_vec bounds and mean") {
    SeededRng rng(99, 0);
    const auto xs = rng.uniform_vec(100000, 2.0, 5.0);
    double mean = 0.0;
    for (double v : xs) {
        REQUIRE(v >= 2.0);
        REQUIRE(v < 5.0);
        mean += v;
    }
    mean /= static_cast<double>(xs.size());
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(3.5, 0.02));
    CHECK_THROWS_AS(rng.uniform_vec(3, 2.0, 2.0), NumericError);
}

TEST_CASE("permutation is a permutation and seeded") {
    SeededRng a(31, 7), b(31, 7);
    const auto p = a.permutation(257);
    CHECK(p == b.permutation(257));
    std::vector<bool> seen(p.size(), false);
    for (std::size_t v : p) {
        REQUIRE(v < p.size());
        REQUIRE(!seen[v]);
        seen[v] = true;
    }
}

TEST_CASE("symmetric eigenvalues on known matrices") {
    Matrix d(3, 3);
    d(0, 0) = 2.0;
    d(1, 1) = -1.0;
    d(2, 2) = 5.0;
    const auto ev = sym_eigenvalues(d);
    CHECK_THAT(ev[0], Catch::Matchers::WithinAbs(-1.0, 1e-12));
    CHECK_THAT(ev[1], Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THAT(ev[2], Catch::Matchers::WithinAbs(5.0, 1e-12));

    // [[2, 1], [1, 2]] has eigenvalues 1 and 3
    Matrix m(2, 2);
    m(0, 0) = m(1, 1) = 2.0;
    m(0, 1) = m(1, 0) = 1.0;
    const auto ev2 = sym_eigenvalues(m);
    CHECK_THAT(ev2[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(ev2[1], Catch::Matchers::WithinAbs(3.0, 1e-12));
}

TEST_CASE("spd_solve recovers the exact solution") {
    SeededRng rng(55, 0);
    Matrix a(6, 9);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1.0, 1.0);
    Matrix g(9, 9);
    add_atb(g, a, a);
    for (std::size_t i = 0; i < 9; ++i) g(i, i) += 0.5; // make it PD
    Matrix x_true(9, 3);
    for (std::size_t i = 0; i < x_true.size(); ++i) x_true.data()[i] = rng.uniform(-2.0, 2.0);
    const Matrix b = matmul(g, x_true);
    const Matrix x = spd_solve(g, b);
    CHECK(x.max_abs_diff(x_true) < 1e-11);
}

TEST_CASE("matmul helpers agree with naive forms") {
    SeededRng rng(77, 0);
    Matrix a(4, 6), b(4, 5), c(3, 6);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(-1.0, 1.0);

    Matrix atb(6, 5);
    add_atb(atb, a, b);
    CHECK(atb.max_abs_diff(matmul(a.transposed(), b)) < 1e-13);
    CHECK(matmul_bt(c, a).max_abs_diff(matmul(c, a.transposed())) < 1e-13);
}
