// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <limits>

#include "mimoce/baselines.hpp"
#include "mimoce/isdnn.hpp"

using namespace mimoce;

namespace {

SampleSystem random_system(std::size_t np, std::size_t nt, std::size_t nr, double snr_db,
                           SeededRng& rng) {
    SampleRecord rec;
    rec.x = gen_wellposed_pilots(np, nt, rng);
    rec.h = gen_rayleigh(nt, nr, rng).h;
    rec.y = transmit(rec.x, rec.h, snr_db, rng);
    rec.snr_db = snr_db;
    return build_system(rec.x.x, rec.y, rec.h);
}

} // namespace

TEST_CASE("parameter counts match the published table") {
    CHECK(parameter_count(4, 64) == 132104);
    CHECK(parameter_count(5, 64) == 165130);
    CHECK(parameter_count(1, 1) == 14);
}

TEST_CASE("network initialization follows the documented distributions") {
    SeededRng rng(1, 0);
    const std::size_t k = 4, nt = 4, nr = 16;
    const NetworkParams net = init_network(k, nt, nr, rng);
    REQUIRE(net.layers.size() == k);
    const double lim = 1.0 / std::sqrt(2.0 * nr);
    for (const LayerParams& lp : net.layers) {
        CHECK(lp.alpha2 == 0.5);
        CHECK(lp.alpha1 >= 0.0);
        CHECK(lp.alpha1 < 1.0);
        for (std::size_t i = 0; i < lp.w1.size(); ++i) {
            REQUIRE(std::abs(lp.w1.data()[i]) <= lim);
            REQUIRE(std::abs(lp.w2.data()[i]) <= lim);
        }
        for (double b : lp.b1) REQUIRE(b == 0.0);
        for (double b : lp.b2) REQUIRE(b == 0.0);
    }
    for (std::size_t i = 0; i < net.e1.size(); ++i) {
        REQUIRE(net.e1.data()[i] >= 0.0);
        REQUIRE(net.e1.data()[i] < 1.0);
    }
    // the learnable set size matches the closed-form count
    std::size_t total = 0;
    for (const LayerParams& lp : net.layers)
        total += lp.w1.size() + lp.w2.size() + lp.b1.size() + lp.b2.size() + 2;
    CHECK(total == parameter_count(k, nr));
}

TEST_CASE("LS is a fixed point of the layer when the memory path is gated off") {
    SeededRng rng(2, 0);
    const SampleSystem sys = random_system(8, 4, 8, 10.0, rng);
    NetworkParams net = init_network(1, 4, 8, rng);
    net.layers[0].alpha1 = 0.0;
    net.layers[0].alpha2 = 0.0;

    // Hhat = LS solves G Hhat = q, so the residual step vanishes.
    Matrix ls(sys.q.rows(), sys.q.cols());
    ls = spd_solve(sys.g, sys.q);
    const auto [h_next, e_new] = layer_forward(sys, net.layers[0], net.psi, ls, net.e1);
    CHECK(e_new.frobenius_sq() < 1e-18);
    CHECK(h_next.max_abs_diff(ls) < 1e-11);
}

TEST_CASE("alpha2 = 1 freezes the estimate") {
    SeededRng rng(3, 0);
    const SampleSystem sys = random_system(4, 2, 4, 5.0, rng);
    NetworkParams net = init_network(1, 2, 4, rng);
    net.layers[0].alpha2 = 1.0;
    Matrix h(sys.q.rows(), sys.q.cols());
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.uniform(-2.0, 2.0);
    const auto [h_next, e_new] = layer_forward(sys, net.layers[0], net.psi, h, net.e1);
    CHECK(h_next.max_abs_diff(h) <= 1e-12);
}

TEST_CASE("single layer matches an independent scalar re-implementation (1x1 system)") {
    SeededRng rng(4, 0);
    const SampleSystem sys = random_system(1, 1, 1, 10.0, rng);
    NetworkParams net = init_network(1, 1, 1, rng);
    const LayerParams& lp = net.layers[0];

    Matrix h0(2, 2);
    for (std::size_t i = 0; i < 4; ++i) h0.data()[i] = rng.uniform(-1.0, 1.0);
    const auto [h_next, e_new] = layer_forward(sys, lp, net.psi, h0, net.e1);

    // scalar oracle on raw 2x2 arrays
    using M2 = std::array<std::array<double, 2>, 2>;
    auto get = [](const Matrix& m) {
        return M2{{{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}}};
    };
    const M2 g = get(sys.g), q = get(sys.q), h = get(h0), e1 = get(net.e1);
    const M2 w1 = get(lp.w1), w2 = get(lp.w2);
    const double d0 = sys.dinv[0], d1 = sys.dinv[1];
    M2 e_or{}, t1{}, t3{}, mu{}, out{};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            const double gh = g[r][0] * h[0][c] + g[r][1] * h[1][c];
            e_or[r][c] = (r == 0 ? d0 : d1) * (q[r][c] - gh);
        }
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            t1[r][c] = std::tanh(e1[r][0] * w1[0][c] + e1[r][1] * w1[1][c] + lp.b1[c]);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            t3[r][c] = t1[r][0] * w2[0][c] + t1[r][1] * w2[1][c] + lp.b2[c];
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            mu[r][c] = h[r][c] + e_or[r][c] + lp.alpha1 * t3[r][c];
            out[r][c] = (1.0 - lp.alpha2) * mu[r][c] + lp.alpha2 * h[r][c];
        }
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            REQUIRE(std::abs(out[r][c] - h_next(r, c)) <= 1e-12);
            REQUIRE(std::abs(e_or[r][c] - e_new(r, c)) <= 1e-12);
        }
}

TEST_CASE("one gated-off layer implements the explicit residual update") {
    SeededRng rng(5, 0);
    const SampleSystem sys = random_system(4, 2, 6, 10.0, rng);
    NetworkParams net = init_network(1, 2, 6, rng);
    net.layers[0].alpha1 = 0.0;
    net.layers[0].alpha2 = 0.0;
    const ForwardResult res = forward(net, std::span(&sys, 1));
    const Matrix h1 = diag_preconditioned_init(sys);
    Matrix expect = h1;
    expect += residual_step(sys, h1);
    CHECK(res.outputs[0].max_abs_diff(expect) <= 1e-12);
}

TEST_CASE("identical batch elements produce identical outputs") {
    SeededRng rng(6, 0);
    const SampleSystem sys = random_system(4, 2, 4, 0.0, rng);
    NetworkParams net = init_network(3, 2, 4, rng);
    const std::vector<SampleSystem> batch(5, sys);
    const ForwardResult res = forward(net, batch);
    for (std::size_t b = 1; b < 5; ++b)
        REQUIRE(res.outputs[b].max_abs_diff(res.outputs[0]) == 0.0);
}

TEST_CASE("batch of one looped equals batched forward") {
    SeededRng rng(7, 0);
    NetworkParams net = init_network(2, 2, 4, rng);
    std::vector<SampleSystem> batch;
    for (int i = 0; i < 6; ++i) batch.push_back(random_system(4, 2, 4, 10.0, rng));
    const ForwardResult whole = forward(net, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ForwardResult single = forward(net, std::span(&batch[i], 1));
        REQUIRE(single.outputs[0].max_abs_diff(whole.outputs[i]) <= 1e-12);
    }
}

TEST_CASE("permuting the batch permutes the outputs") {
    SeededRng rng(8, 0);
    NetworkParams net = init_network(2, 2, 4, rng);
    std::vector<SampleSystem> batch;
    for (int i = 0; i < 5; ++i) batch.push_back(random_system(4, 2, 4, 10.0, rng));
    const ForwardResult fwd = forward(net, batch);
    std::vector<SampleSystem> rev(batch.rbegin(), batch.rend());
    const ForwardResult bwd = forward(net, rev);
    for (std::size_t i = 0; i < batch.size(); ++i)
        REQUIRE(bwd.outputs[4 - i].max_abs_diff(fwd.outputs[i]) == 0.0);
}

TEST_CASE("outputs always decompose to a complex estimate of the right shape") {
    SeededRng rng(9, 0);
    NetworkParams net = init_network(3, 3, 5, rng);
    for (int trial = 0; trial < 10; ++trial) {
        const SampleSystem sys = random_system(5, 3, 5, 0.0, rng);
        const SampleTrace tr = forward_sample(net, sys);
        const CMatrix est = estimate_to_channel(tr.output, sys);
        REQUIRE(est.rows() == 3);
        REQUIRE(est.cols() == 5);
        REQUIRE(est.all_finite());
    }
}

TEST_CASE("per-layer snapshots end at the output") {
    SeededRng rng(10, 0);
    NetworkParams net = init_network(4, 2, 4, rng);
    const SampleSystem sys = random_system(4, 2, 4, 10.0, rng);
    const ForwardResult res = forward(net, std::span(&sys, 1));
    REQUIRE(res.snapshots[0].size() == 4);
    CHECK(res.snapshots[0].back().max_abs_diff(res.outputs[0]) == 0.0);
}

namespace {

// tiny complex linear solve via Gaussian elimination (test oracle)
std::vector<cplx> solve_complex(std::vector<std::vector<cplx>> a, std::vector<cplx> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const cplx f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<cplx> x(n);
    for (std::size_t ri = n; ri-- > 0;) {
        cplx s = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri][c] * x[c];
        x[ri] = s / a[ri][ri];
    }
    return x;
}

SampleRecord structured_record(std::size_t np, std::size_t nt, std::size_t nr, double snr_db,
                               SeededRng& rng) {
    DatasetConfig cfg;
    cfg.nt = nt;
    cfg.nr = nr;
    cfg.np = np;
    cfg.snr_levels_db = {snr_db};
    cfg.structured = true;
    cfg.geometry = ula(nr, 0.5);
    return gen_record(cfg, rng, nullptr);
}

} // namespace

TEST_CASE("structured system with all-ones phases equals the unstructured one") {
    SeededRng rng(11, 0);
    SampleRecord rec;
    rec.x = gen_wellposed_pilots(4, 2, rng);
    rec.h = gen_rayleigh(2, 6, rng).h;
    rec.y = transmit(rec.x, rec.h, 10.0, rng);
    const CMatrix ones(2, 6, cplx{1.0, 0.0});

    const SampleSystem su = build_system(rec.x.x, rec.y, rec.h);
    const SampleSystem ss = build_system_structured(rec.x.x, rec.y, rec.h, ones);
    CHECK(ss.q.max_abs_diff(su.q) <= 1e-12);
    for (std::size_t l = 0; l < 6; ++l) REQUIRE(ss.g_pairs[l].max_abs_diff(su.g) <= 1e-12);
    for (std::size_t i = 0; i < su.dinv.size(); ++i)
        REQUIRE(ss.dinv[i] == Catch::Approx(su.dinv[i]).margin(1e-15));

    SeededRng nrng(12, 0);
    NetworkParams net = init_network(3, 2, 6, nrng);
    const SampleTrace tu = forward_sample(net, su);
    const SampleTrace ts = forward_sample(net, ss);
    CHECK(tu.output.max_abs_diff(ts.output) <= 1e-12);
}

TEST_CASE("noiseless structured pipeline: column-wise complex LS recovers the gains") {
    SeededRng rng(13, 0);
    const std::size_t np = 4, nt = 4, nr = 8;
    const double inf = std::numeric_limits<double>::infinity();
    SampleRecord rec = structured_record(np, nt, nr, inf, rng);
    REQUIRE(rec.side.has_value());
    const CMatrix& phi = rec.side->phases;

    CMatrix beta_hat(nt, nr);
    for (std::size_t l = 0; l < nr; ++l) {
        // effective pilot X diag(phi_col)
        CMatrix xl(np, nt);
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t t = 0; t < nt; ++t) xl(p, t) = rec.x.x(p, t) * phi(t, l);
        std::vector<std::vector<cplx>> gram(nt, std::vector<cplx>(nt));
        std::vector<cplx> rhs(nt);
        for (std::size_t i = 0; i < nt; ++i) {
            for (std::size_t j = 0; j < nt; ++j) {
                cplx s = 0.0;
                for (std::size_t p = 0; p < np; ++p) s += std::conj(xl(p, i)) * xl(p, j);
                gram[i][j] = s;
            }
            cplx s = 0.0;
            for (std::size_t p = 0; p < np; ++p) s += std::conj(xl(p, i)) * rec.y(p, l);
            rhs[i] = s;
        }
        const std::vector<cplx> col = solve_complex(gram, rhs);
        for (std::size_t t = 0; t < nt; ++t) beta_hat(t, l) = col[t];
    }
    // beta_hat times the phases reconstructs H exactly
    CMatrix h_hat(nt, nr);
    for (std::size_t i = 0; i < h_hat.size(); ++i)
        h_hat.data()[i] = beta_hat.data()[i] * phi.data()[i];
    CHECK(std::sqrt(nmse(rec.h, h_hat)) < 1e-10);

    // the structured composite system agrees: the composite of beta is a
    // fixed point of the residual step
    const SampleSystem sys =
        build_system_structured(rec.x.x, rec.y, rec.h, normalize_phases(phi));
    const Matrix beta_comp = compose_channelspace(remove_phases(rec.h, phi));
    CHECK(residual_step(sys, beta_comp).frobenius_sq() < 1e-18);
}

TEST_CASE("structured forward re-applies the phases on output") {
    SeededRng rng(14, 0);
    const SampleRecord rec = structured_record(4, 2, 6, 20.0, rng);
    const SampleSystem sys = system_from_record(rec, NetMode::Structured);
    SeededRng nrng(15, 0);
    NetworkParams net = init_network(2, 2, 6, nrng, NetMode::Structured);
    const SampleTrace tr = forward_sample(net, sys);
    const CMatrix channel_est = estimate_to_channel(tr.output, sys);
    const CMatrix beta_est = decompose_channelspace(tr.output);
    for (std::size_t i = 0; i < channel_est.size(); ++i)
        REQUIRE(std::abs(channel_est.data()[i] - beta_est.data()[i] * sys.phases.data()[i]) <=
                1e-12);
}

TEST_CASE("normalize_phases accepts storage jitter and rejects junk") {
    CMatrix phi(1, 2);
    phi(0, 0) = cplx{1.0 + 3e-7, 0.0};
    phi(0, 1) = cplx{0.0, -1.0};
    const CMatrix n = normalize_phases(phi);
    CHECK_THAT(std::abs(n(0, 0)), Catch::Matchers::WithinAbs(1.0, 1e-15));
    phi(0, 1) = cplx{0.5, 0.0};
    CHECK_THROWS_AS(normalize_phases(phi), NumericError);
}

TEST_CASE("per-sample initial memory depends on the sample stream") {
    SeededRng rng(16, 0);
    NetworkParams net = init_network(2, 2, 4, rng, NetMode::Unstructured, Psi::Tanh,
                                     E1Mode::PerSample);
    SampleSystem a = random_system(4, 2, 4, 10.0, rng);
    SampleSystem b = a;
    a.e1_stream = 1;
    b.e1_stream = 2;
    const Matrix ea = e1_for_sample(net, a);
    const Matrix eb = e1_for_sample(net, b);
    CHECK(ea.max_abs_diff(eb) > 0.0);
    b.e1_stream = 1;
    CHECK(e1_for_sample(net, b).max_abs_diff(ea) == 0.0);
}

TEST_CASE("mode metadata does not change the parameter count") {
    SeededRng rng(17, 0);
    NetworkParams a = init_network(4, 8, 64, rng, NetMode::Unstructured);
    SeededRng rng2(17, 0);
    NetworkParams b = init_network(4, 8, 64, rng2, NetMode::Structured);
    std::size_t ca = 0, cb = 0;
    for (const LayerParams& lp : a.layers)
        ca += lp.w1.size() + lp.w2.size() + lp.b1.size() + lp.b2.size() + 2;
    for (const LayerParams& lp : b.layers)
        cb += lp.w1.size() + lp.w2.size() + lp.b1.size() + lp.b2.size() + 2;
    CHECK(ca == cb);
    CHECK(ca == parameter_count(4, 64));
}
