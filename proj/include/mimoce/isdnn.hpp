// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// The deep-unfolded channel estimator. Each layer runs, in order,
//
//   (1) E_new   = Dinv . (q - G Hhat)                    residual step
//   (2) Etilde  = psi(E_prev W1 + B1) W2 + B2            memory transform
//   (3) mu      = Hhat + E_new + alpha1 * Etilde
//   (4) Hhat'   = (1 - alpha2) * mu + alpha2 * Hhat      gated update
//   (5) E_prev' = E_new
//
// on real channel-space composites (2Nt x 2Nr). The linear maps W act on the
// receive (last) dimension and broadcast over rows; biases broadcast over
// rows. All data-derived quantities (G, Dinv, q) are constants of the sample,
// so the unfolded graph over the parameter set is fixed.
//
// The structured variant runs the same core in path-gain space: per receive
// column l the effective pilot is X diag(phi_{.,l}); the per-column Gram in
// channel-space composite form replaces G, while Dinv stays shared across
// columns because |phi| = 1 leaves the complex Gram diagonal unchanged.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mimoce/airsim.hpp"
#include "mimoce/composite.hpp"
#include "mimoce/matrix.hpp"
#include "mimoce/rng.hpp"

namespace mimoce {

enum class Psi { Tanh, None };
enum class NetMode { Unstructured, Structured };
enum class E1Mode { Shared, PerSample, Learned };

struct LayerParams {
    Matrix w1, w2;              // 2Nr x 2Nr
    std::vector<double> b1, b2; // 2Nr
    double alpha1 = 0.0;
    double alpha2 = 0.5;
};

struct NetworkParams {
    std::size_t k_layers = 0, nt = 0, nr = 0;
    NetMode mode = NetMode::Unstructured;
    Psi psi = Psi::Tanh;
    E1Mode e1_mode = E1Mode::Shared;
    std::uint64_t init_seed = 0;
    std::vector<LayerParams> layers;
    Matrix e1; // 2Nt x 2Nr initial residual memory (parameter only in Learned mode)
};

/// Learnable-value count of the K-layer network:
/// K * (2 * (2Nr)^2 + 2 * (2Nr) + 2). The initial residual memory is not
/// counted (it is a constant except in the optional learned mode).
inline std::uint64_t parameter_count(std::size_t k, std::size_t nr) {
    if (k < 1 || nr < 1) throw ConfigError("parameter_count: k and nr must be >= 1");
    const std::uint64_t d = 2 * static_cast<std::uint64_t>(nr);
    return static_cast<std::uint64_t>(k) * (2 * d * d + 2 * d + 2);
}

/// Parameter init: alpha1 ~ U[0,1), alpha2 = 0.5, W entries
/// ~ U(-1/sqrt(2Nr), +1/sqrt(2Nr)), biases zero, E1 entries ~ U[0,1).
/// Draw order per layer: W1 row-major, W2 row-major, alpha1; then E1.
inline NetworkParams init_network(std::size_t k, std::size_t nt, std::size_t nr, SeededRng& rng,
                                  NetMode mode = NetMode::Unstructured, Psi psi = Psi::Tanh,
                                  E1Mode e1_mode = E1Mode::Shared) {
    if (k < 1) throw ConfigError("init_network: need at least one layer");
    NetworkParams net;
    net.k_layers = k;
    net.nt = nt;
    net.nr = nr;
    net.mode = mode;
    net.psi = psi;
    net.e1_mode = e1_mode;
    net.init_seed = rng.seed();
    const std::size_t d = 2 * nr;
    const double lim = 1.0 / std::sqrt(static_cast<double>(d));
    net.layers.resize(k);
    for (LayerParams& lp : net.layers) {
        lp.w1 = Matrix(d, d);
        for (std::size_t i = 0; i < lp.w1.size(); ++i) lp.w1.data()[i] = rng.uniform(-lim, lim);
        lp.w2 = Matrix(d, d);
        for (std::size_t i = 0; i < lp.w2.size(); ++i) lp.w2.data()[i] = rng.uniform(-lim, lim);
        lp.b1.assign(d, 0.0);
        lp.b2.assign(d, 0.0);
        lp.alpha1 = rng.uniform(0.0, 1.0);
        lp.alpha2 = 0.5;
    }
    net.e1 = Matrix(2 * nt, d);
    for (std::size_t i = 0; i < net.e1.size(); ++i) net.e1.data()[i] = rng.uniform(0.0, 1.0);
    return net;
}

// Data-derived constants of one sample, in composite form.
struct SampleSystem {
    Matrix q;                    // 2Nt x 2Nr
    std::vector<double> dinv;    // 2Nt
    Matrix g;                    // 2Nt x 2Nt (unstructured)
    std::vector<Matrix> g_pairs; // Nr Grams of 2Nt x 2Nt (structured)
    Matrix target;               // 2Nt x 2Nr composite training target (H or beta)
    CMatrix h_true;              // Nt x Nr complex channel (metrics)
    CMatrix phases;              // Nt x Nr (structured only; exactly unit modulus)
    std::uint64_t e1_stream = 0; // substream id for per-sample E1

    bool structured() const { return !g_pairs.empty(); }
};

/// Exact unit normalization for phases that may carry storage quantization;
/// rejects entries whose modulus deviates by more than 1e-6.
inline CMatrix normalize_phases(const CMatrix& phases) {
    CMatrix out(phases.rows(), phases.cols());
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const double mag = std::abs(phases.data()[i]);
        if (std::abs(mag - 1.0) > 1e-6)
            throw NumericError("normalize_phases: entry " + std::to_string(i) +
                               " has modulus " + std::to_string(mag));
        out.data()[i] = phases.data()[i] / mag;
    }
    return out;
}

/// Composite system for the unstructured estimator: G = cs(Xᴴ X),
/// q = cs(Xᴴ Y), D = diag(G).
inline SampleSystem build_system(const CMatrix& x, const CMatrix& y, const CMatrix& h_true) {
    if (x.rows() != y.rows())
        throw DimensionError("build_system: pilot rows " + std::to_string(x.rows()) +
                             " vs received rows " + std::to_string(y.rows()));
    SampleSystem s;
    s.g = compose_channelspace(matmul_ah_b(x, x));
    s.q = compose_channelspace(matmul_ah_b(x, y));
    s.dinv.resize(s.g.rows());
    for (std::size_t i = 0; i < s.g.rows(); ++i) {
        const double d = s.g(i, i);
        if (!(d > 0.0))
            throw EstimationError("build_system: nonpositive Gram diagonal at " +
                                  std::to_string(i));
        s.dinv[i] = 1.0 / d;
    }
    s.target = compose_channelspace(h_true);
    s.h_true = h_true;
    return s;
}

/// Composite system for the structured estimator; `phases` must be exactly
/// unit modulus (see normalize_phases). Target space is the path-gain matrix
/// beta = H . conj(phi).
inline SampleSystem build_system_structured(const CMatrix& x, const CMatrix& y,
                                            const CMatrix& h_true, const CMatrix& phases) {
    if (x.rows() != y.rows()) throw DimensionError("build_system_structured: row mismatch");
    const std::size_t nt = x.cols(), nr = y.cols();
    if (phases.rows() != nt || phases.cols() != nr)
        throw DimensionError("build_system_structured: phases must be Nt x Nr");
    SampleSystem s;
    s.phases = phases;
    s.h_true = h_true;

    // Shared preconditioner from the unrotated pilot Gram.
    const CMatrix gram = matmul_ah_b(x, x);
    s.dinv.resize(2 * nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const double d = gram(t, t).real();
        if (!(d > 0.0)) throw EstimationError("build_system_structured: nonpositive Gram diag");
        s.dinv[t] = 1.0 / d;
        s.dinv[nt + t] = 1.0 / d;
    }

    CMatrix q_cplx(nt, nr);
    s.g_pairs.reserve(nr);
    CMatrix xl(x.rows(), nt);
    for (std::size_t l = 0; l < nr; ++l) {
        for (std::size_t p = 0; p < x.rows(); ++p)
            for (std::size_t t = 0; t < nt; ++t) xl(p, t) = x(p, t) * phases(t, l);
        s.g_pairs.push_back(compose_channelspace(matmul_ah_b(xl, xl)));
        for (std::size_t t = 0; t < nt; ++t) {
            cplx acc = 0.0;
            for (std::size_t p = 0; p < x.rows(); ++p) acc += std::conj(xl(p, t)) * y(p, l);
            q_cplx(t, l) = acc;
        }
    }
    s.q = compose_channelspace(q_cplx);
    s.target = compose_channelspace(remove_phases(h_true, phases));
    return s;
}

inline SampleSystem system_from_record(const SampleRecord& rec, NetMode mode,
                                       std::uint64_t e1_stream = 0) {
    SampleSystem s;
    if (mode == NetMode::Structured) {
        if (!rec.side)
            throw ConfigError("structured estimator needs side info, record has none");
        s = build_system_structured(rec.x.x, rec.y, rec.h, normalize_phases(rec.side->phases));
    } else {
        s = build_system(rec.x.x, rec.y, rec.h);
    }
    s.e1_stream = e1_stream;
    return s;
}

/// E = Dinv . (q - G Hhat), with the per-column-pair Grams in structured mode.
inline Matrix residual_step(const SampleSystem& s, const Matrix& h_hat) {
    const std::size_t rows = s.q.rows(), cols = s.q.cols();
    Matrix e = s.q;
    if (!s.structured()) {
        const Matrix gh = matmul(s.g, h_hat);
        e -= gh;
    } else {
        const std::size_t nr = cols / 2;
        for (std::size_t l = 0; l < nr; ++l) {
            for (std::size_t i = 0; i < rows; ++i) {
                double acc0 = 0.0, acc1 = 0.0;
                const Matrix& g = s.g_pairs[l];
                for (std::size_t j = 0; j < rows; ++j) {
                    acc0 += g(i, j) * h_hat(j, l);
                    acc1 += g(i, j) * h_hat(j, nr + l);
                }
                e(i, l) -= acc0;
                e(i, nr + l) -= acc1;
            }
        }
    }
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) e(i, j) *= s.dinv[i];
    return e;
}

/// Adjoint of residual_step into the estimate: returns -Gᵀ (Dinv . gE).
/// The Grams are symmetric by construction.
inline Matrix residual_step_adjoint(const SampleSystem& s, const Matrix& g_e) {
    const std::size_t rows = s.q.rows(), cols = s.q.cols();
    Matrix scaled = g_e;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) scaled(i, j) *= s.dinv[i];
    Matrix out(rows, cols);
    if (!s.structured()) {
        out = matmul(s.g, scaled);
    } else {
        const std::size_t nr = cols / 2;
        for (std::size_t l = 0; l < nr; ++l) {
            const Matrix& g = s.g_pairs[l];
            for (std::size_t i = 0; i < rows; ++i) {
                double acc0 = 0.0, acc1 = 0.0;
                for (std::size_t j = 0; j < rows; ++j) {
                    acc0 += g(i, j) * scaled(j, l);
                    acc1 += g(i, j) * scaled(j, nr + l);
                }
                out(i, l) = acc0;
                out(i, nr + l) = acc1;
            }
        }
    }
    out *= -1.0;
    return out;
}

/// Initial estimate fed to the first layer: Hhat_1 = Dinv . q.
inline Matrix diag_preconditioned_init(const SampleSystem& s) {
    Matrix h = s.q;
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) *= s.dinv[i];
    return h;
}

inline Matrix e1_for_sample(const NetworkParams& net, const SampleSystem& s) {
    if (net.e1_mode != E1Mode::PerSample) return net.e1;
    SeededRng rng(net.init_seed, s.e1_stream);
    Matrix e(net.e1.rows(), net.e1.cols());
    for (std::size_t i = 0; i < e.size(); ++i) e.data()[i] = rng.uniform(0.0, 1.0);
    return e;
}

// Everything the reverse pass needs from one layer of one sample.
struct LayerTrace {
    Matrix h_in;      // Hhat_k
    Matrix e_prev_in; // memory fed into the transform
    Matrix e_new;
    Matrix act_out;   // psi(E_prev W1 + B1)
    Matrix e_tilde;   // transformed memory
    Matrix mu;
};

struct SampleTrace {
    std::vector<LayerTrace> layers;
    Matrix output; // final Hhat
};

// B row-broadcast add: rows of m each get b.
inline void add_row_broadcast(Matrix& m, const std::vector<double>& b) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += b[j];
}

inline void layer_forward_into(const SampleSystem& sys, const LayerParams& lp, Psi psi,
                               const Matrix& h_in, const Matrix& e_prev, LayerTrace& tr) {
    tr.h_in = h_in;
    tr.e_prev_in = e_prev;
    tr.e_new = residual_step(sys, h_in);

    Matrix t1 = matmul(e_prev, lp.w1);
    add_row_broadcast(t1, lp.b1);
    if (psi == Psi::Tanh) {
        for (std::size_t i = 0; i < t1.size(); ++i) t1.data()[i] = std::tanh(t1.data()[i]);
    }
    tr.act_out = std::move(t1);
    tr.e_tilde = matmul(tr.act_out, lp.w2);
    add_row_broadcast(tr.e_tilde, lp.b2);

    tr.mu = tr.h_in;
    tr.mu += tr.e_new;
    Matrix scaled = tr.e_tilde;
    scaled *= lp.alpha1;
    tr.mu += scaled;
}

/// One ISDNN layer as a pure function: (Hhat_k, E_prev) -> (Hhat_{k+1}, E_new).
inline std::pair<Matrix, Matrix> layer_forward(const SampleSystem& sys, const LayerParams& lp,
                                               Psi psi, const Matrix& h_in,
                                               const Matrix& e_prev) {
    LayerTrace tr;
    layer_forward_into(sys, lp, psi, h_in, e_prev, tr);
    Matrix h_out = tr.mu;
    h_out *= (1.0 - lp.alpha2);
    Matrix keep = h_in;
    keep *= lp.alpha2;
    h_out += keep;
    return {std::move(h_out), std::move(tr.e_new)};
}

/// Full forward pass for one sample, recording the trace for the reverse
/// pass. Throws NumericError naming the layer if an intermediate goes
/// non-finite.
inline SampleTrace forward_sample(const NetworkParams& net, const SampleSystem& sys) {
    SampleTrace trace;
    trace.layers.resize(net.k_layers);
    Matrix h = diag_preconditioned_init(sys);
    Matrix e_prev = e1_for_sample(net, sys);
    for (std::size_t k = 0; k < net.k_layers; ++k) {
        LayerTrace& tr = trace.layers[k];
        layer_forward_into(sys, net.layers[k], net.psi, h, e_prev, tr);
        Matrix h_next = tr.mu;
        h_next *= (1.0 - net.layers[k].alpha2);
        Matrix keep = h;
        keep *= net.layers[k].alpha2;
        h_next += keep;
        if (!h_next.all_finite())
            throw NumericError("forward: non-finite estimate after layer " + std::to_string(k + 1));
        h = std::move(h_next);
        e_prev = tr.e_new;
    }
    trace.output = std::move(h);
    return trace;
}

struct ForwardResult {
    std::vector<Matrix> outputs;                 // composite per sample
    std::vector<std::vector<Matrix>> snapshots;  // per sample, per layer Hhat
};

/// Batch forward with per-layer snapshots. Snapshot k is the estimate after
/// layer k+1; the final snapshot equals the output.
inline ForwardResult forward(const NetworkParams& net, std::span<const SampleSystem> batch,
                             bool keep_snapshots = true) {
    ForwardResult res;
    res.outputs.reserve(batch.size());
    if (keep_snapshots) res.snapshots.reserve(batch.size());
    for (const SampleSystem& sys : batch) {
        Matrix h = diag_preconditioned_init(sys);
        Matrix e_prev = e1_for_sample(net, sys);
        std::vector<Matrix> snaps;
        if (keep_snapshots) snaps.reserve(net.k_layers);
        for (std::size_t k = 0; k < net.k_layers; ++k) {
            auto [h_next, e_new] = layer_forward(sys, net.layers[k], net.psi, h, e_prev);
            if (!h_next.all_finite())
                throw NumericError("forward: non-finite estimate after layer " +
                                   std::to_string(k + 1));
            h = std::move(h_next);
            e_prev = std::move(e_new);
            if (keep_snapshots) snaps.push_back(h);
        }
        res.outputs.push_back(std::move(h));
        if (keep_snapshots) res.snapshots.push_back(std::move(snaps));
    }
    return res;
}

/// Complex channel estimate from a composite network output. In structured
/// mode the output lives in path-gain space and the phases are re-applied.
inline CMatrix estimate_to_channel(const Matrix& output, const SampleSystem& sys) {
    CMatrix est = decompose_channelspace(output);
    if (sys.structured()) {
        for (std::size_t i = 0; i < est.size(); ++i) est.data()[i] *= sys.phases.data()[i];
    }
    return est;
}

} // namespace mimoce
