// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Classical estimators on the channel-space composite system:
//   LS        Hhat = G^-1 q
//   diag-init Hhat = D^-1 q           (first-layer input of the network)
//   MMSE      Hhat = (G + sigma^2 I)^-1 q   (unit-variance channel prior)
//   PGD       Hhat_{j+1} = Hhat_j + delta (q - G Hhat_j)
// with G = cs(Xᴴ X), q = cs(Xᴴ Y), D = diag(G).

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mimoce/airsim.hpp"
#include "mimoce/composite.hpp"
#include "mimoce/matrix.hpp"

namespace mimoce {

struct LsWorkspace {
    Matrix g;                 // 2Nt x 2Nt
    Matrix q;                 // 2Nt x 2Nr
    std::vector<double> diag; // diagonal of g, strictly positive for nonzero pilots
};

inline LsWorkspace make_ls_workspace(const CMatrix& x, const CMatrix& y) {
    if (x.rows() != y.rows())
        throw DimensionError("make_ls_workspace: pilot rows " + std::to_string(x.rows()) +
                             " vs received rows " + std::to_string(y.rows()));
    LsWorkspace w;
    w.g = compose_channelspace(matmul_ah_b(x, x));
    w.q = compose_channelspace(matmul_ah_b(x, y));
    w.diag.resize(w.g.rows());
    for (std::size_t i = 0; i < w.g.rows(); ++i) w.diag[i] = w.g(i, i);
    return w;
}

inline double gram_condition(const Matrix& g) {
    const std::vector<double> ev = sym_eigenvalues(g);
    if (ev.front() <= 0.0) return std::numeric_limits<double>::infinity();
    return ev.back() / ev.front();
}

/// Least-squares estimate in composite form; rejects systems whose Gram
/// condition number exceeds 1e12.
inline Matrix ls_estimate(const CMatrix& x, const CMatrix& y) {
    const LsWorkspace w = make_ls_workspace(x, y);
    const double cond = gram_condition(w.g);
    if (!(cond < 1e12))
        throw EstimationError("ls_estimate: Gram condition number " + std::to_string(cond) +
                              " exceeds 1e12");
    return spd_solve(w.g, w.q);
}

/// Diagonally preconditioned initializer H1 = D^-1 q.
inline Matrix diag_init(const CMatrix& x, const CMatrix& y) {
    const LsWorkspace w = make_ls_workspace(x, y);
    Matrix h = w.q;
    for (std::size_t i = 0; i < h.rows(); ++i) {
        if (!(w.diag[i] > 0.0))
            throw EstimationError("diag_init: zero Gram diagonal at row " + std::to_string(i));
        for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) /= w.diag[i];
    }
    return h;
}

/// Regularized estimate under the unit-variance i.i.d. channel prior.
inline Matrix mmse_estimate(const CMatrix& x, const CMatrix& y, double sigma2) {
    if (sigma2 < 0.0) throw ConfigError("mmse_estimate: negative noise variance");
    LsWorkspace w = make_ls_workspace(x, y);
    for (std::size_t i = 0; i < w.g.rows(); ++i) w.g(i, i) += sigma2;
    if (sigma2 == 0.0) {
        const double cond = gram_condition(w.g);
        if (!(cond < 1e12))
            throw EstimationError("mmse_estimate: sigma2 = 0 and Gram condition number " +
                                  std::to_string(cond) + " exceeds 1e12");
    }
    return spd_solve(w.g, w.q);
}

/// Plain projected gradient descent with identity projection.
inline Matrix pgd_estimate(const CMatrix& x, const CMatrix& y, double delta, std::size_t k,
                           const Matrix& h0) {
    if (!(delta > 0.0)) throw ConfigError("pgd_estimate: step size must be positive");
    const LsWorkspace w = make_ls_workspace(x, y);
    if (h0.rows() != w.q.rows() || h0.cols() != w.q.cols())
        throw DimensionError("pgd_estimate: initial estimate has wrong shape");
    Matrix h = h0;
    for (std::size_t j = 0; j < k; ++j) {
        Matrix step = w.q - matmul(w.g, h);
        step *= delta;
        h += step;
        if (h.frobenius_sq() > 1e24)
            throw NumericError("pgd_estimate: divergence at iteration " + std::to_string(j + 1) +
                               " (step size too large)");
    }
    return h;
}

/// Normalized mean square error between complex matrices.
inline double nmse(const CMatrix& h_true, const CMatrix& h_est) {
    if (!h_true.same_shape(h_est)) throw DimensionError("nmse: shape mismatch");
    const double den = h_true.frobenius_sq();
    if (!(den > 0.0)) throw NumericError("nmse: zero-norm reference channel");
    double num = 0.0;
    for (std::size_t i = 0; i < h_true.size(); ++i)
        num += std::norm(h_true.data()[i] - h_est.data()[i]);
    return num / den;
}

using Estimator = std::function<CMatrix(const SampleRecord&)>;

/// NMSE of one chunk: ratio of summed error energy to summed channel energy.
inline double chunk_nmse(std::span<const SampleRecord> chunk, const Estimator& est) {
    double num = 0.0, den = 0.0;
    for (const SampleRecord& rec : chunk) {
        const CMatrix h_hat = est(rec);
        if (!h_hat.same_shape(rec.h)) throw DimensionError("chunk_nmse: estimate shape mismatch");
        for (std::size_t i = 0; i < rec.h.size(); ++i)
            num += std::norm(rec.h.data()[i] - h_hat.data()[i]);
        den += rec.h.frobenius_sq();
    }
    if (!(den > 0.0)) throw NumericError("chunk_nmse: zero-norm chunk");
    return num / den;
}

/// Average of per-chunk NMSE values over disjoint near-equal contiguous
/// chunks of the record span.
inline double nmse_averaged(std::span<const SampleRecord> records, const Estimator& est,
                            std::size_t n_chunks = 100) {
    if (n_chunks < 100)
        throw ConfigError("nmse_averaged: needs at least 100 chunks, got " +
                          std::to_string(n_chunks));
    if (records.size() < n_chunks)
        throw ConfigError("nmse_averaged: " + std::to_string(records.size()) +
                          " records cannot fill " + std::to_string(n_chunks) + " chunks");
    double acc = 0.0;
    const std::size_t base = records.size() / n_chunks;
    const std::size_t extra = records.size() % n_chunks;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        const std::size_t len = base + (c < extra ? 1 : 0);
        acc += chunk_nmse(records.subspan(pos, len), est);
        pos += len;
    }
    return acc / static_cast<double>(n_chunks);
}

} // namespace mimoce
