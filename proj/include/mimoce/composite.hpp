// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Real composite forms of complex matrices. Two layouts are used:
//
//   row space:     m x n complex  ->  m x 2n real   [Re(M)  Im(M)]
//   channel space: m x n complex  ->  2m x 2n real  [[Re(M)  Im(M)]
//                                                    [-Im(M) Re(M)]]
//
// The channel-space form is a ring homomorphism: channelspace(A B) equals
// channelspace(A) * channelspace(B), and channelspace(Aᴴ) equals
// channelspace(A)ᵀ. Together with rowspace(x M) == rowspace(x) *
// channelspace(M) this fixes the sign conventions; all estimator algebra
// relies on these identities rather than any printed block layout.

#pragma once

#include "mimoce/matrix.hpp"

namespace mimoce {

inline Matrix compose_rowspace(const CMatrix& m) {
    Matrix out(m.rows(), 2 * m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out(r, c) = m(r, c).real();
            out(r, m.cols() + c) = m(r, c).imag();
        }
    return out;
}

inline CMatrix decompose_rowspace(const Matrix& m) {
    if (m.cols() % 2 != 0)
        throw DimensionError("decompose_rowspace: odd column count " + std::to_string(m.cols()));
    const std::size_t n = m.cols() / 2;
    CMatrix out(m.rows(), n);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) out(r, c) = {m(r, c), m(r, n + c)};
    return out;
}

inline Matrix compose_channelspace(const CMatrix& m) {
    const std::size_t mr = m.rows(), mc = m.cols();
    Matrix out(2 * mr, 2 * mc);
    for (std::size_t r = 0; r < mr; ++r)
        for (std::size_t c = 0; c < mc; ++c) {
            const double re = m(r, c).real(), im = m(r, c).imag();
            out(r, c) = re;
            out(r, mc + c) = im;
            out(mr + r, c) = -im;
            out(mr + r, mc + c) = re;
        }
    return out;
}

// Block-averaging projection onto the channel-space structure; exact inverse
// of compose_channelspace on structured inputs, and the orthogonal projection
// (in the Frobenius sense) for arbitrary real matrices such as raw network
// outputs.
inline CMatrix decompose_channelspace(const Matrix& m) {
    if (m.rows() % 2 != 0 || m.cols() % 2 != 0)
        throw DimensionError("decompose_channelspace: dimensions must be even, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    const std::size_t mr = m.rows() / 2, mc = m.cols() / 2;
    CMatrix out(mr, mc);
    for (std::size_t r = 0; r < mr; ++r)
        for (std::size_t c = 0; c < mc; ++c) {
            const double re = 0.5 * (m(r, c) + m(mr + r, mc + c));
            const double im = 0.5 * (m(r, mc + c) - m(mr + r, c));
            out(r, c) = {re, im};
        }
    return out;
}

} // namespace mimoce
