// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Small dense row-major matrices (real f64 and complex f64) and the handful
// of kernels the estimators need. Sizes here are tiny (tens to a few hundred
// per side), so plain loops are the right tool.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "mimoce/errors.hpp"

namespace mimoce {

using cplx = std::complex<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    Matrix& operator+=(const Matrix& o) {
        check_same(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    double frobenius_sq() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return s;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs_diff(const Matrix& o) const {
        check_same(o, "max_abs_diff");
        double m = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i)
            m = std::max(m, std::abs(data_[i] - o.data_[i]));
        return m;
    }

private:
    void check_same(const Matrix& o, const char* op) const {
        if (!same_shape(o))
            throw DimensionError(std::string("Matrix ") + op + ": shape mismatch " +
                                 shape_str() + " vs " + o.shape_str());
    }
    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// C = A * B, ikj order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()));
    Matrix c(a.rows(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a(i, p);
            if (aip == 0.0) continue;
            const double* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
    return c;
}

// C += alpha * Aᵀ * B without forming Aᵀ.
inline void add_atb(Matrix& c, const Matrix& a, const Matrix& b, double alpha = 1.0) {
    if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols())
        throw DimensionError("add_atb: incompatible shapes");
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a.data() + p * m;
        const double* bp = b.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = alpha * ap[i];
            if (v == 0.0) continue;
            double* ci = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += v * bp[j];
        }
    }
}

// C = A * Bᵀ without forming Bᵀ.
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_bt: inner dimensions");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            const double* ai = a.data() + i * a.cols();
            const double* bj = b.data() + j * b.cols();
            for (std::size_t p = 0; p < a.cols(); ++p) s += ai[p] * bj[p];
            c(i, j) = s;
        }
    return c;
}

class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols, cplx fill = {})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    cplx operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    cplx* data() { return data_.data(); }
    const cplx* data() const { return data_.data(); }

    bool same_shape(const CMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    CMatrix& operator+=(const CMatrix& o) {
        if (!same_shape(o)) throw DimensionError("CMatrix +=: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    CMatrix& operator-=(const CMatrix& o) {
        if (!same_shape(o)) throw DimensionError("CMatrix -=: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
    friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
    friend CMatrix operator*(CMatrix a, cplx s) {
        for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] *= s;
        return a;
    }

    double frobenius_sq() const {
        double s = 0.0;
        for (const cplx& v : data_) s += std::norm(v);
        return s;
    }

    bool all_finite() const {
        for (const cplx& v : data_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

    double max_abs_diff(const CMatrix& o) const {
        if (!same_shape(o)) throw DimensionError("CMatrix max_abs_diff: shape mismatch");
        double m = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i)
            m = std::max(m, std::abs(data_[i] - o.data_[i]));
        return m;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<cplx> data_;
};

inline CMatrix matmul(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("CMatrix matmul: inner dimensions");
    CMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const cplx aip = a(i, p);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aip * b(p, j);
        }
    return c;
}

// Aᴴ * B.
inline CMatrix matmul_ah_b(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("matmul_ah_b: row counts differ");
    CMatrix c(a.cols(), b.cols());
    for (std::size_t p = 0; p < a.rows(); ++p)
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const cplx v = std::conj(a(p, i));
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += v * b(p, j);
        }
    return c;
}

// Symmetric eigenvalues via cyclic Jacobi rotations. Deterministic; intended
// for the small Gram matrices used by the estimators (order <= a few hundred).
inline std::vector<double> sym_eigenvalues(Matrix a, std::size_t max_sweeps = 64) {
    if (a.rows() != a.cols()) throw DimensionError("sym_eigenvalues: matrix not square");
    const std::size_t n = a.rows();
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

struct CholeskyResult {
    Matrix l;      // lower triangular
    bool ok = false;
};

// Cholesky factorization of a symmetric positive definite matrix.
inline CholeskyResult cholesky(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("cholesky: matrix not square");
    const std::size_t n = a.rows();
    CholeskyResult r{Matrix(n, n), true};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= r.l(i, k) * r.l(j, k);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s)) {
                    r.ok = false;
                    return r;
                }
                r.l(i, i) = std::sqrt(s);
            } else {
                r.l(i, j) = s / r.l(j, j);
            }
        }
    }
    return r;
}

// Solves A X = B given the Cholesky factor L of A (A = L Lᵀ).
inline Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
    const std::size_t n = l.rows();
    if (b.rows() != n) throw DimensionError("cholesky_solve: rhs rows");
    Matrix x = b;
    // forward: L z = b
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = x(i, j);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, j);
            x(i, j) = s / l(i, i);
        }
    }
    // backward: Lᵀ x = z
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = x(ii, j);
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, j);
            x(ii, j) = s / l(ii, ii);
        }
    }
    return x;
}

// SPD solve with one step of iterative refinement in f64.
inline Matrix spd_solve(const Matrix& a, const Matrix& b) {
    CholeskyResult ch = cholesky(a);
    if (!ch.ok) throw EstimationError("spd_solve: matrix not positive definite");
    Matrix x = cholesky_solve(ch.l, b);
    Matrix resid = b - matmul(a, x);
    x += cholesky_solve(ch.l, resid);
    return x;
}

} // namespace mimoce
