// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Channel realizations: i.i.d. Rayleigh draws and geometric line-of-sight
// channels built from antenna positions and arrival directions. Element
// positions are stored in carrier-wavelength units, so a plane wave from
// direction (theta, phi) contributes the unit-modulus phase
// exp(-i 2*pi (c_hat . position)) at each element.

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "mimoce/matrix.hpp"
#include "mimoce/rng.hpp"

namespace mimoce {

enum class Axis { X, Y, Z };

struct ArrayGeometry {
    struct Position {
        double x = 0.0, y = 0.0, z = 0.0;
    };
    std::vector<Position> elements; // units of wavelength

    std::size_t count() const { return elements.size(); }
};

/// Uniform linear array: element l at l*spacing along one axis.
inline ArrayGeometry ula(std::size_t n, double spacing, Axis axis = Axis::X) {
    if (n < 1) throw ConfigError("ula: need at least one element");
    if (!(spacing > 0.0)) throw ConfigError("ula: spacing must be positive");
    ArrayGeometry g;
    g.elements.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        const double d = static_cast<double>(l) * spacing;
        switch (axis) {
            case Axis::X: g.elements[l].x = d; break;
            case Axis::Y: g.elements[l].y = d; break;
            case Axis::Z: g.elements[l].z = d; break;
        }
    }
    return g;
}

/// Uniform planar array in the x-y plane, row-major over (nx, ny).
inline ArrayGeometry upa(std::size_t nx, std::size_t ny, double spacing) {
    if (nx < 1 || ny < 1) throw ConfigError("upa: need at least one element per axis");
    if (!(spacing > 0.0)) throw ConfigError("upa: spacing must be positive");
    ArrayGeometry g;
    g.elements.reserve(nx * ny);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
            g.elements.push_back({static_cast<double>(i) * spacing,
                                  static_cast<double>(j) * spacing, 0.0});
    return g;
}

/// Steering phases for arrival direction (theta: zenith, phi: azimuth),
/// one unit-modulus factor per array element.
inline std::vector<cplx> steering_phase(const ArrayGeometry& g, double theta, double phi) {
    std::vector<cplx> out(g.count());
    const double cx = std::sin(theta) * std::cos(phi);
    const double cy = std::sin(theta) * std::sin(phi);
    const double cz = std::cos(theta);
    for (std::size_t l = 0; l < g.count(); ++l) {
        const auto& p = g.elements[l];
        const double arg = -2.0 * std::numbers::pi * (cx * p.x + cy * p.y + cz * p.z);
        out[l] = {std::cos(arg), std::sin(arg)};
    }
    return out;
}

struct StructuredChannelParams {
    std::size_t ray_count = 1;                 // P
    std::vector<cplx> gains;                   // P x Nt, row-major (beta)
    std::vector<double> zenith;                // P x Nt, radians
    std::vector<double> azimuth;               // P x Nt, radians
    ArrayGeometry geometry;

    std::size_t tx_count() const {
        return ray_count == 0 ? 0 : gains.size() / ray_count;
    }
};

struct ChannelRealization {
    CMatrix h;                                       // Nt x Nr
    std::optional<StructuredChannelParams> structured;
    std::optional<CMatrix> phases;                   // Nt x Nr, unit modulus (P=1 only)
};

/// i.i.d. Rayleigh channel: entries CN(0, 1), i.e. each real component
/// drawn with standard deviation 1/sqrt(2).
inline ChannelRealization gen_rayleigh(std::size_t nt, std::size_t nr, SeededRng& rng) {
    if (nt < 1 || nr < 1) throw ConfigError("gen_rayleigh: dimensions must be >= 1");
    ChannelRealization out;
    out.h = CMatrix(nt, nr);
    const double comp_std = 1.0 / std::sqrt(2.0);
    const std::vector<double> draws = rng.gaussian(2 * nt * nr, 0.0, comp_std);
    for (std::size_t i = 0; i < nt * nr; ++i)
        out.h.data()[i] = {draws[2 * i], draws[2 * i + 1]};
    return out;
}

/// Geometric channel: h_{t,l} = sum_p beta_{p,t} * phase_l(theta_{p,t}, phi_{p,t}).
/// For a single ray the phase matrix is also returned and h == beta (per row)
/// times phases elementwise.
inline ChannelRealization gen_structured(const StructuredChannelParams& params, std::size_t nt) {
    const std::size_t p_count = params.ray_count;
    if (p_count < 1) throw DimensionError("gen_structured: ray count must be >= 1");
    if (params.gains.size() != p_count * nt || params.zenith.size() != p_count * nt ||
        params.azimuth.size() != p_count * nt)
        throw DimensionError("gen_structured: parameter arrays must be P x Nt");
    const std::size_t nr = params.geometry.count();
    if (nr < 1) throw DimensionError("gen_structured: empty geometry");

    ChannelRealization out;
    out.h = CMatrix(nt, nr);
    out.structured = params;
    for (std::size_t p = 0; p < p_count; ++p) {
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t idx = p * nt + t;
            const std::vector<cplx> ph =
                steering_phase(params.geometry, params.zenith[idx], params.azimuth[idx]);
            for (std::size_t l = 0; l < nr; ++l) out.h(t, l) += params.gains[idx] * ph[l];
        }
    }
    if (p_count == 1) {
        CMatrix phases(nt, nr);
        for (std::size_t t = 0; t < nt; ++t) {
            const std::vector<cplx> ph =
                steering_phase(params.geometry, params.zenith[t], params.azimuth[t]);
            for (std::size_t l = 0; l < nr; ++l) phases(t, l) = ph[l];
        }
        out.phases = std::move(phases);
    }
    return out;
}

/// Divides out known unit-modulus phases: beta_{t,l} = h_{t,l} / phi_{t,l},
/// implemented as multiplication by the conjugate.
inline CMatrix remove_phases(const CMatrix& h, const CMatrix& phases) {
    if (!h.same_shape(phases)) throw DimensionError("remove_phases: shape mismatch");
    for (std::size_t i = 0; i < phases.size(); ++i) {
        if (std::abs(std::abs(phases.data()[i]) - 1.0) > 1e-9)
            throw NumericError("remove_phases: phase entry " + std::to_string(i) +
                               " is not unit modulus");
    }
    CMatrix beta(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.size(); ++i)
        beta.data()[i] = h.data()[i] * std::conj(phases.data()[i]);
    return beta;
}

} // namespace mimoce
