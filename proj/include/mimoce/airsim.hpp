// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Link-level simulation: 16-QAM pilot blocks, AWGN at a calibrated SNR, the
// forward model Y = X H + W, and dataset generation plus persistence.
//
// Dataset file layout (little-endian, magic "CEDS", version 1):
//   u8[4] magic, u16 version,
//   u32 nt, u32 nr, u32 np, u32 count, u8 flags, u64 seed,
//   u32 n_snr, f32 snr_db[n_snr]
// then per record:
//   f32 interleaved (re, im) row-major arrays: X (np x nt), Y (np x nr),
//   H (nt x nr), then f32 snr_db, and when flags bit 0 (structured) is set:
//   f32 zenith[nt], f32 azimuth[nt], f32 phases (nt x nr interleaved pairs).
// flags: bit 0 structured side info, bit 1 shared pilot block.
// A sibling "<path>.json" manifest mirrors the header for human inspection.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimoce/channel.hpp"
#include "mimoce/composite.hpp"
#include "mimoce/matrix.hpp"
#include "mimoce/rng.hpp"

namespace mimoce {

// Normalized 16-QAM alphabet {(a+ib)/sqrt(10) : a, b in {+-1, +-3}};
// unit mean symbol energy by construction.
inline const std::array<cplx, 16>& qam16_alphabet() {
    static const std::array<cplx, 16> pts = [] {
        std::array<cplx, 16> a{};
        const double levels[4] = {-3.0, -1.0, 1.0, 3.0};
        const double scale = 1.0 / std::sqrt(10.0);
        std::size_t i = 0;
        for (double re : levels)
            for (double im : levels) a[i++] = {re * scale, im * scale};
        return a;
    }();
    return pts;
}

struct PilotBlock {
    CMatrix x; // np x nt
    std::size_t np() const { return x.rows(); }
    std::size_t nt() const { return x.cols(); }
};

/// i.i.d. uniform draws from the 16-QAM alphabet.
inline PilotBlock gen_pilots(std::size_t np, std::size_t nt, SeededRng& rng) {
    if (np < nt)
        throw ConfigError("gen_pilots: pilot length " + std::to_string(np) +
                          " must be >= transmit antennas " + std::to_string(nt));
    PilotBlock b{CMatrix(np, nt)};
    const auto& alphabet = qam16_alphabet();
    for (std::size_t i = 0; i < b.x.size(); ++i)
        b.x.data()[i] = alphabet[rng.next_below(16)];
    return b;
}

/// Condition number of the pilot Gram matrix in channel-space composite form.
inline double pilot_gram_condition(const PilotBlock& b) {
    const Matrix xc = compose_channelspace(b.x);
    const Matrix g = matmul(xc.transposed(), xc);
    const std::vector<double> ev = sym_eigenvalues(g);
    const double lo = ev.front(), hi = ev.back();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

/// Pilot draw with regeneration of ill-conditioned blocks (Gram condition
/// above 1e12), up to 16 attempts.
inline PilotBlock gen_wellposed_pilots(std::size_t np, std::size_t nt, SeededRng& rng) {
    for (int attempt = 0; attempt < 16; ++attempt) {
        PilotBlock b = gen_pilots(np, nt, rng);
        if (pilot_gram_condition(b) < 1e12) return b;
    }
    throw NumericError("gen_wellposed_pilots: 16 consecutive singular pilot draws");
}

/// Per-receive-antenna complex noise variance for a nominal SNR. Signal power
/// is the analytic E|y_l|^2 = Nt under unit-energy pilots and unit-variance
/// channel entries. snr_db = +inf is the noiseless sentinel.
inline double awgn_sigma2(double snr_db, std::size_t nt) {
    if (nt < 1) throw ConfigError("awgn_sigma2: nt must be >= 1");
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return static_cast<double>(nt) / std::pow(10.0, snr_db / 10.0);
}

/// Forward model: Y = X H + W with W i.i.d. CN(0, sigma^2).
inline CMatrix transmit(const PilotBlock& x, const CMatrix& h, double snr_db, SeededRng& rng) {
    if (x.nt() != h.rows())
        throw DimensionError("transmit: pilot columns " + std::to_string(x.nt()) +
                             " vs channel rows " + std::to_string(h.rows()));
    CMatrix y = matmul(x.x, h);
    const double sigma2 = awgn_sigma2(snr_db, x.nt());
    const double comp_std = std::sqrt(sigma2 / 2.0);
    const std::vector<double> w = rng.gaussian(2 * y.size(), 0.0, comp_std);
    for (std::size_t i = 0; i < y.size(); ++i)
        y.data()[i] += cplx{w[2 * i], w[2 * i + 1]};
    return y;
}

struct StructuredSideInfo {
    std::vector<double> zenith;  // per transmitter (P = 1)
    std::vector<double> azimuth; // per transmitter
    CMatrix phases;              // nt x nr
};

struct SampleRecord {
    PilotBlock x;
    CMatrix y;       // np x nr
    CMatrix h;       // nt x nr
    double snr_db = 0.0;
    std::optional<StructuredSideInfo> side;
};

struct DatasetHeader {
    std::uint32_t nt = 0, nr = 0, np = 0, count = 0;
    bool structured = false;
    bool fixed_pilots = false;
    std::uint64_t seed = 0;
    std::vector<double> snr_levels_db;
};

struct Dataset {
    DatasetHeader header;
    std::vector<SampleRecord> records;
};

struct DatasetConfig {
    std::size_t nt = 8, nr = 64, np = 8;
    std::size_t count = 0;
    std::vector<double> snr_levels_db{0.0, 5.0, 10.0, 15.0, 20.0};
    std::uint64_t seed = 0;
    bool structured = false;
    bool fixed_pilots = false;
    ArrayGeometry geometry; // used when structured; defaults to ULA-x half wavelength
};

// One record from its own RNG substream. Call order within the stream:
// SNR pick, pilot draws (unless shared), channel draws, noise draws.
inline SampleRecord gen_record(const DatasetConfig& cfg, SeededRng rng,
                               const PilotBlock* shared_pilot) {
    SampleRecord rec;
    rec.snr_db = cfg.snr_levels_db[rng.next_below(cfg.snr_levels_db.size())];
    if (shared_pilot != nullptr)
        rec.x = *shared_pilot;
    else
        rec.x = gen_wellposed_pilots(cfg.np, cfg.nt, rng);

    if (cfg.structured) {
        StructuredChannelParams p;
        p.ray_count = 1;
        p.geometry = cfg.geometry;
        p.gains.resize(cfg.nt);
        p.zenith.resize(cfg.nt);
        p.azimuth.resize(cfg.nt);
        const double comp_std = 1.0 / std::sqrt(2.0);
        for (std::size_t t = 0; t < cfg.nt; ++t) {
            const auto [a, b] = rng.normal_pair();
            p.gains[t] = {a * comp_std, b * comp_std};
        }
        for (std::size_t t = 0; t < cfg.nt; ++t)
            p.zenith[t] = rng.uniform(0.0, std::numbers::pi);
        for (std::size_t t = 0; t < cfg.nt; ++t)
            p.azimuth[t] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        ChannelRealization ch = gen_structured(p, cfg.nt);
        rec.h = ch.h;
        rec.side = StructuredSideInfo{p.zenith, p.azimuth, *ch.phases};
    } else {
        rec.h = gen_rayleigh(cfg.nt, cfg.nr, rng).h;
    }
    rec.y = transmit(rec.x, rec.h, rec.snr_db, rng);
    return rec;
}

inline Dataset gen_dataset(const DatasetConfig& cfg) {
    if (cfg.nt < 1 || cfg.nr < 1) throw ConfigError("gen_dataset: dimensions must be >= 1");
    if (cfg.np < cfg.nt) throw ConfigError("gen_dataset: np must be >= nt");
    if (cfg.snr_levels_db.empty()) throw ConfigError("gen_dataset: SNR list is empty");
    DatasetConfig c = cfg;
    if (c.structured && c.geometry.count() == 0) c.geometry = ula(c.nr, 0.5, Axis::X);
    if (c.structured && c.geometry.count() != c.nr)
        throw ConfigError("gen_dataset: geometry element count " +
                          std::to_string(c.geometry.count()) + " != nr " + std::to_string(c.nr));

    Dataset ds;
    ds.header = {static_cast<std::uint32_t>(c.nt), static_cast<std::uint32_t>(c.nr),
                 static_cast<std::uint32_t>(c.np), static_cast<std::uint32_t>(c.count),
                 c.structured, c.fixed_pilots, c.seed, c.snr_levels_db};

    std::optional<PilotBlock> shared;
    if (c.fixed_pilots) {
        SeededRng prng(c.seed, streams::kSharedPilot);
        shared = gen_wellposed_pilots(c.np, c.nt, prng);
    }
    ds.records.reserve(c.count);
    for (std::size_t r = 0; r < c.count; ++r)
        ds.records.push_back(gen_record(c, SeededRng(c.seed, r), shared ? &*shared : nullptr));
    return ds;
}

// ---- persistence -----------------------------------------------------------

namespace io {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}
inline void put_u16(std::string& out, std::uint16_t v) {
    const char b[2] = {char(v & 0xFF), char(v >> 8)};
    out.append(b, 2);
}
inline void put_u32(std::string& out, std::uint32_t v) {
    const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
                       char((v >> 24) & 0xFF)};
    out.append(b, 4);
}
inline void put_u64(std::string& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xFFFFFFFFULL));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}
inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}
inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& what) : buf_(buf), what_(what) {}

    void need(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw IoError(what_ + ": truncated (need " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + ")");
    }
    std::uint16_t u16() {
        need(2);
        const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
        pos_ += 2;
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32() {
        need(4);
        const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
        pos_ += 4;
        return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
               (std::uint32_t(p[3]) << 24);
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (std::uint64_t(u32()) << 32);
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    const std::string& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

inline void write_file(const std::string& path, const std::string& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write to " + path);
}

} // namespace io

inline void append_cmatrix_f32(std::string& out, const CMatrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        io::put_f32(out, static_cast<float>(m.data()[i].real()));
        io::put_f32(out, static_cast<float>(m.data()[i].imag()));
    }
}

inline CMatrix read_cmatrix_f32(io::Reader& r, std::size_t rows, std::size_t cols) {
    CMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double re = r.f32();
        const double im = r.f32();
        m.data()[i] = {re, im};
    }
    return m;
}

inline nlohmann::json dataset_manifest(const DatasetHeader& h) {
    return nlohmann::json{{"magic", "CEDS"},
                          {"version", 1},
                          {"nt", h.nt},
                          {"nr", h.nr},
                          {"np", h.np},
                          {"count", h.count},
                          {"structured", h.structured},
                          {"fixed_pilots", h.fixed_pilots},
                          {"seed", h.seed},
                          {"snr_levels_db", h.snr_levels_db}};
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
    std::string buf;
    buf.reserve(64 + ds.records.size() * 64);
    buf.append("CEDS", 4);
    io::put_u16(buf, 1);
    io::put_u32(buf, ds.header.nt);
    io::put_u32(buf, ds.header.nr);
    io::put_u32(buf, ds.header.np);
    io::put_u32(buf, ds.header.count);
    const std::uint8_t flags =
        (ds.header.structured ? 1 : 0) | (ds.header.fixed_pilots ? 2 : 0);
    buf.push_back(static_cast<char>(flags));
    io::put_u64(buf, ds.header.seed);
    io::put_u32(buf, static_cast<std::uint32_t>(ds.header.snr_levels_db.size()));
    for (double s : ds.header.snr_levels_db) io::put_f32(buf, static_cast<float>(s));

    if (ds.records.size() != ds.header.count)
        throw IoError("save_dataset: header count " + std::to_string(ds.header.count) +
                      " != record count " + std::to_string(ds.records.size()));
    for (const SampleRecord& rec : ds.records) {
        append_cmatrix_f32(buf, rec.x.x);
        append_cmatrix_f32(buf, rec.y);
        append_cmatrix_f32(buf, rec.h);
        io::put_f32(buf, static_cast<float>(rec.snr_db));
        if (ds.header.structured) {
            if (!rec.side) throw IoError("save_dataset: structured record lacks side info");
            for (double v : rec.side->zenith) io::put_f32(buf, static_cast<float>(v));
            for (double v : rec.side->azimuth) io::put_f32(buf, static_cast<float>(v));
            append_cmatrix_f32(buf, rec.side->phases);
        }
    }
    io::write_file(path, buf);
    io::write_file(path + ".json", dataset_manifest(ds.header).dump(2) + "\n");
}

inline Dataset load_dataset(const std::string& path) {
    const std::string buf = io::read_file(path);
    io::Reader r(buf, "dataset " + path);
    if (r.bytes(4) != "CEDS") throw IoError("load_dataset: bad magic in " + path);
    const std::uint16_t version = r.u16();
    if (version != 1)
        throw IoError("load_dataset: unsupported version " + std::to_string(version));
    Dataset ds;
    ds.header.nt = r.u32();
    ds.header.nr = r.u32();
    ds.header.np = r.u32();
    ds.header.count = r.u32();
    const std::uint8_t flags = static_cast<std::uint8_t>(r.bytes(1)[0]);
    ds.header.structured = flags & 1;
    ds.header.fixed_pilots = flags & 2;
    ds.header.seed = r.u64();
    const std::uint32_t n_snr = r.u32();
    ds.header.snr_levels_db.resize(n_snr);
    for (auto& s : ds.header.snr_levels_db) s = r.f32();
    if (ds.header.np < ds.header.nt)
        throw IoError("load_dataset: header has np < nt");

    ds.records.reserve(ds.header.count);
    for (std::uint32_t i = 0; i < ds.header.count; ++i) {
        SampleRecord rec;
        rec.x.x = read_cmatrix_f32(r, ds.header.np, ds.header.nt);
        rec.y = read_cmatrix_f32(r, ds.header.np, ds.header.nr);
        rec.h = read_cmatrix_f32(r, ds.header.nt, ds.header.nr);
        rec.snr_db = r.f32();
        if (ds.header.structured) {
            StructuredSideInfo side;
            side.zenith.resize(ds.header.nt);
            for (auto& v : side.zenith) v = r.f32();
            side.azimuth.resize(ds.header.nt);
            for (auto& v : side.azimuth) v = r.f32();
            side.phases = read_cmatrix_f32(r, ds.header.nt, ds.header.nr);
            rec.side = std::move(side);
        }
        ds.records.push_back(std::move(rec));
    }
    if (!r.at_end()) throw IoError("load_dataset: trailing bytes in " + path);
    return ds;
}

} // namespace mimoce
