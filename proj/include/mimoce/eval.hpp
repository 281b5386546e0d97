// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// NMSE sweeps across SNR with chunked averaging, per-sample inference timing,
// and CSV/JSON report emission. CSV columns:
//   estimator,snr_db,nmse_linear,nmse_db,samples,runtime_s_per_sample
// Rows are ordered by (estimator, snr_db); the runtime field is empty until a
// benchmark fills it. The JSON report mirrors the CSV plus a metadata block.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimoce/baselines.hpp"
#include "mimoce/isdnn.hpp"

namespace mimoce {

struct EvalRow {
    std::string estimator;
    double snr_db = 0.0;
    double nmse_linear = 0.0;
    double nmse_db = 0.0;
    std::size_t samples = 0;
    std::optional<double> runtime_s_per_sample;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    nlohmann::json metadata = nlohmann::json::object();
};

inline double to_db(double linear) { return 10.0 * std::log10(linear); }

struct NamedEstimator {
    std::string name;
    Estimator fn;
};

/// Built-in estimator lookup. `net` is required for "isdnn"/"sisdnn" and must
/// match the requested kind's mode.
inline NamedEstimator make_named_estimator(const std::string& name,
                                           const NetworkParams* net = nullptr,
                                           std::size_t pgd_iterations = 50) {
    if (name == "ls")
        return {name, [](const SampleRecord& r) {
                    return decompose_channelspace(ls_estimate(r.x.x, r.y));
                }};
    if (name == "mmse")
        return {name, [](const SampleRecord& r) {
                    const double s2 = awgn_sigma2(r.snr_db, r.x.nt());
                    return decompose_channelspace(mmse_estimate(r.x.x, r.y, s2));
                }};
    if (name == "diag-init")
        return {name, [](const SampleRecord& r) {
                    return decompose_channelspace(diag_init(r.x.x, r.y));
                }};
    if (name == "pgd")
        return {name, [pgd_iterations](const SampleRecord& r) {
                    const LsWorkspace w = make_ls_workspace(r.x.x, r.y);
                    const double lmax = sym_eigenvalues(w.g).back();
                    const Matrix h0 = diag_init(r.x.x, r.y);
                    return decompose_channelspace(
                        pgd_estimate(r.x.x, r.y, 1.0 / lmax, pgd_iterations, h0));
                }};
    if (name == "oracle")
        return {name, [](const SampleRecord& r) { return r.h; }};
    if (name == "zero")
        return {name, [](const SampleRecord& r) { return CMatrix(r.h.rows(), r.h.cols()); }};
    if (name == "isdnn" || name == "sisdnn") {
        if (net == nullptr)
            throw ConfigError("estimator '" + name + "' needs a checkpoint");
        const bool structured = (name == "sisdnn");
        if (structured != (net->mode == NetMode::Structured))
            throw ConfigError("estimator '" + name + "' does not match checkpoint mode");
        const NetworkParams netv = *net;
        // Estimators see one record at a time, so a per-sample-E1 checkpoint
        // evaluates with stream 0 here; the default shared mode is unaffected.
        return {name, [netv](const SampleRecord& r) {
                    const SampleSystem sys = system_from_record(
                        r, netv.mode, /*e1_stream=*/0);
                    const SampleTrace tr = forward_sample(netv, sys);
                    return estimate_to_channel(tr.output, sys);
                }};
    }
    throw ConfigError("unknown estimator '" + name + "'");
}

/// Chunk-averaged NMSE per (estimator, SNR level). Records are matched to a
/// level by their SNR tag within 1e-6 dB.
inline EvalReport snr_sweep(std::span<const NamedEstimator> estimators,
                            std::span<const SampleRecord> records,
                            std::span<const double> snr_levels, std::size_t n_chunks = 100) {
    EvalReport report;
    for (const double level : snr_levels) {
        std::vector<SampleRecord> filtered;
        for (const SampleRecord& r : records)
            if (std::abs(r.snr_db - level) < 1e-6) filtered.push_back(r);
        if (filtered.empty())
            throw ConfigError("snr_sweep: no records at " + std::to_string(level) + " dB");
        for (const NamedEstimator& est : estimators) {
            EvalRow row;
            row.estimator = est.name;
            row.snr_db = level;
            row.nmse_linear = nmse_averaged(filtered, est.fn, n_chunks);
            row.nmse_db = to_db(row.nmse_linear);
            row.samples = filtered.size();
            report.rows.push_back(std::move(row));
        }
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const EvalRow& a, const EvalRow& b) {
        if (a.estimator != b.estimator) return a.estimator < b.estimator;
        return a.snr_db < b.snr_db;
    });
    return report;
}

/// Median wall-clock seconds per sample over `repetitions` full passes, with
/// one untimed warm-up pass.
inline double time_inference(const Estimator& est, std::span<const SampleRecord> records,
                             std::size_t repetitions) {
    if (repetitions < 3)
        throw ConfigError("time_inference: need at least 3 repetitions, got " +
                          std::to_string(repetitions));
    if (records.empty()) throw ConfigError("time_inference: empty record set");
    for (const SampleRecord& r : records) (void)est(r); // warm-up
    std::vector<double> per_sample(repetitions);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        for (const SampleRecord& r : records) (void)est(r);
        const auto stop = std::chrono::steady_clock::now();
        per_sample[rep] = std::chrono::duration<double>(stop - start).count() /
                          static_cast<double>(records.size());
    }
    std::sort(per_sample.begin(), per_sample.end());
    return per_sample[repetitions / 2];
}

// %.17g: round-trips any double through text exactly.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string report_to_csv(const EvalReport& report) {
    std::string out = "estimator,snr_db,nmse_linear,nmse_db,samples,runtime_s_per_sample\n";
    for (const EvalRow& r : report.rows) {
        out += r.estimator + "," + format_g17(r.snr_db) + "," + format_g17(r.nmse_linear) + "," +
               format_g17(r.nmse_db) + "," + std::to_string(r.samples) + ",";
        if (r.runtime_s_per_sample) out += format_g17(*r.runtime_s_per_sample);
        out += "\n";
    }
    return out;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const EvalRow& r : report.rows) {
        nlohmann::json jr{{"estimator", r.estimator},
                          {"snr_db", r.snr_db},
                          {"nmse_linear", r.nmse_linear},
                          {"samples", r.samples}};
        // JSON numbers cannot carry infinities; a null nmse_db means
        // "recompute from nmse_linear" (oracle rows have NMSE 0).
        if (std::isfinite(r.nmse_db))
            jr["nmse_db"] = r.nmse_db;
        else
            jr["nmse_db"] = nullptr;
        if (r.runtime_s_per_sample) jr["runtime_s_per_sample"] = *r.runtime_s_per_sample;
        rows.push_back(std::move(jr));
    }
    return nlohmann::json{{"metadata", report.metadata}, {"rows", rows}};
}

inline void emit_report(const EvalReport& report, const std::string& path,
                        const std::string& format) {
    if (format == "csv") {
        io::write_file(path, report_to_csv(report));
    } else if (format == "json") {
        io::write_file(path, report_to_json(report).dump(2) + "\n");
    } else {
        throw ConfigError("emit_report: unknown format '" + format + "'");
    }
}

inline EvalReport parse_report_csv(const std::string& text) {
    EvalReport report;
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos) throw IoError("parse_report_csv: missing header");
    while (pos + 1 < text.size()) {
        const std::size_t end = text.find('\n', pos + 1);
        const std::string line = text.substr(pos + 1, end - pos - 1);
        pos = (end == std::string::npos) ? text.size() : end;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                f.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (f.size() != 6) throw IoError("parse_report_csv: bad row '" + line + "'");
        EvalRow row;
        row.estimator = f[0];
        row.snr_db = std::strtod(f[1].c_str(), nullptr);
        row.nmse_linear = std::strtod(f[2].c_str(), nullptr);
        row.nmse_db = std::strtod(f[3].c_str(), nullptr);
        row.samples = std::strtoull(f[4].c_str(), nullptr, 10);
        if (!f[5].empty()) row.runtime_s_per_sample = std::strtod(f[5].c_str(), nullptr);
        report.rows.push_back(std::move(row));
    }
    return report;
}

inline EvalReport parse_report_json(const std::string& text) {
    EvalReport report;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("parse_report_json: ") + e.what());
    }
    report.metadata = j.value("metadata", nlohmann::json::object());
    for (const auto& jr : j.at("rows")) {
        EvalRow row;
        row.estimator = jr.at("estimator").get<std::string>();
        row.snr_db = jr.at("snr_db").get<double>();
        row.nmse_linear = jr.at("nmse_linear").get<double>();
        row.nmse_db = jr.at("nmse_db").is_null() ? to_db(row.nmse_linear)
                                                 : jr.at("nmse_db").get<double>();
        row.samples = jr.at("samples").get<std::size_t>();
        if (jr.contains("runtime_s_per_sample"))
            row.runtime_s_per_sample = jr.at("runtime_s_per_sample").get<double>();
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace mimoce
