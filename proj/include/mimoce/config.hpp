// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Declarative run configuration: a single JSON document, every field
// overridable by a command-line flag (the flag wins). Unknown keys are
// rejected so typos fail fast.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimoce/channel.hpp"
#include "mimoce/errors.hpp"
#include "mimoce/train.hpp"

namespace mimoce {

struct GeometryConfig {
    std::string type = "ula"; // ula | upa | explicit
    double spacing = 0.5;     // wavelengths
    std::string axis = "x";   // ula only
    std::vector<std::size_t> counts;              // upa: {nx, ny}
    std::vector<std::array<double, 3>> positions; // explicit

    ArrayGeometry build(std::size_t nr) const {
        if (type == "ula") {
            Axis ax = Axis::X;
            if (axis == "y") ax = Axis::Y;
            else if (axis == "z") ax = Axis::Z;
            else if (axis != "x") throw ConfigError("channel.geometry.axis must be x, y or z");
            return ula(nr, spacing, ax);
        }
        if (type == "upa") {
            if (counts.size() != 2)
                throw ConfigError("channel.geometry.counts must be [nx, ny] for upa");
            if (counts[0] * counts[1] != nr)
                throw ConfigError("channel.geometry.counts product must equal system.nr");
            return upa(counts[0], counts[1], spacing);
        }
        if (type == "explicit") {
            if (positions.size() != nr)
                throw ConfigError("channel.geometry.positions must have system.nr entries");
            ArrayGeometry g;
            for (const auto& p : positions) g.elements.push_back({p[0], p[1], p[2]});
            return g;
        }
        throw ConfigError("channel.geometry.type must be ula, upa or explicit");
    }
};

struct RunConfig {
    // system
    std::size_t nt = 8, nr = 64, np = 8;
    std::string modulation = "16qam";
    // channel
    std::string channel_type = "rayleigh"; // rayleigh | structured
    GeometryConfig geometry;
    // dataset
    std::size_t train_count = 50000, test_count = 10000;
    std::vector<double> snr_levels_db{0.0, 5.0, 10.0, 15.0, 20.0};
    std::uint64_t dataset_seed = 1;
    std::string train_path = "train.ceds";
    std::string test_path = "test.ceds";
    bool fixed_pilots = false;
    // network
    std::size_t layers = 4;
    std::string psi = "tanh";      // tanh | none
    std::string e1 = "shared";     // shared | per-sample | learned
    std::string mode = "unstructured"; // unstructured | structured
    // training
    TrainConfig training;
    // eval
    std::vector<std::string> estimators{"isdnn", "ls", "mmse", "diag-init"};
    std::string report_csv = "report.csv";
    std::string report_json = "report.json";
    std::size_t repetitions = 5;
    std::size_t pgd_iterations = 50;
    std::string machine;

    /// Warnings collected during validation (printed, not fatal).
    std::vector<std::string> validate() const {
        std::vector<std::string> warnings;
        if (nt < 1 || nr < 1) throw ConfigError("system.nt and system.nr must be >= 1");
        if (np < nt)
            throw ConfigError("system.np (" + std::to_string(np) +
                              ") must be >= system.nt (" + std::to_string(nt) +
                              "): the pilot Gram matrix is singular otherwise");
        if (nt > nr) throw ConfigError("system.nt must be <= system.nr");
        if (4 * nt > nr)
            warnings.push_back("system.nt > system.nr/4: outside the intended nt << nr regime");
        if (layers < 1) throw ConfigError("network.layers must be >= 1");
        if (modulation != "16qam") throw ConfigError("system.modulation: only 16qam is supported");
        if (channel_type != "rayleigh" && channel_type != "structured")
            throw ConfigError("channel.type must be rayleigh or structured");
        if (snr_levels_db.empty()) throw ConfigError("dataset.snr_levels_db must be non-empty");
        if (mode == "structured" && channel_type != "structured")
            warnings.push_back("network.mode structured with a rayleigh channel config");
        training.validate();
        (void)detail::psi_from_name(psi);
        (void)detail::e1_from_name(e1);
        (void)detail::mode_from_name(mode);
        return warnings;
    }

    DatasetConfig dataset_config(std::size_t count, std::uint64_t seed) const {
        DatasetConfig d;
        d.nt = nt;
        d.nr = nr;
        d.np = np;
        d.count = count;
        d.snr_levels_db = snr_levels_db;
        d.seed = seed;
        d.structured = (channel_type == "structured");
        d.fixed_pilots = fixed_pilots;
        if (d.structured) d.geometry = geometry.build(nr);
        return d;
    }
};

/// Every recognized dotted config key; the single source of truth for config
/// parsing, unknown-key rejection and the CLI help doc-sync check.
inline const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys{
        "system.nt", "system.nr", "system.np", "system.modulation",
        "channel.type", "channel.geometry.type", "channel.geometry.spacing",
        "channel.geometry.axis", "channel.geometry.counts", "channel.geometry.positions",
        "dataset.train_count", "dataset.test_count", "dataset.snr_levels_db",
        "dataset.seed", "dataset.train_path", "dataset.test_path", "dataset.fixed_pilots",
        "network.layers", "network.psi", "network.e1", "network.mode",
        "training.batch_size", "training.learning_rate", "training.max_iterations",
        "training.eval_every", "training.patience", "training.seed",
        "training.validation_size",
        "eval.estimators", "eval.report_csv", "eval.report_json", "eval.repetitions",
        "eval.pgd_iterations", "eval.machine"};
    return keys;
}

namespace detail {

inline void collect_keys(const nlohmann::json& j, const std::string& prefix,
                         std::vector<std::string>& out) {
    for (const auto& [key, value] : j.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object())
            collect_keys(value, path, out);
        else
            out.push_back(path);
    }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* section, const char* key, T& target) {
    if (j.contains(section) && j.at(section).contains(key)) {
        try {
            j.at(section).at(key).get_to(target);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string(section) + "." + key + ": " + e.what());
        }
    }
}

} // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    std::vector<std::string> present;
    detail::collect_keys(j, "", present);
    const auto& known = run_config_keys();
    for (const std::string& key : present) {
        bool ok = false;
        for (const std::string& k : known)
            if (k == key) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown config key '" + key + "'");
    }

    RunConfig c;
    detail::maybe(j, "system", "nt", c.nt);
    detail::maybe(j, "system", "nr", c.nr);
    detail::maybe(j, "system", "np", c.np);
    detail::maybe(j, "system", "modulation", c.modulation);
    detail::maybe(j, "channel", "type", c.channel_type);
    if (j.contains("channel") && j.at("channel").contains("geometry")) {
        const auto& g = j.at("channel").at("geometry");
        if (g.contains("type")) g.at("type").get_to(c.geometry.type);
        if (g.contains("spacing")) g.at("spacing").get_to(c.geometry.spacing);
        if (g.contains("axis")) g.at("axis").get_to(c.geometry.axis);
        if (g.contains("counts")) g.at("counts").get_to(c.geometry.counts);
        if (g.contains("positions")) {
            for (const auto& p : g.at("positions")) {
                if (!p.is_array() || p.size() != 3)
                    throw ConfigError("channel.geometry.positions entries must be [x, y, z]");
                c.geometry.positions.push_back({p[0].get<double>(), p[1].get<double>(),
                                                p[2].get<double>()});
            }
        }
    }
    detail::maybe(j, "dataset", "train_count", c.train_count);
    detail::maybe(j, "dataset", "test_count", c.test_count);
    detail::maybe(j, "dataset", "snr_levels_db", c.snr_levels_db);
    detail::maybe(j, "dataset", "seed", c.dataset_seed);
    detail::maybe(j, "dataset", "train_path", c.train_path);
    detail::maybe(j, "dataset", "test_path", c.test_path);
    detail::maybe(j, "dataset", "fixed_pilots", c.fixed_pilots);
    detail::maybe(j, "network", "layers", c.layers);
    detail::maybe(j, "network", "psi", c.psi);
    detail::maybe(j, "network", "e1", c.e1);
    detail::maybe(j, "network", "mode", c.mode);
    detail::maybe(j, "training", "batch_size", c.training.batch_size);
    detail::maybe(j, "training", "learning_rate", c.training.learning_rate);
    detail::maybe(j, "training", "max_iterations", c.training.max_iterations);
    detail::maybe(j, "training", "eval_every", c.training.eval_every);
    detail::maybe(j, "training", "patience", c.training.patience);
    detail::maybe(j, "training", "seed", c.training.seed);
    detail::maybe(j, "training", "validation_size", c.training.validation_size);
    detail::maybe(j, "eval", "estimators", c.estimators);
    detail::maybe(j, "eval", "report_csv", c.report_csv);
    detail::maybe(j, "eval", "report_json", c.report_json);
    detail::maybe(j, "eval", "repetitions", c.repetitions);
    detail::maybe(j, "eval", "pgd_iterations", c.pgd_iterations);
    detail::maybe(j, "eval", "machine", c.machine);
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

} // namespace mimoce
