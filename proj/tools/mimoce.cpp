// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, training, evaluation and
// benchmarking, driven by a JSON config with per-flag overrides (flags win).
// Exit codes: 0 success, 2 config/validation error, 3 I/O error, 4 numeric
// divergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mimoce/config.hpp"
#include "mimoce/eval.hpp"
#include "mimoce/train.hpp"

namespace {

using namespace mimoce;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct CliOverrides {
    std::optional<std::size_t> nt, nr, np;
    std::optional<std::string> modulation;
    std::optional<std::string> channel_type;
    std::optional<std::string> geometry_type, geometry_axis;
    std::optional<double> geometry_spacing;
    std::optional<std::vector<std::size_t>> geometry_counts;
    std::optional<std::size_t> train_count, test_count;
    std::optional<std::vector<double>> snr;
    std::optional<std::uint64_t> dataset_seed;
    std::optional<std::string> train_path, test_path;
    std::optional<bool> fixed_pilots;
    std::optional<std::size_t> layers;
    std::optional<std::string> psi, e1, mode;
    std::optional<std::size_t> batch_size, max_iterations, eval_every, patience, validation_size;
    std::optional<double> learning_rate;
    std::optional<std::uint64_t> train_seed;
    std::optional<std::vector<std::string>> estimators;
    std::optional<std::string> report_csv, report_json, machine;
    std::optional<std::size_t> repetitions, pgd_iterations;
};

void apply_overrides(RunConfig& cfg, const CliOverrides& o) {
    auto set = [](auto& dst, const auto& src) {
        if (src) dst = *src;
    };
    set(cfg.nt, o.nt);
    set(cfg.nr, o.nr);
    set(cfg.np, o.np);
    set(cfg.modulation, o.modulation);
    set(cfg.channel_type, o.channel_type);
    set(cfg.geometry.type, o.geometry_type);
    set(cfg.geometry.axis, o.geometry_axis);
    set(cfg.geometry.spacing, o.geometry_spacing);
    set(cfg.geometry.counts, o.geometry_counts);
    set(cfg.train_count, o.train_count);
    set(cfg.test_count, o.test_count);
    set(cfg.snr_levels_db, o.snr);
    set(cfg.dataset_seed, o.dataset_seed);
    set(cfg.train_path, o.train_path);
    set(cfg.test_path, o.test_path);
    set(cfg.fixed_pilots, o.fixed_pilots);
    set(cfg.layers, o.layers);
    set(cfg.psi, o.psi);
    set(cfg.e1, o.e1);
    set(cfg.mode, o.mode);
    set(cfg.training.batch_size, o.batch_size);
    set(cfg.training.learning_rate, o.learning_rate);
    set(cfg.training.max_iterations, o.max_iterations);
    set(cfg.training.eval_every, o.eval_every);
    set(cfg.training.patience, o.patience);
    set(cfg.training.seed, o.train_seed);
    set(cfg.training.validation_size, o.validation_size);
    set(cfg.estimators, o.estimators);
    set(cfg.report_csv, o.report_csv);
    set(cfg.report_json, o.report_json);
    set(cfg.repetitions, o.repetitions);
    set(cfg.pgd_iterations, o.pgd_iterations);
    set(cfg.machine, o.machine);
}

// Options named after their config keys; descriptions embed the dotted key so
// --help-all stays in sync with run_config_keys().
void add_common_options(CLI::App* cmd, std::string& config_path, CliOverrides& o) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its fields");
    cmd->add_option("--nt", o.nt, "system.nt: transmit antennas");
    cmd->add_option("--nr", o.nr, "system.nr: receive antennas");
    cmd->add_option("--np", o.np, "system.np: pilot length in time slots (>= nt)");
    cmd->add_option("--modulation", o.modulation, "system.modulation: pilot constellation (16qam)");
    cmd->add_option("--channel", o.channel_type, "channel.type: rayleigh | structured");
    cmd->add_option("--geometry", o.geometry_type,
                    "channel.geometry.type: ula | upa | explicit (explicit positions via config "
                    "file channel.geometry.positions)");
    cmd->add_option("--spacing", o.geometry_spacing,
                    "channel.geometry.spacing: element spacing in wavelengths");
    cmd->add_option("--axis", o.geometry_axis, "channel.geometry.axis: ula axis x | y | z");
    cmd->add_option("--geometry-counts", o.geometry_counts,
                    "channel.geometry.counts: upa grid as nx ny");
    cmd->add_option("--train-count", o.train_count, "dataset.train_count: training records");
    cmd->add_option("--test-count", o.test_count, "dataset.test_count: test records");
    cmd->add_option("--snr", o.snr, "dataset.snr_levels_db: SNR levels in dB")
        ->delimiter(',');
    cmd->add_option("--seed", o.dataset_seed, "dataset.seed: dataset generation seed");
    cmd->add_option("--train-path", o.train_path, "dataset.train_path: training dataset file");
    cmd->add_option("--test-path", o.test_path, "dataset.test_path: test dataset file");
    cmd->add_option("--fixed-pilots", o.fixed_pilots,
                    "dataset.fixed_pilots: share one pilot block across all records");
    cmd->add_option("--layers", o.layers, "network.layers: unfolded layer count K");
    cmd->add_option("--psi", o.psi, "network.psi: layer nonlinearity tanh | none");
    cmd->add_option("--e1", o.e1, "network.e1: initial residual memory shared | per-sample | learned");
    cmd->add_option("--mode", o.mode, "network.mode: unstructured | structured");
    cmd->add_option("--batch-size", o.batch_size, "training.batch_size: minibatch size");
    cmd->add_option("--learning-rate", o.learning_rate, "training.learning_rate: Adam step size");
    cmd->add_option("--max-iterations", o.max_iterations,
                    "training.max_iterations: minibatch step cap");
    cmd->add_option("--eval-every", o.eval_every,
                    "training.eval_every: iterations between validation evaluations");
    cmd->add_option("--patience", o.patience,
                    "training.patience: consecutive non-improving evaluations before stopping");
    cmd->add_option("--train-seed", o.train_seed, "training.seed: training loop seed");
    cmd->add_option("--validation-size", o.validation_size,
                    "training.validation_size: records held out from the training file");
    cmd->add_option("--estimators", o.estimators,
                    "eval.estimators: subset of isdnn sisdnn ls mmse diag-init pgd oracle zero")
        ->delimiter(',');
    cmd->add_option("--report-csv", o.report_csv, "eval.report_csv: CSV report path");
    cmd->add_option("--report-json", o.report_json, "eval.report_json: JSON report path");
    cmd->add_option("--repetitions", o.repetitions,
                    "eval.repetitions: timing repetitions for bench (>= 3)");
    cmd->add_option("--pgd-iterations", o.pgd_iterations,
                    "eval.pgd_iterations: iteration count of the pgd estimator");
    cmd->add_option("--machine", o.machine, "eval.machine: free-form machine description");
}

RunConfig resolve_config(const std::string& config_path, const CliOverrides& o) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    apply_overrides(cfg, o);
    for (const std::string& w : cfg.validate()) std::cerr << "warning: " << w << "\n";
    return cfg;
}

NetMode net_mode(const RunConfig& cfg) { return detail::mode_from_name(cfg.mode); }

int cmd_gen(const RunConfig& cfg) {
    const Dataset train = gen_dataset(cfg.dataset_config(cfg.train_count, cfg.dataset_seed));
    save_dataset(cfg.train_path, train);
    std::printf("wrote %s: %zu records, nt=%zu nr=%zu np=%zu%s\n", cfg.train_path.c_str(),
                train.records.size(), cfg.nt, cfg.nr, cfg.np,
                train.header.structured ? ", structured" : "");
    const Dataset test = gen_dataset(cfg.dataset_config(cfg.test_count, cfg.dataset_seed + 1));
    save_dataset(cfg.test_path, test);
    std::printf("wrote %s: %zu records\n", cfg.test_path.c_str(), test.records.size());
    return kExitOk;
}

std::vector<SampleSystem> systems_of(const Dataset& ds, NetMode mode, std::size_t lo,
                                     std::size_t hi) {
    std::vector<SampleSystem> out;
    out.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i)
        out.push_back(system_from_record(ds.records[i], mode, /*e1_stream=*/i));
    return out;
}

void check_dims(const DatasetHeader& h, const RunConfig& cfg) {
    if (h.nt != cfg.nt || h.nr != cfg.nr || h.np != cfg.np)
        throw ConfigError("dataset dims (nt=" + std::to_string(h.nt) + ", nr=" +
                          std::to_string(h.nr) + ", np=" + std::to_string(h.np) +
                          ") do not match config");
}

std::string history_csv(const TrainHistory& h) {
    std::string out = "iteration,train_loss,val_nmse\n";
    std::size_t eval_idx = 0;
    for (std::size_t i = 0; i < h.iter_loss.size(); ++i) {
        out += std::to_string(i + 1) + "," + format_g17(h.iter_loss[i]) + ",";
        if (eval_idx < h.eval_rows.size() && h.eval_rows[eval_idx].iteration == i + 1) {
            out += format_g17(h.eval_rows[eval_idx].val_nmse);
            ++eval_idx;
        }
        out += "\n";
    }
    return out;
}

int cmd_train(const RunConfig& cfg, const std::string& checkpoint_path,
              const std::string& history_path) {
    const Dataset ds = load_dataset(cfg.train_path);
    check_dims(ds.header, cfg);
    const NetMode mode = net_mode(cfg);
    if (mode == NetMode::Structured && !ds.header.structured)
        throw ConfigError("network.mode structured but dataset " + cfg.train_path +
                          " carries no side info");
    if (ds.records.size() <= cfg.training.validation_size)
        throw ConfigError("dataset too small for validation_size " +
                          std::to_string(cfg.training.validation_size));
    const std::size_t n_train = ds.records.size() - cfg.training.validation_size;
    const std::vector<SampleSystem> train_sys = systems_of(ds, mode, 0, n_train);
    const std::vector<SampleSystem> val_sys = systems_of(ds, mode, n_train, ds.records.size());

    SeededRng init_rng(cfg.training.seed, streams::kNetworkInit);
    NetworkParams net =
        init_network(cfg.layers, cfg.nt, cfg.nr, init_rng, mode,
                     detail::psi_from_name(cfg.psi), detail::e1_from_name(cfg.e1));

    TrainState st = init_train_state(std::move(net));
    if (cfg.training.max_iterations > 0)
        train_iterations(st, train_sys, val_sys, cfg.training, cfg.training.max_iterations);
    save_checkpoint(checkpoint_path, st, cfg.training);
    if (!history_path.empty()) io::write_file(history_path, history_csv(st.history));

    const double final_nmse = std::isfinite(st.best_val_nmse)
                                  ? st.best_val_nmse
                                  : validation_nmse(st.best_net, val_sys);
    std::printf("trained %zu iterations (%s), parameters=%llu, best validation NMSE=%.6g\n",
                st.iteration, st.stopped ? "early stop" : "iteration cap",
                static_cast<unsigned long long>(parameter_count(cfg.layers, cfg.nr)), final_nmse);
    std::printf("checkpoint: %s\n", checkpoint_path.c_str());
    return kExitOk;
}

struct EvalSetup {
    Dataset ds;
    std::vector<NamedEstimator> estimators;
    std::optional<NetworkParams> net;
};

EvalSetup prepare_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
    EvalSetup s;
    s.ds = load_dataset(cfg.test_path);
    check_dims(s.ds.header, cfg);
    bool needs_net = false;
    for (const std::string& name : cfg.estimators)
        if (name == "isdnn" || name == "sisdnn") needs_net = true;
    if (needs_net) {
        if (checkpoint_path.empty())
            throw ConfigError("estimator list includes isdnn/sisdnn: --checkpoint required");
        LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
        if (ck.state.best_net.nt != cfg.nt || ck.state.best_net.nr != cfg.nr)
            throw ConfigError("checkpoint dims (nt=" + std::to_string(ck.state.best_net.nt) +
                              ", nr=" + std::to_string(ck.state.best_net.nr) +
                              ") do not match config");
        if (ck.state.best_net.k_layers != cfg.layers)
            throw ConfigError("checkpoint has k=" + std::to_string(ck.state.best_net.k_layers) +
                              " layers but network.layers=" + std::to_string(cfg.layers));
        if (ck.state.best_net.mode == NetMode::Structured && !s.ds.header.structured)
            throw ConfigError("structured checkpoint but dataset carries no side info");
        s.net = std::move(ck.state.best_net);
    }
    for (const std::string& name : cfg.estimators)
        s.estimators.push_back(
            make_named_estimator(name, s.net ? &*s.net : nullptr, cfg.pgd_iterations));
    return s;
}

nlohmann::json eval_metadata(const RunConfig& cfg, const std::string& checkpoint_path) {
    return nlohmann::json{{"nt", cfg.nt},
                          {"nr", cfg.nr},
                          {"np", cfg.np},
                          {"dataset", cfg.test_path},
                          {"dataset_seed", cfg.dataset_seed},
                          {"checkpoint", checkpoint_path},
                          {"machine", cfg.machine}};
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
    EvalSetup s = prepare_eval(cfg, checkpoint_path);
    EvalReport report =
        snr_sweep(s.estimators, s.ds.records, s.ds.header.snr_levels_db);
    report.metadata = eval_metadata(cfg, checkpoint_path);
    emit_report(report, cfg.report_csv, "csv");
    emit_report(report, cfg.report_json, "json");
    std::printf("evaluated %zu estimators over %zu SNR levels -> %s, %s\n", s.estimators.size(),
                s.ds.header.snr_levels_db.size(), cfg.report_csv.c_str(),
                cfg.report_json.c_str());
    return kExitOk;
}

int cmd_bench(const RunConfig& cfg, const std::string& checkpoint_path) {
    if (cfg.repetitions < 3)
        throw ConfigError("eval.repetitions must be >= 3 for bench");
    EvalSetup s = prepare_eval(cfg, checkpoint_path);
    EvalReport report =
        snr_sweep(s.estimators, s.ds.records, s.ds.header.snr_levels_db);
    report.metadata = eval_metadata(cfg, checkpoint_path);
    for (const NamedEstimator& est : s.estimators) {
        const double seconds = time_inference(est.fn, s.ds.records, cfg.repetitions);
        for (EvalRow& row : report.rows)
            if (row.estimator == est.name) row.runtime_s_per_sample = seconds;
        std::printf("%-10s %.6e s/sample (machine: %s)\n", est.name.c_str(), seconds,
                    cfg.machine.empty() ? "unspecified" : cfg.machine.c_str());
    }
    emit_report(report, cfg.report_csv, "csv");
    emit_report(report, cfg.report_json, "json");
    return kExitOk;
}

int cmd_repro_paper(RunConfig cfg, const std::string& out_dir) {
    // Reference experiment: nt=8, nr=64, 16-QAM, SNR {0,5,10,15,20} dB,
    // 50k/10k records, Adam at 1e-4, early stopping with patience 3.
    cfg.nt = 8;
    cfg.nr = 64;
    cfg.np = 8;
    cfg.modulation = "16qam";
    cfg.channel_type = cfg.mode == "structured" ? "structured" : "rayleigh";
    cfg.train_count = 50000;
    cfg.test_count = 10000;
    cfg.snr_levels_db = {0.0, 5.0, 10.0, 15.0, 20.0};
    cfg.training.learning_rate = 1e-4;
    cfg.training.validation_size = 1000;
    cfg.train_path = out_dir + "/train.ceds";
    cfg.test_path = out_dir + "/test.ceds";
    cfg.report_csv = out_dir + "/report.csv";
    cfg.report_json = out_dir + "/report.json";
    cfg.estimators = {cfg.mode == "structured" ? "sisdnn" : "isdnn", "ls", "mmse", "diag-init"};
    for (const std::string& w : cfg.validate()) std::cerr << "warning: " << w << "\n";

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::exists(cfg.train_path) || !std::filesystem::exists(cfg.test_path)) {
        std::printf("generating datasets under %s ...\n", out_dir.c_str());
        cmd_gen(cfg);
    } else {
        std::printf("reusing datasets under %s\n", out_dir.c_str());
    }
    const std::string ckpt = out_dir + "/isdnn.ckpt";
    const int rc = cmd_train(cfg, ckpt, out_dir + "/history.csv");
    if (rc != kExitOk) return rc;
    cmd_eval(cfg, ckpt);
    cmd_bench(cfg, ckpt);
    std::printf("artifacts in %s\n", out_dir.c_str());
    return kExitOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"mimoce: massive MIMO channel-estimation laboratory with deep-unfolded "
                 "iterative estimators"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "print help for every subcommand and option");

    std::string config_path;
    CliOverrides o;
    std::string checkpoint_path;
    std::string history_path = "history.csv";
    std::string out_dir = "repro";

    CLI::App* gen = app.add_subcommand("gen", "generate train/test dataset files");
    add_common_options(gen, config_path, o);

    CLI::App* train = app.add_subcommand("train", "train an estimator on a dataset");
    add_common_options(train, config_path, o);
    train->add_option("--checkpoint", checkpoint_path, "output checkpoint path")->required();
    train->add_option("--history", history_path, "training history CSV path");

    CLI::App* eval = app.add_subcommand("eval", "NMSE sweep over SNR levels");
    add_common_options(eval, config_path, o);
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint for isdnn/sisdnn estimators");

    CLI::App* bench = app.add_subcommand("bench", "NMSE sweep plus per-sample timing");
    add_common_options(bench, config_path, o);
    bench->add_option("--checkpoint", checkpoint_path, "checkpoint for isdnn/sisdnn estimators");

    CLI::App* repro = app.add_subcommand(
        "repro-paper", "run the pinned reference configuration end to end");
    add_common_options(repro, config_path, o);
    repro->add_option("--out", out_dir, "output directory for datasets, checkpoint and reports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    if (gen->parsed()) return cmd_gen(resolve_config(config_path, o));
    if (train->parsed()) return cmd_train(resolve_config(config_path, o), checkpoint_path,
                                          history_path);
    if (eval->parsed()) return cmd_eval(resolve_config(config_path, o), checkpoint_path);
    if (bench->parsed()) return cmd_bench(resolve_config(config_path, o), checkpoint_path);
    if (repro->parsed()) {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_run_config(config_path);
        apply_overrides(cfg, o);
        return cmd_repro_paper(cfg, out_dir);
    }
    return kExitConfig;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const EstimationError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}
