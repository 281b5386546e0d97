// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Training: composite-domain MSE loss, exact reverse-mode gradients through
// the fixed unfolded graph, Adam updates, the minibatch loop with early
// stopping on validation NMSE, and checkpoint persistence.
//
// The tape covers the layer algebra only; G, Dinv and q are data-derived
// constants of each sample. Gradient accumulation is an ordered sum over the
// batch, so results are bitwise reproducible for a given (seed, config,
// dataset).
//
// Checkpoint format: "<path>" is a JSON manifest (format_version, dims, mode,
// psi, e1 mode, seeds, training metadata, evaluation history) and
// "<path>.bin" a little-endian f64 blob holding, in order: best parameters,
// current parameters (each: per layer W1 row-major, B1, W2, B2, alpha1,
// alpha2, then E1), then Adam first and second moments over the learnable
// set and the step counter.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimoce/baselines.hpp"
#include "mimoce/isdnn.hpp"
#include "mimoce/matrix.hpp"
#include "mimoce/rng.hpp"

namespace mimoce {

struct TrainConfig {
    std::size_t batch_size = 128;
    double learning_rate = 1e-4;
    std::size_t max_iterations = 10000;
    std::size_t eval_every = 100;
    std::size_t patience = 3;
    std::uint64_t seed = 0;
    std::size_t validation_size = 1000;

    void validate() const {
        if (batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate must be > 0");
        if (patience < 1) throw ConfigError("training.patience must be >= 1");
        if (eval_every < 1) throw ConfigError("training.eval_every must be >= 1");
    }
};

/// Batch-averaged squared error over composite entries, scaled so that a
/// structured output reproduces the complex-magnitude form
/// (1/(B Nt Nr)) sum |h - hhat|^2.
inline double mse_loss(std::span<const Matrix> targets, std::span<const Matrix> outputs) {
    if (targets.size() != outputs.size() || targets.empty())
        throw DimensionError("mse_loss: batch size mismatch or empty batch");
    double acc = 0.0;
    for (std::size_t b = 0; b < targets.size(); ++b) {
        if (!targets[b].same_shape(outputs[b])) throw DimensionError("mse_loss: shape mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < targets[b].size(); ++i) {
            const double d = outputs[b].data()[i] - targets[b].data()[i];
            s += d * d;
        }
        acc += s / (static_cast<double>(targets[b].size()) / 2.0);
    }
    return acc / static_cast<double>(targets.size());
}

struct LayerGrads {
    Matrix w1, w2;
    std::vector<double> b1, b2;
    double alpha1 = 0.0, alpha2 = 0.0;
};

struct GradientSet {
    std::vector<LayerGrads> layers;
    Matrix e1; // populated only in learned-E1 mode

    static GradientSet zeros_like(const NetworkParams& net) {
        GradientSet g;
        g.layers.resize(net.k_layers);
        const std::size_t d = 2 * net.nr;
        for (LayerGrads& lg : g.layers) {
            lg.w1 = Matrix(d, d);
            lg.w2 = Matrix(d, d);
            lg.b1.assign(d, 0.0);
            lg.b2.assign(d, 0.0);
        }
        if (net.e1_mode == E1Mode::Learned) g.e1 = Matrix(net.e1.rows(), net.e1.cols());
        return g;
    }

    bool all_finite() const {
        for (const LayerGrads& lg : layers) {
            if (!lg.w1.all_finite() || !lg.w2.all_finite()) return false;
            for (double v : lg.b1)
                if (!std::isfinite(v)) return false;
            for (double v : lg.b2)
                if (!std::isfinite(v)) return false;
            if (!std::isfinite(lg.alpha1) || !std::isfinite(lg.alpha2)) return false;
        }
        return e1.size() == 0 || e1.all_finite();
    }
};

namespace detail {

inline void add_col_sums(std::vector<double>& acc, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) acc[j] += m(i, j);
}

// Reverse pass for one sample. g_out is dL/d(output); returns gradient
// contributions accumulated into `grads`.
inline void backward_sample(const NetworkParams& net, const SampleSystem& sys,
                            const SampleTrace& trace, const Matrix& g_out, GradientSet& grads) {
    Matrix g_h = g_out;
    Matrix g_mem(g_out.rows(), g_out.cols()); // dL/dE_new(k) carried from layer k+1
    for (std::size_t k = net.k_layers; k-- > 0;) {
        const LayerParams& lp = net.layers[k];
        const LayerTrace& tr = trace.layers[k];
        LayerGrads& lg = grads.layers[k];

        // Hhat_{k+1} = (1 - a2) mu + a2 Hhat_k
        double a2_acc = 0.0;
        for (std::size_t i = 0; i < g_h.size(); ++i)
            a2_acc += (tr.h_in.data()[i] - tr.mu.data()[i]) * g_h.data()[i];
        lg.alpha2 += a2_acc;
        Matrix g_mu = g_h;
        g_mu *= (1.0 - lp.alpha2);

        // mu = Hhat_k + E_new + a1 * Etilde
        double a1_acc = 0.0;
        for (std::size_t i = 0; i < g_mu.size(); ++i)
            a1_acc += tr.e_tilde.data()[i] * g_mu.data()[i];
        lg.alpha1 += a1_acc;
        Matrix g_t3 = g_mu;
        g_t3 *= lp.alpha1;

        // Etilde = act W2 + B2
        add_atb(lg.w2, tr.act_out, g_t3);
        add_col_sums(lg.b2, g_t3);
        Matrix g_act = matmul_bt(g_t3, lp.w2);

        // act = psi(E_prev W1 + B1)
        if (net.psi == Psi::Tanh) {
            for (std::size_t i = 0; i < g_act.size(); ++i) {
                const double a = tr.act_out.data()[i];
                g_act.data()[i] *= (1.0 - a * a);
            }
        }
        add_atb(lg.w1, tr.e_prev_in, g_act);
        add_col_sums(lg.b1, g_act);
        Matrix g_mem_in = matmul_bt(g_act, lp.w1);

        // E_new receives gradient from mu and from the next layer's memory.
        Matrix g_e = g_mu;
        g_e += g_mem;

        // E_new = Dinv . (q - G Hhat_k); adjoint into Hhat_k, plus the two
        // direct paths (mu and the gated skip).
        Matrix g_h_in = residual_step_adjoint(sys, g_e);
        g_h_in += g_mu;
        Matrix skip = g_h;
        skip *= lp.alpha2;
        g_h_in += skip;

        g_h = std::move(g_h_in);
        g_mem = std::move(g_mem_in);
    }
    if (net.e1_mode == E1Mode::Learned) grads.e1 += g_mem;
}

} // namespace detail

struct BatchEval {
    double loss = 0.0;
    GradientSet grads;
};

/// Forward plus exact reverse-mode gradients of mse_loss over the batch.
inline BatchEval forward_backward(const NetworkParams& net,
                                  std::span<const SampleSystem* const> batch) {
    if (batch.empty()) throw ConfigError("forward_backward: empty batch");
    BatchEval ev;
    ev.grads = GradientSet::zeros_like(net);
    const double b = static_cast<double>(batch.size());
    for (const SampleSystem* sys : batch) {
        const SampleTrace trace = forward_sample(net, *sys);
        const std::size_t n = trace.output.size();
        double s = 0.0;
        Matrix g_out(trace.output.rows(), trace.output.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const double d = trace.output.data()[i] - sys->target.data()[i];
            s += d * d;
            g_out.data()[i] = 2.0 * d / (b * (static_cast<double>(n) / 2.0));
        }
        ev.loss += s / (static_cast<double>(n) / 2.0) / b;
        detail::backward_sample(net, *sys, trace, g_out, ev.grads);
    }
    if (!ev.grads.all_finite())
        throw NumericError("forward_backward: non-finite gradient");
    return ev;
}

inline BatchEval forward_backward(const NetworkParams& net,
                                  std::span<const SampleSystem> batch) {
    std::vector<const SampleSystem*> ptrs;
    ptrs.reserve(batch.size());
    for (const SampleSystem& s : batch) ptrs.push_back(&s);
    return forward_backward(net, std::span<const SampleSystem* const>(ptrs));
}

struct AdamState {
    GradientSet m, v;
    std::uint64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState zeros_like(const NetworkParams& net) {
        AdamState s;
        s.m = GradientSet::zeros_like(net);
        s.v = GradientSet::zeros_like(net);
        return s;
    }
};

namespace detail {

// Applies fn(params*, grads*, m*, v*, count) to every learnable tensor.
template <typename Fn>
inline void for_each_tensor(NetworkParams& net, const GradientSet& g, AdamState& st, Fn&& fn) {
    for (std::size_t k = 0; k < net.k_layers; ++k) {
        LayerParams& lp = net.layers[k];
        const LayerGrads& lg = g.layers[k];
        LayerGrads& m = st.m.layers[k];
        LayerGrads& v = st.v.layers[k];
        fn(lp.w1.data(), lg.w1.data(), m.w1.data(), v.w1.data(), lp.w1.size());
        fn(lp.b1.data(), lg.b1.data(), m.b1.data(), v.b1.data(), lp.b1.size());
        fn(lp.w2.data(), lg.w2.data(), m.w2.data(), v.w2.data(), lp.w2.size());
        fn(lp.b2.data(), lg.b2.data(), m.b2.data(), v.b2.data(), lp.b2.size());
        fn(&lp.alpha1, &lg.alpha1, &m.alpha1, &v.alpha1, 1);
        fn(&lp.alpha2, &lg.alpha2, &m.alpha2, &v.alpha2, 1);
    }
    if (net.e1_mode == E1Mode::Learned)
        fn(net.e1.data(), g.e1.data(), st.m.e1.data(), st.v.e1.data(), net.e1.size());
}

} // namespace detail

/// One Adam update with bias correction.
inline void adam_step(NetworkParams& net, const GradientSet& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be > 0");
    state.t += 1;
    const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    detail::for_each_tensor(net, grads, state,
                            [&](double* p, const double* g, double* m, double* v, std::size_t n) {
                                for (std::size_t i = 0; i < n; ++i) {
                                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                                    const double mh = m[i] / c1;
                                    const double vh = v[i] / c2;
                                    p[i] -= lr * mh / (std::sqrt(vh) + eps);
                                }
                            });
}

/// Patience counter on a best-so-far score (lower is better).
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    struct Outcome {
        bool improved = false;
        bool stop = false;
    };

    Outcome observe(double score) {
        Outcome o;
        if (score < best_) {
            best_ = score;
            bad_ = 0;
            o.improved = true;
        } else {
            bad_ += 1;
            o.stop = bad_ >= patience_;
        }
        return o;
    }

    double best() const { return best_; }
    std::size_t bad_evals() const { return bad_; }
    void restore(double best, std::size_t bad) {
        best_ = best;
        bad_ = bad;
    }

private:
    std::size_t patience_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t bad_ = 0;
};

struct HistoryRow {
    std::size_t iteration = 0;
    double train_loss = 0.0;
    double val_nmse = 0.0;
};

struct TrainHistory {
    std::vector<double> iter_loss;      // one entry per iteration
    std::vector<HistoryRow> eval_rows;  // one entry per validation evaluation
};

struct TrainState {
    NetworkParams net;       // current parameters
    NetworkParams best_net;  // best-validation parameters
    AdamState adam;
    std::size_t iteration = 0;
    double best_val_nmse = std::numeric_limits<double>::infinity();
    std::size_t bad_evals = 0;
    bool stopped = false;
    TrainHistory history;
};

inline TrainState init_train_state(NetworkParams net) {
    TrainState st;
    st.adam = AdamState::zeros_like(net);
    st.best_net = net;
    st.net = std::move(net);
    return st;
}

/// Mean per-sample NMSE of the network over a sample set, in channel space.
inline double validation_nmse(const NetworkParams& net, std::span<const SampleSystem> samples) {
    if (samples.empty()) throw ConfigError("validation_nmse: empty sample set");
    double acc = 0.0;
    for (const SampleSystem& sys : samples) {
        const SampleTrace tr = forward_sample(net, sys);
        acc += nmse(sys.h_true, estimate_to_channel(tr.output, sys));
    }
    return acc / static_cast<double>(samples.size());
}

namespace detail {

inline std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch,
                                                  std::size_t n) {
    SeededRng rng(seed, streams::kShuffleBase + epoch);
    return rng.permutation(n);
}

} // namespace detail

/// Advances training until `upto_iteration` or an early stop. Minibatches are
/// drawn from a fresh seeded shuffle each epoch; the mapping from iteration
/// index to batch is stateless, which is what makes checkpoint resumption
/// bitwise exact.
inline void train_iterations(TrainState& st, std::span<const SampleSystem> train,
                             std::span<const SampleSystem> val, const TrainConfig& cfg,
                             std::size_t upto_iteration) {
    cfg.validate();
    if (train.empty()) throw ConfigError("train_iterations: empty training set");
    if (val.empty()) throw ConfigError("train_iterations: empty validation set");
    const std::size_t n = train.size();
    const std::size_t bpe = (n + cfg.batch_size - 1) / cfg.batch_size;

    std::vector<std::size_t> perm;
    std::size_t perm_epoch = SIZE_MAX;
    std::vector<const SampleSystem*> batch;
    while (!st.stopped && st.iteration < upto_iteration) {
        const std::size_t it = st.iteration; // 0-based index of the step we are about to take
        const std::size_t epoch = it / bpe;
        const std::size_t slot = it % bpe;
        if (epoch != perm_epoch) {
            perm = detail::epoch_permutation(cfg.seed, epoch, n);
            perm_epoch = epoch;
        }
        const std::size_t lo = slot * cfg.batch_size;
        const std::size_t hi = std::min(n, lo + cfg.batch_size);
        batch.clear();
        for (std::size_t i = lo; i < hi; ++i) batch.push_back(&train[perm[i]]);

        const BatchEval ev =
            forward_backward(st.net, std::span<const SampleSystem* const>(batch));
        if (ev.loss > 1e12)
            throw NumericError("train_iterations: loss diverged (" + std::to_string(ev.loss) +
                               ") at iteration " + std::to_string(it + 1));
        adam_step(st.net, ev.grads, st.adam, cfg.learning_rate);
        st.iteration += 1;
        st.history.iter_loss.push_back(ev.loss);

        if (st.iteration % cfg.eval_every == 0) {
            const double v = validation_nmse(st.net, val);
            st.history.eval_rows.push_back({st.iteration, ev.loss, v});
            EarlyStopper stopper(cfg.patience);
            stopper.restore(st.best_val_nmse, st.bad_evals);
            const auto outcome = stopper.observe(v);
            st.best_val_nmse = stopper.best();
            st.bad_evals = stopper.bad_evals();
            if (outcome.improved) st.best_net = st.net;
            if (outcome.stop) st.stopped = true;
        }
    }
}

struct TrainResult {
    NetworkParams best;
    TrainHistory history;
    double best_val_nmse = std::numeric_limits<double>::infinity();
    std::size_t iterations_run = 0;
    bool early_stopped = false;
};

/// Full training loop with early stopping; returns the best-validation
/// checkpoint. If no evaluation ever ran (max_iterations < eval_every) the
/// initial parameters are returned as best.
inline TrainResult train_loop(NetworkParams net, std::span<const SampleSystem> train,
                              std::span<const SampleSystem> val, const TrainConfig& cfg) {
    TrainState st = init_train_state(std::move(net));
    if (cfg.max_iterations > 0) train_iterations(st, train, val, cfg, cfg.max_iterations);
    TrainResult res;
    res.best = std::move(st.best_net);
    res.history = std::move(st.history);
    res.best_val_nmse = st.best_val_nmse;
    res.iterations_run = st.iteration;
    res.early_stopped = st.stopped;
    return res;
}

// ---- checkpoint persistence -------------------------------------------------

namespace detail {

inline void append_net_params(std::string& out, const NetworkParams& net) {
    for (const LayerParams& lp : net.layers) {
        for (std::size_t i = 0; i < lp.w1.size(); ++i) io::put_f64(out, lp.w1.data()[i]);
        for (double v : lp.b1) io::put_f64(out, v);
        for (std::size_t i = 0; i < lp.w2.size(); ++i) io::put_f64(out, lp.w2.data()[i]);
        for (double v : lp.b2) io::put_f64(out, v);
        io::put_f64(out, lp.alpha1);
        io::put_f64(out, lp.alpha2);
    }
    for (std::size_t i = 0; i < net.e1.size(); ++i) io::put_f64(out, net.e1.data()[i]);
}

inline void read_net_params(io::Reader& r, NetworkParams& net) {
    for (LayerParams& lp : net.layers) {
        for (std::size_t i = 0; i < lp.w1.size(); ++i) lp.w1.data()[i] = r.f64();
        for (double& v : lp.b1) v = r.f64();
        for (std::size_t i = 0; i < lp.w2.size(); ++i) lp.w2.data()[i] = r.f64();
        for (double& v : lp.b2) v = r.f64();
        lp.alpha1 = r.f64();
        lp.alpha2 = r.f64();
    }
    for (std::size_t i = 0; i < net.e1.size(); ++i) net.e1.data()[i] = r.f64();
}

inline void append_gradset(std::string& out, const NetworkParams& net, const GradientSet& g) {
    for (const LayerGrads& lg : g.layers) {
        for (std::size_t i = 0; i < lg.w1.size(); ++i) io::put_f64(out, lg.w1.data()[i]);
        for (double v : lg.b1) io::put_f64(out, v);
        for (std::size_t i = 0; i < lg.w2.size(); ++i) io::put_f64(out, lg.w2.data()[i]);
        for (double v : lg.b2) io::put_f64(out, v);
        io::put_f64(out, lg.alpha1);
        io::put_f64(out, lg.alpha2);
    }
    if (net.e1_mode == E1Mode::Learned)
        for (std::size_t i = 0; i < g.e1.size(); ++i) io::put_f64(out, g.e1.data()[i]);
}

inline void read_gradset(io::Reader& r, const NetworkParams& net, GradientSet& g) {
    for (LayerGrads& lg : g.layers) {
        for (std::size_t i = 0; i < lg.w1.size(); ++i) lg.w1.data()[i] = r.f64();
        for (double& v : lg.b1) v = r.f64();
        for (std::size_t i = 0; i < lg.w2.size(); ++i) lg.w2.data()[i] = r.f64();
        for (double& v : lg.b2) v = r.f64();
        lg.alpha1 = r.f64();
        lg.alpha2 = r.f64();
    }
    if (net.e1_mode == E1Mode::Learned)
        for (std::size_t i = 0; i < g.e1.size(); ++i) g.e1.data()[i] = r.f64();
}

inline std::string mode_name(NetMode m) {
    return m == NetMode::Structured ? "structured" : "unstructured";
}
inline std::string psi_name(Psi p) { return p == Psi::Tanh ? "tanh" : "none"; }
inline std::string e1_name(E1Mode m) {
    switch (m) {
        case E1Mode::Shared: return "shared";
        case E1Mode::PerSample: return "per-sample";
        case E1Mode::Learned: return "learned";
    }
    return "shared";
}
inline NetMode mode_from_name(const std::string& s) {
    if (s == "structured") return NetMode::Structured;
    if (s == "unstructured") return NetMode::Unstructured;
    throw ConfigError("unknown network mode '" + s + "'");
}
inline Psi psi_from_name(const std::string& s) {
    if (s == "tanh") return Psi::Tanh;
    if (s == "none") return Psi::None;
    throw ConfigError("unknown psi '" + s + "'");
}
inline E1Mode e1_from_name(const std::string& s) {
    if (s == "shared") return E1Mode::Shared;
    if (s == "per-sample") return E1Mode::PerSample;
    if (s == "learned") return E1Mode::Learned;
    throw ConfigError("unknown e1 mode '" + s + "'");
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const TrainState& st,
                            const TrainConfig& cfg) {
    const NetworkParams& net = st.net;
    nlohmann::json hist = nlohmann::json::array();
    for (const HistoryRow& row : st.history.eval_rows)
        hist.push_back({{"iteration", row.iteration},
                        {"train_loss", row.train_loss},
                        {"val_nmse", row.val_nmse}});
    const nlohmann::json manifest{
        {"format_version", 1},
        {"k", net.k_layers},
        {"nt", net.nt},
        {"nr", net.nr},
        {"mode", detail::mode_name(net.mode)},
        {"psi", detail::psi_name(net.psi)},
        {"e1_mode", detail::e1_name(net.e1_mode)},
        {"init_seed", net.init_seed},
        {"parameter_count", parameter_count(net.k_layers, net.nr)},
        {"training",
         {{"iteration", st.iteration},
          // infinity (no evaluation yet) is not representable in JSON
          {"best_val_nmse",
           std::isfinite(st.best_val_nmse) ? nlohmann::json(st.best_val_nmse)
                                           : nlohmann::json()},
          {"bad_evals", st.bad_evals},
          {"stopped", st.stopped},
          {"adam_t", st.adam.t},
          {"seed", cfg.seed},
          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"eval_every", cfg.eval_every},
          {"patience", cfg.patience},
          {"max_iterations", cfg.max_iterations}}},
        {"history", hist},
        {"blob", path.substr(path.find_last_of('/') + 1) + ".bin"}};
    io::write_file(path, manifest.dump(2) + "\n");

    std::string blob;
    detail::append_net_params(blob, st.best_net);
    detail::append_net_params(blob, st.net);
    detail::append_gradset(blob, net, st.adam.m);
    detail::append_gradset(blob, net, st.adam.v);
    io::put_u64(blob, st.adam.t);
    io::write_file(path + ".bin", blob);
}

struct LoadedCheckpoint {
    TrainState state;
    TrainConfig config;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_checkpoint: bad manifest " + path + ": " + e.what());
    }
    if (manifest.value("format_version", 0) != 1)
        throw IoError("load_checkpoint: unsupported format_version in " + path);

    LoadedCheckpoint out;
    try {
        NetworkParams proto;
        proto.k_layers = manifest.at("k").get<std::size_t>();
        proto.nt = manifest.at("nt").get<std::size_t>();
        proto.nr = manifest.at("nr").get<std::size_t>();
        proto.mode = detail::mode_from_name(manifest.at("mode").get<std::string>());
        proto.psi = detail::psi_from_name(manifest.at("psi").get<std::string>());
        proto.e1_mode = detail::e1_from_name(manifest.at("e1_mode").get<std::string>());
        proto.init_seed = manifest.at("init_seed").get<std::uint64_t>();
        const std::size_t d = 2 * proto.nr;
        proto.layers.resize(proto.k_layers);
        for (LayerParams& lp : proto.layers) {
            lp.w1 = Matrix(d, d);
            lp.w2 = Matrix(d, d);
            lp.b1.assign(d, 0.0);
            lp.b2.assign(d, 0.0);
        }
        proto.e1 = Matrix(2 * proto.nt, d);

        out.state.best_net = proto;
        out.state.net = proto;
        out.state.adam = AdamState::zeros_like(proto);
        const auto& tr = manifest.at("training");
        out.state.iteration = tr.at("iteration").get<std::size_t>();
        out.state.best_val_nmse = tr.at("best_val_nmse").is_null()
                                      ? std::numeric_limits<double>::infinity()
                                      : tr.at("best_val_nmse").get<double>();
        out.state.bad_evals = tr.at("bad_evals").get<std::size_t>();
        out.state.stopped = tr.at("stopped").get<bool>();
        for (const auto& row : manifest.at("history"))
            out.state.history.eval_rows.push_back({row.at("iteration").get<std::size_t>(),
                                                   row.at("train_loss").get<double>(),
                                                   row.at("val_nmse").get<double>()});
        out.config.seed = tr.at("seed").get<std::uint64_t>();
        out.config.learning_rate = tr.at("learning_rate").get<double>();
        out.config.batch_size = tr.at("batch_size").get<std::size_t>();
        out.config.eval_every = tr.at("eval_every").get<std::size_t>();
        out.config.patience = tr.at("patience").get<std::size_t>();
        out.config.max_iterations = tr.at("max_iterations").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_checkpoint: malformed manifest " + path + ": " + e.what());
    }

    const std::string blob = io::read_file(path + ".bin");
    const NetworkParams& shape = out.state.net;
    const std::size_t d = 2 * shape.nr;
    const std::size_t per_layer = 2 * d * d + 2 * d + 2;
    std::size_t learnable = shape.k_layers * per_layer;
    if (shape.e1_mode == E1Mode::Learned) learnable += shape.e1.size();
    const std::size_t net_doubles = shape.k_layers * per_layer + shape.e1.size();
    const std::size_t expect = 8 * (2 * net_doubles + 2 * learnable) + 8;
    if (blob.size() != expect)
        throw IoError("load_checkpoint: blob length " + std::to_string(blob.size()) +
                      " does not match expected " + std::to_string(expect) + " for " + path);
    io::Reader r(blob, "checkpoint blob " + path);
    detail::read_net_params(r, out.state.best_net);
    detail::read_net_params(r, out.state.net);
    detail::read_gradset(r, out.state.net, out.state.adam.m);
    detail::read_gradset(r, out.state.net, out.state.adam.v);
    out.state.adam.t = r.u64();
    return out;
}

} // namespace mimoce
