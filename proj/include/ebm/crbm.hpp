#pragma once

#include <chrono>
#include <cstddef>
#include <utility>
#include <vector>

#include "ebm/gibbs.hpp"
#include "ebm/model.hpp"
#include "ebm/rng.hpp"
#include "ebm/trainer.hpp"
#include "ebm/unit_families.hpp"

namespace ebm {

// Autoregressive extension: directed links from the previous history_length
// visible frames act as dynamically changing biases of the current frame.
struct CrbmParams {
    RbmParams rbm;
    std::size_t history_length = 0;
    // Index tau-1 holds the links from the frame tau steps in the past;
    // entry (i, j) links past-visible unit i to current unit j.
    std::vector<Matrix> past_to_visible; // each visible_dim x visible_dim
    std::vector<Matrix> past_to_hidden;  // each visible_dim x hidden_dim

    bool operator==(const CrbmParams&) const = default;
};

// Most recent frame first: history[0] = frame at t-1, history[T-1] = frame at
// t-T.
using History = std::vector<Vector>;

inline void validate(const CrbmParams& p) {
    validate(p.rbm);
    if (p.history_length == 0) throw DimensionError("crbm history length must be positive");
    if (p.past_to_visible.size() != p.history_length ||
        p.past_to_hidden.size() != p.history_length)
        throw DimensionError("crbm link list length must equal the history length");
    for (const Matrix& g : p.past_to_visible) {
        if (g.rows() != p.rbm.visible_dim || g.cols() != p.rbm.visible_dim)
            throw DimensionError("past-to-visible link matrix shape mismatch");
        if (!all_finite(g)) throw InvariantError("crbm links must be finite");
    }
    for (const Matrix& q : p.past_to_hidden) {
        if (q.rows() != p.rbm.visible_dim || q.cols() != p.rbm.hidden_dim)
            throw DimensionError("past-to-hidden link matrix shape mismatch");
        if (!all_finite(q)) throw InvariantError("crbm links must be finite");
    }
}

inline void require_history(const CrbmParams& p, const History& history, const char* what) {
    if (history.size() != p.history_length)
        throw DimensionError(std::string(what) + ": history length mismatch");
    for (const Vector& frame : history) require_size(frame, p.rbm.visible_dim, what);
}

inline CrbmParams init_crbm(std::size_t visible_dim, std::size_t hidden_dim,
                            std::size_t history_length, UnitFamily visible_family,
                            UnitFamily hidden_family, double init_scale, RngStream& rng) {
    if (history_length == 0) throw DimensionError("init_crbm: history length must be positive");
    CrbmParams p;
    p.rbm = init_params(visible_dim, hidden_dim, visible_family, hidden_family, init_scale, rng);
    p.history_length = history_length;
    p.past_to_visible.assign(history_length, Matrix(visible_dim, visible_dim));
    p.past_to_hidden.assign(history_length, Matrix(visible_dim, hidden_dim));
    for (std::size_t tau = 0; tau < history_length; ++tau) {
        for (double& x : p.past_to_visible[tau].data()) x = init_scale * rng.normal();
        for (double& x : p.past_to_hidden[tau].data()) x = init_scale * rng.normal();
    }
    return p;
}

// The history contributes additively to both bias vectors; with these biases
// substituted, every two-layer conditional applies unchanged.
inline std::pair<Vector, Vector> effective_biases(const CrbmParams& p, const History& history) {
    require_history(p, history, "effective_biases");
    Vector vis = p.rbm.visible_bias;
    Vector hid = p.rbm.hidden_bias;
    for (std::size_t tau = 0; tau < p.history_length; ++tau) {
        const Vector gv = mat_tvec(p.past_to_visible[tau], history[tau]);
        const Vector qv = mat_tvec(p.past_to_hidden[tau], history[tau]);
        add_scaled(vis, gv, 1.0);
        add_scaled(hid, qv, 1.0);
    }
    return {std::move(vis), std::move(hid)};
}

// Two-layer view of the model conditioned on a fixed history.
inline RbmParams conditioned_view(const CrbmParams& p, const History& history) {
    auto [vis, hid] = effective_biases(p, history);
    RbmParams view = p.rbm;
    view.visible_bias = std::move(vis);
    view.hidden_bias = std::move(hid);
    return view;
}

struct SequenceWindow {
    History history;
    Vector target;
};

struct CrbmGradients {
    GradientSet core;
    std::vector<Matrix> past_to_visible;
    std::vector<Matrix> past_to_hidden;
    // Final chain state per window, in batch order.
    std::vector<ChainState> chain_ends;
};

// Contrastive gradients over a batch of (history, target) windows. Each
// window runs its own chain under its conditioned view; the directed-link
// rows are the past values times the data-minus-chain difference of the layer
// they feed.
inline CrbmGradients crbm_gradients(const CrbmParams& p, const std::vector<SequenceWindow>& batch,
                                    std::size_t k, const RngStream& rng, std::size_t threads = 1) {
    validate(p);
    if (batch.empty()) throw ValidationError("crbm_gradients: empty batch");
    const std::size_t d = p.rbm.visible_dim;
    const std::size_t pd = p.rbm.hidden_dim;

    struct WindowResult {
        Vector hidden_mean;
        ChainState end;
    };
    std::vector<WindowResult> results(batch.size());
    detail::parallel_rows(batch.size(), threads, [&](std::size_t r) {
        const SequenceWindow& w = batch[r];
        require_history(p, w.history, "crbm_gradients");
        require_size(w.target, d, "crbm_gradients: target");
        const RbmParams view = conditioned_view(p, w.history);
        results[r].hidden_mean = cond_mean_hidden(view, w.target);
        RngStream chain_rng = rng.substream(r);
        results[r].end = gibbs_chain(view, w.target, k, chain_rng);
    });

    // Phase sums are accumulated exactly like the plain trainer's so that a
    // zero-link model reproduces its gradients bit for bit.
    PhaseStats pos = detail::zero_stats(p.rbm);
    PhaseStats neg = detail::zero_stats(p.rbm);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        add_outer(pos.visible_hidden, batch[r].target, results[r].hidden_mean);
        add_scaled(pos.visible, batch[r].target, 1.0);
        add_scaled(pos.hidden, results[r].hidden_mean, 1.0);
    }
    for (std::size_t r = 0; r < batch.size(); ++r) {
        add_outer(neg.visible_hidden, results[r].end.visible, results[r].end.hidden);
        add_scaled(neg.visible, results[r].end.visible, 1.0);
        add_scaled(neg.hidden, results[r].end.hidden, 1.0);
    }

    CrbmGradients g;
    g.core = cd_gradients(pos, neg, batch.size());
    g.past_to_visible.assign(p.history_length, Matrix(d, d));
    g.past_to_hidden.assign(p.history_length, Matrix(d, pd));

    for (std::size_t r = 0; r < batch.size(); ++r) {
        const SequenceWindow& w = batch[r];
        const WindowResult& res = results[r];
        Vector visible_diff = w.target;
        add_scaled(visible_diff, res.end.visible, -1.0);
        Vector hidden_diff = res.hidden_mean;
        add_scaled(hidden_diff, res.end.hidden, -1.0);
        for (std::size_t tau = 0; tau < p.history_length; ++tau) {
            add_outer(g.past_to_visible[tau], w.history[tau], visible_diff);
            add_outer(g.past_to_hidden[tau], w.history[tau], hidden_diff);
        }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (Matrix& m : g.past_to_visible)
        for (double& x : m.data()) x *= inv;
    for (Matrix& m : g.past_to_hidden)
        for (double& x : m.data()) x *= inv;
    g.chain_ends.reserve(results.size());
    for (WindowResult& res : results) g.chain_ends.push_back(std::move(res.end));
    return g;
}

struct SequenceDataset {
    std::size_t dim = 0;
    std::vector<std::vector<Vector>> sequences;
    UnitFamily family = UnitFamily::Binary;
};

inline void validate(const SequenceDataset& data) {
    for (const auto& seq : data.sequences)
        for (const Vector& frame : seq) {
            require_size(frame, data.dim, "sequence frame");
            for (double x : frame)
                if (!value_in_family(x, data.family))
                    throw ValidationError("sequence value outside the declared family domain");
        }
}

// Sliding (history, target) windows over every sequence long enough to yield
// one.
inline std::vector<SequenceWindow> build_windows(const SequenceDataset& data,
                                                 std::size_t history_length) {
    std::vector<SequenceWindow> windows;
    for (const auto& seq : data.sequences) {
        if (seq.size() < history_length + 1) continue;
        for (std::size_t t = history_length; t < seq.size(); ++t) {
            SequenceWindow w;
            w.history.reserve(history_length);
            for (std::size_t tau = 1; tau <= history_length; ++tau)
                w.history.push_back(seq[t - tau]);
            w.target = seq[t];
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

// Mini-batch ascent over all parameter groups. With link_learning off and
// all-zero link matrices the run routes through train_rbm on the window
// targets, so the trajectory matches it draw for draw.
inline std::pair<CrbmParams, TrainReport> train_crbm(CrbmParams params, const TrainConfig& cfg,
                                                     const std::vector<SequenceWindow>& windows,
                                                     bool link_learning = true) {
    validate(cfg);
    validate(params);
    if (windows.empty()) throw ValidationError("train_crbm: no training windows");

    bool links_zero = true;
    for (const Matrix& m : params.past_to_visible)
        if (squared_norm(m) != 0.0) links_zero = false;
    for (const Matrix& m : params.past_to_hidden)
        if (squared_norm(m) != 0.0) links_zero = false;
    if (!link_learning && links_zero) {
        Dataset targets;
        targets.dim = params.rbm.visible_dim;
        targets.family = params.rbm.visible_family;
        for (const SequenceWindow& w : windows) targets.rows.push_back(w.target);
        auto [rbm, report] = train_rbm(std::move(params.rbm), cfg, targets);
        params.rbm = std::move(rbm);
        return {std::move(params), std::move(report)};
    }

    const std::size_t n = windows.size();
    const std::size_t batch_size = cfg.batch_size == 0 ? n : cfg.batch_size;
    if (batch_size > n) throw ValidationError("train_crbm: batch size exceeds window count");

    RngStream shuffle_master(cfg.seed, stream_tag::shuffle);
    RngStream chain_master(cfg.seed, stream_tag::chain);

    TrainReport report;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream shuffle_rng = shuffle_master.substream(epoch);
        const detail::BatchPlan plan = detail::plan_epoch(n, batch_size, shuffle_rng);

        double sq_error_sum = 0.0;
        double grad_norm_sum = 0.0;
        double max_update_norm = 0.0;
        for (std::size_t b = 0; b < plan.batches.size(); ++b) {
            std::vector<SequenceWindow> batch;
            batch.reserve(plan.batches[b].size());
            for (std::size_t r : plan.batches[b]) batch.push_back(windows[r]);

            const RngStream chain_base = chain_master.substream(epoch).substream(b);
            const CrbmGradients g = crbm_gradients(params, batch, cfg.cd_steps, chain_base,
                                                   cfg.threads);

            double grad_sq = squared_norm(g.core.weights) + squared_norm(g.core.visible_bias) +
                             squared_norm(g.core.hidden_bias);
            if (link_learning) {
                for (const Matrix& m : g.past_to_visible) grad_sq += squared_norm(m);
                for (const Matrix& m : g.past_to_hidden) grad_sq += squared_norm(m);
            }
            grad_norm_sum += std::sqrt(grad_sq);

            add_scaled(params.rbm.weights, g.core.weights, cfg.learning_rate);
            add_scaled(params.rbm.visible_bias, g.core.visible_bias, cfg.learning_rate);
            add_scaled(params.rbm.hidden_bias, g.core.hidden_bias, cfg.learning_rate);
            if (link_learning) {
                for (std::size_t tau = 0; tau < params.history_length; ++tau) {
                    add_scaled(params.past_to_visible[tau], g.past_to_visible[tau],
                               cfg.learning_rate);
                    add_scaled(params.past_to_hidden[tau], g.past_to_hidden[tau],
                               cfg.learning_rate);
                }
            }
            max_update_norm =
                std::max(max_update_norm, cfg.learning_rate * std::sqrt(grad_sq));

            for (std::size_t r = 0; r < batch.size(); ++r)
                sq_error_sum += squared_distance(batch[r].target, g.chain_ends[r].visible);
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.recon_error = sq_error_sum / (static_cast<double>(n) * params.rbm.visible_dim);
        rec.grad_norm = grad_norm_sum / static_cast<double>(plan.batches.size());
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(rec);

        if (cfg.convergence_tol > 0.0 && max_update_norm < cfg.convergence_tol) break;
    }
    return {std::move(params), std::move(report)};
}

inline std::pair<CrbmParams, TrainReport> train_crbm(const TrainConfig& cfg,
                                                     const SequenceDataset& data,
                                                     std::size_t hidden_dim,
                                                     std::size_t history_length,
                                                     UnitFamily hidden_family = UnitFamily::Binary,
                                                     bool link_learning = true) {
    validate(data);
    RngStream init_rng(cfg.seed, stream_tag::init);
    CrbmParams params = init_crbm(data.dim, hidden_dim, history_length, data.family,
                                  hidden_family, cfg.init_scale, init_rng);
    return train_crbm(std::move(params), cfg, build_windows(data, history_length), link_learning);
}

// Autoregressive rollout: each step samples the next frame by a k-sweep chain
// under the current history's conditioned view, started at the most recent
// frame, then shifts the window.
inline std::vector<Vector> generate_sequence(const CrbmParams& p, const History& seed_history,
                                             std::size_t steps, std::size_t k, RngStream& rng) {
    validate(p);
    require_history(p, seed_history, "generate_sequence");
    std::vector<Vector> out;
    out.reserve(steps);
    History history = seed_history;
    for (std::size_t s = 0; s < steps; ++s) {
        const RbmParams view = conditioned_view(p, history);
        const ChainState end = gibbs_chain(view, history.front(), k, rng);
        out.push_back(end.visible);
        history.insert(history.begin(), end.visible);
        history.pop_back();
    }
    return out;
}

} // namespace ebm
