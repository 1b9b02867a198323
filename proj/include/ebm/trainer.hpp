#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "ebm/exact.hpp"
#include "ebm/gibbs.hpp"
#include "ebm/model.hpp"
#include "ebm/rng.hpp"
#include "ebm/unit_families.hpp"

namespace ebm {

// Summed sufficient statistics of one phase. The hidden factor is the
// conditional mean in the data phase and a sampled state in the chain phase.
struct PhaseStats {
    Matrix visible_hidden; // sum of v h'
    Vector visible;        // sum of v
    Vector hidden;         // sum of h
};

struct LateralStats {
    Matrix visible_visible; // sum of v v'
    Matrix hidden_hidden;   // sum of h h'
};

struct GradientSet {
    Matrix weights;
    Vector visible_bias;
    Vector hidden_bias;
    std::optional<Matrix> visible_lateral;
    std::optional<Matrix> hidden_lateral;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double recon_error = 0.0; // mean squared element error between data and chain ends
    double grad_norm = 0.0;   // mean per-batch gradient norm
    std::optional<double> loglik;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
};

namespace detail {

inline PhaseStats zero_stats(const RbmParams& p) {
    PhaseStats s;
    s.visible_hidden = Matrix(p.visible_dim, p.hidden_dim);
    s.visible = Vector(p.visible_dim, 0.0);
    s.hidden = Vector(p.hidden_dim, 0.0);
    return s;
}

// Run fn(0..n-1) on up to `threads` workers. Each index touches only its own
// output slot, so the result does not depend on the worker count.
template <class Fn>
void parallel_rows(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t r = 0; r < n; ++r) fn(r);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= n) return;
            try {
                fn(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min(threads, n);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

// Data-phase statistics: each row contributes its conditional hidden mean.
inline PhaseStats positive_stats(const RbmParams& p, const std::vector<Vector>& batch) {
    PhaseStats s = detail::zero_stats(p);
    for (const Vector& v : batch) {
        const Vector hidden_mean = cond_mean_hidden(p, v);
        add_outer(s.visible_hidden, v, hidden_mean);
        add_scaled(s.visible, v, 1.0);
        add_scaled(s.hidden, hidden_mean, 1.0);
    }
    return s;
}

// Chain ends for every row of a batch: row r runs its own k-sweep chain on
// the substream derived with tag r, so results are reproducible and
// independent of the worker count.
inline std::vector<ChainState> negative_chains(const RbmParams& p,
                                               const std::vector<Vector>& batch, std::size_t k,
                                               const RngStream& base, std::size_t threads = 1) {
    std::vector<ChainState> ends(batch.size());
    detail::parallel_rows(batch.size(), threads, [&](std::size_t r) {
        RngStream rng = base.substream(r);
        ends[r] = gibbs_chain(p, batch[r], k, rng);
    });
    return ends;
}

inline PhaseStats accumulate_chain_stats(const RbmParams& p, const std::vector<ChainState>& ends) {
    PhaseStats s = detail::zero_stats(p);
    for (const ChainState& end : ends) {
        add_outer(s.visible_hidden, end.visible, end.hidden);
        add_scaled(s.visible, end.visible, 1.0);
        add_scaled(s.hidden, end.hidden, 1.0);
    }
    return s;
}

// Chain-phase statistics: per data row, a k-sweep chain started at the row;
// the final visible sample and the hidden sample that generated it enter the
// sums.
inline PhaseStats negative_stats(const RbmParams& p, const std::vector<Vector>& batch,
                                 std::size_t k, const RngStream& rng, std::size_t threads = 1) {
    return accumulate_chain_stats(p, negative_chains(p, batch, k, rng, threads));
}

// Difference of phase sums scaled by the batch size, so the learning rate is
// batch-size independent.
inline GradientSet cd_gradients(const PhaseStats& positive, const PhaseStats& negative,
                                std::size_t batch_size) {
    if (batch_size == 0) throw ValidationError("cd_gradients: empty batch");
    const double inv = 1.0 / static_cast<double>(batch_size);
    GradientSet g;
    g.weights = positive.visible_hidden;
    add_scaled(g.weights, negative.visible_hidden, -1.0);
    for (double& x : g.weights.data()) x *= inv;
    g.visible_bias = positive.visible;
    add_scaled(g.visible_bias, negative.visible, -1.0);
    for (double& x : g.visible_bias) x *= inv;
    g.hidden_bias = positive.hidden;
    add_scaled(g.hidden_bias, negative.hidden, -1.0);
    for (double& x : g.hidden_bias) x *= inv;
    return g;
}

// Lateral gradients: scaled phase difference with the diagonal zeroed and
// symmetry restored by averaging with the transpose.
inline std::pair<Matrix, Matrix> bm_gradients(const LateralStats& positive,
                                              const LateralStats& negative,
                                              std::size_t batch_size) {
    if (batch_size == 0) throw ValidationError("bm_gradients: empty batch");
    const double inv = 1.0 / static_cast<double>(batch_size);
    auto finish = [&](const Matrix& pos, const Matrix& neg) {
        Matrix g = pos;
        add_scaled(g, neg, -1.0);
        for (double& x : g.data()) x *= inv;
        Matrix sym(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j)
                sym(i, j) = i == j ? 0.0 : 0.5 * (g(i, j) + g(j, i));
        return sym;
    };
    return {finish(positive.visible_visible, negative.visible_visible),
            finish(positive.hidden_hidden, negative.hidden_hidden)};
}

// Sweeps used to estimate the clamped hidden second moment of the full
// machine.
inline constexpr std::size_t kBmClampedSweeps = 20;

namespace detail {

// One single-site pass over the hidden layer with the visible layer clamped.
inline void bm_clamped_hidden_sweep(const BmParams& p, const Vector& v, Vector& h,
                                    RngStream& rng) {
    const std::size_t d = p.rbm.visible_dim;
    const std::size_t pd = p.rbm.hidden_dim;
    for (std::size_t j = 0; j < pd; ++j) {
        double arg = p.rbm.hidden_bias[j];
        for (std::size_t i = 0; i < d; ++i) arg += p.rbm.weights(i, j) * v[i];
        for (std::size_t a = 0; a < pd; ++a) arg += 2.0 * p.hidden_lateral(j, a) * h[a];
        h[j] = rng.bernoulli(sigmoid(arg)) ? 1.0 : 0.0;
    }
}

// E[h h' | v] estimated by averaging over clamped single-site sweeps; the
// lateral links make the exact conditional intractable at scale.
inline Matrix bm_clamped_hidden_second(const BmParams& p, const Vector& v, RngStream& rng,
                                       std::size_t sweeps = kBmClampedSweeps) {
    const std::size_t pd = p.rbm.hidden_dim;
    Vector h(pd, 0.0);
    Matrix acc(pd, pd);
    for (std::size_t s = 0; s < sweeps; ++s) {
        bm_clamped_hidden_sweep(p, v, h, rng);
        add_outer(acc, h, h, 1.0);
    }
    for (double& x : acc.data()) x /= static_cast<double>(sweeps);
    return acc;
}

struct BmChainEnd {
    Vector visible;
    Vector hidden;
};

// Chain end for one row of a full-machine batch: the hidden state is seeded
// with one clamped pass, then k unclamped single-site sweeps run over both
// layers.
inline BmChainEnd bm_negative_chain(const BmParams& p, const Vector& v0, std::size_t k,
                                    RngStream& rng) {
    BmChainEnd end;
    end.visible = v0;
    end.hidden = Vector(p.rbm.hidden_dim, 0.0);
    bm_clamped_hidden_sweep(p, end.visible, end.hidden, rng);
    for (std::size_t s = 0; s < k; ++s) gibbs_sweep_bm(p, end.visible, end.hidden, rng);
    return end;
}

inline double loglik_if_tractable(const RbmParams& p, const Dataset& data) {
    return exact_loglik(p, data);
}

inline bool loglik_recordable(const RbmParams& p) {
    return p.visible_family == UnitFamily::Binary && p.hidden_family == UnitFamily::Binary &&
           p.visible_dim + p.hidden_dim <= kEnumerationCapBits;
}

struct BatchPlan {
    std::vector<std::vector<std::size_t>> batches;
};

inline BatchPlan plan_epoch(std::size_t n, std::size_t batch_size, RngStream& shuffle_rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = shuffle_rng.uniform_below(i);
        std::swap(order[i - 1], order[j]);
    }
    BatchPlan plan;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t stop = std::min(n, start + batch_size);
        plan.batches.emplace_back(order.begin() + start, order.begin() + stop);
    }
    return plan;
}

} // namespace detail

namespace detail {

// Core loop. Stage datasets produced inside greedy stack pre-training carry
// conditional means, which may sit strictly inside the binary domain, so the
// domain check is optional there; every user-facing entry point keeps it on.
inline std::pair<RbmParams, TrainReport> train_rbm_impl(RbmParams params, const TrainConfig& cfg,
                                                        const Dataset& data, bool validate_data) {
    validate(cfg);
    validate(params);
    if (validate_data) validate(data);
    if (data.dim != params.visible_dim)
        throw DimensionError("train_rbm: dataset dimension does not match the model");
    if (data.family != params.visible_family)
        throw ValidationError("train_rbm: dataset family does not match the model");
    const std::size_t n = data.size();
    if (n == 0) throw ValidationError("train_rbm: empty dataset");
    const std::size_t batch_size = cfg.batch_size == 0 ? n : cfg.batch_size;
    if (batch_size > n) throw ValidationError("train_rbm: batch size exceeds dataset size");

    RngStream shuffle_master(cfg.seed, stream_tag::shuffle);
    RngStream chain_master(cfg.seed, stream_tag::chain);

    GradientSet velocity;
    velocity.weights = Matrix(params.visible_dim, params.hidden_dim);
    velocity.visible_bias = Vector(params.visible_dim, 0.0);
    velocity.hidden_bias = Vector(params.hidden_dim, 0.0);

    TrainReport report;
    const bool track_loglik = cfg.record_loglik && detail::loglik_recordable(params);
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream shuffle_rng = shuffle_master.substream(epoch);
        const detail::BatchPlan plan = detail::plan_epoch(n, batch_size, shuffle_rng);

        double sq_error_sum = 0.0;
        double grad_norm_sum = 0.0;
        double max_update_norm = 0.0;
        for (std::size_t b = 0; b < plan.batches.size(); ++b) {
            const auto& idx = plan.batches[b];
            std::vector<Vector> batch;
            batch.reserve(idx.size());
            for (std::size_t r : idx) batch.push_back(data.rows[r]);

            const PhaseStats pos = positive_stats(params, batch);
            const RngStream chain_base = chain_master.substream(epoch).substream(b);
            const std::vector<ChainState> ends =
                negative_chains(params, batch, cfg.cd_steps, chain_base, cfg.threads);
            const PhaseStats neg = accumulate_chain_stats(params, ends);
            for (std::size_t r = 0; r < batch.size(); ++r)
                sq_error_sum += squared_distance(batch[r], ends[r].visible);

            GradientSet grads = cd_gradients(pos, neg, batch.size());
            const double grad_norm =
                std::sqrt(squared_norm(grads.weights) + squared_norm(grads.visible_bias) +
                          squared_norm(grads.hidden_bias));
            grad_norm_sum += grad_norm;

            if (cfg.weight_decay != 0.0)
                add_scaled(grads.weights, params.weights, -cfg.weight_decay);
            if (cfg.momentum != 0.0) {
                for (std::size_t i = 0; i < velocity.weights.data().size(); ++i)
                    velocity.weights.data()[i] =
                        cfg.momentum * velocity.weights.data()[i] + grads.weights.data()[i];
                for (std::size_t i = 0; i < velocity.visible_bias.size(); ++i)
                    velocity.visible_bias[i] =
                        cfg.momentum * velocity.visible_bias[i] + grads.visible_bias[i];
                for (std::size_t i = 0; i < velocity.hidden_bias.size(); ++i)
                    velocity.hidden_bias[i] =
                        cfg.momentum * velocity.hidden_bias[i] + grads.hidden_bias[i];
            } else {
                velocity.weights = grads.weights;
                velocity.visible_bias = grads.visible_bias;
                velocity.hidden_bias = grads.hidden_bias;
            }

            add_scaled(params.weights, velocity.weights, cfg.learning_rate);
            add_scaled(params.visible_bias, velocity.visible_bias, cfg.learning_rate);
            add_scaled(params.hidden_bias, velocity.hidden_bias, cfg.learning_rate);

            const double update_norm =
                cfg.learning_rate *
                std::sqrt(squared_norm(velocity.weights) + squared_norm(velocity.visible_bias) +
                          squared_norm(velocity.hidden_bias));
            max_update_norm = std::max(max_update_norm, update_norm);
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.recon_error = sq_error_sum / (static_cast<double>(n) * params.visible_dim);
        rec.grad_norm = grad_norm_sum / static_cast<double>(plan.batches.size());
        if (track_loglik) rec.loglik = detail::loglik_if_tractable(params, data);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(rec);

        if (cfg.convergence_tol > 0.0 && max_update_norm < cfg.convergence_tol) break;
    }
    return {std::move(params), std::move(report)};
}

} // namespace detail

// Contrastive-divergence training of a two-layer model, starting from the
// given parameters. Gradient ascent on the log-likelihood surrogate:
// theta <- theta + lr * gradient.
inline std::pair<RbmParams, TrainReport> train_rbm(RbmParams params, const TrainConfig& cfg,
                                                   const Dataset& data) {
    return detail::train_rbm_impl(std::move(params), cfg, data, true);
}

// Convenience overload: initialize from the config's seed and init_scale.
inline std::pair<RbmParams, TrainReport> train_rbm(const TrainConfig& cfg, const Dataset& data,
                                                   std::size_t hidden_dim,
                                                   UnitFamily hidden_family = UnitFamily::Binary) {
    RngStream init_rng(cfg.seed, stream_tag::init);
    RbmParams params =
        init_params(data.dim, hidden_dim, data.family, hidden_family, cfg.init_scale, init_rng);
    return train_rbm(std::move(params), cfg, data);
}

// Full-machine training. With lateral_learning off and zero lateral matrices
// the model is exactly a two-layer machine, and the run is routed through
// train_rbm so the trajectory matches it draw for draw.
inline std::pair<BmParams, TrainReport> train_bm(BmParams params, const TrainConfig& cfg,
                                                 const Dataset& data,
                                                 bool lateral_learning = true) {
    validate(cfg);
    validate(params);
    validate(data);
    if (params.rbm.visible_family != UnitFamily::Binary ||
        params.rbm.hidden_family != UnitFamily::Binary)
        throw UnsupportedFamilyError("train_bm: lateral training is binary-only");
    const bool laterals_zero = squared_norm(params.visible_lateral) == 0.0 &&
                               squared_norm(params.hidden_lateral) == 0.0;
    if (!lateral_learning && laterals_zero) {
        auto [rbm, report] = train_rbm(std::move(params.rbm), cfg, data);
        params.rbm = std::move(rbm);
        return {std::move(params), std::move(report)};
    }

    if (data.dim != params.rbm.visible_dim)
        throw DimensionError("train_bm: dataset dimension does not match the model");
    const std::size_t n = data.size();
    if (n == 0) throw ValidationError("train_bm: empty dataset");
    const std::size_t batch_size = cfg.batch_size == 0 ? n : cfg.batch_size;
    if (batch_size > n) throw ValidationError("train_bm: batch size exceeds dataset size");

    RngStream shuffle_master(cfg.seed, stream_tag::shuffle);
    RngStream chain_master(cfg.seed, stream_tag::chain);
    RngStream clamp_master(cfg.seed, stream_tag::clamped);

    TrainReport report;
    const bool track_loglik =
        cfg.record_loglik &&
        params.rbm.visible_dim + params.rbm.hidden_dim <= kEnumerationCapBits;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream shuffle_rng = shuffle_master.substream(epoch);
        const detail::BatchPlan plan = detail::plan_epoch(n, batch_size, shuffle_rng);

        double sq_error_sum = 0.0;
        double grad_norm_sum = 0.0;
        double max_update_norm = 0.0;
        for (std::size_t b = 0; b < plan.batches.size(); ++b) {
            const auto& idx = plan.batches[b];
            std::vector<Vector> batch;
            batch.reserve(idx.size());
            for (std::size_t r : idx) batch.push_back(data.rows[r]);

            const RngStream chain_base = chain_master.substream(epoch).substream(b);
            const RngStream clamp_base = clamp_master.substream(epoch).substream(b);

            PhaseStats pos = detail::zero_stats(params.rbm);
            PhaseStats neg = detail::zero_stats(params.rbm);
            LateralStats pos_lat{Matrix(data.dim, data.dim),
                                 Matrix(params.rbm.hidden_dim, params.rbm.hidden_dim)};
            LateralStats neg_lat = pos_lat;

            std::vector<Matrix> clamped_second(batch.size());
            std::vector<detail::BmChainEnd> ends(batch.size());
            detail::parallel_rows(batch.size(), cfg.threads, [&](std::size_t r) {
                RngStream clamp_rng = clamp_base.substream(r);
                clamped_second[r] = detail::bm_clamped_hidden_second(params, batch[r], clamp_rng);
                RngStream chain_rng = chain_base.substream(r);
                ends[r] = detail::bm_negative_chain(params, batch[r], cfg.cd_steps, chain_rng);
            });
            for (std::size_t r = 0; r < batch.size(); ++r) {
                // Positive-phase hidden mean from the clamped estimate's diagonal.
                Vector hidden_mean(params.rbm.hidden_dim);
                for (std::size_t j = 0; j < hidden_mean.size(); ++j)
                    hidden_mean[j] = clamped_second[r](j, j);
                add_outer(pos.visible_hidden, batch[r], hidden_mean);
                add_scaled(pos.visible, batch[r], 1.0);
                add_scaled(pos.hidden, hidden_mean, 1.0);
                add_outer(pos_lat.visible_visible, batch[r], batch[r]);
                add_scaled(pos_lat.hidden_hidden, clamped_second[r], 1.0);

                add_outer(neg.visible_hidden, ends[r].visible, ends[r].hidden);
                add_scaled(neg.visible, ends[r].visible, 1.0);
                add_scaled(neg.hidden, ends[r].hidden, 1.0);
                add_outer(neg_lat.visible_visible, ends[r].visible, ends[r].visible);
                add_outer(neg_lat.hidden_hidden, ends[r].hidden, ends[r].hidden);
                sq_error_sum += squared_distance(batch[r], ends[r].visible);
            }

            GradientSet grads = cd_gradients(pos, neg, batch.size());
            {
                auto [lateral_v, lateral_h] = bm_gradients(pos_lat, neg_lat, batch.size());
                grads.visible_lateral = std::move(lateral_v);
                grads.hidden_lateral = std::move(lateral_h);
            }

            double grad_sq = squared_norm(grads.weights) + squared_norm(grads.visible_bias) +
                             squared_norm(grads.hidden_bias);
            if (lateral_learning)
                grad_sq += squared_norm(*grads.visible_lateral) +
                           squared_norm(*grads.hidden_lateral);
            grad_norm_sum += std::sqrt(grad_sq);

            add_scaled(params.rbm.weights, grads.weights, cfg.learning_rate);
            add_scaled(params.rbm.visible_bias, grads.visible_bias, cfg.learning_rate);
            add_scaled(params.rbm.hidden_bias, grads.hidden_bias, cfg.learning_rate);
            if (lateral_learning) {
                add_scaled(params.visible_lateral, *grads.visible_lateral, cfg.learning_rate);
                add_scaled(params.hidden_lateral, *grads.hidden_lateral, cfg.learning_rate);
                // Re-enforce the structural invariants after the step.
                for (std::size_t i = 0; i < params.visible_lateral.rows(); ++i) {
                    params.visible_lateral(i, i) = 0.0;
                    for (std::size_t j = i + 1; j < params.visible_lateral.cols(); ++j) {
                        const double avg =
                            0.5 * (params.visible_lateral(i, j) + params.visible_lateral(j, i));
                        params.visible_lateral(i, j) = params.visible_lateral(j, i) = avg;
                    }
                }
                for (std::size_t i = 0; i < params.hidden_lateral.rows(); ++i) {
                    params.hidden_lateral(i, i) = 0.0;
                    for (std::size_t j = i + 1; j < params.hidden_lateral.cols(); ++j) {
                        const double avg =
                            0.5 * (params.hidden_lateral(i, j) + params.hidden_lateral(j, i));
                        params.hidden_lateral(i, j) = params.hidden_lateral(j, i) = avg;
                    }
                }
            }

            const double update_norm = cfg.learning_rate * std::sqrt(grad_sq);
            max_update_norm = std::max(max_update_norm, update_norm);
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.recon_error = sq_error_sum / (static_cast<double>(n) * data.dim);
        rec.grad_norm = grad_norm_sum / static_cast<double>(plan.batches.size());
        if (track_loglik) rec.loglik = bm_exact_loglik(params, data);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(rec);

        if (cfg.convergence_tol > 0.0 && max_update_norm < cfg.convergence_tol) break;
    }
    return {std::move(params), std::move(report)};
}

inline std::pair<BmParams, TrainReport> train_bm(const TrainConfig& cfg, const Dataset& data,
                                                 std::size_t hidden_dim,
                                                 bool lateral_learning = true) {
    RngStream init_rng(cfg.seed, stream_tag::init);
    BmParams params = make_bm(init_params(data.dim, hidden_dim, data.family, UnitFamily::Binary,
                                          cfg.init_scale, init_rng));
    return train_bm(std::move(params), cfg, data, lateral_learning);
}

} // namespace ebm
