#pragma once

#include <chrono>
#include <cstddef>
#include <utility>
#include <vector>

#include "ebm/model.hpp"
#include "ebm/rng.hpp"
#include "ebm/trainer.hpp"
#include "ebm/unit_families.hpp"

namespace ebm {

// Layer widths of the stack, input layer first. Every adjacent pair is
// trained as one two-layer model whose hidden side uses hidden_family.
struct DbnSpec {
    std::vector<std::size_t> layer_sizes;
    UnitFamily hidden_family = UnitFamily::Binary;
};

inline void validate(const DbnSpec& spec) {
    if (spec.layer_sizes.size() < 2)
        throw DimensionError("stack needs at least two layers");
    for (std::size_t s : spec.layer_sizes)
        if (s == 0) throw DimensionError("layer sizes must be positive");
}

struct DbnStack {
    std::vector<RbmParams> layers; // layer l maps width[l] -> width[l+1]
    std::vector<std::size_t> layer_sizes;

    bool operator==(const DbnStack&) const = default;
};

inline void validate(const DbnStack& stack) {
    if (stack.layers.empty()) throw DimensionError("empty stack");
    if (stack.layer_sizes.size() != stack.layers.size() + 1)
        throw DimensionError("layer size list does not match the stack depth");
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        validate(stack.layers[l]);
        if (stack.layers[l].visible_dim != stack.layer_sizes[l] ||
            stack.layers[l].hidden_dim != stack.layer_sizes[l + 1])
            throw DimensionError("stack layer " + std::to_string(l) + " shape breaks the chain");
    }
}

// Untrained stack with freshly initialized layer pairs; families chain so
// that each layer's visible side matches the previous hidden side.
inline DbnStack init_stack(const DbnSpec& spec, UnitFamily visible_family, double init_scale,
                           RngStream& rng) {
    validate(spec);
    DbnStack stack;
    stack.layer_sizes = spec.layer_sizes;
    UnitFamily current = visible_family;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        stack.layers.push_back(init_params(spec.layer_sizes[l], spec.layer_sizes[l + 1], current,
                                           spec.hidden_family, init_scale, rng));
        current = spec.hidden_family;
    }
    return stack;
}

// Greedy layer-wise pre-training. Each stage trains one layer pair on the
// current representations and then maps the representations up through the
// trained layer. The upward map is the deterministic conditional mean by
// default; cfg.sample_hidden switches to sampled states.
inline DbnStack pretrain(const DbnSpec& spec, const Dataset& data, const TrainConfig& cfg) {
    validate(spec);
    validate(cfg);
    validate(data);
    if (spec.layer_sizes.front() != data.dim)
        throw DimensionError("pretrain: first layer size must equal the data dimension");

    DbnStack stack;
    stack.layer_sizes = spec.layer_sizes;
    std::vector<Vector> reps = data.rows;
    UnitFamily current_family = data.family;

    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        Dataset stage;
        stage.dim = spec.layer_sizes[l];
        stage.rows = reps;
        stage.family = current_family;

        TrainConfig stage_cfg = cfg;
        // The first stage keeps the user's seed verbatim so a two-layer spec
        // reproduces a plain training run; deeper stages derive fresh seeds.
        if (l > 0) stage_cfg.seed = detail::combine64(cfg.seed, l);

        RngStream init_rng(stage_cfg.seed, stream_tag::init);
        RbmParams params = init_params(stage.dim, spec.layer_sizes[l + 1], current_family,
                                       spec.hidden_family, stage_cfg.init_scale, init_rng);
        auto [trained, report] =
            detail::train_rbm_impl(std::move(params), stage_cfg, stage, /*validate_data=*/l == 0);
        (void)report;

        if (cfg.sample_hidden) {
            RngStream up_master(stage_cfg.seed, stream_tag::generate);
            for (std::size_t r = 0; r < reps.size(); ++r) {
                RngStream row_rng = up_master.substream(r);
                reps[r] = sample_units(spec.hidden_family, cond_mean_hidden(trained, reps[r]),
                                       row_rng);
            }
        } else {
            for (Vector& row : reps) row = cond_mean_hidden(trained, row);
        }
        current_family = spec.hidden_family;
        stack.layers.push_back(std::move(trained));
    }
    return stack;
}

// Deterministic upward pass through the whole stack (conditional means).
inline Vector stack_up(const DbnStack& stack, const Vector& x) {
    Vector current = x;
    for (const RbmParams& layer : stack.layers) current = cond_mean_hidden(layer, current);
    return current;
}

// ---------------------------------------------------------------------------
// Feed-forward network used for fine-tuning the unrolled stack.
// ---------------------------------------------------------------------------

enum class Activation {
    Sigmoid,
    Identity,
};

inline Activation activation_for(UnitFamily family) {
    switch (family) {
        case UnitFamily::Binary: return Activation::Sigmoid;
        case UnitFamily::Gaussian: return Activation::Identity;
        case UnitFamily::Poisson: break;
    }
    throw UnsupportedFamilyError("no feed-forward activation for this family");
}

struct MlpLayer {
    Matrix weight; // in_dim x out_dim
    Vector bias;   // out_dim
    Activation activation = Activation::Sigmoid;

    bool operator==(const MlpLayer&) const = default;
};

struct Mlp {
    std::vector<MlpLayer> layers;
    std::size_t code_layer = 0; // outputs of this many layers form the code

    bool operator==(const Mlp&) const = default;
};

inline void validate(const Mlp& mlp) {
    if (mlp.layers.empty()) throw DimensionError("empty network");
    if (mlp.code_layer == 0 || mlp.code_layer > mlp.layers.size())
        throw DimensionError("code layer index out of range");
    for (std::size_t l = 0; l + 1 < mlp.layers.size(); ++l)
        if (mlp.layers[l].weight.cols() != mlp.layers[l + 1].weight.rows())
            throw DimensionError("network layer " + std::to_string(l) + " shape breaks the chain");
    for (const MlpLayer& layer : mlp.layers) {
        if (layer.bias.size() != layer.weight.cols())
            throw DimensionError("network bias length mismatch");
        if (!all_finite(layer.weight) || !all_finite(layer.bias))
            throw InvariantError("network parameters must be finite");
    }
}

// Mirror the trained stack into an autoencoder: encoder layers keep each
// trained weight matrix and hidden bias; decoder layers are the transposed
// weights in reverse order with the corresponding visible biases.
inline Mlp unroll_autoencoder(const DbnStack& stack) {
    validate(stack);
    Mlp mlp;
    for (const RbmParams& layer : stack.layers) {
        MlpLayer enc;
        enc.weight = layer.weights;
        enc.bias = layer.hidden_bias;
        enc.activation = activation_for(layer.hidden_family);
        mlp.layers.push_back(std::move(enc));
    }
    for (std::size_t l = stack.layers.size(); l-- > 0;) {
        MlpLayer dec;
        dec.weight = transpose(stack.layers[l].weights);
        dec.bias = stack.layers[l].visible_bias;
        dec.activation = activation_for(stack.layers[l].visible_family);
        mlp.layers.push_back(std::move(dec));
    }
    mlp.code_layer = stack.layers.size();
    return mlp;
}

namespace detail {

inline Vector apply_activation(Activation act, Vector pre) {
    if (act == Activation::Sigmoid)
        for (double& x : pre) x = sigmoid(x);
    return pre;
}

} // namespace detail

inline Vector mlp_layer_forward(const MlpLayer& layer, const Vector& input) {
    Vector pre = mat_tvec(layer.weight, input);
    add_scaled(pre, layer.bias, 1.0);
    return detail::apply_activation(layer.activation, std::move(pre));
}

// Deterministic forward pass through the first `count` layers.
inline Vector mlp_forward(const Mlp& mlp, const Vector& x, std::size_t count) {
    Vector current = x;
    for (std::size_t l = 0; l < count; ++l) current = mlp_layer_forward(mlp.layers[l], current);
    return current;
}

inline Vector encode(const Mlp& mlp, const Vector& x) {
    return mlp_forward(mlp, x, mlp.code_layer);
}

inline Vector reconstruct(const Mlp& mlp, const Vector& x) {
    return mlp_forward(mlp, x, mlp.layers.size());
}

struct MlpGradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

// Batch loss: mean over rows of 0.5 * squared reconstruction error. The
// gradients below differentiate exactly this quantity.
inline double mlp_loss(const Mlp& mlp, const std::vector<Vector>& batch) {
    if (batch.empty()) throw ValidationError("mlp_loss: empty batch");
    double total = 0.0;
    for (const Vector& x : batch) total += 0.5 * squared_distance(reconstruct(mlp, x), x);
    return total / static_cast<double>(batch.size());
}

namespace detail {

struct MlpBatchResult {
    MlpGradients grads;
    double sq_error_sum = 0.0; // sum over rows of ||f(x) - x||^2
};

// Reverse-mode pass through the sigmoid/identity layers.
inline MlpBatchResult mlp_batch_gradients(const Mlp& mlp, const std::vector<Vector>& batch) {
    MlpBatchResult out;
    out.grads.weights.reserve(mlp.layers.size());
    out.grads.biases.reserve(mlp.layers.size());
    for (const MlpLayer& layer : mlp.layers) {
        out.grads.weights.emplace_back(layer.weight.rows(), layer.weight.cols());
        out.grads.biases.emplace_back(layer.bias.size(), 0.0);
    }

    std::vector<Vector> activations(mlp.layers.size() + 1);
    for (const Vector& x : batch) {
        activations[0] = x;
        for (std::size_t l = 0; l < mlp.layers.size(); ++l)
            activations[l + 1] = mlp_layer_forward(mlp.layers[l], activations[l]);

        out.sq_error_sum += squared_distance(activations.back(), x);

        Vector delta = activations.back();
        add_scaled(delta, x, -1.0);
        for (std::size_t l = mlp.layers.size(); l-- > 0;) {
            if (mlp.layers[l].activation == Activation::Sigmoid) {
                const Vector& a = activations[l + 1];
                for (std::size_t j = 0; j < delta.size(); ++j) delta[j] *= a[j] * (1.0 - a[j]);
            }
            add_outer(out.grads.weights[l], activations[l], delta);
            add_scaled(out.grads.biases[l], delta, 1.0);
            if (l > 0) delta = mat_vec(mlp.layers[l].weight, delta);
        }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (Matrix& m : out.grads.weights)
        for (double& v : m.data()) v *= inv;
    for (Vector& b : out.grads.biases)
        for (double& v : b) v *= inv;
    return out;
}

} // namespace detail

inline MlpGradients mlp_gradients(const Mlp& mlp, const std::vector<Vector>& batch) {
    if (batch.empty()) throw ValidationError("mlp_gradients: empty batch");
    return detail::mlp_batch_gradients(mlp, batch).grads;
}

// Mini-batch gradient descent on the reconstruction loss.
inline std::pair<Mlp, TrainReport> finetune(Mlp mlp, const Dataset& data, const TrainConfig& cfg) {
    validate(mlp);
    validate(cfg);
    if (data.dim != mlp.layers.front().weight.rows())
        throw DimensionError("finetune: dataset dimension does not match the input layer");
    const std::size_t n = data.size();
    if (n == 0) throw ValidationError("finetune: empty dataset");
    const std::size_t batch_size = cfg.batch_size == 0 ? n : cfg.batch_size;
    if (batch_size > n) throw ValidationError("finetune: batch size exceeds dataset size");

    RngStream shuffle_master(cfg.seed, stream_tag::shuffle);
    TrainReport report;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream shuffle_rng = shuffle_master.substream(epoch);
        const detail::BatchPlan plan = detail::plan_epoch(n, batch_size, shuffle_rng);

        double sq_error_sum = 0.0;
        double grad_norm_sum = 0.0;
        double max_update_norm = 0.0;
        for (const auto& idx : plan.batches) {
            std::vector<Vector> batch;
            batch.reserve(idx.size());
            for (std::size_t r : idx) batch.push_back(data.rows[r]);

            detail::MlpBatchResult result = detail::mlp_batch_gradients(mlp, batch);
            sq_error_sum += result.sq_error_sum;

            double grad_sq = 0.0;
            for (const Matrix& m : result.grads.weights) grad_sq += squared_norm(m);
            for (const Vector& b : result.grads.biases) grad_sq += squared_norm(b);
            grad_norm_sum += std::sqrt(grad_sq);

            for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
                add_scaled(mlp.layers[l].weight, result.grads.weights[l], -cfg.learning_rate);
                add_scaled(mlp.layers[l].bias, result.grads.biases[l], -cfg.learning_rate);
            }
            max_update_norm =
                std::max(max_update_norm, cfg.learning_rate * std::sqrt(grad_sq));
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.recon_error =
            sq_error_sum / (static_cast<double>(n) * mlp.layers.front().weight.rows());
        rec.grad_norm = grad_norm_sum / static_cast<double>(plan.batches.size());
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(rec);

        if (cfg.convergence_tol > 0.0 && max_update_norm < cfg.convergence_tol) break;
    }
    return {std::move(mlp), std::move(report)};
}

// Mean squared reconstruction error per element over a dataset.
inline double reconstruction_mse(const Mlp& mlp, const Dataset& data) {
    if (data.size() == 0) throw ValidationError("reconstruction_mse: empty dataset");
    double total = 0.0;
    for (const Vector& x : data.rows) total += squared_distance(reconstruct(mlp, x), x);
    return total / (static_cast<double>(data.size()) * data.dim);
}

} // namespace ebm
