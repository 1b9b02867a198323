#pragma once

#include <cstddef>
#include <utility>

#include "ebm/model.hpp"
#include "ebm/rng.hpp"
#include "ebm/unit_families.hpp"

namespace ebm {

struct ChainState {
    Vector visible;
    Vector hidden;
    std::size_t sweep_index = 0;
};

// One block sweep: the entire hidden layer is sampled from its conditional
// given v, then the entire visible layer is sampled given that hidden sample.
// Returns the hidden sample and the new visible state, in that order.
inline std::pair<Vector, Vector> gibbs_sweep_rbm(const RbmParams& p, const Vector& v,
                                                 RngStream& rng) {
    const Vector hidden_cond = cond_mean_hidden(p, v);
    Vector h = sample_units(p.hidden_family, hidden_cond, rng);
    const Vector visible_cond = cond_mean_visible(p, h);
    Vector v_next = sample_units(p.visible_family, visible_cond, rng);
    return {std::move(h), std::move(v_next)};
}

// k block sweeps starting from v0. The returned state pairs the visible
// sample of the final sweep with the hidden sample that generated it.
inline ChainState gibbs_chain(const RbmParams& p, const Vector& v0, std::size_t k_sweeps,
                              RngStream& rng) {
    if (k_sweeps < 1) throw ValidationError("gibbs_chain: k_sweeps must be at least 1");
    ChainState state;
    state.visible = v0;
    for (std::size_t s = 0; s < k_sweeps; ++s) {
        auto [h, v_next] = gibbs_sweep_rbm(p, state.visible, rng);
        state.hidden = std::move(h);
        state.visible = std::move(v_next);
        state.sweep_index = s + 1;
    }
    return state;
}

// Lateral links break the layerwise factorization, so the full machine is
// sampled one unit at a time: all visible units in ascending order, then all
// hidden units. Binary units only.
inline void gibbs_sweep_bm(const BmParams& p, Vector& v, Vector& h, RngStream& rng) {
    if (p.rbm.visible_family != UnitFamily::Binary || p.rbm.hidden_family != UnitFamily::Binary)
        throw UnsupportedFamilyError("gibbs_sweep_bm: lateral sampling is binary-only");
    require_size(v, p.rbm.visible_dim, "gibbs_sweep_bm: visible");
    require_size(h, p.rbm.hidden_dim, "gibbs_sweep_bm: hidden");

    const std::size_t d = p.rbm.visible_dim;
    const std::size_t pd = p.rbm.hidden_dim;
    for (std::size_t i = 0; i < d; ++i) {
        double arg = p.rbm.visible_bias[i];
        for (std::size_t j = 0; j < pd; ++j) arg += p.rbm.weights(i, j) * h[j];
        // The lateral row enters twice (v'Lv counts each pair in both orders).
        for (std::size_t a = 0; a < d; ++a) arg += 2.0 * p.visible_lateral(i, a) * v[a];
        v[i] = rng.bernoulli(sigmoid(arg)) ? 1.0 : 0.0;
    }
    for (std::size_t j = 0; j < pd; ++j) {
        double arg = p.rbm.hidden_bias[j];
        for (std::size_t i = 0; i < d; ++i) arg += p.rbm.weights(i, j) * v[i];
        for (std::size_t a = 0; a < pd; ++a) arg += 2.0 * p.hidden_lateral(j, a) * h[a];
        h[j] = rng.bernoulli(sigmoid(arg)) ? 1.0 : 0.0;
    }
}

// Random starting point for a chain, matching each family's conditional at
// zero pre-activation.
inline Vector random_visible_init(const RbmParams& p, RngStream& rng) {
    switch (p.visible_family) {
        case UnitFamily::Binary: {
            Vector v(p.visible_dim);
            for (double& x : v) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
            return v;
        }
        case UnitFamily::Gaussian: {
            Vector v(p.visible_dim);
            for (double& x : v) x = rng.normal();
            return v;
        }
        case UnitFamily::Poisson: {
            Vector v(p.visible_dim);
            const double rate = p.poisson_total_count / static_cast<double>(p.visible_dim);
            for (double& x : v) x = static_cast<double>(rng.poisson(rate));
            return v;
        }
    }
    throw UnsupportedFamilyError("random_visible_init: unknown family");
}

// Draw a dataset from one persistent chain: discard burn_in sweeps, then emit
// every thin-th visible state.
inline Dataset generate(const RbmParams& p, std::size_t n_samples, std::size_t burn_in,
                        std::size_t thin, RngStream& rng) {
    validate(p);
    if (thin < 1) throw ValidationError("generate: thin must be at least 1");
    Dataset out;
    out.dim = p.visible_dim;
    out.family = p.visible_family;
    if (n_samples == 0) return out;
    out.rows.reserve(n_samples);

    Vector v = random_visible_init(p, rng);
    for (std::size_t s = 0; s < burn_in; ++s) v = gibbs_sweep_rbm(p, v, rng).second;
    while (out.rows.size() < n_samples) {
        for (std::size_t s = 0; s < thin; ++s) v = gibbs_sweep_rbm(p, v, rng).second;
        out.rows.push_back(v);
    }
    return out;
}

inline Dataset generate_bm(const BmParams& p, std::size_t n_samples, std::size_t burn_in,
                           std::size_t thin, RngStream& rng) {
    validate(p);
    if (thin < 1) throw ValidationError("generate_bm: thin must be at least 1");
    Dataset out;
    out.dim = p.rbm.visible_dim;
    out.family = p.rbm.visible_family;
    if (n_samples == 0) return out;
    out.rows.reserve(n_samples);

    Vector v = random_visible_init(p.rbm, rng);
    Vector h(p.rbm.hidden_dim, 0.0);
    for (std::size_t s = 0; s < burn_in; ++s) gibbs_sweep_bm(p, v, h, rng);
    while (out.rows.size() < n_samples) {
        for (std::size_t s = 0; s < thin; ++s) gibbs_sweep_bm(p, v, h, rng);
        out.rows.push_back(v);
    }
    return out;
}

} // namespace ebm
