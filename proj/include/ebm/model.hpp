#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ebm/errors.hpp"
#include "ebm/linalg.hpp"
#include "ebm/rng.hpp"

namespace ebm {

// Value domain of a layer's units.
enum class UnitFamily {
    Binary,   // values in {0, 1}
    Gaussian, // finite reals, conditional variance fixed at 1
    Poisson,  // non-negative integer counts
};

inline const char* family_name(UnitFamily f) {
    switch (f) {
        case UnitFamily::Binary: return "binary";
        case UnitFamily::Gaussian: return "gaussian";
        case UnitFamily::Poisson: return "poisson";
    }
    return "?";
}

inline UnitFamily family_from_name(const std::string& s) {
    if (s == "binary") return UnitFamily::Binary;
    if (s == "gaussian") return UnitFamily::Gaussian;
    if (s == "poisson") return UnitFamily::Poisson;
    throw ParseError("unknown unit family '" + s + "'");
}

inline bool value_in_family(double v, UnitFamily f) {
    switch (f) {
        case UnitFamily::Binary: return v == 0.0 || v == 1.0;
        case UnitFamily::Gaussian: return std::isfinite(v);
        case UnitFamily::Poisson: return std::isfinite(v) && v >= 0.0 && v == std::floor(v);
    }
    return false;
}

// Two-layer model parameters: pairwise weights between the visible and hidden
// layers plus one bias per unit. Containers are treated as immutable values
// once built; trainers produce updated copies.
struct RbmParams {
    std::size_t visible_dim = 0;
    std::size_t hidden_dim = 0;
    Matrix weights;      // visible_dim x hidden_dim
    Vector visible_bias; // length visible_dim
    Vector hidden_bias;  // length hidden_dim
    UnitFamily visible_family = UnitFamily::Binary;
    UnitFamily hidden_family = UnitFamily::Binary;
    // Scale applied to Poisson rates; 1.0 leaves the normalized rates as-is.
    double poisson_total_count = 1.0;

    bool operator==(const RbmParams&) const = default;
};

inline void validate(const RbmParams& p) {
    if (p.visible_dim == 0 || p.hidden_dim == 0)
        throw DimensionError("model dimensions must be positive");
    if (p.weights.rows() != p.visible_dim || p.weights.cols() != p.hidden_dim)
        throw DimensionError("weight matrix shape does not match (visible_dim, hidden_dim)");
    if (p.visible_bias.size() != p.visible_dim || p.hidden_bias.size() != p.hidden_dim)
        throw DimensionError("bias length does not match layer dimension");
    if (!all_finite(p.weights) || !all_finite(p.visible_bias) || !all_finite(p.hidden_bias))
        throw InvariantError("model parameters must be finite");
}

// Boltzmann machine: adds symmetric zero-diagonal lateral links within each
// layer.
struct BmParams {
    RbmParams rbm;
    Matrix visible_lateral; // visible_dim x visible_dim
    Matrix hidden_lateral;  // hidden_dim x hidden_dim

    bool operator==(const BmParams&) const = default;
};

inline void require_symmetric_hollow(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) throw DimensionError(std::string(what) + " must be square");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (m(i, i) != 0.0)
            throw InvariantError(std::string(what) + " must have a zero diagonal");
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (m(i, j) != m(j, i))
                throw InvariantError(std::string(what) + " must be symmetric");
    }
}

inline void validate(const BmParams& p) {
    validate(p.rbm);
    if (p.visible_lateral.rows() != p.rbm.visible_dim)
        throw DimensionError("visible lateral matrix shape mismatch");
    if (p.hidden_lateral.rows() != p.rbm.hidden_dim)
        throw DimensionError("hidden lateral matrix shape mismatch");
    if (!all_finite(p.visible_lateral) || !all_finite(p.hidden_lateral))
        throw InvariantError("lateral weights must be finite");
    require_symmetric_hollow(p.visible_lateral, "visible lateral matrix");
    require_symmetric_hollow(p.hidden_lateral, "hidden lateral matrix");
}

// A batch of visible vectors with a declared value domain.
struct Dataset {
    std::size_t dim = 0;
    std::vector<Vector> rows;
    UnitFamily family = UnitFamily::Binary;

    std::size_t size() const { return rows.size(); }
};

inline void validate(const Dataset& data) {
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        if (data.rows[r].size() != data.dim)
            throw DimensionError("dataset row " + std::to_string(r) + " has wrong length");
        for (std::size_t j = 0; j < data.dim; ++j)
            if (!value_in_family(data.rows[r][j], data.family))
                throw ValidationError("dataset row " + std::to_string(r) + ", column " +
                                      std::to_string(j) + ": value " +
                                      std::to_string(data.rows[r][j]) + " is outside the " +
                                      family_name(data.family) + " domain");
    }
}

// Knobs shared by the gradient trainers.
struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t batch_size = 0; // 0 means full batch
    std::size_t cd_steps = 1;
    std::size_t max_epochs = 100;
    double init_scale = 0.01;
    std::uint64_t seed = 0;
    double convergence_tol = 0.0; // early stop when the update norm drops below
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::size_t threads = 1;
    bool record_loglik = false; // exact log-likelihood per epoch (small binary models)
    bool sample_hidden = false; // stack pre-training propagates samples instead of means
};

inline void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0)) throw ValidationError("learning_rate must be non-negative");
    if (cfg.cd_steps < 1) throw ValidationError("cd_steps must be at least 1");
    if (cfg.max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
    if (!(cfg.init_scale >= 0.0)) throw ValidationError("init_scale must be non-negative");
    if (!(cfg.convergence_tol >= 0.0)) throw ValidationError("convergence_tol must be non-negative");
}

// Fresh model: weights ~ N(0, init_scale^2) i.i.d., biases zero.
inline RbmParams init_params(std::size_t visible_dim, std::size_t hidden_dim,
                             UnitFamily visible_family, UnitFamily hidden_family,
                             double init_scale, RngStream& rng) {
    if (visible_dim == 0 || hidden_dim == 0)
        throw DimensionError("init_params: dimensions must be positive");
    if (!(init_scale >= 0.0))
        throw ValidationError("init_params: init_scale must be non-negative");
    RbmParams p;
    p.visible_dim = visible_dim;
    p.hidden_dim = hidden_dim;
    p.weights = Matrix(visible_dim, hidden_dim);
    for (std::size_t i = 0; i < visible_dim; ++i)
        for (std::size_t j = 0; j < hidden_dim; ++j) p.weights(i, j) = init_scale * rng.normal();
    p.visible_bias = Vector(visible_dim, 0.0);
    p.hidden_bias = Vector(hidden_dim, 0.0);
    p.visible_family = visible_family;
    p.hidden_family = hidden_family;
    return p;
}

// E(v, h) = -b.v - c.h - v'Wh
inline double energy(const RbmParams& p, const Vector& v, const Vector& h) {
    require_size(v, p.visible_dim, "energy: visible vector");
    require_size(h, p.hidden_dim, "energy: hidden vector");
    double e = -dot(p.visible_bias, v) - dot(p.hidden_bias, h);
    for (std::size_t i = 0; i < p.visible_dim; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p.hidden_dim; ++j) acc += p.weights(i, j) * h[j];
        e -= v[i] * acc;
    }
    return e;
}

namespace detail {
// Lateral-term energy without invariant checks, for enumeration inner loops.
inline double bm_energy_unchecked(const BmParams& p, const Vector& v, const Vector& h) {
    double e = energy(p.rbm, v, h);
    for (std::size_t i = 0; i < p.rbm.visible_dim; ++i)
        for (std::size_t j = 0; j < p.rbm.visible_dim; ++j)
            e -= v[i] * p.visible_lateral(i, j) * v[j];
    for (std::size_t i = 0; i < p.rbm.hidden_dim; ++i)
        for (std::size_t j = 0; j < p.rbm.hidden_dim; ++j)
            e -= h[i] * p.hidden_lateral(i, j) * h[j];
    return e;
}
} // namespace detail

// Full-machine energy with lateral terms: E - v'Lv - h'Jh. Defined so the
// lateral gradients of -E are exactly vv' and hh'.
inline double bm_energy(const BmParams& p, const Vector& v, const Vector& h) {
    validate(p);
    return detail::bm_energy_unchecked(p, v, h);
}

inline BmParams make_bm(RbmParams base) {
    BmParams p;
    p.visible_lateral = Matrix(base.visible_dim, base.visible_dim);
    p.hidden_lateral = Matrix(base.hidden_dim, base.hidden_dim);
    p.rbm = std::move(base);
    return p;
}

} // namespace ebm
