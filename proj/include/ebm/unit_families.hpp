#pragma once

#include <algorithm>
#include <cmath>

#include "ebm/model.hpp"
#include "ebm/rng.hpp"

namespace ebm {

// Per-unit conditional parameter vector. Its meaning depends on the family:
// success probability (binary), mean (gaussian) or rate (poisson). In all
// three families the entry is also the conditional mean of the unit.
using CondParams = Vector;

// Numerically stable logistic function: only exponentiates non-positive
// arguments, so it neither overflows nor returns NaN for |x| up to DBL_MAX.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Affine argument of the hidden conditionals: c + W'v.
inline Vector hidden_pre_activation(const RbmParams& p, const Vector& v) {
    require_size(v, p.visible_dim, "hidden_pre_activation");
    Vector out = mat_tvec(p.weights, v);
    for (std::size_t j = 0; j < p.hidden_dim; ++j) out[j] += p.hidden_bias[j];
    return out;
}

// Affine argument of the visible conditionals: b + Wh.
inline Vector visible_pre_activation(const RbmParams& p, const Vector& h) {
    require_size(h, p.hidden_dim, "visible_pre_activation");
    Vector out = mat_vec(p.weights, h);
    for (std::size_t i = 0; i < p.visible_dim; ++i) out[i] += p.visible_bias[i];
    return out;
}

// Elementwise success probabilities for binary units.
inline CondParams binary_cond_prob(const Vector& pre_activation) {
    CondParams out(pre_activation.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(pre_activation[i]);
    return out;
}

// Gaussian units: the conditional is Normal(pre_activation, 1); only the mean
// varies.
inline CondParams gaussian_cond_mean(const Vector& pre_activation) {
    return pre_activation;
}

// Poisson rates: softmax over the layer (max-subtracted), optionally scaled
// by total_count. With total_count = 1 the rates sum to 1.
inline CondParams poisson_rates(const Vector& pre_activation, double total_count = 1.0) {
    CondParams out(pre_activation.size());
    const double m = *std::max_element(pre_activation.begin(), pre_activation.end());
    double z = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(pre_activation[i] - m);
        z += out[i];
    }
    for (double& r : out) r *= total_count / z;
    return out;
}

inline CondParams poisson_cond_visible(const RbmParams& p, const Vector& h) {
    return poisson_rates(visible_pre_activation(p, h), p.poisson_total_count);
}

inline CondParams poisson_cond_hidden(const RbmParams& p, const Vector& v) {
    return poisson_rates(hidden_pre_activation(p, v), p.poisson_total_count);
}

// Family dispatch from pre-activations to conditional parameters.
inline CondParams layer_cond_params(UnitFamily family, const Vector& pre_activation,
                                    double total_count = 1.0) {
    switch (family) {
        case UnitFamily::Binary: return binary_cond_prob(pre_activation);
        case UnitFamily::Gaussian: return gaussian_cond_mean(pre_activation);
        case UnitFamily::Poisson: return poisson_rates(pre_activation, total_count);
    }
    throw UnsupportedFamilyError("layer_cond_params: unknown family");
}

// Conditional mean of the hidden layer given a visible vector. For every
// supported family the conditional parameter doubles as the mean.
inline Vector cond_mean_hidden(const RbmParams& p, const Vector& v) {
    return layer_cond_params(p.hidden_family, hidden_pre_activation(p, v),
                             p.poisson_total_count);
}

inline Vector cond_mean_visible(const RbmParams& p, const Vector& h) {
    return layer_cond_params(p.visible_family, visible_pre_activation(p, h),
                             p.poisson_total_count);
}

// Draw one value per unit from the family's conditional distribution.
inline Vector sample_units(UnitFamily family, const CondParams& cond, RngStream& rng) {
    Vector out(cond.size());
    switch (family) {
        case UnitFamily::Binary:
            for (std::size_t i = 0; i < cond.size(); ++i)
                out[i] = rng.bernoulli(cond[i]) ? 1.0 : 0.0;
            return out;
        case UnitFamily::Gaussian:
            for (std::size_t i = 0; i < cond.size(); ++i) out[i] = cond[i] + rng.normal();
            return out;
        case UnitFamily::Poisson:
            for (std::size_t i = 0; i < cond.size(); ++i)
                out[i] = static_cast<double>(rng.poisson(cond[i]));
            return out;
    }
    throw UnsupportedFamilyError("sample_units: unknown family");
}

} // namespace ebm
