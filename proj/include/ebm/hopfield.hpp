#pragma once

#include <cstddef>
#include <vector>

#include "ebm/errors.hpp"
#include "ebm/linalg.hpp"

namespace ebm {

// Value encoding of patterns and states. Dynamics are identical under both
// encodings: zero/one values are mapped to spins 2x-1 internally, so energy
// descent holds either way.
enum class HopfieldConvention {
    PlusMinusOne,
    ZeroOne,
};

struct HopfieldNet {
    std::size_t units = 0;
    Matrix weights; // symmetric, zero diagonal
    double threshold = 0.0;
    HopfieldConvention convention = HopfieldConvention::PlusMinusOne;
};

inline void validate(const HopfieldNet& net) {
    if (net.weights.rows() != net.units || net.weights.cols() != net.units)
        throw DimensionError("hopfield weights must be units x units");
    require_symmetric_hollow(net.weights, "hopfield weights");
}

namespace detail {

inline double to_spin(double x, HopfieldConvention c) {
    if (c == HopfieldConvention::ZeroOne) {
        if (x != 0.0 && x != 1.0) throw ValidationError("state value must be 0 or 1");
        return 2.0 * x - 1.0;
    }
    if (x != -1.0 && x != 1.0) throw ValidationError("state value must be -1 or +1");
    return x;
}

inline double from_spin(double s, HopfieldConvention c) {
    return c == HopfieldConvention::ZeroOne ? (s + 1.0) / 2.0 : s;
}

} // namespace detail

// Associative training: weights are the sum over patterns of pairwise spin
// products, with a zero diagonal. Zero/one patterns contribute
// (2x_i - 1)(2x_j - 1).
inline HopfieldNet hebbian_train(const std::vector<Vector>& patterns,
                                 HopfieldConvention convention, double threshold = 0.0) {
    if (patterns.empty()) throw ValidationError("hebbian_train: no patterns");
    const std::size_t d = patterns.front().size();
    HopfieldNet net;
    net.units = d;
    net.weights = Matrix(d, d);
    net.threshold = threshold;
    net.convention = convention;
    for (const Vector& pattern : patterns) {
        require_size(pattern, d, "hebbian_train: pattern");
        Vector spins(d);
        for (std::size_t i = 0; i < d; ++i) spins[i] = detail::to_spin(pattern[i], convention);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (i != j) net.weights(i, j) += spins[i] * spins[j];
    }
    return net;
}

// Threshold update of one unit: fires (+1 spin) when the weighted input
// reaches the threshold, with ties mapping to +1.
inline Vector update_unit(const HopfieldNet& net, const Vector& state, std::size_t i) {
    require_size(state, net.units, "update_unit: state");
    if (i >= net.units) throw DimensionError("update_unit: unit index out of range");
    double input = 0.0;
    for (std::size_t j = 0; j < net.units; ++j)
        input += net.weights(i, j) * detail::to_spin(state[j], net.convention);
    Vector next = state;
    next[i] = detail::from_spin(input >= net.threshold ? 1.0 : -1.0, net.convention);
    return next;
}

// Asynchronous recall: units updated in ascending order until a full sweep
// changes nothing or max_sweeps is exhausted.
inline Vector recall(const HopfieldNet& net, const Vector& probe, std::size_t max_sweeps) {
    require_size(probe, net.units, "recall: probe");
    Vector state = probe;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bool changed = false;
        for (std::size_t i = 0; i < net.units; ++i) {
            Vector next = update_unit(net, state, i);
            if (next[i] != state[i]) changed = true;
            state = std::move(next);
        }
        if (!changed) break;
    }
    return state;
}

inline bool is_fixed_point(const HopfieldNet& net, const Vector& state) {
    for (std::size_t i = 0; i < net.units; ++i)
        if (update_unit(net, state, i)[i] != state[i]) return false;
    return true;
}

// Pairwise energy -sum_{i<j} w_ij x_i x_j on spin values; zero/one states are
// mapped to spins first.
inline double hopfield_energy(const HopfieldNet& net, const Vector& state) {
    require_size(state, net.units, "hopfield_energy: state");
    Vector spins(net.units);
    for (std::size_t i = 0; i < net.units; ++i)
        spins[i] = detail::to_spin(state[i], net.convention);
    double e = 0.0;
    for (std::size_t i = 0; i < net.units; ++i)
        for (std::size_t j = i + 1; j < net.units; ++j)
            e -= net.weights(i, j) * spins[i] * spins[j];
    return e;
}

} // namespace ebm
