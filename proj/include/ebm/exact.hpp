#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ebm/model.hpp"

namespace ebm {

// Hard cap on exhaustive enumeration: beyond this many total binary units the
// oracle refuses instead of silently approximating.
inline constexpr std::size_t kEnumerationCapBits = 24;

inline void require_within_cap(std::size_t bits, const char* what) {
    if (bits > kEnumerationCapBits)
        throw CapacityError(std::string(what) + ": " + std::to_string(bits) +
                            " binary units exceed the enumeration cap of " +
                            std::to_string(kEnumerationCapBits));
}

inline void require_binary_families(const RbmParams& p, const char* what) {
    if (p.visible_family != UnitFamily::Binary || p.hidden_family != UnitFamily::Binary)
        throw UnsupportedFamilyError(std::string(what) +
                                     ": exact enumeration needs binary families");
}

// Bit j of the mask is the value of unit j.
inline void fill_bits(std::uint64_t mask, Vector& out) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<double>((mask >> j) & 1u);
}

inline Vector bits_to_vector(std::uint64_t mask, std::size_t n) {
    Vector out(n);
    fill_bits(mask, out);
    return out;
}

// Streaming log-sum-exp accumulator; O(1) memory, deterministic in the order
// of add() calls.
class LogSumExp {
public:
    void add(double x) {
        if (x <= max_) {
            sum_ += std::exp(x - max_);
        } else {
            sum_ = sum_ * std::exp(max_ - x) + 1.0;
            max_ = x;
        }
    }
    double value() const {
        if (sum_ <= 0.0) return -std::numeric_limits<double>::infinity();
        return max_ + std::log(sum_);
    }

private:
    double max_ = -std::numeric_limits<double>::infinity();
    double sum_ = 0.0;
};

// ---------------------------------------------------------------------------
// Thermodynamic quantities of a finite-state Boltzmann distribution.
// ---------------------------------------------------------------------------

struct ThermoReport {
    double beta = 1.0;
    double log_partition = 0.0;
    double partition = 1.0;
    // Undefined at beta = 0 (the distribution is uniform but -ln(Z)/beta is not
    // a number); reported empty in that case.
    std::optional<double> free_energy;
    double internal_energy = 0.0;
    double entropy = 0.0;
};

// Probabilities exp(-beta E_i) / Z for a value-indexed energy table.
inline Vector boltzmann_distribution(const Vector& energies, double beta) {
    if (energies.empty()) throw ValidationError("boltzmann_distribution: empty energy table");
    if (!(beta >= 0.0)) throw ValidationError("boltzmann_distribution: beta must be >= 0");
    LogSumExp lse;
    for (double e : energies) lse.add(-beta * e);
    const double log_z = lse.value();
    Vector probs(energies.size());
    for (std::size_t i = 0; i < energies.size(); ++i)
        probs[i] = std::exp(-beta * energies[i] - log_z);
    return probs;
}

inline ThermoReport boltzmann_quantities(const Vector& energies, double beta) {
    if (energies.empty()) throw ValidationError("boltzmann_quantities: empty energy table");
    if (!(beta >= 0.0)) throw ValidationError("boltzmann_quantities: beta must be >= 0");
    for (double e : energies)
        if (!std::isfinite(e)) throw ValidationError("boltzmann_quantities: non-finite energy");

    ThermoReport report;
    report.beta = beta;
    LogSumExp lse;
    for (double e : energies) lse.add(-beta * e);
    report.log_partition = lse.value();
    report.partition = std::exp(report.log_partition);
    if (beta > 0.0) report.free_energy = -report.log_partition / beta;

    double internal = 0.0;
    double entropy = 0.0;
    for (double e : energies) {
        const double log_p = -beta * e - report.log_partition;
        const double p = std::exp(log_p);
        internal += p * e;
        if (p > 0.0) entropy -= p * log_p;
    }
    report.internal_energy = internal;
    report.entropy = entropy;
    return report;
}

// ---------------------------------------------------------------------------
// Pairwise spin system on {-1, +1}.
// ---------------------------------------------------------------------------

struct IsingModel {
    struct Coupling {
        std::size_t i = 0;
        std::size_t j = 0;
        double strength = 0.0;
    };
    std::size_t num_sites = 0;
    std::vector<Coupling> couplings;
};

inline void validate(const IsingModel& model) {
    std::vector<std::uint64_t> seen;
    for (const auto& c : model.couplings) {
        if (c.i == c.j) throw InvariantError("ising coupling links a site to itself");
        if (c.i >= model.num_sites || c.j >= model.num_sites)
            throw DimensionError("ising coupling references an unknown site");
        const std::uint64_t key = (std::uint64_t(std::min(c.i, c.j)) << 32) | std::max(c.i, c.j);
        for (std::uint64_t k : seen)
            if (k == key) throw InvariantError("duplicate ising coupling pair");
        seen.push_back(key);
    }
}

// E(x) = -sum over declared pairs of J_ij x_i x_j.
inline double ising_energy(const IsingModel& model, const Vector& spins) {
    require_size(spins, model.num_sites, "ising_energy: spins");
    for (double s : spins)
        if (s != 1.0 && s != -1.0)
            throw ValidationError("ising_energy: spins must be -1 or +1");
    double e = 0.0;
    for (const auto& c : model.couplings) e -= c.strength * spins[c.i] * spins[c.j];
    return e;
}

inline Vector spins_from_mask(std::uint64_t mask, std::size_t n) {
    Vector out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = ((mask >> j) & 1u) ? 1.0 : -1.0;
    return out;
}

// Energy of every spin configuration, indexed by bitmask (bit set = +1 spin).
inline Vector ising_energy_table(const IsingModel& model) {
    validate(model);
    require_within_cap(model.num_sites, "ising_energy_table");
    const std::uint64_t count = std::uint64_t{1} << model.num_sites;
    Vector table(count);
    for (std::uint64_t m = 0; m < count; ++m)
        table[m] = ising_energy(model, spins_from_mask(m, model.num_sites));
    return table;
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration over binary two-layer models. Everything below works
// directly from the energy function, one configuration at a time; none of it
// reuses the factorized conditional formulas it is meant to check.
// ---------------------------------------------------------------------------

namespace detail {

template <class EnergyFn>
double log_partition_impl(std::size_t d, std::size_t p, EnergyFn&& efn) {
    LogSumExp lse;
    Vector v(d), h(p);
    const std::uint64_t nv = std::uint64_t{1} << d;
    const std::uint64_t nh = std::uint64_t{1} << p;
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        fill_bits(vm, v);
        for (std::uint64_t hm = 0; hm < nh; ++hm) {
            fill_bits(hm, h);
            lse.add(-efn(v, h));
        }
    }
    return lse.value();
}

template <class EnergyFn>
double log_unnormalized_marginal_impl(std::size_t p, const Vector& v, EnergyFn&& efn) {
    LogSumExp lse;
    Vector h(p);
    const std::uint64_t nh = std::uint64_t{1} << p;
    for (std::uint64_t hm = 0; hm < nh; ++hm) {
        fill_bits(hm, h);
        lse.add(-efn(v, h));
    }
    return lse.value();
}

template <class EnergyFn>
Vector cond_hidden_table_impl(std::size_t p, const Vector& v, EnergyFn&& efn) {
    const std::uint64_t nh = std::uint64_t{1} << p;
    Vector log_w(nh);
    LogSumExp lse;
    Vector h(p);
    for (std::uint64_t hm = 0; hm < nh; ++hm) {
        fill_bits(hm, h);
        log_w[hm] = -efn(v, h);
        lse.add(log_w[hm]);
    }
    const double log_z = lse.value();
    Vector probs(nh);
    for (std::uint64_t hm = 0; hm < nh; ++hm) probs[hm] = std::exp(log_w[hm] - log_z);
    return probs;
}

} // namespace detail

inline double rbm_log_partition(const RbmParams& p) {
    validate(p);
    require_binary_families(p, "rbm_log_partition");
    require_within_cap(p.visible_dim + p.hidden_dim, "rbm_log_partition");
    return detail::log_partition_impl(
        p.visible_dim, p.hidden_dim,
        [&](const Vector& v, const Vector& h) { return energy(p, v, h); });
}

inline double rbm_partition(const RbmParams& p) { return std::exp(rbm_log_partition(p)); }

inline double bm_log_partition(const BmParams& p) {
    validate(p);
    require_binary_families(p.rbm, "bm_log_partition");
    require_within_cap(p.rbm.visible_dim + p.rbm.hidden_dim, "bm_log_partition");
    return detail::log_partition_impl(
        p.rbm.visible_dim, p.rbm.hidden_dim,
        [&](const Vector& v, const Vector& h) { return detail::bm_energy_unchecked(p, v, h); });
}

inline double exact_joint(const RbmParams& p, const Vector& v, const Vector& h) {
    return std::exp(-energy(p, v, h) - rbm_log_partition(p));
}

inline double bm_exact_joint(const BmParams& p, const Vector& v, const Vector& h) {
    return std::exp(-bm_energy(p, v, h) - bm_log_partition(p));
}

inline double exact_marginal_visible(const RbmParams& p, const Vector& v) {
    require_size(v, p.visible_dim, "exact_marginal_visible");
    const double log_num = detail::log_unnormalized_marginal_impl(
        p.hidden_dim, v, [&](const Vector& vv, const Vector& h) { return energy(p, vv, h); });
    return std::exp(log_num - rbm_log_partition(p));
}

inline double bm_exact_marginal_visible(const BmParams& p, const Vector& v) {
    require_size(v, p.rbm.visible_dim, "bm_exact_marginal_visible");
    const double log_num = detail::log_unnormalized_marginal_impl(
        p.rbm.hidden_dim, v,
        [&](const Vector& vv, const Vector& h) { return detail::bm_energy_unchecked(p, vv, h); });
    return std::exp(log_num - bm_log_partition(p));
}

// Full conditional table over hidden configurations for a fixed visible
// vector, indexed by hidden bitmask.
inline Vector exact_cond_hidden(const RbmParams& p, const Vector& v) {
    validate(p);
    require_binary_families(p, "exact_cond_hidden");
    require_within_cap(p.hidden_dim, "exact_cond_hidden");
    require_size(v, p.visible_dim, "exact_cond_hidden");
    return detail::cond_hidden_table_impl(
        p.hidden_dim, v, [&](const Vector& vv, const Vector& h) { return energy(p, vv, h); });
}

inline Vector bm_exact_cond_hidden(const BmParams& p, const Vector& v) {
    validate(p);
    require_binary_families(p.rbm, "bm_exact_cond_hidden");
    require_within_cap(p.rbm.hidden_dim, "bm_exact_cond_hidden");
    require_size(v, p.rbm.visible_dim, "bm_exact_cond_hidden");
    return detail::cond_hidden_table_impl(
        p.rbm.hidden_dim, v,
        [&](const Vector& vv, const Vector& h) { return detail::bm_energy_unchecked(p, vv, h); });
}

// Marginal distribution over all visible configurations, indexed by bitmask.
inline Vector exact_marginal_table(const RbmParams& p) {
    validate(p);
    require_binary_families(p, "exact_marginal_table");
    require_within_cap(p.visible_dim + p.hidden_dim, "exact_marginal_table");
    const double log_z = rbm_log_partition(p);
    const std::uint64_t nv = std::uint64_t{1} << p.visible_dim;
    Vector out(nv);
    Vector v(p.visible_dim);
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        fill_bits(vm, v);
        const double log_num = detail::log_unnormalized_marginal_impl(
            p.hidden_dim, v, [&](const Vector& vv, const Vector& h) { return energy(p, vv, h); });
        out[vm] = std::exp(log_num - log_z);
    }
    return out;
}

inline Vector bm_exact_marginal_table(const BmParams& p) {
    validate(p);
    require_binary_families(p.rbm, "bm_exact_marginal_table");
    require_within_cap(p.rbm.visible_dim + p.rbm.hidden_dim, "bm_exact_marginal_table");
    const double log_z = bm_log_partition(p);
    const std::uint64_t nv = std::uint64_t{1} << p.rbm.visible_dim;
    Vector out(nv);
    Vector v(p.rbm.visible_dim);
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        fill_bits(vm, v);
        const double log_num = detail::log_unnormalized_marginal_impl(
            p.rbm.hidden_dim, v,
            [&](const Vector& vv, const Vector& h) { return detail::bm_energy_unchecked(p, vv, h); });
        out[vm] = std::exp(log_num - log_z);
    }
    return out;
}

// Joint distribution over (v, h) configurations, indexed as vm * 2^p + hm.
inline Vector exact_joint_table(const RbmParams& p) {
    validate(p);
    require_binary_families(p, "exact_joint_table");
    require_within_cap(p.visible_dim + p.hidden_dim, "exact_joint_table");
    const double log_z = rbm_log_partition(p);
    const std::uint64_t nv = std::uint64_t{1} << p.visible_dim;
    const std::uint64_t nh = std::uint64_t{1} << p.hidden_dim;
    Vector out(nv * nh);
    Vector v(p.visible_dim), h(p.hidden_dim);
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        fill_bits(vm, v);
        for (std::uint64_t hm = 0; hm < nh; ++hm) {
            fill_bits(hm, h);
            out[vm * nh + hm] = std::exp(-energy(p, v, h) - log_z);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact log-likelihood and its gradient.
// ---------------------------------------------------------------------------

inline double exact_loglik(const RbmParams& p, const Dataset& data) {
    validate(p);
    require_binary_families(p, "exact_loglik");
    require_within_cap(p.visible_dim + p.hidden_dim, "exact_loglik");
    if (data.dim != p.visible_dim) throw DimensionError("exact_loglik: dataset dimension");
    const double log_z = rbm_log_partition(p);
    double ll = 0.0;
    for (const Vector& v : data.rows) {
        ll += detail::log_unnormalized_marginal_impl(
            p.hidden_dim, v, [&](const Vector& vv, const Vector& h) { return energy(p, vv, h); });
    }
    return ll - static_cast<double>(data.size()) * log_z;
}

inline double bm_exact_loglik(const BmParams& p, const Dataset& data) {
    validate(p);
    require_binary_families(p.rbm, "bm_exact_loglik");
    require_within_cap(p.rbm.visible_dim + p.rbm.hidden_dim, "bm_exact_loglik");
    if (data.dim != p.rbm.visible_dim) throw DimensionError("bm_exact_loglik: dataset dimension");
    const double log_z = bm_log_partition(p);
    double ll = 0.0;
    for (const Vector& v : data.rows) {
        ll += detail::log_unnormalized_marginal_impl(
            p.rbm.hidden_dim, v,
            [&](const Vector& vv, const Vector& h) { return detail::bm_energy_unchecked(p, vv, h); });
    }
    return ll - static_cast<double>(data.size()) * log_z;
}

// First and second moments under the enumerated joint distribution.
struct JointMoments {
    Matrix visible_hidden; // E[v h']
    Vector visible;        // E[v]
    Vector hidden;         // E[h]
    Matrix visible_visible; // E[v v']
    Matrix hidden_hidden;   // E[h h']
};

namespace detail {

template <class EnergyFn>
JointMoments joint_moments_impl(std::size_t d, std::size_t p, EnergyFn&& efn) {
    const double log_z = log_partition_impl(d, p, efn);
    JointMoments m;
    m.visible_hidden = Matrix(d, p);
    m.visible = Vector(d, 0.0);
    m.hidden = Vector(p, 0.0);
    m.visible_visible = Matrix(d, d);
    m.hidden_hidden = Matrix(p, p);
    Vector v(d), h(p);
    const std::uint64_t nv = std::uint64_t{1} << d;
    const std::uint64_t nh = std::uint64_t{1} << p;
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        fill_bits(vm, v);
        for (std::uint64_t hm = 0; hm < nh; ++hm) {
            fill_bits(hm, h);
            const double prob = std::exp(-efn(v, h) - log_z);
            add_outer(m.visible_hidden, v, h, prob);
            add_scaled(m.visible, v, prob);
            add_scaled(m.hidden, h, prob);
            add_outer(m.visible_visible, v, v, prob);
            add_outer(m.hidden_hidden, h, h, prob);
        }
    }
    return m;
}

} // namespace detail

inline JointMoments exact_joint_moments(const RbmParams& p) {
    validate(p);
    require_binary_families(p, "exact_joint_moments");
    require_within_cap(p.visible_dim + p.hidden_dim, "exact_joint_moments");
    return detail::joint_moments_impl(
        p.visible_dim, p.hidden_dim,
        [&](const Vector& v, const Vector& h) { return energy(p, v, h); });
}

inline JointMoments bm_exact_joint_moments(const BmParams& p) {
    validate(p);
    require_binary_families(p.rbm, "bm_exact_joint_moments");
    require_within_cap(p.rbm.visible_dim + p.rbm.hidden_dim, "bm_exact_joint_moments");
    return detail::joint_moments_impl(
        p.rbm.visible_dim, p.rbm.hidden_dim,
        [&](const Vector& v, const Vector& h) { return detail::bm_energy_unchecked(p, v, h); });
}

// Exact gradient containers; the lateral blocks are empty for a plain
// two-layer model.
struct LoglikGradients {
    Matrix weights;
    Vector visible_bias;
    Vector hidden_bias;
    Matrix visible_lateral;
    Matrix hidden_lateral;
};

namespace detail {

// Conditional hidden mean and second moment for one visible vector, by
// enumeration of the conditional table.
template <class EnergyFn>
void accumulate_positive_phase(std::size_t p_dim, const Vector& v, EnergyFn&& efn,
                               Vector& mean_out, Matrix* second_out) {
    const Vector table = cond_hidden_table_impl(p_dim, v, efn);
    Vector h(p_dim);
    std::fill(mean_out.begin(), mean_out.end(), 0.0);
    if (second_out)
        std::fill(second_out->data().begin(), second_out->data().end(), 0.0);
    for (std::uint64_t hm = 0; hm < table.size(); ++hm) {
        fill_bits(hm, h);
        add_scaled(mean_out, h, table[hm]);
        if (second_out) add_outer(*second_out, h, h, table[hm]);
    }
}

} // namespace detail

// Positive phase from enumerated conditional expectations, negative phase from
// enumerated joint expectations.
inline LoglikGradients exact_loglik_grad(const RbmParams& p, const Dataset& data) {
    validate(p);
    require_binary_families(p, "exact_loglik_grad");
    require_within_cap(p.visible_dim + p.hidden_dim, "exact_loglik_grad");
    if (data.dim != p.visible_dim) throw DimensionError("exact_loglik_grad: dataset dimension");

    LoglikGradients g;
    g.weights = Matrix(p.visible_dim, p.hidden_dim);
    g.visible_bias = Vector(p.visible_dim, 0.0);
    g.hidden_bias = Vector(p.hidden_dim, 0.0);

    const auto efn = [&](const Vector& v, const Vector& h) { return energy(p, v, h); };
    Vector hidden_mean(p.hidden_dim);
    for (const Vector& v : data.rows) {
        detail::accumulate_positive_phase(p.hidden_dim, v, efn, hidden_mean, nullptr);
        add_outer(g.weights, v, hidden_mean);
        add_scaled(g.visible_bias, v, 1.0);
        add_scaled(g.hidden_bias, hidden_mean, 1.0);
    }

    const JointMoments m = exact_joint_moments(p);
    const double n = static_cast<double>(data.size());
    add_scaled(g.weights, m.visible_hidden, -n);
    add_scaled(g.visible_bias, m.visible, -n);
    add_scaled(g.hidden_bias, m.hidden, -n);
    return g;
}

// Gradient of the full-machine log-likelihood. The lateral blocks are the
// free-parameter gradients with the diagonal zeroed (the diagonal is not a
// parameter).
inline LoglikGradients bm_exact_loglik_grad(const BmParams& p, const Dataset& data) {
    validate(p);
    require_binary_families(p.rbm, "bm_exact_loglik_grad");
    require_within_cap(p.rbm.visible_dim + p.rbm.hidden_dim, "bm_exact_loglik_grad");
    if (data.dim != p.rbm.visible_dim)
        throw DimensionError("bm_exact_loglik_grad: dataset dimension");

    const std::size_t d = p.rbm.visible_dim;
    const std::size_t pd = p.rbm.hidden_dim;
    LoglikGradients g;
    g.weights = Matrix(d, pd);
    g.visible_bias = Vector(d, 0.0);
    g.hidden_bias = Vector(pd, 0.0);
    g.visible_lateral = Matrix(d, d);
    g.hidden_lateral = Matrix(pd, pd);

    const auto efn = [&](const Vector& v, const Vector& h) {
        return detail::bm_energy_unchecked(p, v, h);
    };
    Vector hidden_mean(pd);
    Matrix hidden_second(pd, pd);
    for (const Vector& v : data.rows) {
        detail::accumulate_positive_phase(pd, v, efn, hidden_mean, &hidden_second);
        add_outer(g.weights, v, hidden_mean);
        add_scaled(g.visible_bias, v, 1.0);
        add_scaled(g.hidden_bias, hidden_mean, 1.0);
        add_outer(g.visible_lateral, v, v);
        add_scaled(g.hidden_lateral, hidden_second, 1.0);
    }

    const JointMoments m = bm_exact_joint_moments(p);
    const double n = static_cast<double>(data.size());
    add_scaled(g.weights, m.visible_hidden, -n);
    add_scaled(g.visible_bias, m.visible, -n);
    add_scaled(g.hidden_bias, m.hidden, -n);
    add_scaled(g.visible_lateral, m.visible_visible, -n);
    add_scaled(g.hidden_lateral, m.hidden_hidden, -n);
    for (std::size_t i = 0; i < d; ++i) g.visible_lateral(i, i) = 0.0;
    for (std::size_t j = 0; j < pd; ++j) g.hidden_lateral(j, j) = 0.0;
    return g;
}

} // namespace ebm
