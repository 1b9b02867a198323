#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ebm/exact.hpp"
#include "ebm/model.hpp"
#include "ebm/unit_families.hpp"

namespace ebm {

struct CheckResult {
    std::string name;
    bool passed = false;
    double deviation = 0.0;
    double tolerance = 0.0;
};

struct CheckReport {
    std::vector<CheckResult> checks;

    bool all_passed() const {
        for (const CheckResult& c : checks)
            if (!c.passed) return false;
        return true;
    }
};

namespace detail {

inline void push_check(CheckReport& report, std::string name, double deviation,
                       double tolerance) {
    report.checks.push_back(
        {std::move(name), std::isfinite(deviation) && deviation <= tolerance, deviation,
         tolerance});
}

// Energy of every joint configuration, indexed as vm * 2^p + hm.
template <class EnergyFn>
Vector joint_energy_table(std::size_t d, std::size_t p, EnergyFn&& efn) {
    const std::uint64_t nv = std::uint64_t{1} << d;
    const std::uint64_t nh = std::uint64_t{1} << p;
    Vector energies(nv * nh);
    Vector v(d), h(p);
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        fill_bits(vm, v);
        for (std::uint64_t hm = 0; hm < nh; ++hm) {
            fill_bits(hm, h);
            energies[vm * nh + hm] = efn(v, h);
        }
    }
    return energies;
}

inline void thermo_identity_checks(CheckReport& report, const Vector& energies) {
    for (double beta : {0.1, 1.0, 10.0}) {
        const ThermoReport t = boltzmann_quantities(energies, beta);
        const double lhs = t.entropy;
        const double rhs = -beta * *t.free_energy + beta * t.internal_energy;
        push_check(report, "thermo_identity_beta_" + std::to_string(beta).substr(0, 4),
                   std::abs(lhs - rhs), 1e-10);
    }
}

inline Dataset full_support_dataset(std::size_t d, UnitFamily family) {
    Dataset data;
    data.dim = d;
    data.family = family;
    const std::uint64_t nv = std::uint64_t{1} << d;
    for (std::uint64_t vm = 0; vm < nv; ++vm) data.rows.push_back(bits_to_vector(vm, d));
    return data;
}

} // namespace detail

// Identity checks for a binary two-layer model: normalization, marginal
// consistency, conditional factorization, the thermodynamic identity, and a
// finite-difference check of the exact gradient. When no dataset is supplied
// the gradient check runs on the full-support dataset (feasible up to 8
// visible units).
inline CheckReport oracle_check_rbm(const RbmParams& p, const Dataset* dataset = nullptr) {
    validate(p);
    require_binary_families(p, "oracle_check_rbm");
    require_within_cap(p.visible_dim + p.hidden_dim, "oracle_check_rbm");

    CheckReport report;
    const std::uint64_t nv = std::uint64_t{1} << p.visible_dim;
    const std::uint64_t nh = std::uint64_t{1} << p.hidden_dim;

    // Joint normalization.
    const Vector joint = exact_joint_table(p);
    double total = 0.0;
    for (double x : joint) total += x;
    detail::push_check(report, "joint_normalization", std::abs(total - 1.0), 1e-12);

    // Marginal consistency: summing the joint over hidden states reproduces
    // the marginal table.
    const Vector marginal = exact_marginal_table(p);
    double marg_dev = 0.0;
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        double sum = 0.0;
        for (std::uint64_t hm = 0; hm < nh; ++hm) sum += joint[vm * nh + hm];
        marg_dev = std::max(marg_dev, std::abs(sum - marginal[vm]));
    }
    detail::push_check(report, "marginal_consistency", marg_dev, 1e-12);

    // Factorization: per-unit logistic conditionals multiply to the
    // enumerated conditional table.
    double fact_dev = 0.0;
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        const Vector v = bits_to_vector(vm, p.visible_dim);
        const Vector probs = binary_cond_prob(hidden_pre_activation(p, v));
        const Vector table = exact_cond_hidden(p, v);
        for (std::uint64_t hm = 0; hm < nh; ++hm) {
            double prod = 1.0;
            for (std::size_t j = 0; j < p.hidden_dim; ++j)
                prod *= ((hm >> j) & 1u) ? probs[j] : 1.0 - probs[j];
            fact_dev = std::max(fact_dev, std::abs(prod - table[hm]));
        }
    }
    detail::push_check(report, "conditional_factorization", fact_dev, 1e-10);

    detail::thermo_identity_checks(
        report, detail::joint_energy_table(p.visible_dim, p.hidden_dim,
                                           [&](const Vector& v, const Vector& h) {
                                               return energy(p, v, h);
                                           }));

    // Finite-difference gradient check.
    Dataset fallback;
    const Dataset* data = dataset;
    if (!data) {
        if (p.visible_dim > 8)
            throw ValidationError(
                "oracle_check_rbm: supply a dataset for models with more than 8 visible units");
        fallback = detail::full_support_dataset(p.visible_dim, p.visible_family);
        data = &fallback;
    }
    const LoglikGradients grad = exact_loglik_grad(p, *data);
    const double eps = 1e-5;
    double grad_dev = 0.0;
    auto central_diff = [&](RbmParams& probe, double& slot, double analytic) {
        const double saved = slot;
        slot = saved + eps;
        const double plus = exact_loglik(probe, *data);
        slot = saved - eps;
        const double minus = exact_loglik(probe, *data);
        slot = saved;
        grad_dev = std::max(grad_dev, std::abs((plus - minus) / (2.0 * eps) - analytic));
    };
    RbmParams probe = p;
    for (std::size_t i = 0; i < p.visible_dim; ++i)
        for (std::size_t j = 0; j < p.hidden_dim; ++j)
            central_diff(probe, probe.weights(i, j), grad.weights(i, j));
    for (std::size_t i = 0; i < p.visible_dim; ++i)
        central_diff(probe, probe.visible_bias[i], grad.visible_bias[i]);
    for (std::size_t j = 0; j < p.hidden_dim; ++j)
        central_diff(probe, probe.hidden_bias[j], grad.hidden_bias[j]);
    detail::push_check(report, "gradient_finite_difference", grad_dev, 1e-6);

    return report;
}

// Checks for the full machine: normalization, the thermodynamic identity, and
// the finite-difference gradient (lateral entries perturbed as symmetric
// pairs).
inline CheckReport oracle_check_bm(const BmParams& p, const Dataset* dataset = nullptr) {
    validate(p);
    require_binary_families(p.rbm, "oracle_check_bm");
    require_within_cap(p.rbm.visible_dim + p.rbm.hidden_dim, "oracle_check_bm");

    CheckReport report;
    const Vector marginal = bm_exact_marginal_table(p);
    double total = 0.0;
    for (double x : marginal) total += x;
    detail::push_check(report, "marginal_normalization", std::abs(total - 1.0), 1e-12);

    detail::thermo_identity_checks(
        report, detail::joint_energy_table(p.rbm.visible_dim, p.rbm.hidden_dim,
                                           [&](const Vector& v, const Vector& h) {
                                               return detail::bm_energy_unchecked(p, v, h);
                                           }));

    Dataset fallback;
    const Dataset* data = dataset;
    if (!data) {
        if (p.rbm.visible_dim > 8)
            throw ValidationError(
                "oracle_check_bm: supply a dataset for models with more than 8 visible units");
        fallback = detail::full_support_dataset(p.rbm.visible_dim, p.rbm.visible_family);
        data = &fallback;
    }
    const LoglikGradients grad = bm_exact_loglik_grad(p, *data);
    const double eps = 1e-5;
    double grad_dev = 0.0;
    BmParams probe = p;
    auto central_diff = [&](double& slot, double analytic) {
        const double saved = slot;
        slot = saved + eps;
        const double plus = bm_exact_loglik(probe, *data);
        slot = saved - eps;
        const double minus = bm_exact_loglik(probe, *data);
        slot = saved;
        grad_dev = std::max(grad_dev, std::abs((plus - minus) / (2.0 * eps) - analytic));
    };
    for (std::size_t i = 0; i < p.rbm.visible_dim; ++i)
        for (std::size_t j = 0; j < p.rbm.hidden_dim; ++j)
            central_diff(probe.rbm.weights(i, j), grad.weights(i, j));
    for (std::size_t i = 0; i < p.rbm.visible_dim; ++i)
        central_diff(probe.rbm.visible_bias[i], grad.visible_bias[i]);
    for (std::size_t j = 0; j < p.rbm.hidden_dim; ++j)
        central_diff(probe.rbm.hidden_bias[j], grad.hidden_bias[j]);

    // A tied off-diagonal pair moves together; the directional derivative is
    // twice the free-parameter gradient entry.
    auto pair_diff = [&](Matrix& m, const Matrix& g, std::size_t a, std::size_t b) {
        const double saved = m(a, b);
        m(a, b) = m(b, a) = saved + eps;
        const double plus = bm_exact_loglik(probe, *data);
        m(a, b) = m(b, a) = saved - eps;
        const double minus = bm_exact_loglik(probe, *data);
        m(a, b) = m(b, a) = saved;
        grad_dev = std::max(grad_dev,
                            std::abs((plus - minus) / (2.0 * eps) - 2.0 * g(a, b)));
    };
    for (std::size_t a = 0; a < p.rbm.visible_dim; ++a)
        for (std::size_t b = a + 1; b < p.rbm.visible_dim; ++b)
            pair_diff(probe.visible_lateral, grad.visible_lateral, a, b);
    for (std::size_t a = 0; a < p.rbm.hidden_dim; ++a)
        for (std::size_t b = a + 1; b < p.rbm.hidden_dim; ++b)
            pair_diff(probe.hidden_lateral, grad.hidden_lateral, a, b);
    detail::push_check(report, "gradient_finite_difference", grad_dev, 1e-6);

    return report;
}

} // namespace ebm
