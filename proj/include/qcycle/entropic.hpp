#pragma once

// Entropy functionals and entropy-production formulas with explicit
// support-violation semantics: divergences surface as a flag plus +inf, never
// as clamped large numbers.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "dynamics.hpp"
#include "qstate.hpp"

namespace qcycle {

enum class LogBase { bits, nats };

inline double base_scale(LogBase base) { return base == LogBase::bits ? 1.0 / std::log(2.0) : 1.0; }

struct EntropyValue {
    double value = 0.0;
    bool diverged = false;

    static EntropyValue finite(double v) { return {v, false}; }
    static EntropyValue infinite() {
        return {std::numeric_limits<double>::infinity(), true};
    }
};

enum class EnvironmentKind { identity, dephasing, decorrelation, local_thermalization };

inline constexpr double kDefaultSupportTol = 1e-10;

// ---------------------------------------------------------------------------
// Entropies and divergences

/// -sum lambda log lambda with 0 log 0 = 0. Never diverges.
inline EntropyValue von_neumann_entropy(const DensityOperator& rho, LogBase base = LogBase::bits) {
    if (!validate_density(rho.matrix).ok())
        throw std::invalid_argument("von_neumann_entropy: invalid state");
    EigResult eig = hermitian_eig(rho.matrix);
    double s = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        double l = eig.eigenvalues(i);
        if (l > 0.0) s -= l * std::log(l);
    }
    return EntropyValue::finite(s * base_scale(base));
}

/// D(rho1||rho2) = -Tr[rho1 ln rho2] - S(rho1). Diverged whenever an
/// eigendirection of rho2 with eigenvalue below support_tol carries rho1
/// weight above support_tol; directions outside both supports contribute
/// nothing.
inline EntropyValue klu_divergence(const DensityOperator& rho1, const DensityOperator& rho2,
                                   double support_tol = kDefaultSupportTol,
                                   LogBase base = LogBase::bits) {
    if (!(rho1.layout == rho2.layout))
        throw std::invalid_argument("klu_divergence: layout mismatch");
    EigResult e2 = hermitian_eig(rho2.matrix);
    double cross = 0.0; // -Tr[rho1 ln rho2], in nats
    for (Eigen::Index i = 0; i < e2.eigenvalues.size(); ++i) {
        double l = e2.eigenvalues(i);
        VectorXcd v = e2.eigenvectors.col(i);
        double w = std::max(0.0, (v.adjoint() * rho1.matrix * v)(0, 0).real());
        if (l < support_tol) {
            if (w > support_tol) return EntropyValue::infinite();
            continue; // outside both supports
        }
        cross -= w * std::log(l);
    }
    EigResult e1 = hermitian_eig(rho1.matrix);
    double s1 = 0.0;
    for (Eigen::Index i = 0; i < e1.eigenvalues.size(); ++i) {
        double l = e1.eigenvalues(i);
        if (l > 0.0) s1 -= l * std::log(l);
    }
    return EntropyValue::finite((cross - s1) * base_scale(base));
}

/// I = S(A) + S(B) - S(AB) for the bipartition (side_a | rest). Defaults to
/// the first factor against the rest; never diverges.
inline EntropyValue mutual_information(const DensityOperator& rho,
                                       std::vector<std::string> side_a = {},
                                       LogBase base = LogBase::bits) {
    if (rho.layout.num_factors() < 2)
        throw std::invalid_argument("mutual_information: need at least two factors");
    if (side_a.empty()) side_a = {rho.layout.factors()[0].label};
    std::vector<std::string> side_b;
    for (const auto& f : rho.layout.factors()) {
        bool in_a = false;
        for (const auto& l : side_a) in_a |= (l == f.label);
        if (!in_a) side_b.push_back(f.label);
    }
    if (side_b.empty() || side_a.size() + side_b.size() != rho.layout.num_factors())
        throw std::invalid_argument("mutual_information: bipartition must be proper");

    auto entropy_of = [&](const DensityOperator& r) {
        EigResult eig = hermitian_eig(r.matrix);
        double s = 0.0;
        for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
            double l = eig.eigenvalues(i);
            if (l > 0.0) s -= l * std::log(l);
        }
        return s;
    };
    double i = entropy_of(partial_trace(rho, side_a)) + entropy_of(partial_trace(rho, side_b)) -
               entropy_of(rho);
    return EntropyValue::finite(i * base_scale(base));
}

/// S(dephased) - S(rho): entropy generated by killing coherences in the
/// chosen projector family.
inline EntropyValue relative_entropy_of_coherence(const DensityOperator& rho,
                                                  const DephasingBasisSpec& basis = {},
                                                  LogBase base = LogBase::bits) {
    double s0 = von_neumann_entropy(rho, base).value;
    double s1 = von_neumann_entropy(dephase_channel(rho, basis), base).value;
    return EntropyValue::finite(s1 - s0);
}

/// The two-point-measurement entropy production D(rho_start||rho_end): with
/// unitary stage maps the two pairings (rho_tau, decohered rho_0) and
/// (rho_0, decohered-and-evolved rho_tau) give the same number whenever both
/// are finite.
inline EntropyValue entropy_production(const DensityOperator& rho_start,
                                       const DensityOperator& rho_end,
                                       double support_tol = kDefaultSupportTol,
                                       LogBase base = LogBase::bits) {
    return klu_divergence(rho_start, rho_end, support_tol, base);
}

// ---------------------------------------------------------------------------
// Closed forms per environment

struct SigmaParams {
    DephasingBasisSpec dephasing{};
    std::optional<GibbsSpec> gibbs{}; // required for local_thermalization
};

/// Kind-specific closed form evaluated on the entangled mid-cycle state:
/// identity -> 0; dephasing -> I - I(dephased); decorrelation -> I;
/// local thermalization -> I + D(rho^B || gibbs target).
inline EntropyValue sigma_closed_form(EnvironmentKind kind, const DensityOperator& rho_tau,
                                      const SigmaParams& params = {},
                                      LogBase base = LogBase::bits) {
    switch (kind) {
        case EnvironmentKind::identity:
            return EntropyValue::finite(0.0);
        case EnvironmentKind::dephasing: {
            double i0 = mutual_information(rho_tau, {}, base).value;
            double i1 =
                mutual_information(dephase_channel(rho_tau, params.dephasing), {}, base).value;
            return EntropyValue::finite(i0 - i1);
        }
        case EnvironmentKind::decorrelation:
            return mutual_information(rho_tau, {}, base);
        case EnvironmentKind::local_thermalization: {
            if (!params.gibbs)
                throw std::invalid_argument("sigma_closed_form: thermal kind needs a Gibbs spec");
            GibbsResult zeta = gibbs_state(*params.gibbs);
            const auto& f = rho_tau.layout.factors();
            if (f.size() != 2)
                throw std::invalid_argument("sigma_closed_form: expected bipartite state");
            DensityOperator rho_b = partial_trace(rho_tau, {f[1].label});
            DensityOperator target{rho_b.layout, zeta.state.matrix};
            if (target.matrix.rows() != rho_b.matrix.rows())
                throw std::invalid_argument("sigma_closed_form: Gibbs dim mismatch");
            EntropyValue d = klu_divergence(rho_b, target, kDefaultSupportTol, base);
            if (d.diverged) return EntropyValue::infinite();
            return EntropyValue::finite(mutual_information(rho_tau, {}, base).value + d.value);
        }
    }
    throw std::logic_error("sigma_closed_form: unknown kind");
}

/// Entropy balance Delta S - beta Q for a full relaxation rho -> zeta_beta,
/// evaluated from the entropy change and the absorbed heat. Equals
/// D(rho||zeta_beta) identically; the redundancy is used as a consistency
/// check in the tests.
inline EntropyValue sigma_thermalization(const DensityOperator& rho, const GibbsSpec& spec,
                                         LogBase base = LogBase::bits) {
    if (!(spec.beta > 0.0) || std::isinf(spec.beta))
        throw std::invalid_argument("sigma_thermalization: beta must be finite and positive");
    GibbsResult g = gibbs_state(spec);
    if (g.state.matrix.rows() != rho.matrix.rows())
        throw std::invalid_argument("sigma_thermalization: dimension mismatch");
    DensityOperator zeta{rho.layout, g.state.matrix};
    double ds = von_neumann_entropy(zeta, LogBase::nats).value -
                von_neumann_entropy(rho, LogBase::nats).value;
    double q = ((zeta.matrix - rho.matrix) * spec.hamiltonian).trace().real();
    return EntropyValue::finite((ds - spec.beta * q) * base_scale(base));
}

/// I(rho_tau) - I(channel(rho_tau)): the mutual information erased by the
/// environment. Finite for every channel.
inline EntropyValue erased_mutual_information(
    const DensityOperator& rho_tau,
    const std::function<DensityOperator(const DensityOperator&)>& channel,
    LogBase base = LogBase::bits) {
    double i0 = mutual_information(rho_tau, {}, base).value;
    double i1 = mutual_information(channel(rho_tau), {}, base).value;
    return EntropyValue::finite(i0 - i1);
}

/// Kind-based convenience: identity keeps everything, dephasing pinches,
/// decorrelation and local thermalization erase all correlation.
inline EntropyValue erased_mutual_information(const DensityOperator& rho_tau,
                                              EnvironmentKind kind,
                                              const SigmaParams& params = {},
                                              LogBase base = LogBase::bits) {
    switch (kind) {
        case EnvironmentKind::identity:
            return erased_mutual_information(
                rho_tau, [](const DensityOperator& r) { return r; }, base);
        case EnvironmentKind::dephasing:
            return erased_mutual_information(
                rho_tau,
                [&](const DensityOperator& r) { return dephase_channel(r, params.dephasing); },
                base);
        case EnvironmentKind::decorrelation:
            return erased_mutual_information(
                rho_tau, [](const DensityOperator& r) { return decorrelate(r); }, base);
        case EnvironmentKind::local_thermalization: {
            if (!params.gibbs)
                throw std::invalid_argument(
                    "erased_mutual_information: thermal kind needs a Gibbs spec");
            GibbsResult zeta = gibbs_state(*params.gibbs);
            return erased_mutual_information(
                rho_tau,
                [&](const DensityOperator& r) {
                    const auto& f = r.layout.factors();
                    DensityOperator target{SpaceLayout({f[1]}), zeta.state.matrix};
                    return reset_subsystem(r, target);
                },
                base);
        }
    }
    throw std::logic_error("erased_mutual_information: unknown kind");
}

} // namespace qcycle
