#pragma once

// Pulse unitaries, the echo flip, forward/backward stage composition, the
// four decorrelating environment channels, and the two-copy realization of
// the non-CPTP channels. Everything operates on labeled layouts from
// qstate.hpp; the canonical cycle runs on atom(2) x cavity(4).

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qstate.hpp"

namespace qcycle {

// ---------------------------------------------------------------------------
// Pulse specs

/// Resonant atom-cavity pulse of area theta. theta = pi/4 is the quarter Rabi
/// cycle ("pi/2 pulse") used by every stage of the experiment.
struct PulseSpec {
    double theta = M_PI / 4.0;
    int cavity_dim = 4;
};

inline void check_pulse(const PulseSpec& spec) {
    if (!std::isfinite(spec.theta)) throw std::invalid_argument("PulseSpec: theta must be finite");
    if (spec.cavity_dim < 2) throw std::invalid_argument("PulseSpec: cavity_dim must be >= 2");
}

enum class DephasingMode { fixed_energy_fock, eigenbasis_of_reduced_state };
enum class DephasingTarget { B_only, both_A_and_B };

struct DephasingBasisSpec {
    DephasingMode mode = DephasingMode::fixed_energy_fock;
    DephasingTarget target = DephasingTarget::B_only;
};

struct GibbsSpec {
    MatrixXcd hamiltonian;
    double beta = 0.0; // may be +infinity
    std::string label = "sys";
};

struct GibbsResult {
    DensityOperator state;
    double free_energy = 0.0;
};

// ---------------------------------------------------------------------------
// Unitaries

/// Rotation by sqrt(n+1)*theta on each {|e,n>, |g,n+1>} manifold; |g,0> and
/// the truncation-orphaned |e,n_max> are left invariant. Real orthogonal, and
/// a one-parameter group in theta.
inline UnitaryOperator jc_pulse_unitary(const PulseSpec& spec) {
    check_pulse(spec);
    SpaceLayout layout = atom_cavity_layout(spec.cavity_dim);
    const int nc = spec.cavity_dim;
    MatrixXcd u = MatrixXcd::Identity(2 * nc, 2 * nc);
    for (int n = 0; n + 1 < nc; ++n) {
        const int ie = layout.ravel({0, n});
        const int ig = layout.ravel({1, n + 1});
        const double a = std::sqrt(double(n + 1)) * spec.theta;
        u(ie, ie) = std::cos(a);
        u(ig, ie) = std::sin(a);
        u(ie, ig) = -std::sin(a);
        u(ig, ig) = std::cos(a);
    }
    return {std::move(layout), std::move(u)};
}

/// Atomic phase flip P = (|e><e| - |g><g|) x I on the chosen atom factor.
/// Satisfies P * U(theta) * P = U(-theta) manifold by manifold, which is what
/// lets a single flip between the pulses invert the forward stage.
/// angle_error models an imperfect flip: the ground sector picks up phase
/// exp(i*(pi + angle_error)) instead of exactly -1.
inline UnitaryOperator echo_flip(const SpaceLayout& layout, const std::string& atom_label = "atom",
                                 double angle_error = 0.0) {
    std::size_t f = layout.factor_index(atom_label);
    if (layout.factors()[f].dim != 2)
        throw std::invalid_argument("echo_flip: atom factor must have dim 2");
    const int d = layout.total_dim();
    const cplx gphase =
        (angle_error == 0.0) ? cplx(-1.0) : std::exp(cplx(0.0, M_PI + angle_error));
    MatrixXcd p = MatrixXcd::Zero(d, d);
    for (int i = 0; i < d; ++i) p(i, i) = (layout.unravel(i)[f] == 0) ? cplx(1.0) : gphase;
    return {layout, std::move(p)};
}

inline UnitaryOperator forward_unitary(const PulseSpec& spec) { return jc_pulse_unitary(spec); }

/// Backward stage: echo flip first, then the same physical pulse again,
/// U_B = U(theta) * P. The composite cycle U_B * U_F equals P exactly, which
/// acts as the identity on every state that carries no coherence between the
/// atomic sectors -- in particular on rho_0 and all dephased mixtures.
inline UnitaryOperator backward_unitary(const PulseSpec& spec, double echo_angle_error = 0.0) {
    UnitaryOperator u = jc_pulse_unitary(spec);
    UnitaryOperator p = echo_flip(u.layout, "atom", echo_angle_error);
    return {u.layout, u.matrix * p.matrix};
}

inline DensityOperator apply_unitary(const DensityOperator& rho, const UnitaryOperator& u) {
    if (!(rho.layout == u.layout))
        throw std::invalid_argument("apply_unitary: layout mismatch");
    return {rho.layout, u.matrix * rho.matrix * u.matrix.adjoint()};
}

enum class Stage { forward, backward };

inline DensityOperator apply_stage(const DensityOperator& rho, Stage stage) {
    if (rho.layout.num_factors() != 2 || !rho.layout.has_label("atom") ||
        !rho.layout.has_label("cavity"))
        throw std::invalid_argument("apply_stage: expected atom x cavity layout");
    PulseSpec spec{M_PI / 4.0, rho.layout.dim_of("cavity")};
    return apply_unitary(rho, stage == Stage::forward ? forward_unitary(spec)
                                                      : backward_unitary(spec));
}

// ---------------------------------------------------------------------------
// Environment channels (all bipartite: factor 0 = A, factor 1 = B)

namespace detail {

inline std::vector<MatrixXcd> dephasing_projectors(const DensityOperator& rho, std::size_t factor,
                                                   DephasingMode mode) {
    const int d = rho.layout.factors()[factor].dim;
    std::vector<MatrixXcd> ps;
    ps.reserve(d);
    if (mode == DephasingMode::fixed_energy_fock) {
        for (int k = 0; k < d; ++k) {
            MatrixXcd p = MatrixXcd::Zero(d, d);
            p(k, k) = 1.0;
            ps.push_back(std::move(p));
        }
    } else {
        DensityOperator red = partial_trace(rho, {rho.layout.factors()[factor].label});
        EigResult eig = hermitian_eig(red.matrix);
        for (int k = 0; k < d; ++k) {
            VectorXcd v = eig.eigenvectors.col(k);
            ps.push_back(v * v.adjoint());
        }
    }
    return ps;
}

} // namespace detail

/// Pinching map rho -> sum_(k,l) (P_k x Pi_l) rho (P_k x Pi_l). Projector
/// families are Fock/energy basis projectors or reduced-state eigenprojectors,
/// selected by the basis spec argument; B_only uses the trivial family {I} on A.
inline DensityOperator dephase_channel(const DensityOperator& rho,
                                       const DephasingBasisSpec& spec = {}) {
    if (rho.layout.num_factors() != 2)
        throw std::invalid_argument("dephase_channel: expected bipartite layout");
    const int da = rho.layout.factors()[0].dim;
    std::vector<MatrixXcd> pa;
    if (spec.target == DephasingTarget::both_A_and_B)
        pa = detail::dephasing_projectors(rho, 0, spec.mode);
    else
        pa = {MatrixXcd::Identity(da, da)};
    std::vector<MatrixXcd> pb = detail::dephasing_projectors(rho, 1, spec.mode);

    MatrixXcd out = MatrixXcd::Zero(rho.matrix.rows(), rho.matrix.cols());
    for (const auto& a : pa)
        for (const auto& b : pb) {
            MatrixXcd k = kron(a, b);
            out += k * rho.matrix * k;
        }
    return {rho.layout, std::move(out)};
}

/// rho^A x rho^B: discards all correlation. Not CPTP; physically realized by
/// the two-copy protocol below.
inline DensityOperator decorrelate(const DensityOperator& rho) {
    if (rho.layout.num_factors() != 2)
        throw std::invalid_argument("decorrelate: expected bipartite layout");
    const auto& f = rho.layout.factors();
    return tensor_product(partial_trace(rho, {f[0].label}), partial_trace(rho, {f[1].label}));
}

/// rho^A x target: B is replaced wholesale, A marginal untouched.
inline DensityOperator reset_subsystem(const DensityOperator& rho, const DensityOperator& target) {
    if (rho.layout.num_factors() != 2)
        throw std::invalid_argument("reset_subsystem: expected bipartite layout");
    const auto& f = rho.layout.factors();
    if (target.layout.num_factors() != 1 || target.layout.factors()[0].label != f[1].label ||
        target.layout.factors()[0].dim != f[1].dim)
        throw std::invalid_argument("reset_subsystem: target must live on the second factor");
    return tensor_product(partial_trace(rho, {f[0].label}), target);
}

/// exp(-beta H)/Z computed eigenwise, with the free energy -ln(Z)/beta.
/// beta = +inf gives the uniform mixture over the ground eigenspace and
/// F = E_ground; beta = 0 gives the maximally mixed state and F = -inf.
inline GibbsResult gibbs_state(const GibbsSpec& spec) {
    if (std::isnan(spec.beta) || spec.beta < 0.0)
        throw std::invalid_argument("gibbs_state: beta must be >= 0 or +inf");
    EigResult eig = hermitian_eig(spec.hamiltonian);
    const Eigen::Index n = eig.eigenvalues.size();
    const double e0 = eig.eigenvalues(0);
    VectorXd w(n);
    if (std::isinf(spec.beta)) {
        const double tol = 1e-12 * std::max(1.0, eig.eigenvalues.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < n; ++i) w(i) = (eig.eigenvalues(i) - e0 <= tol) ? 1.0 : 0.0;
    } else {
        for (Eigen::Index i = 0; i < n; ++i) w(i) = std::exp(-spec.beta * (eig.eigenvalues(i) - e0));
    }
    const double z = w.sum();
    MatrixXcd rho = eig.eigenvectors * (w / z).asDiagonal() * eig.eigenvectors.adjoint();
    double f;
    if (spec.beta == 0.0)
        f = -std::numeric_limits<double>::infinity();
    else if (std::isinf(spec.beta))
        f = e0;
    else
        f = e0 - std::log(z) / spec.beta;
    return {{SpaceLayout({{spec.label, int(n)}}), std::move(rho)}, f};
}

// ---------------------------------------------------------------------------
// Operator embedding on multipartite layouts

/// Lift an operator defined on the sub-layout formed by `labels` (in the
/// given order, first label most significant) to the full layout, acting as
/// the identity elsewhere. Handles non-adjacent and permuted factors.
inline MatrixXcd embed_operator(const SpaceLayout& layout, const std::vector<std::string>& labels,
                                const MatrixXcd& op) {
    std::vector<std::size_t> sel;
    sel.reserve(labels.size());
    int sub_dim = 1;
    for (const auto& l : labels) {
        sel.push_back(layout.factor_index(l));
        sub_dim *= layout.dim_of(l);
    }
    if (op.rows() != sub_dim || op.cols() != sub_dim)
        throw std::invalid_argument("embed_operator: operator size does not match labels");

    const int d = layout.total_dim();
    MatrixXcd out = MatrixXcd::Zero(d, d);
    for (int r = 0; r < d; ++r) {
        std::vector<int> ri = layout.unravel(r);
        for (int c = 0; c < d; ++c) {
            std::vector<int> ci = layout.unravel(c);
            bool spectator_match = true;
            for (std::size_t f = 0; f < layout.num_factors(); ++f) {
                bool selected = false;
                for (auto s : sel) selected |= (s == f);
                if (!selected && ri[f] != ci[f]) {
                    spectator_match = false;
                    break;
                }
            }
            if (!spectator_match) continue;
            int sr = 0, sc = 0;
            for (auto s : sel) {
                sr = sr * layout.factors()[s].dim + ri[s];
                sc = sc * layout.factors()[s].dim + ci[s];
            }
            out(r, c) = op(sr, sc);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Two-copy protocol

enum class TwoCopyMode { decorrelation, reset };

/// Passed to the optional noise hook after every pulse/backward stage so the
/// caller can apply between-stage imperfections (decay, jitter mixtures,
/// spurious atoms) to whatever space the protocol is currently evolving.
struct StageInfo {
    std::string atom_label;
    std::string cavity_label;
    double theta = 0.0;
    bool is_backward = false;
};

using StageNoise = std::function<void(DensityOperator&, const StageInfo&)>;

/// The four reference states of one environment cycle on the main pair.
struct TwoCopyStages {
    DensityOperator initial;     // rho_0
    DensityOperator forward;     // rho_tau
    DensityOperator environment; // decohered state before the backward stage
    DensityOperator backward;    // state after the backward stage
};

/// Decorrelation/reset realized with auxiliary copies on atom x cavity x
/// atom_x x cavity_x: the fresh atom crosses the main cavity, the main atom
/// crosses the fresh cavity, and the auxiliaries are traced out, leaving the
/// main pair in the product of its would-be marginals. Reset mode keeps the
/// auxiliary atom out of the sample so the main cavity stays in vacuum. The
/// forward reference state is simulated on the main pair alone.
inline TwoCopyStages simulate_two_copy_protocol(TwoCopyMode mode, const StageNoise& noise = {},
                                                double echo_angle_error = 0.0, int cavity_dim = 4) {
    PulseSpec pulse{M_PI / 4.0, cavity_dim};
    SpaceLayout main_layout = atom_cavity_layout(cavity_dim);
    MatrixXcd jc = jc_pulse_unitary(pulse).matrix;

    DensityOperator initial = basis_projector(main_layout, {0, 0}); // |e,0>
    DensityOperator forward = apply_unitary(initial, forward_unitary(pulse));
    if (noise) noise(forward, {"atom", "cavity", pulse.theta, false});

    SpaceLayout big({{"atom", 2},
                     {"cavity", cavity_dim},
                     {"atom_x", 2},
                     {"cavity_x", cavity_dim}});
    // auxiliary atom absent (ground, idle) in reset mode
    const int ax = (mode == TwoCopyMode::decorrelation) ? 0 : 1;
    DensityOperator rho{big, basis_projector(big, {0, 0, ax, 0}).matrix};

    if (mode == TwoCopyMode::decorrelation) {
        MatrixXcd u1 = embed_operator(big, {"atom_x", "cavity"}, jc);
        rho.matrix = u1 * rho.matrix * u1.adjoint();
        if (noise) noise(rho, {"atom_x", "cavity", pulse.theta, false});
    }
    MatrixXcd u2 = embed_operator(big, {"atom", "cavity_x"}, jc);
    rho.matrix = u2 * rho.matrix * u2.adjoint();
    if (noise) noise(rho, {"atom", "cavity_x", pulse.theta, false});

    DensityOperator environment = partial_trace(rho, {"atom", "cavity"});
    DensityOperator backward =
        apply_unitary(environment, backward_unitary(pulse, echo_angle_error));
    if (noise) noise(backward, {"atom", "cavity", pulse.theta, true});

    return {std::move(initial), std::move(forward), std::move(environment), std::move(backward)};
}

} // namespace qcycle
