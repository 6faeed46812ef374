#pragma once

// End-to-end protocol runner: builds the four environment cycles with
// configurable imperfections, drives tomography at the reference points,
// invokes reconstruction and sampling, and assembles deterministic reports
// in csv/json/svg form.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dynamics.hpp"
#include "entropic.hpp"
#include "inference.hpp"
#include "measurement.hpp"
#include "qstate.hpp"
#include "rng.hpp"

namespace qcycle {

// ---------------------------------------------------------------------------
// Imperfection model
// ---------------------------------------------------------------------------

struct ImperfectionModel {
    double atom_decay_per_stage = 0.0;   // amplitude-damping probability, per stage
    double cavity_decay_per_stage = 0.0; // per-photon loss probability, per stage
    double pulse_area_jitter = 0.0;      // relative std of the pulse area
    double echo_angle_error = 0.0;       // radians of extra phase on the echo flip
    double second_atom_prob = 0.0;       // chance of an undetected extra excitation

    bool is_zero() const {
        return atom_decay_per_stage == 0.0 && cavity_decay_per_stage == 0.0 &&
               pulse_area_jitter == 0.0 && echo_angle_error == 0.0 && second_atom_prob == 0.0;
    }

    // Magnitudes for "noisy" demonstration runs. The mechanisms are physical;
    // the rates are free parameters chosen so estimates land visibly below
    // the ideal values without washing the structure out.
    static ImperfectionModel noisy_defaults() {
        ImperfectionModel m;
        m.atom_decay_per_stage = 0.02;
        m.cavity_decay_per_stage = 0.02;
        m.pulse_area_jitter = 0.03;
        m.echo_angle_error = 0.05;
        m.second_atom_prob = 0.02;
        return m;
    }
};

inline void check_imperfections(const ImperfectionModel& m) {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(m.atom_decay_per_stage) || !prob(m.cavity_decay_per_stage) ||
        !prob(m.second_atom_prob))
        throw std::invalid_argument("ImperfectionModel: probabilities must lie in [0, 1]");
    if (!(m.pulse_area_jitter >= 0.0))
        throw std::invalid_argument("ImperfectionModel: pulse_area_jitter must be >= 0");
    if (!std::isfinite(m.echo_angle_error))
        throw std::invalid_argument("ImperfectionModel: echo_angle_error must be finite");
}

namespace detail {

// Five-node Gauss-Hermite rule (physicists' convention, weight e^{-t^2}).
inline const std::array<double, 5>& gh_nodes() {
    static const std::array<double, 5> t = {-2.0201828704560856, -0.9585724646138185, 0.0,
                                            0.9585724646138185, 2.0201828704560856};
    return t;
}

inline const std::array<double, 5>& gh_weights() {
    // normalized so the weights sum to one (Gaussian expectation values)
    static const std::array<double, 5> w = [] {
        std::array<double, 5> raw = {0.019953242059045913, 0.3936193231522411,
                                     0.9453087204829419, 0.3936193231522411,
                                     0.019953242059045913};
        double s = 0.0;
        for (double x : raw) s += x;
        for (double& x : raw) x /= s;
        return raw;
    }();
    return w;
}

inline MatrixXcd apply_kraus(const MatrixXcd& m, const std::vector<MatrixXcd>& kraus) {
    MatrixXcd out = MatrixXcd::Zero(m.rows(), m.cols());
    for (const auto& k : kraus) out += k * m * k.adjoint();
    return out;
}

inline double binomial(int n, int k) {
    double b = 1.0;
    for (int i = 1; i <= k; ++i) b *= double(n - k + i) / double(i);
    return b;
}

}  // namespace detail

// Composes, in order: amplitude damping on the stage atom, amplitude damping
// on the stage cavity, Gauss-Hermite mixing of the stage pulse area, the
// echo-angle phase (backward stages only — no echo has happened elsewhere),
// and the truncated extra-excitation injection. Applied after the ideal
// stage, so the pulse-area term is the residual rotation U(theta * s).
inline DensityOperator apply_imperfections(const DensityOperator& rho, const StageInfo& stage,
                                           const ImperfectionModel& model) {
    check_imperfections(model);
    const SpaceLayout& layout = rho.layout;
    const int nc = layout.dim_of(stage.cavity_label);
    MatrixXcd m = rho.matrix;

    if (model.atom_decay_per_stage > 0.0) {
        const double g = model.atom_decay_per_stage;
        MatrixXcd k0 = MatrixXcd::Zero(2, 2), k1 = MatrixXcd::Zero(2, 2);
        k0(0, 0) = std::sqrt(1.0 - g); // excited level survives
        k0(1, 1) = 1.0;
        k1(1, 0) = std::sqrt(g);       // |e> -> |g|
        m = detail::apply_kraus(m, {embed_operator(layout, {stage.atom_label}, k0),
                                    embed_operator(layout, {stage.atom_label}, k1)});
    }

    if (model.cavity_decay_per_stage > 0.0) {
        const double g = model.cavity_decay_per_stage;
        std::vector<MatrixXcd> kraus;
        for (int k = 0; k < nc; ++k) {
            MatrixXcd a = MatrixXcd::Zero(nc, nc);
            for (int n = k; n < nc; ++n)
                a(n - k, n) = std::sqrt(detail::binomial(n, k) * std::pow(g, k) *
                                        std::pow(1.0 - g, n - k));
            kraus.push_back(embed_operator(layout, {stage.cavity_label}, a));
        }
        m = detail::apply_kraus(m, kraus);
    }

    if (model.pulse_area_jitter > 0.0) {
        MatrixXcd mixed = MatrixXcd::Zero(m.rows(), m.cols());
        const auto& nodes = detail::gh_nodes();
        const auto& weights = detail::gh_weights();
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const double shift =
                stage.theta * model.pulse_area_jitter * std::sqrt(2.0) * nodes[j];
            PulseSpec residual{shift, nc};
            MatrixXcd u = embed_operator(layout, {stage.atom_label, stage.cavity_label},
                                         jc_pulse_unitary(residual).matrix);
            mixed += weights[j] * (u * m * u.adjoint());
        }
        m = std::move(mixed);
    }

    if (stage.is_backward && model.echo_angle_error != 0.0) {
        MatrixXcd phase = MatrixXcd::Identity(2, 2);
        phase(1, 1) = std::exp(cplx(0.0, model.echo_angle_error));
        MatrixXcd u = embed_operator(layout, {stage.atom_label}, phase);
        m = u * m * u.adjoint();
    }

    if (model.second_atom_prob > 0.0) {
        MatrixXcd s = MatrixXcd::Zero(nc, nc);
        for (int n = 0; n + 1 < nc; ++n) s(n + 1, n) = 1.0;
        s(nc - 1, nc - 1) = 1.0; // truncation: the top level absorbs
        MatrixXcd inj = embed_operator(layout, {stage.cavity_label}, s);
        MatrixXcd branch = inj * m * inj.adjoint();
        const double tr = branch.trace().real();
        if (tr > 1e-14)
            m = (1.0 - model.second_atom_prob) * m + (model.second_atom_prob / tr) * branch;
    }

    return DensityOperator::make(layout, m);
}

inline StageNoise make_stage_noise(const ImperfectionModel& model) {
    check_imperfections(model);
    if (model.is_zero()) return {};
    return [model](DensityOperator& rho, const StageInfo& stage) {
        rho = apply_imperfections(rho, stage, model);
    };
}

inline TwoCopyStages simulate_two_copy_protocol(const ImperfectionModel& model, TwoCopyMode mode,
                                                int cavity_dim = 4) {
    return simulate_two_copy_protocol(mode, make_stage_noise(model), 0.0, cavity_dim);
}

// ---------------------------------------------------------------------------
// Reference points
// ---------------------------------------------------------------------------

inline constexpr std::array<const char*, 4> kPointNames = {"rho_0", "rho_tau", "rho_tilde_0",
                                                           "rho_tilde_tau"};

struct ReferencePoints {
    DensityOperator rho_0, rho_tau, rho_tilde_0, rho_tilde_tau;

    const DensityOperator& at(std::size_t k) const {
        switch (k) {
            case 0: return rho_0;
            case 1: return rho_tau;
            case 2: return rho_tilde_0;
            case 3: return rho_tilde_tau;
            default: throw std::out_of_range("ReferencePoints: index");
        }
    }
};

inline ReferencePoints simulate_reference_points(EnvironmentKind environment,
                                                 const ImperfectionModel& model,
                                                 const DephasingBasisSpec& dephasing = {},
                                                 int cavity_dim = 4) {
    check_imperfections(model);
    StageNoise noise = make_stage_noise(model);
    if (environment == EnvironmentKind::decorrelation ||
        environment == EnvironmentKind::local_thermalization) {
        const TwoCopyMode mode = environment == EnvironmentKind::decorrelation
                                     ? TwoCopyMode::decorrelation
                                     : TwoCopyMode::reset;
        TwoCopyStages stages = simulate_two_copy_protocol(mode, noise, 0.0, cavity_dim);
        return {std::move(stages.initial), std::move(stages.forward),
                std::move(stages.environment), std::move(stages.backward)};
    }

    PulseSpec pulse{M_PI / 4.0, cavity_dim};
    ReferencePoints pts;
    pts.rho_0 = basis_projector(atom_cavity_layout(cavity_dim), {0, 0});
    pts.rho_tau = apply_unitary(pts.rho_0, forward_unitary(pulse));
    if (noise) noise(pts.rho_tau, {"atom", "cavity", pulse.theta, false});
    pts.rho_tilde_0 = environment == EnvironmentKind::identity
                          ? pts.rho_tau
                          : dephase_channel(pts.rho_tau, dephasing);
    pts.rho_tilde_tau = apply_unitary(pts.rho_tilde_0, backward_unitary(pulse));
    if (noise) noise(pts.rho_tilde_tau, {"atom", "cavity", pulse.theta, true});
    return pts;
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

// Family template whose z/x instantiations are informationally complete on
// the probed span: photon-resolved readout behind four displacement pulses.
inline EffectFamilySpec ic_effect_family() {
    EffectFamilySpec f;
    f.displacement_amplitudes = {cplx(0.0, 0.0), cplx(0.7, 0.0), cplx(0.0, 0.7), cplx(-0.7, 0.0)};
    return f;
}

struct ScenarioConfig {
    EnvironmentKind environment = EnvironmentKind::identity;
    ImperfectionModel imperfections;
    EffectFamilySpec effect_family = ic_effect_family();  // both atomic bases are probed
    DephasingBasisSpec dephasing;
    long long shots_per_point = 50000;
    std::uint64_t seed = 0;
    MetropolisOptions sampler;  // seed and initial state are set per point
    std::string out_dir;
    std::string format = "csv";
    bool ideal = false;  // compute quantities on the true simulated states
};

inline std::string environment_to_string(EnvironmentKind kind) {
    switch (kind) {
        case EnvironmentKind::identity: return "identity";
        case EnvironmentKind::dephasing: return "dephasing";
        case EnvironmentKind::decorrelation: return "decorrelation";
        case EnvironmentKind::local_thermalization: return "reset";
    }
    throw std::invalid_argument("environment_to_string: unknown kind");
}

inline EnvironmentKind environment_from_string(const std::string& name) {
    if (name == "identity" || name == "id") return EnvironmentKind::identity;
    if (name == "dephasing" || name == "deph") return EnvironmentKind::dephasing;
    if (name == "decorrelation" || name == "decor") return EnvironmentKind::decorrelation;
    if (name == "reset" || name == "local_thermalization")
        return EnvironmentKind::local_thermalization;
    throw std::invalid_argument("unknown environment '" + name + "'");
}

inline int environment_index(EnvironmentKind kind) {
    switch (kind) {
        case EnvironmentKind::identity: return 0;
        case EnvironmentKind::dephasing: return 1;
        case EnvironmentKind::decorrelation: return 2;
        case EnvironmentKind::local_thermalization: return 3;
    }
    throw std::invalid_argument("environment_index: unknown kind");
}

inline void check_config(const ScenarioConfig& config) {
    check_imperfections(config.imperfections);
    check_family(config.effect_family);
    if (config.shots_per_point < 0)
        throw std::invalid_argument("ScenarioConfig: shots_per_point must be >= 0");
    if (config.format != "csv" && config.format != "json" && config.format != "svg")
        throw std::invalid_argument("ScenarioConfig: format must be csv, json, or svg");
    if (config.sampler.n < 1 || config.sampler.thinning < 1 || config.sampler.burn_in < 0 ||
        !(config.sampler.proposal.sigma > 0.0))
        throw std::invalid_argument("ScenarioConfig: invalid sampler options");
}

// Both atomic readout bases instantiated from the family template.
inline std::vector<EffectSet> scenario_effect_sets(const EffectFamilySpec& family) {
    EffectFamilySpec z = family, x = family;
    z.atomic_basis = AtomicBasis::z;
    x.atomic_basis = AtomicBasis::x;
    std::vector<EffectSet> sets = build_effect_set(z);
    std::vector<EffectSet> xs = build_effect_set(x);
    sets.insert(sets.end(), std::make_move_iterator(xs.begin()), std::make_move_iterator(xs.end()));
    return sets;
}

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

struct PointReport {
    std::string name;
    DensityOperator true_state;
    DensityOperator mle;
    DensityOperator ensemble_mean;
    double mle_fidelity = 1.0;  // fidelity of the reconstruction to the simulated truth
    FunctionalEstimate entropy; // von Neumann entropy in bits
    std::uint64_t dataset_seed = 0;
    std::uint64_t chain_seed = 0;
    double acceptance_mean = 0.0;
    double final_sigma = 0.0;
};

struct ScenarioReport {
    EnvironmentKind environment = EnvironmentKind::identity;
    bool ideal = false;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    long long shots_per_point = 0;
    std::vector<PointReport> points;
    FunctionalEstimate sigma;      // entropy production, bits
    FunctionalEstimate erased_mi;  // mutual information destroyed by the environment, bits
    bool complete = true;
    std::string note;
};

// ---------------------------------------------------------------------------
// Config hashing and serialization
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline void to_json(nlohmann::json& j, const ImperfectionModel& m) {
    j = nlohmann::json{{"atom_decay_per_stage", m.atom_decay_per_stage},
                       {"cavity_decay_per_stage", m.cavity_decay_per_stage},
                       {"pulse_area_jitter", m.pulse_area_jitter},
                       {"echo_angle_error", m.echo_angle_error},
                       {"second_atom_prob", m.second_atom_prob}};
}

inline void from_json(const nlohmann::json& j, ImperfectionModel& m) {
    m = ImperfectionModel{};
    if (j.contains("atom_decay_per_stage")) j.at("atom_decay_per_stage").get_to(m.atom_decay_per_stage);
    if (j.contains("cavity_decay_per_stage"))
        j.at("cavity_decay_per_stage").get_to(m.cavity_decay_per_stage);
    if (j.contains("pulse_area_jitter")) j.at("pulse_area_jitter").get_to(m.pulse_area_jitter);
    if (j.contains("echo_angle_error")) j.at("echo_angle_error").get_to(m.echo_angle_error);
    if (j.contains("second_atom_prob")) j.at("second_atom_prob").get_to(m.second_atom_prob);
}

inline void to_json(nlohmann::json& j, const EffectFamilySpec& f) {
    nlohmann::json amps = nlohmann::json::array();
    for (const cplx& a : f.displacement_amplitudes)
        amps.push_back({a.real(), a.imag()});
    j = nlohmann::json{{"atomic_basis", to_string(f.atomic_basis)},
                       {"detection_error", f.detection_error},
                       {"displacement_amplitudes", std::move(amps)},
                       {"photon_resolution", f.photon_resolution},
                       {"cavity_dim", f.cavity_dim}};
}

inline void from_json(const nlohmann::json& j, EffectFamilySpec& f) {
    f = EffectFamilySpec{};
    if (j.contains("atomic_basis"))
        f.atomic_basis = atomic_basis_from_string(j.at("atomic_basis").get<std::string>());
    if (j.contains("detection_error")) j.at("detection_error").get_to(f.detection_error);
    if (j.contains("displacement_amplitudes")) {
        f.displacement_amplitudes.clear();
        for (const auto& a : j.at("displacement_amplitudes"))
            f.displacement_amplitudes.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    }
    if (j.contains("photon_resolution")) j.at("photon_resolution").get_to(f.photon_resolution);
    if (j.contains("cavity_dim")) j.at("cavity_dim").get_to(f.cavity_dim);
}

inline void to_json(nlohmann::json& j, const DephasingBasisSpec& d) {
    j = nlohmann::json{
        {"mode", d.mode == DephasingMode::fixed_energy_fock ? "fixed_energy_fock"
                                                            : "eigenbasis_of_reduced_state"},
        {"target", d.target == DephasingTarget::B_only ? "B_only" : "both_A_and_B"}};
}

inline void from_json(const nlohmann::json& j, DephasingBasisSpec& d) {
    d = DephasingBasisSpec{};
    if (j.contains("mode")) {
        const std::string m = j.at("mode").get<std::string>();
        if (m == "fixed_energy_fock")
            d.mode = DephasingMode::fixed_energy_fock;
        else if (m == "eigenbasis_of_reduced_state")
            d.mode = DephasingMode::eigenbasis_of_reduced_state;
        else
            throw std::invalid_argument("DephasingBasisSpec: unknown mode '" + m + "'");
    }
    if (j.contains("target")) {
        const std::string t = j.at("target").get<std::string>();
        if (t == "B_only")
            d.target = DephasingTarget::B_only;
        else if (t == "both_A_and_B")
            d.target = DephasingTarget::both_A_and_B;
        else
            throw std::invalid_argument("DephasingBasisSpec: unknown target '" + t + "'");
    }
}

inline void to_json(nlohmann::json& j, const ProposalParams& p) {
    j = nlohmann::json{{"sigma", p.sigma},
                       {"accept_low", p.accept_low},
                       {"accept_high", p.accept_high},
                       {"adapt_interval", p.adapt_interval},
                       {"adapt_factor", p.adapt_factor}};
}

inline void from_json(const nlohmann::json& j, ProposalParams& p) {
    p = ProposalParams{};
    if (j.contains("sigma")) j.at("sigma").get_to(p.sigma);
    if (j.contains("accept_low")) j.at("accept_low").get_to(p.accept_low);
    if (j.contains("accept_high")) j.at("accept_high").get_to(p.accept_high);
    if (j.contains("adapt_interval")) j.at("adapt_interval").get_to(p.adapt_interval);
    if (j.contains("adapt_factor")) j.at("adapt_factor").get_to(p.adapt_factor);
}

inline void to_json(nlohmann::json& j, const MetropolisOptions& o) {
    j = nlohmann::json{{"n", o.n},
                       {"thinning", o.thinning},
                       {"burn_in", o.burn_in},
                       {"proposal", o.proposal}};
}

inline void from_json(const nlohmann::json& j, MetropolisOptions& o) {
    o = MetropolisOptions{};
    if (j.contains("n")) j.at("n").get_to(o.n);
    if (j.contains("thinning")) j.at("thinning").get_to(o.thinning);
    if (j.contains("burn_in")) j.at("burn_in").get_to(o.burn_in);
    if (j.contains("proposal")) j.at("proposal").get_to(o.proposal);
}

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    j = nlohmann::json{{"environment", environment_to_string(c.environment)},
                       {"imperfections", c.imperfections},
                       {"effect_family", c.effect_family},
                       {"dephasing", c.dephasing},
                       {"shots_per_point", c.shots_per_point},
                       {"seed", c.seed},
                       {"sampler", c.sampler},
                       {"out_dir", c.out_dir},
                       {"format", c.format},
                       {"ideal", c.ideal}};
}

inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    c = ScenarioConfig{};
    if (j.contains("environment"))
        c.environment = environment_from_string(j.at("environment").get<std::string>());
    if (j.contains("imperfections")) j.at("imperfections").get_to(c.imperfections);
    if (j.contains("effect_family")) j.at("effect_family").get_to(c.effect_family);
    if (j.contains("dephasing")) j.at("dephasing").get_to(c.dephasing);
    if (j.contains("shots_per_point")) j.at("shots_per_point").get_to(c.shots_per_point);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("sampler")) j.at("sampler").get_to(c.sampler);
    if (j.contains("out_dir")) j.at("out_dir").get_to(c.out_dir);
    if (j.contains("format")) j.at("format").get_to(c.format);
    if (j.contains("ideal")) j.at("ideal").get_to(c.ideal);
}

inline std::uint64_t config_hash(const ScenarioConfig& config) {
    nlohmann::json j = config;
    return fnv1a64(j.dump());
}

inline void to_json(nlohmann::json& j, const FunctionalEstimate& e) {
    j = nlohmann::json{{"delta", e.delta},
                       {"n_used", e.n_used},
                       {"diverged_fraction", e.diverged_fraction}};
    if (std::isfinite(e.f_est))
        j["f_est"] = e.f_est;
    else
        j["f_est"] = "inf";
}

inline void from_json(const nlohmann::json& j, FunctionalEstimate& e) {
    e = FunctionalEstimate{};
    if (j.at("f_est").is_string())
        e.f_est = std::numeric_limits<double>::infinity();
    else
        j.at("f_est").get_to(e.f_est);
    j.at("delta").get_to(e.delta);
    j.at("n_used").get_to(e.n_used);
    j.at("diverged_fraction").get_to(e.diverged_fraction);
}

inline void to_json(nlohmann::json& j, const PointReport& p) {
    j = nlohmann::json{{"name", p.name},
                       {"true_state", p.true_state},
                       {"mle", p.mle},
                       {"ensemble_mean", p.ensemble_mean},
                       {"mle_fidelity", p.mle_fidelity},
                       {"entropy", p.entropy},
                       {"dataset_seed", p.dataset_seed},
                       {"chain_seed", p.chain_seed},
                       {"acceptance_mean", p.acceptance_mean},
                       {"final_sigma", p.final_sigma}};
}

inline void from_json(const nlohmann::json& j, PointReport& p) {
    j.at("name").get_to(p.name);
    p.true_state = j.at("true_state").get<DensityOperator>();
    p.mle = j.at("mle").get<DensityOperator>();
    p.ensemble_mean = j.at("ensemble_mean").get<DensityOperator>();
    j.at("mle_fidelity").get_to(p.mle_fidelity);
    p.entropy = j.at("entropy").get<FunctionalEstimate>();
    j.at("dataset_seed").get_to(p.dataset_seed);
    j.at("chain_seed").get_to(p.chain_seed);
    j.at("acceptance_mean").get_to(p.acceptance_mean);
    j.at("final_sigma").get_to(p.final_sigma);
}

inline void to_json(nlohmann::json& j, const ScenarioReport& r) {
    j = nlohmann::json{{"environment", environment_to_string(r.environment)},
                       {"ideal", r.ideal},
                       {"seed", r.seed},
                       {"config_hash", r.config_hash},
                       {"shots_per_point", r.shots_per_point},
                       {"points", r.points},
                       {"sigma", r.sigma},
                       {"erased_mutual_information", r.erased_mi},
                       {"complete", r.complete},
                       {"note", r.note}};
}

inline void from_json(const nlohmann::json& j, ScenarioReport& r) {
    r = ScenarioReport{};
    r.environment = environment_from_string(j.at("environment").get<std::string>());
    j.at("ideal").get_to(r.ideal);
    j.at("seed").get_to(r.seed);
    j.at("config_hash").get_to(r.config_hash);
    j.at("shots_per_point").get_to(r.shots_per_point);
    for (const auto& p : j.at("points")) r.points.push_back(p.get<PointReport>());
    r.sigma = j.at("sigma").get<FunctionalEstimate>();
    r.erased_mi = j.at("erased_mutual_information").get<FunctionalEstimate>();
    j.at("complete").get_to(r.complete);
    j.at("note").get_to(r.note);
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

namespace detail {

inline FunctionalEstimate point_estimate(const EntropyValue& v) {
    FunctionalEstimate e;
    if (v.diverged) {
        e.f_est = std::numeric_limits<double>::infinity();
        e.n_used = 0;
        e.diverged_fraction = 1.0;
    } else {
        e.f_est = v.value;
        e.n_used = 1;
    }
    return e;
}

inline StateFunctional entropy_bits() {
    return [](const DensityOperator& rho) { return von_neumann_entropy(rho, LogBase::bits); };
}

inline TwoStateFunctional divergence_bits() {
    return [](const DensityOperator& a, const DensityOperator& b) {
        return klu_divergence(a, b, kDefaultSupportTol, LogBase::bits);
    };
}

inline TwoStateFunctional erased_mi_bits() {
    return [](const DensityOperator& before, const DensityOperator& after) {
        EntropyValue a = mutual_information(before, {}, LogBase::bits);
        EntropyValue b = mutual_information(after, {}, LogBase::bits);
        if (a.diverged || b.diverged) return EntropyValue::infinite();
        return EntropyValue::finite(a.value - b.value);
    };
}

inline std::uint64_t dataset_seed_for(const ScenarioConfig& config, std::size_t point) {
    return derive_seed(config.seed,
                       std::uint64_t(environment_index(config.environment)) * 8 + point);
}

inline std::uint64_t chain_seed_for(const ScenarioConfig& config, std::size_t point) {
    return derive_seed(config.seed,
                       64 + std::uint64_t(environment_index(config.environment)) * 8 + point);
}

inline std::string artifact_path(const ScenarioConfig& config, const std::string& stem) {
    return (std::filesystem::path(config.out_dir) / stem).string();
}

// Random-walk chains jam when started exactly on the boundary of the PSD
// cone (a symmetric proposal leaves the cone almost surely at a
// rank-deficient point, so the adaptation shrinks the step size without
// ever raising the acceptance). Reconstructions from finite data sit on
// that boundary routinely, so the walk starts a hair inside.
inline DensityOperator interior_nudge(const DensityOperator& s, double lambda = 1e-3) {
    const Eigen::Index d = s.matrix.rows();
    MatrixXcd m = (1.0 - lambda) * s.matrix +
                  (lambda / double(d)) * MatrixXcd::Identity(d, d);
    return DensityOperator::make(s.layout, m);
}

inline std::string env_stem(const ScenarioConfig& config) {
    return environment_to_string(config.environment);
}

}  // namespace detail

// True states plus, unless `ideal`, per-point tomography, reconstruction,
// sampling, and the two headline quantities. Deterministic given the seed.
inline ScenarioReport run_scenario(const ScenarioConfig& config) {
    check_config(config);
    ScenarioReport report;
    report.environment = config.environment;
    report.ideal = config.ideal;
    report.seed = config.seed;
    report.config_hash = config_hash(config);
    report.shots_per_point = config.shots_per_point;

    const ReferencePoints pts = simulate_reference_points(
        config.environment, config.imperfections, config.dephasing, config.effect_family.cavity_dim);

    if (config.ideal) {
        for (std::size_t k = 0; k < kPointNames.size(); ++k) {
            PointReport p;
            p.name = kPointNames[k];
            p.true_state = pts.at(k);
            p.mle = pts.at(k);
            p.ensemble_mean = pts.at(k);
            p.entropy = detail::point_estimate(von_neumann_entropy(pts.at(k), LogBase::bits));
            report.points.push_back(std::move(p));
        }
        report.sigma = detail::point_estimate(
            klu_divergence(pts.rho_0, pts.rho_tilde_tau, kDefaultSupportTol, LogBase::bits));
        report.erased_mi =
            detail::point_estimate(detail::erased_mi_bits()(pts.rho_tau, pts.rho_tilde_0));
        return report;
    }

    const std::vector<EffectSet> sets = scenario_effect_sets(config.effect_family);
    const bool persist = !config.out_dir.empty();
    if (persist) std::filesystem::create_directories(config.out_dir);

    std::array<PosteriorEnsemble, 4> ensembles;
    for (std::size_t k = 0; k < kPointNames.size(); ++k) {
        PointReport p;
        p.name = kPointNames[k];
        p.true_state = pts.at(k);
        p.dataset_seed = detail::dataset_seed_for(config, k);
        p.chain_seed = detail::chain_seed_for(config, k);

        Dataset ds = sample_dataset(p.true_state, sets, config.shots_per_point, p.dataset_seed);
        LikelihoodModel model(ds, sets);
        MleResult mle = mle_reconstruct(model);
        p.mle = mle.state;
        p.mle_fidelity = fidelity(p.true_state, p.mle);

        MetropolisOptions opts = config.sampler;
        opts.seed = p.chain_seed;
        opts.initial = detail::interior_nudge(mle.state);
        ensembles[k] = metropolis_sample(model, opts);
        p.ensemble_mean = mean_state(ensembles[k]);
        p.entropy = estimate_functional(detail::entropy_bits(), ensembles[k]);
        double acc = 0.0;
        for (double a : ensembles[k].acceptance) acc += a;
        p.acceptance_mean = acc / double(ensembles[k].acceptance.size());
        p.final_sigma = ensembles[k].final_sigma;

        if (persist) {
            const std::string stem = detail::env_stem(config) + "_" + p.name;
            write_dataset_jsonl(ds, sets, detail::artifact_path(config, "dataset_" + stem + ".jsonl"));
            write_ensemble(ensembles[k], detail::artifact_path(config, "ensemble_" + stem + ".json"));
        }
        report.points.push_back(std::move(p));
    }

    report.sigma = estimate_functional(detail::divergence_bits(), ensembles[0], ensembles[3]);
    report.erased_mi = estimate_functional(detail::erased_mi_bits(), ensembles[1], ensembles[2]);
    return report;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void csv_row(std::string& out, const std::string& env, const std::string& quantity,
                    const FunctionalEstimate& e) {
    out += env;
    out += ',';
    out += quantity;
    out += ',';
    out += format_number(e.f_est);
    out += ',';
    out += format_number(e.delta);
    out += ',';
    out += format_number(e.diverged_fraction);
    out += '\n';
}

}  // namespace detail

inline std::string render_csv(const std::vector<ScenarioReport>& reports) {
    std::string out = "environment,quantity,estimate,delta,diverged_fraction\n";
    for (const auto& r : reports) {
        const std::string env = environment_to_string(r.environment);
        detail::csv_row(out, env, "sigma", r.sigma);
        detail::csv_row(out, env, "erased_mutual_information", r.erased_mi);
        for (const auto& p : r.points) detail::csv_row(out, env, "entropy_" + p.name, p.entropy);
    }
    return out;
}

inline std::string render_json(const std::vector<ScenarioReport>& reports) {
    nlohmann::json j;
    j["reports"] = reports;
    return j.dump(2) + "\n";
}

// Grouped bar chart of the two headline quantities per environment, with
// horizontal rules at the ideal 0, 1, and 2 bit levels.
inline std::string render_svg(const std::vector<ScenarioReport>& reports) {
    const double width = 780.0, height = 420.0;
    const double left = 70.0, right = 30.0, top = 40.0, bottom = 60.0;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    const double y_min = 0.0, y_max = 2.6;
    auto y_of = [&](double v) {
        const double clamped = std::min(std::max(v, y_min), y_max);
        return top + plot_h * (1.0 - (clamped - y_min) / (y_max - y_min));
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" fill=\"#ffffff\"/>\n";
    s += "<text x=\"" + num(width / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
         "Entropy production and erased correlations by environment</text>\n";

    // axis
    s += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" +
         num(top + plot_h) + "\" stroke=\"#222222\"/>\n";
    for (double tick = 0.0; tick <= y_max + 1e-9; tick += 0.5) {
        const double y = y_of(tick);
        s += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left) +
             "\" y2=\"" + num(y) + "\" stroke=\"#222222\"/>\n";
        s += "<text x=\"" + num(left - 8) + "\" y=\"" + num(y + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(tick) +
             "</text>\n";
    }
    s += "<text x=\"18\" y=\"" + num(top + plot_h / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 "
         "18 " +
         num(top + plot_h / 2) + ")\">bits</text>\n";

    // ideal-value rules at 0, 1, 2 bits
    for (double level : {0.0, 1.0, 2.0}) {
        const double y = y_of(level);
        s += "<line class=\"ideal-rule\" x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" +
             num(left + plot_w) + "\" y2=\"" + num(y) +
             "\" stroke=\"#cc2222\" stroke-dasharray=\"6 4\"/>\n";
    }

    const std::size_t groups = reports.size();
    const double group_w = groups > 0 ? plot_w / double(groups) : plot_w;
    const double bar_w = std::min(40.0, group_w / 3.0);
    for (std::size_t g = 0; g < groups; ++g) {
        const ScenarioReport& r = reports[g];
        const double cx = left + group_w * (double(g) + 0.5);
        const std::array<std::pair<const FunctionalEstimate*, const char*>, 2> bars = {
            std::make_pair(&r.sigma, "#3b6fb0"), std::make_pair(&r.erased_mi, "#7fb03b")};
        for (std::size_t b = 0; b < bars.size(); ++b) {
            const FunctionalEstimate& e = *bars[b].first;
            const double x = cx + (b == 0 ? -bar_w - 3.0 : 3.0);
            if (std::isinf(e.f_est)) {
                s += "<rect x=\"" + num(x) + "\" y=\"" + num(top) + "\" width=\"" + num(bar_w) +
                     "\" height=\"" + num(plot_h) + "\" fill=\"" + bars[b].second +
                     "\" fill-opacity=\"0.25\" stroke=\"" + bars[b].second +
                     "\" stroke-dasharray=\"3 3\"/>\n";
                s += "<text x=\"" + num(x + bar_w / 2) + "\" y=\"" + num(top - 6) +
                     "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
                     "&#8734;</text>\n";
                continue;
            }
            const double y = y_of(std::max(e.f_est, 0.0));
            const double h = y_of(0.0) - y;
            s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(bar_w) +
                 "\" height=\"" + num(std::max(h, 0.0)) + "\" fill=\"" + bars[b].second + "\"/>\n";
            if (e.delta > 0.0) {
                const double xm = x + bar_w / 2;
                s += "<line x1=\"" + num(xm) + "\" y1=\"" + num(y_of(e.f_est - e.delta)) +
                     "\" x2=\"" + num(xm) + "\" y2=\"" + num(y_of(e.f_est + e.delta)) +
                     "\" stroke=\"#222222\"/>\n";
            }
        }
        s += "<text x=\"" + num(cx) + "\" y=\"" + num(top + plot_h + 18) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
             environment_to_string(r.environment) + "</text>\n";
    }

    // legend
    s += "<rect x=\"" + num(left + 8) + "\" y=\"" + num(top + 6) +
         "\" width=\"12\" height=\"12\" fill=\"#3b6fb0\"/>\n";
    s += "<text x=\"" + num(left + 26) + "\" y=\"" + num(top + 16) +
         "\" font-family=\"sans-serif\" font-size=\"11\">entropy production</text>\n";
    s += "<rect x=\"" + num(left + 8) + "\" y=\"" + num(top + 24) +
         "\" width=\"12\" height=\"12\" fill=\"#7fb03b\"/>\n";
    s += "<text x=\"" + num(left + 26) + "\" y=\"" + num(top + 34) +
         "\" font-family=\"sans-serif\" font-size=\"11\">erased mutual information</text>\n";
    s += "</svg>\n";
    return s;
}

inline std::string render_report(const std::vector<ScenarioReport>& reports,
                                 const std::string& format, const std::string& path) {
    std::string body;
    if (format == "csv")
        body = render_csv(reports);
    else if (format == "json")
        body = render_json(reports);
    else if (format == "svg")
        body = render_svg(reports);
    else
        throw std::invalid_argument("render_report: format must be csv, json, or svg");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("render_report: cannot write " + path);
    out << body;
    if (!out) throw std::runtime_error("render_report: write failed for " + path);
    return path;
}

inline std::string render_report(const ScenarioReport& report, const std::string& format,
                                 const std::string& path) {
    return render_report(std::vector<ScenarioReport>{report}, format, path);
}

// ---------------------------------------------------------------------------
// File-based pipeline stages (CLI plumbing)
// ---------------------------------------------------------------------------

// simulate: true states and sampled datasets for every reference point.
inline void run_simulate_stage(const ScenarioConfig& config) {
    check_config(config);
    if (config.out_dir.empty())
        throw std::invalid_argument("simulate: an output directory is required");
    std::filesystem::create_directories(config.out_dir);
    const ReferencePoints pts = simulate_reference_points(
        config.environment, config.imperfections, config.dephasing, config.effect_family.cavity_dim);
    const std::vector<EffectSet> sets = scenario_effect_sets(config.effect_family);

    nlohmann::json states;
    states["environment"] = environment_to_string(config.environment);
    states["config_hash"] = config_hash(config);
    states["points"] = nlohmann::json::array();
    for (std::size_t k = 0; k < kPointNames.size(); ++k) {
        states["points"].push_back(
            nlohmann::json{{"name", kPointNames[k]}, {"state", pts.at(k)}});
        Dataset ds = sample_dataset(pts.at(k), sets, config.shots_per_point,
                                    detail::dataset_seed_for(config, k));
        write_dataset_jsonl(ds, sets,
                            detail::artifact_path(config, "dataset_" + detail::env_stem(config) +
                                                              "_" + kPointNames[k] + ".jsonl"));
    }
    std::ofstream out(detail::artifact_path(config, "states_" + detail::env_stem(config) + ".json"));
    if (!out) throw std::runtime_error("simulate: cannot write states file");
    out << states.dump(2) << "\n";
}

// estimate: MLE and posterior ensembles from the stored datasets.
inline void run_estimate_stage(const ScenarioConfig& config) {
    check_config(config);
    nlohmann::json estimates;
    estimates["environment"] = environment_to_string(config.environment);
    estimates["points"] = nlohmann::json::array();
    for (std::size_t k = 0; k < kPointNames.size(); ++k) {
        const std::string stem = detail::env_stem(config) + "_" + kPointNames[k];
        LoadedDataset loaded =
            read_dataset_jsonl(detail::artifact_path(config, "dataset_" + stem + ".jsonl"));
        LikelihoodModel model(loaded.dataset, loaded.effect_sets);
        MleResult mle = mle_reconstruct(model);
        MetropolisOptions opts = config.sampler;
        opts.seed = detail::chain_seed_for(config, k);
        opts.initial = detail::interior_nudge(mle.state);
        PosteriorEnsemble ens = metropolis_sample(model, opts);
        write_ensemble(ens, detail::artifact_path(config, "ensemble_" + stem + ".json"));
        estimates["points"].push_back(nlohmann::json{{"name", kPointNames[k]},
                                                     {"mle", mle.state},
                                                     {"log_likelihood", mle.log_likelihood},
                                                     {"iterations", mle.iterations},
                                                     {"converged", mle.converged}});
    }
    std::ofstream out(
        detail::artifact_path(config, "estimates_" + detail::env_stem(config) + ".json"));
    if (!out) throw std::runtime_error("estimate: cannot write estimates file");
    out << estimates.dump(2) << "\n";
}

// analyze: entropic quantities from the stored states, estimates, ensembles.
inline ScenarioReport run_analyze_stage(const ScenarioConfig& config) {
    check_config(config);
    ScenarioReport report;
    report.environment = config.environment;
    report.ideal = false;
    report.seed = config.seed;
    report.config_hash = config_hash(config);
    report.shots_per_point = config.shots_per_point;

    std::ifstream sf(detail::artifact_path(config, "states_" + detail::env_stem(config) + ".json"));
    if (!sf) throw std::runtime_error("analyze: missing states file (run simulate first)");
    nlohmann::json states;
    sf >> states;
    std::ifstream ef(
        detail::artifact_path(config, "estimates_" + detail::env_stem(config) + ".json"));
    if (!ef) throw std::runtime_error("analyze: missing estimates file (run estimate first)");
    nlohmann::json estimates;
    ef >> estimates;

    std::array<PosteriorEnsemble, 4> ensembles;
    for (std::size_t k = 0; k < kPointNames.size(); ++k) {
        PointReport p;
        p.name = kPointNames[k];
        p.true_state = states.at("points").at(k).at("state").get<DensityOperator>();
        p.mle = estimates.at("points").at(k).at("mle").get<DensityOperator>();
        p.dataset_seed = detail::dataset_seed_for(config, k);
        p.chain_seed = detail::chain_seed_for(config, k);
        p.mle_fidelity = fidelity(p.true_state, p.mle);
        ensembles[k] = read_ensemble(detail::artifact_path(
            config, "ensemble_" + detail::env_stem(config) + "_" + kPointNames[k] + ".json"));
        p.ensemble_mean = mean_state(ensembles[k]);
        p.entropy = estimate_functional(detail::entropy_bits(), ensembles[k]);
        double acc = 0.0;
        for (double a : ensembles[k].acceptance) acc += a;
        p.acceptance_mean = ensembles[k].acceptance.empty()
                                ? 0.0
                                : acc / double(ensembles[k].acceptance.size());
        p.final_sigma = ensembles[k].final_sigma;
        report.points.push_back(std::move(p));
    }
    report.sigma = estimate_functional(detail::divergence_bits(), ensembles[0], ensembles[3]);
    report.erased_mi = estimate_functional(detail::erased_mi_bits(), ensembles[1], ensembles[2]);

    std::ofstream out(
        detail::artifact_path(config, "report_" + detail::env_stem(config) + ".json"));
    if (!out) throw std::runtime_error("analyze: cannot write report file");
    nlohmann::json j = report;
    out << j.dump(2) << "\n";
    return report;
}

// report: render a stored single-environment report.
inline std::string run_report_stage(const ScenarioConfig& config) {
    std::ifstream in(
        detail::artifact_path(config, "report_" + detail::env_stem(config) + ".json"));
    if (!in) throw std::runtime_error("report: missing report file (run analyze first)");
    nlohmann::json j;
    in >> j;
    ScenarioReport report = j.get<ScenarioReport>();
    return render_report(report, config.format,
                         detail::artifact_path(
                             config, "report_" + detail::env_stem(config) + "." + config.format));
}

}  // namespace qcycle
