#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qcycle/scenarios.hpp"
#include "oracles.hpp"

using namespace qcycle;
using Catch::Approx;

namespace {

DensityOperator forward_state(const ImperfectionModel& model) {
    return simulate_reference_points(EnvironmentKind::identity, model).rho_tau;
}

double binary_entropy_bits(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

}  // namespace

TEST_CASE("stage imperfection channels") {
    const SpaceLayout layout = atom_cavity_layout();
    const StageInfo forward{"atom", "cavity", M_PI / 4.0, false};
    const StageInfo backward{"atom", "cavity", M_PI / 4.0, true};

    SECTION("zero model is the identity") {
        Rng rng(404);
        DensityOperator rho = DensityOperator::make(layout, oracles::random_density_matrix(rng, 8));
        DensityOperator out = apply_imperfections(rho, forward, ImperfectionModel{});
        REQUIRE((out.matrix - rho.matrix).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("full atom decay maps the excited state down") {
        ImperfectionModel m;
        m.atom_decay_per_stage = 1.0;
        DensityOperator rho = basis_projector(layout, {0, 2});
        DensityOperator out = apply_imperfections(rho, forward, m);
        DensityOperator expect = basis_projector(layout, {1, 2});
        REQUIRE(trace_distance(out, expect) < 1e-14);
    }

    SECTION("full cavity decay empties the cavity") {
        ImperfectionModel m;
        m.cavity_decay_per_stage = 1.0;
        DensityOperator rho = basis_projector(layout, {0, 3});
        DensityOperator out = apply_imperfections(rho, forward, m);
        REQUIRE(trace_distance(out, basis_projector(layout, {0, 0})) < 1e-14);
    }

    SECTION("binomial loss scales the photon number by the survival probability") {
        Rng rng(405);
        DensityOperator rho = DensityOperator::make(layout, oracles::random_density_matrix(rng, 8));
        MatrixXcd number = MatrixXcd::Zero(4, 4);
        for (int n = 0; n < 4; ++n) number(n, n) = double(n);
        MatrixXcd big_number = embed_operator(layout, {"cavity"}, number);
        const double before = (big_number * rho.matrix).trace().real();

        ImperfectionModel m;
        m.cavity_decay_per_stage = 0.2;
        DensityOperator out = apply_imperfections(rho, forward, m);
        const double after = (big_number * out.matrix).trace().real();
        REQUIRE(after == Approx(0.8 * before).epsilon(1e-12));
        REQUIRE(validate_density(out.matrix).ok());
    }

    SECTION("combined decay keeps a valid state") {
        Rng rng(406);
        DensityOperator rho = DensityOperator::make(layout, oracles::random_density_matrix(rng, 8));
        ImperfectionModel m;
        m.atom_decay_per_stage = 0.1;
        m.cavity_decay_per_stage = 0.2;
        m.second_atom_prob = 0.3;
        DensityOperator out = apply_imperfections(rho, forward, m);
        auto diag = validate_density(out.matrix);
        REQUIRE(diag.ok());
        REQUIRE(out.matrix.trace().real() == Approx(1.0).epsilon(1e-12));
    }

    SECTION("pulse-area jitter reduces the doublet coherence by the Gaussian factor") {
        const double jitter = 0.05;
        ImperfectionModel m;
        m.pulse_area_jitter = jitter;
        DensityOperator rho = forward_state(ImperfectionModel{});
        DensityOperator out = apply_imperfections(rho, forward, m);

        // The |e,0>,|g,1> doublet is closed under the residual rotation, so the
        // channel acts there as a Gaussian average of plane rotations: the
        // populations stay at one half and the coherence magnitude shrinks to
        // kappa/2 with kappa = E[cos(2 * theta * jitter * g)], g standard normal.
        const double sigma_a = (M_PI / 4.0) * jitter;
        const double kappa = std::exp(-2.0 * sigma_a * sigma_a);

        const auto& t = out.matrix;
        REQUIRE(t(0, 0).real() == Approx(0.5).margin(1e-10));
        REQUIRE(t(5, 5).real() == Approx(0.5).margin(1e-10));
        REQUIRE(std::abs(t(0, 5)) == Approx(0.5 * kappa).margin(1e-9));

        EntropyValue s = von_neumann_entropy(out, LogBase::bits);
        REQUIRE_FALSE(s.diverged);
        REQUIRE(s.value == Approx(binary_entropy_bits(0.5 * (1.0 + kappa))).margin(1e-9));

        // Monte-Carlo check of the same decoherence factor.
        Rng rng(888);
        double acc = 0.0;
        const int draws = 1000000;
        for (int i = 0; i < draws; ++i) acc += std::cos(2.0 * sigma_a * rng.gaussian());
        REQUIRE(2.0 * std::abs(t(0, 5)) == Approx(acc / draws).margin(2e-5));
    }

    SECTION("echo-angle phase acts only on backward stages") {
        ImperfectionModel m;
        m.echo_angle_error = 0.3;
        DensityOperator rho = forward_state(ImperfectionModel{});

        DensityOperator fwd = apply_imperfections(rho, forward, m);
        REQUIRE((fwd.matrix - rho.matrix).cwiseAbs().maxCoeff() == 0.0);

        DensityOperator bwd = apply_imperfections(rho, backward, m);
        REQUIRE(std::abs(bwd.matrix(0, 0) - rho.matrix(0, 0)) < 1e-15);
        REQUIRE(std::abs(bwd.matrix(5, 5) - rho.matrix(5, 5)) < 1e-15);
        const cplx expect = rho.matrix(0, 5) * std::exp(cplx(0.0, -0.3));
        REQUIRE(std::abs(bwd.matrix(0, 5) - expect) < 1e-14);
        REQUIRE(std::abs(std::abs(bwd.matrix(0, 5)) - std::abs(rho.matrix(0, 5))) < 1e-14);
    }

    SECTION("extra-excitation injection shifts the cavity up") {
        ImperfectionModel m;
        m.second_atom_prob = 1.0;
        DensityOperator vac = basis_projector(layout, {0, 0});
        REQUIRE(trace_distance(apply_imperfections(vac, forward, m),
                               basis_projector(layout, {0, 1})) < 1e-14);
        DensityOperator top = basis_projector(layout, {0, 3});
        REQUIRE(trace_distance(apply_imperfections(top, forward, m), top) < 1e-14);

        m.second_atom_prob = 0.25;
        DensityOperator ground = basis_projector(layout, {1, 0});
        DensityOperator out = apply_imperfections(ground, forward, m);
        REQUIRE(out.matrix(4, 4).real() == Approx(0.75).epsilon(1e-12));
        REQUIRE(out.matrix(5, 5).real() == Approx(0.25).epsilon(1e-12));
    }

    SECTION("invalid parameters are rejected") {
        ImperfectionModel m;
        m.atom_decay_per_stage = 1.5;
        REQUIRE_THROWS_AS(check_imperfections(m), std::invalid_argument);
        m = ImperfectionModel{};
        m.pulse_area_jitter = -0.1;
        REQUIRE_THROWS_AS(check_imperfections(m), std::invalid_argument);
        m = ImperfectionModel{};
        m.second_atom_prob = -0.01;
        REQUIRE_THROWS_AS(check_imperfections(m), std::invalid_argument);
        m = ImperfectionModel{};
        m.echo_angle_error = std::nan("");
        REQUIRE_THROWS_AS(check_imperfections(m), std::invalid_argument);
    }
}

TEST_CASE("reference points for each environment") {
    SECTION("identity closes the loop") {
        ReferencePoints pts = simulate_reference_points(EnvironmentKind::identity, {});
        REQUIRE(trace_distance(pts.rho_tilde_0, pts.rho_tau) < 1e-14);
        REQUIRE(trace_distance(pts.rho_tilde_tau, pts.rho_0) < 1e-12);
    }

    SECTION("dephasing uses the configured channel") {
        DephasingBasisSpec deph;
        ReferencePoints pts = simulate_reference_points(EnvironmentKind::dephasing, {}, deph);
        REQUIRE(trace_distance(pts.rho_tilde_0, dephase_channel(pts.rho_tau, deph)) < 1e-14);
        EntropyValue s = von_neumann_entropy(pts.rho_tilde_tau, LogBase::bits);
        REQUIRE(s.value == Approx(1.0).margin(1e-12));
    }

    SECTION("two-copy environments map onto the stage snapshots") {
        for (auto env : {EnvironmentKind::decorrelation, EnvironmentKind::local_thermalization}) {
            TwoCopyMode mode = env == EnvironmentKind::decorrelation ? TwoCopyMode::decorrelation
                                                                     : TwoCopyMode::reset;
            TwoCopyStages stages = simulate_two_copy_protocol(mode);
            ReferencePoints pts = simulate_reference_points(env, {});
            REQUIRE(trace_distance(pts.rho_0, stages.initial) < 1e-14);
            REQUIRE(trace_distance(pts.rho_tau, stages.forward) < 1e-14);
            REQUIRE(trace_distance(pts.rho_tilde_0, stages.environment) < 1e-14);
            REQUIRE(trace_distance(pts.rho_tilde_tau, stages.backward) < 1e-14);
        }
    }

    SECTION("imperfections change the forward state") {
        ReferencePoints clean = simulate_reference_points(EnvironmentKind::identity, {});
        ReferencePoints noisy =
            simulate_reference_points(EnvironmentKind::identity, ImperfectionModel::noisy_defaults());
        REQUIRE(trace_distance(clean.rho_tau, noisy.rho_tau) > 1e-3);
        REQUIRE(validate_density(noisy.rho_tilde_tau.matrix).ok());
    }
}

TEST_CASE("scenario reports on ideal states") {
    auto ideal_report = [](EnvironmentKind env) {
        ScenarioConfig c;
        c.environment = env;
        c.ideal = true;
        return run_scenario(c);
    };

    SECTION("entropy production ladder") {
        ScenarioReport id = ideal_report(EnvironmentKind::identity);
        ScenarioReport deph = ideal_report(EnvironmentKind::dephasing);
        ScenarioReport decor = ideal_report(EnvironmentKind::decorrelation);
        ScenarioReport reset = ideal_report(EnvironmentKind::local_thermalization);

        REQUIRE(id.sigma.f_est == Approx(0.0).margin(1e-9));
        REQUIRE(deph.sigma.f_est == Approx(1.0).margin(1e-9));
        REQUIRE(decor.sigma.f_est == Approx(2.0).margin(1e-9));
        REQUIRE(std::isinf(reset.sigma.f_est));
        REQUIRE(reset.sigma.diverged_fraction == 1.0);
        REQUIRE(reset.sigma.n_used == 0);

        REQUIRE(id.erased_mi.f_est == Approx(0.0).margin(1e-9));
        REQUIRE(deph.erased_mi.f_est == Approx(1.0).margin(1e-9));
        REQUIRE(decor.erased_mi.f_est == Approx(2.0).margin(1e-9));
        REQUIRE(reset.erased_mi.f_est == Approx(2.0).margin(1e-9));

        // both divergence orderings agree on the true states
        for (const ScenarioReport* r : {&id, &deph, &decor}) {
            const auto& p = r->points;
            EntropyValue lhs = klu_divergence(p[0].true_state, p[3].true_state,
                                              kDefaultSupportTol, LogBase::bits);
            EntropyValue rhs = klu_divergence(p[1].true_state, p[2].true_state,
                                              kDefaultSupportTol, LogBase::bits);
            REQUIRE_FALSE(lhs.diverged);
            REQUIRE_FALSE(rhs.diverged);
            REQUIRE(lhs.value == Approx(rhs.value).margin(1e-9));
        }

        const auto& dp = deph.points;
        REQUIRE(dp.size() == 4);
        REQUIRE(dp[0].entropy.f_est == Approx(0.0).margin(1e-9));
        REQUIRE(dp[1].entropy.f_est == Approx(0.0).margin(1e-9));
        REQUIRE(dp[2].entropy.f_est == Approx(1.0).margin(1e-9));
        REQUIRE(dp[3].entropy.f_est == Approx(1.0).margin(1e-9));
        for (const auto& p : dp) {
            REQUIRE(p.mle_fidelity == 1.0);
            REQUIRE(p.entropy.n_used == 1);
        }
    }

    SECTION("hashing is stable and sensitive") {
        REQUIRE(fnv1a64("") == 14695981039346656037ull);
        REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
        ScenarioConfig c;
        c.environment = EnvironmentKind::dephasing;
        REQUIRE(config_hash(c) == config_hash(c));
        ScenarioConfig d = c;
        d.seed += 1;
        REQUIRE(config_hash(c) != config_hash(d));
        ScenarioConfig e = c;
        e.imperfections.pulse_area_jitter = 0.01;
        REQUIRE(config_hash(c) != config_hash(e));
    }

    SECTION("rendering an ideal bundle is deterministic") {
        std::vector<ScenarioReport> bundle;
        for (auto env : {EnvironmentKind::identity, EnvironmentKind::dephasing,
                         EnvironmentKind::decorrelation, EnvironmentKind::local_thermalization})
            bundle.push_back(ideal_report(env));
        const std::string csv = render_csv(bundle);
        REQUIRE(csv == render_csv(bundle));
        REQUIRE(render_json(bundle) == render_json(bundle));
        REQUIRE(render_svg(bundle) == render_svg(bundle));

        std::size_t lines = 0;
        for (char ch : csv)
            if (ch == '\n') ++lines;
        REQUIRE(lines == 1 + 4 * 6);
        REQUIRE(csv.rfind("environment,quantity,estimate,delta,diverged_fraction\n", 0) == 0);
        REQUIRE(csv.find("reset,sigma,inf,0,1\n") != std::string::npos);
    }
}

TEST_CASE("small scenario pipeline end to end") {
    ScenarioConfig c;
    c.environment = EnvironmentKind::dephasing;
    c.shots_per_point = 1500;
    c.seed = 4242;
    c.sampler.n = 16;
    c.sampler.thinning = 40;
    c.sampler.burn_in = 2000;
    c.sampler.proposal.sigma = 0.01;
    c.sampler.proposal.adapt_interval = 25;
    c.sampler.proposal.adapt_factor = 1.25;

    ScenarioReport r = run_scenario(c);
    REQUIRE(r.points.size() == 4);
    REQUIRE(r.complete);
    REQUIRE(r.shots_per_point == 1500);
    REQUIRE(r.config_hash == config_hash(c));

    for (const auto& p : r.points) {
        REQUIRE(p.mle_fidelity > 0.9);
        REQUIRE(validate_density(p.mle.matrix).ok());
        REQUIRE(validate_density(p.ensemble_mean.matrix).ok());
        REQUIRE(p.acceptance_mean > 0.1);
        REQUIRE(p.acceptance_mean < 0.9);
        REQUIRE_FALSE(p.entropy.n_used == 0);
        REQUIRE(std::isfinite(p.entropy.f_est));
        REQUIRE(p.final_sigma > 0.0);
        REQUIRE(p.dataset_seed != p.chain_seed);
    }

    REQUIRE(r.sigma.diverged_fraction == 0.0);
    REQUIRE(r.sigma.n_used == 16);
    REQUIRE(r.sigma.f_est > 0.5);
    REQUIRE(r.sigma.f_est < 1.5);
    REQUIRE(std::isfinite(r.erased_mi.f_est));

    SECTION("repeat runs are byte identical") {
        ScenarioReport again = run_scenario(c);
        REQUIRE(render_csv({r}) == render_csv({again}));
        REQUIRE(render_json({r}) == render_json({again}));
    }

    SECTION("report json round trip") {
        nlohmann::json j = r;
        ScenarioReport back = j.get<ScenarioReport>();
        nlohmann::json j2 = back;
        REQUIRE(j.dump() == j2.dump());
    }
}

TEST_CASE("staged pipeline matches the in-memory run") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "qcycle_stage_test";
    fs::remove_all(dir);

    ScenarioConfig c;
    c.environment = EnvironmentKind::identity;
    c.shots_per_point = 600;
    c.seed = 7;
    c.sampler.n = 8;
    c.sampler.thinning = 30;
    c.sampler.burn_in = 1000;
    c.sampler.proposal.sigma = 0.02;
    c.sampler.proposal.adapt_interval = 25;
    c.sampler.proposal.adapt_factor = 1.25;
    c.out_dir = dir.string();
    c.format = "csv";

    run_simulate_stage(c);
    REQUIRE(fs::exists(dir / "states_identity.json"));
    REQUIRE(fs::exists(dir / "dataset_identity_rho_0.jsonl"));
    REQUIRE(fs::exists(dir / "dataset_identity_rho_tilde_tau.jsonl"));

    run_estimate_stage(c);
    REQUIRE(fs::exists(dir / "estimates_identity.json"));
    REQUIRE(fs::exists(dir / "ensemble_identity_rho_tau.json"));

    ScenarioReport staged = run_analyze_stage(c);
    REQUIRE(fs::exists(dir / "report_identity.json"));

    const std::string rendered = run_report_stage(c);
    REQUIRE(fs::exists(rendered));
    std::ifstream in(rendered);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(body == render_csv({staged}));

    ScenarioConfig direct = c;
    direct.out_dir.clear();
    ScenarioReport mem = run_scenario(direct);
    REQUIRE(render_csv({staged}) == render_csv({mem}));
    for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(trace_distance(staged.points[k].mle, mem.points[k].mle) < 1e-12);
        REQUIRE(trace_distance(staged.points[k].ensemble_mean, mem.points[k].ensemble_mean) <
                1e-12);
    }

    SECTION("missing inputs are reported") {
        ScenarioConfig other = c;
        other.environment = EnvironmentKind::decorrelation;
        REQUIRE_THROWS_AS(run_analyze_stage(other), std::runtime_error);
        REQUIRE_THROWS_AS(run_report_stage(other), std::runtime_error);
    }

    fs::remove_all(dir);
}

TEST_CASE("reconstructed correlations degrade with pulse jitter") {
    // Point estimates of the forward-state mutual information, reconstructed
    // from finite data, should track the closed-form decoherence ladder.
    auto mean_reconstructed_mi = [](double jitter) {
        ImperfectionModel m;
        m.pulse_area_jitter = jitter;
        DensityOperator truth = forward_state(m);
        const std::vector<EffectSet> sets = scenario_effect_sets(ic_effect_family());
        double acc = 0.0;
        const int seeds = 5;
        for (int s = 0; s < seeds; ++s) {
            Dataset ds = sample_dataset(truth, sets, 5000, derive_seed(9000, std::uint64_t(s)));
            LikelihoodModel model(ds, sets);
            MleResult mle = mle_reconstruct(model);
            EntropyValue mi = mutual_information(mle.state, {}, LogBase::bits);
            REQUIRE_FALSE(mi.diverged);
            acc += mi.value;
        }
        return acc / seeds;
    };

    const double mi0 = mean_reconstructed_mi(0.0);
    const double mi5 = mean_reconstructed_mi(0.05);
    const double mi10 = mean_reconstructed_mi(0.10);
    CAPTURE(mi0, mi5, mi10);
    REQUIRE(mi0 > mi5);
    REQUIRE(mi5 > mi10);
    REQUIRE(mi0 == Approx(2.0).margin(0.05));
    REQUIRE(mi10 < 1.99);
}

TEST_CASE("report rendering formats") {
    SECTION("empty bundle renders the header only") {
        REQUIRE(render_csv({}) == "environment,quantity,estimate,delta,diverged_fraction\n");
    }

    SECTION("svg carries the ideal rules and divergence marker") {
        std::vector<ScenarioReport> bundle;
        for (auto env : {EnvironmentKind::identity, EnvironmentKind::dephasing,
                         EnvironmentKind::decorrelation, EnvironmentKind::local_thermalization}) {
            ScenarioConfig c;
            c.environment = env;
            c.ideal = true;
            bundle.push_back(run_scenario(c));
        }
        const std::string svg = render_svg(bundle);
        REQUIRE(svg.rfind("<svg", 0) == 0);
        std::size_t rules = 0, pos = 0;
        while ((pos = svg.find("ideal-rule", pos)) != std::string::npos) {
            ++rules;
            pos += 10;
        }
        REQUIRE(rules == 3);
        REQUIRE(svg.find("&#8734;") != std::string::npos);
        for (const char* env : {"identity", "dephasing", "decorrelation", "reset"})
            REQUIRE(svg.find(env) != std::string::npos);
    }

    SECTION("render_report writes the requested file") {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / "qcycle_render_test";
        fs::create_directories(dir);
        ScenarioConfig c;
        c.ideal = true;
        ScenarioReport r = run_scenario(c);
        const std::string path = render_report(r, "json", (dir / "out.json").string());
        std::ifstream in(path);
        std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        REQUIRE(body == render_json({r}));
        REQUIRE_THROWS_AS(render_report(r, "pdf", (dir / "out.pdf").string()),
                          std::invalid_argument);
        fs::remove_all(dir);
    }
}

TEST_CASE("scenario configuration round trip") {
    SECTION("explicit json parses into every field") {
        const char* text = R"({
            "environment": "deph",
            "imperfections": {"atom_decay_per_stage": 0.01, "pulse_area_jitter": 0.02},
            "effect_family": {"detection_error": 0.04, "photon_resolution": 4, "cavity_dim": 4,
                              "displacement_amplitudes": [[0.0, 0.0], [0.5, 0.25]],
                              "atomic_basis": "z"},
            "dephasing": {"mode": "fixed_energy_fock", "target": "B_only"},
            "shots_per_point": 1234,
            "seed": 99,
            "sampler": {"n": 12, "thinning": 50, "burn_in": 600,
                        "proposal": {"sigma": 0.2, "adapt_interval": 25}},
            "out_dir": "/tmp/somewhere",
            "format": "svg",
            "ideal": false
        })";
        ScenarioConfig c = nlohmann::json::parse(text).get<ScenarioConfig>();
        REQUIRE(c.environment == EnvironmentKind::dephasing);
        REQUIRE(c.imperfections.atom_decay_per_stage == 0.01);
        REQUIRE(c.imperfections.pulse_area_jitter == 0.02);
        REQUIRE(c.imperfections.echo_angle_error == 0.0);
        REQUIRE(c.effect_family.detection_error == 0.04);
        REQUIRE(c.effect_family.displacement_amplitudes.size() == 2);
        REQUIRE(c.effect_family.displacement_amplitudes[1] == cplx(0.5, 0.25));
        REQUIRE(c.shots_per_point == 1234);
        REQUIRE(c.seed == 99);
        REQUIRE(c.sampler.n == 12);
        REQUIRE(c.sampler.thinning == 50);
        REQUIRE(c.sampler.proposal.sigma == 0.2);
        REQUIRE(c.sampler.proposal.adapt_interval == 25);
        REQUIRE(c.out_dir == "/tmp/somewhere");
        REQUIRE(c.format == "svg");
        REQUIRE_FALSE(c.ideal);

        nlohmann::json j = c;
        ScenarioConfig back = j.get<ScenarioConfig>();
        nlohmann::json j2 = back;
        REQUIRE(j.dump() == j2.dump());
    }

    SECTION("environment names accept long and short forms") {
        REQUIRE(environment_from_string("id") == EnvironmentKind::identity);
        REQUIRE(environment_from_string("identity") == EnvironmentKind::identity);
        REQUIRE(environment_from_string("decor") == EnvironmentKind::decorrelation);
        REQUIRE(environment_from_string("reset") == EnvironmentKind::local_thermalization);
        REQUIRE(environment_from_string("local_thermalization") ==
                EnvironmentKind::local_thermalization);
        REQUIRE_THROWS_AS(environment_from_string("vortex"), std::invalid_argument);
    }

    SECTION("invalid configurations are rejected") {
        ScenarioConfig c;
        c.format = "pdf";
        REQUIRE_THROWS_AS(check_config(c), std::invalid_argument);
        c = ScenarioConfig{};
        c.shots_per_point = -5;
        REQUIRE_THROWS_AS(check_config(c), std::invalid_argument);
        c = ScenarioConfig{};
        c.sampler.n = 0;
        REQUIRE_THROWS_AS(check_config(c), std::invalid_argument);
        c = ScenarioConfig{};
        c.imperfections.cavity_decay_per_stage = 2.0;
        REQUIRE_THROWS_AS(check_config(c), std::invalid_argument);
    }
}
