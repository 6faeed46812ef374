// Command-line front end for the scenario pipeline.
//
//   qcycle run      --ideal                 ladder of true-state quantities
//   qcycle run      --out dir --env deph    full pipeline, artifacts + report
//   qcycle simulate --out dir               true states + datasets
//   qcycle estimate --out dir               MLE + posterior ensembles
//   qcycle analyze  --out dir               entropic quantities + report json
//   qcycle report   --out dir --format svg  render a stored report
//
// Exit codes: 0 success, 2 invalid configuration or usage, 3 runtime failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qcycle/qcycle.hpp"

namespace {

struct Args {
    std::string config_path;
    std::string env;
    std::string out;
    std::string format;
    std::uint64_t seed = 0;
    long long shots = 0;
    bool ideal = false;
};

void attach_options(CLI::App* sub, Args& a) {
    sub->add_option("--config", a.config_path, "JSON file mirroring ScenarioConfig fields");
    sub->add_option("--seed", a.seed, "master seed for datasets and chains");
    sub->add_option("--env", a.env, "environment: id|deph|decor|reset (default: all four)");
    sub->add_option("--shots", a.shots, "shots per reference point");
    sub->add_option("--out", a.out, "artifact/report directory");
    sub->add_option("--format", a.format, "report format: csv|json|svg");
    sub->add_flag("--ideal", a.ideal, "compute quantities on the true states directly");
}

qcycle::ScenarioConfig load_config(const Args& a, const CLI::App* sub) {
    qcycle::ScenarioConfig c;
    if (sub->count("--config")) {
        std::ifstream in(a.config_path);
        if (!in) throw std::invalid_argument("cannot open config file " + a.config_path);
        nlohmann::json j;
        try {
            in >> j;
            c = j.get<qcycle::ScenarioConfig>();
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(std::string("config file: ") + e.what());
        }
    }
    if (sub->count("--seed")) c.seed = a.seed;
    if (sub->count("--shots")) c.shots_per_point = a.shots;
    if (sub->count("--out")) c.out_dir = a.out;
    if (sub->count("--format")) c.format = a.format;
    if (a.ideal) c.ideal = true;
    qcycle::check_config(c);
    return c;
}

std::vector<qcycle::EnvironmentKind> environments(const Args& a, const CLI::App* sub) {
    if (sub->count("--env")) return {qcycle::environment_from_string(a.env)};
    return {qcycle::EnvironmentKind::identity, qcycle::EnvironmentKind::dephasing,
            qcycle::EnvironmentKind::decorrelation, qcycle::EnvironmentKind::local_thermalization};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cavity-cycle simulator and entropy-production estimation toolkit"};
    app.require_subcommand(1);
    Args args;
    attach_options(app.add_subcommand("simulate", "simulate true states and sample datasets"),
                   args);
    attach_options(app.add_subcommand("estimate", "reconstruct states from stored datasets"),
                   args);
    attach_options(app.add_subcommand("analyze", "compute entropic quantities from ensembles"),
                   args);
    attach_options(app.add_subcommand("report", "render a stored report"), args);
    attach_options(app.add_subcommand("run", "full pipeline in one invocation"), args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const CLI::App* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        qcycle::ScenarioConfig base = load_config(args, sub);
        if (name != "run" && base.out_dir.empty())
            throw std::invalid_argument(name + ": --out (or out_dir in the config) is required");

        std::vector<qcycle::ScenarioReport> bundle;
        for (qcycle::EnvironmentKind env : environments(args, sub)) {
            qcycle::ScenarioConfig c = base;
            c.environment = env;
            if (name == "simulate") {
                qcycle::run_simulate_stage(c);
            } else if (name == "estimate") {
                qcycle::run_estimate_stage(c);
            } else if (name == "analyze") {
                qcycle::run_analyze_stage(c);
            } else if (name == "report") {
                std::cout << qcycle::run_report_stage(c) << "\n";
            } else {
                bundle.push_back(qcycle::run_scenario(c));
            }
        }

        if (name == "run") {
            if (base.out_dir.empty()) {
                if (base.format == "csv")
                    std::cout << qcycle::render_csv(bundle);
                else if (base.format == "json")
                    std::cout << qcycle::render_json(bundle);
                else
                    std::cout << qcycle::render_svg(bundle);
            } else {
                std::filesystem::create_directories(base.out_dir);
                for (const qcycle::ScenarioReport& r : bundle) {
                    const std::string path =
                        (std::filesystem::path(base.out_dir) /
                         ("report_" + qcycle::environment_to_string(r.environment) + ".json"))
                            .string();
                    std::ofstream out(path);
                    if (!out) throw std::runtime_error("cannot write " + path);
                    nlohmann::json j = r;
                    out << j.dump(2) << "\n";
                }
                const std::string rendered = qcycle::render_report(
                    bundle, base.format,
                    (std::filesystem::path(base.out_dir) / ("report." + base.format)).string());
                std::cout << rendered << "\n";
            }
        }
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
