#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "qsub/commands.hpp"

int main(int argc, char **argv) {
    CLI::App app{"qsub: measurement chains, ensembles and geodesic studies for finite quantum systems"};
    app.require_subcommand(1);

    qsub::CommandOptions opts;
    std::uint64_t seed = 0;
    std::string format = "jsonl";

    const std::map<std::string, int (*)(const qsub::CommandOptions &, std::ostream &, std::ostream &)>
        commands = {{"run", qsub::cmd_run},
                    {"ensemble", qsub::cmd_ensemble},
                    {"geodesic", qsub::cmd_geodesic},
                    {"validate", qsub::cmd_validate}};
    const std::map<std::string, std::string> help = {
        {"run", "Run one measurement chain and write its trace"},
        {"ensemble", "Sample many chains and summarize outcome statistics"},
        {"geodesic", "Integrate a geodesic with a transported frame"},
        {"validate", "Check a scenario file and list its issues"}};

    for (const auto &[name, fn] : commands) {
        CLI::App *sub = app.add_subcommand(name, help.at(name));
        sub->add_option("scenario", opts.scenario, "Scenario file (.qsub.json)")->required();
        if (name == "validate") continue;
        sub->add_option("--seed", seed, "Seed overriding the scenario seed");
        sub->add_option("--out", opts.out, "Output path (default: standard output)");
        if (name == "ensemble") {
            sub->add_option("--samples", opts.samples, "Number of trajectories")->capture_default_str();
            sub->add_option("--threads", opts.threads, "Worker threads")->capture_default_str();
        } else {
            sub->add_option("--format", format, "Trace format")
                ->check(CLI::IsMember({"jsonl", "csv"}))
                ->capture_default_str();
        }
        if (name == "geodesic")
            sub->add_option("--u-span", opts.u_span, "Affine parameter span")->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : qsub::exit_validation;
    }

    for (CLI::App *sub : app.get_subcommands()) {
        if (const CLI::Option *o = sub->get_option_no_throw("--seed"); o && o->count()) opts.seed = seed;
        opts.format = qsub::trace_format_from_string(format);
        return commands.at(sub->get_name())(opts, std::cout, std::cerr);
    }
    return qsub::exit_validation;
}
