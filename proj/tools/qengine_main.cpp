// qengine: command-line runner for the laser / chemical-engine scenarios.

#include "qengine/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Open-quantum-system laser and chemical-engine simulator"};
    app.require_subcommand(1);

    qengine::cli::CommandOptions options;
    std::uint64_t seed = 0;
    app.add_flag("--quiet,-q", options.quiet, "Suppress progress and warning output");
    auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");

    auto* run = app.add_subcommand("run", "Run a scenario and write the requested outputs");
    run->add_option("--config", options.config_path, "Path to the JSON config")->required();
    run->add_option("--out", options.out_dir, "Output directory (overrides out_dir)");
    run->add_flag("--quiet,-q", options.quiet, "Suppress progress and warning output");
    run->add_option("--seed", seed, "Override the config seed");

    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep over stationary states");
    sweep->add_option("--config", options.config_path, "Path to the JSON config")->required();
    sweep->add_option("--out", options.out_dir, "Output directory (overrides out_dir)");
    sweep->add_flag("--quiet,-q", options.quiet, "Suppress progress and warning output");
    sweep->add_option("--seed", seed, "Override the config seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(qengine::cli::ExitCode::ConfigError);
    }
    const bool seed_given = seed_opt->count() > 0 || run->count("--seed") > 0 || sweep->count("--seed") > 0;
    if (seed_given) options.seed = seed;

    if (run->parsed()) return qengine::cli::run_command(options, std::cout, std::cerr);
    return qengine::cli::sweep_command(options, std::cout, std::cerr);
}
