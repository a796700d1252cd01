#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "incpref/commands.hpp"
#include "incpref/numerics.hpp"

using namespace incpref;

int main(int argc, char** argv) {
    CLI::App app{"Consumption-investment experiments under time-varying incomplete preferences"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, preset_name, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths, steps;
    std::optional<int> threads;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--preset", preset_name, "named preset (example1_case1 ... example3, frontier_default)");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--paths", paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    app.add_option("--steps", steps, "time steps on [0, T]")->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output directory");

    for (const char* verb : {"frontier", "index-set", "solve", "portfolio", "convergence"}) app.add_subcommand(verb);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    const std::string verb = app.get_subcommands().front()->get_name();

    ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path, preset_name);
        else if (!preset_name.empty()) cfg = preset(preset_name);
        else throw ConfigError("", "give --config or --preset");
        if (seed) cfg.seed = *seed;
        if (paths) cfg.paths = *paths;
        if (steps) cfg.steps = *steps;
        if (threads) cfg.threads = *threads;
        if (!out.empty()) cfg.out = out;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    try {
        const auto result = run_command(verb, cfg);
        for (const auto& f : write_output(cfg, result)) std::cout << f << "\n";
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
