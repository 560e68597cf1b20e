// Command-line front end: run experiments, evaluate the regret bound and
// validate configs.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sleepgrant/sleepgrant.hpp"

namespace {

using namespace sleepgrant;

int bound_command(const std::string& config_path) {
    try {
        const auto cfg = parse_config(io::read_file(config_path));
        const auto sc = engine::build_scenario(cfg);
        const auto rep = io::evaluate_bound(cfg, sc);
        std::cout << "horizon = " << cfg.horizon << '\n'
                  << "psi = " << io::format_real(cfg.psi) << '\n'
                  << "arms = " << sc.true_means.size() << '\n'
                  << "p_av = " << io::format_real(rep.p_av) << '\n'
                  << "f_e1 = " << io::format_real(rep.f_e1) << (rep.f_e1_calibrated ? " (calibrated)" : "") << '\n'
                  << "f_e2 = " << io::format_real(rep.f_e2) << (rep.f_e2_calibrated ? " (calibrated)" : "") << '\n'
                  << "regret_bound = " << io::format_real(rep.value) << '\n';
        return io::kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return io::kExitConfigError;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return io::kExitConfigError;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return io::kExitIoError;
    }
}

int validate_command(const std::string& config_path) {
    try {
        const auto cfg = parse_config(io::read_file(config_path));
        std::cout << serialize_config(cfg);
        return io::kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return io::kExitConfigError;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return io::kExitIoError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sleeping-bandit fast uplink grant scheduling simulator"};
    app.require_subcommand(1);

    io::RunManifest manifest;
    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t reps = 0;
    std::string recipe;

    auto* run = app.add_subcommand("run", "Run an experiment or figure recipe and write CSV artifacts");
    run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "Master RNG seed (overrides run.seed)");
    auto* reps_opt = run->add_option("--reps", reps, "Replications (overrides run.replications)");
    run->add_option("--out", manifest.output_dir, "Output directory")->required();
    auto* recipe_opt = run->add_option("--recipe", recipe, "Figure recipe")
                           ->check(CLI::IsMember(io::recipe_names()));
    run->add_option("--threads", manifest.threads, "Worker threads for replications");

    std::string bound_config;
    auto* bound = app.add_subcommand("bound", "Evaluate the closed-form regret bound for a config");
    bound->add_option("--config", bound_config, "Config file")->required();

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Parse and validate a config, printing it in full");
    validate->add_option("--config", validate_config, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : io::kExitConfigError;
    }

    if (*run) {
        manifest.config_path = config_path;
        if (*seed_opt) manifest.seed = seed;
        if (*reps_opt) manifest.replications = reps;
        if (*recipe_opt) manifest.recipe = recipe;
        return io::run_command(manifest);
    }
    if (*bound) return bound_command(bound_config);
    return validate_command(validate_config);
}
