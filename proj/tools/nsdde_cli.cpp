#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nsdde/nsdde.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Tamed EM simulation and stability analysis for neutral stochastic delay systems"};
    app.require_subcommand(1);

    std::string config_path;
    unsigned workers = 1;
    bool strict = false;
    std::string out_override;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "path to key=value config")->required();
    run->add_option("--workers", workers, "number of simulation workers")->check(CLI::PositiveNumber);
    run->add_flag("--strict", strict, "treat hypothesis-check failures as errors");
    run->add_option("--out", out_override, "output directory (overrides out.dir)");

    auto* selftest = app.add_subcommand("selftest", "run the built-in property suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (selftest->parsed()) {
            const nsdde::SelftestReport rep = nsdde::run_selftest();
            std::cout << rep.render();
            return rep.all_passed ? 0 : 1;
        }

        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot read config file: " << config_path << "\n";
            return 1;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        const nsdde::ExperimentConfig cfg = nsdde::parse_config(buf.str());
        const nsdde::ExperimentResult result =
            nsdde::run_experiment(cfg, workers, strict, out_override);
        if (result.exit_status != 0)
            std::cerr << "error: " << result.message << "\n";
        else
            std::cout << result.message << "\n";
        return result.exit_status;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
