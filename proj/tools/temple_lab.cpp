#include "temple/errors.hpp"
#include "temple/experiments.hpp"
#include "temple/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = 0;
};

int run(const std::string& name, const Flags& f) {
    using namespace temple;
    ExperimentConfig cfg;
    try {
        cfg = load_config(f.config);
    } catch (const Error& e) {
        std::cerr << "temple-lab: " << e.what() << "\n";
        return 3;
    }
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (f.seed) {
        cfg.seed = *f.seed;
        cfg.echo["seed"] = *f.seed;
    }
    if (!cfg.experiment.empty() && cfg.experiment != name)
        std::cerr << "temple-lab: note: config names experiment '" << cfg.experiment << "', running '" << name << "'\n";
    cfg.experiment = name;
    cfg.echo["experiment"] = name;
    set_threads(f.threads);

    EstimateReport rep;
    int code = 0;
    try {
        rep = run_experiment(name, cfg);
        code = exit_code(rep);
    } catch (const PreconditionError& e) {
        // rejected before any stage ran; still leave a report behind
        rep.experiment = name;
        rep.verdict = "fail";
        rep.anomalies.push_back(std::string("precondition: ") + e.what());
        code = 3;
    } catch (const ConfigError& e) {
        std::cerr << "temple-lab: " << e.what() << "\n";
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "temple-lab: domain error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "temple-lab: " << e.what() << "\n";
        return 3;
    }
    try {
        for (const auto& path : emit_report(rep, cfg)) std::cout << path << "\n";
    } catch (const std::exception& e) {
        std::cerr << "temple-lab: " << e.what() << "\n";
        return 3;
    }
    std::cout << name << ": " << rep.verdict << "\n";
    for (const auto& a : rep.anomalies) std::cout << "  anomaly: " << a << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temple chart and null distance experiments"};
    app.require_subcommand(1);
    Flags flags;
    std::string chosen;
    for (const auto& name : temple::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", flags.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", flags.out, "output directory, overrides the config");
        sub->add_option("--seed", flags.seed, "random seed, overrides the config");
        sub->add_option("--threads", flags.threads, "worker threads (0 or 1: serial)")->check(CLI::NonNegativeNumber);
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }
    return run(chosen, flags);
}
