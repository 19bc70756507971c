// Command-line front end: dnnci <command> [--config FILE] [flags] [section.key=value ...]

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dnnci/cli.hpp"

namespace {

std::string default_section(const std::string& command) {
    if (command == "advise") return "advise";
    if (command == "simulate" || command == "placebo") return "simulation";
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep-network nuisance estimation with doubly robust causal inference"};
    app.set_version_flag("--version", DNNCI_VERSION);

    std::string command;
    std::string config_path;
    std::vector<std::string> assignments;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> reps;
    std::optional<double> clip_eps, margin, cost;
    bool randomized = false;

    std::string names;
    for (const auto& c : dnnci::cli::commands()) names += (names.empty() ? "" : ", ") + c;
    app.add_option("command", command, "one of: " + names)->required();
    app.add_option("settings", assignments, "extra settings as section.key=value (bare keys for advise/simulate)");
    app.add_option("--config", config_path, "INI config file");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--reps", reps, "Monte Carlo replications");
    app.add_flag("--randomized", randomized, "treatment was randomized: use the sample treatment share as propensity");
    app.add_option("--clip-eps", clip_eps, "propensity clipping epsilon");
    app.add_option("--margin", margin, "profit margin m");
    app.add_option("--cost", cost, "treatment cost c");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << dnnci::cli::error_line("config", e.what()) << '\n';
        return 2;
    }

    dnnci::cli::RawConfig raw;
    try {
        if (!config_path.empty()) raw = dnnci::cli::read_ini_file(config_path);
        for (const auto& a : assignments) dnnci::cli::set_value(raw, a, default_section(command));
        auto set = [&raw](const char* sec, const char* key, const std::string& v) { raw[sec][key] = v; };
        if (seed) set("run", "seed", std::to_string(*seed));
        if (out_dir) set("run", "out", *out_dir);
        if (reps) set("simulation", "reps", std::to_string(*reps));
        if (randomized) set("causal", "randomized_treatment", "true");
        if (clip_eps) set("causal", "clip_eps", dnnci::format_double(*clip_eps));
        if (margin) set("causal", "margin", dnnci::format_double(*margin));
        if (cost) set("causal", "cost", dnnci::format_double(*cost));
    } catch (const dnnci::Error& e) {
        std::cerr << dnnci::cli::error_line(e.category(), e.what()) << '\n';
        return dnnci::cli::exit_code(e);
    }
    return dnnci::cli::run_guarded(command, raw, std::cout, std::cerr);
}
