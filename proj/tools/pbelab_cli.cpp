#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pbelab/pbelab.hpp"

namespace {

pbelab::EpsGridSpec parse_grid(const std::string& text) {
    const auto a = text.find(':');
    const auto b = text.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos)
        throw pbelab::Error(pbelab::ErrorKind::ParseError, "--eps-grid expects start:stop:count");
    try {
        return {std::stod(text.substr(0, a)), std::stod(text.substr(a + 1, b - a - 1)),
                static_cast<std::size_t>(std::stoull(text.substr(b + 1)))};
    } catch (const std::exception&) {
        throw pbelab::Error(pbelab::ErrorKind::ParseError, "--eps-grid expects start:stop:count, got '" + text + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pbelab: projected Bellman equation analysis and simulation"};
    app.footer(
        "commands: analyze | solutions | qlearn | detq | avi | scan-epsilon | example <name> | export\n"
        "builtins: ex1 ex2 ex3 epsF1 epsF2\n"
        "exit codes: 0 ok, 2 invalid input, 3 numerical failure");

    std::string command;
    std::string example_name;
    std::string scenario_path;
    std::string builtin;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_iter;
    std::optional<std::size_t> stride;
    std::optional<double> tol;
    std::optional<double> eta;
    std::string eps_grid;
    std::string target_mode;

    app.add_option("command", command, "command to run")->required();
    app.add_option("name", example_name, "builtin name for the example command");
    app.add_option("--scenario", scenario_path, "scenario JSON file");
    app.add_option("--builtin", builtin, "use a builtin scenario instead of a file");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", seed, "sampler seed");
    app.add_option("--max-iter", max_iter, "iteration budget");
    app.add_option("--tol", tol, "convergence tolerance");
    app.add_option("--eta", eta, "regularization strength");
    app.add_option("--eps-grid", eps_grid, "epsilon grid start:stop:count");
    app.add_option("--target-mode", target_mode, "greedy or eps-greedy");
    app.add_option("--stride", stride, "trajectory subsampling stride");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(pbelab::ExitCode::validation);
    }

    pbelab::Scenario sc;
    try {
        if (command == "example") {
            if (example_name.empty()) throw pbelab::Error(pbelab::ErrorKind::ValidationError, "example needs a name");
            sc = pbelab::builtin_scenario(example_name);
        } else if (!scenario_path.empty() && !builtin.empty()) {
            throw pbelab::Error(pbelab::ErrorKind::ValidationError, "give either --scenario or --builtin, not both");
        } else if (!scenario_path.empty()) {
            sc = pbelab::load_scenario(scenario_path);
        } else if (!builtin.empty()) {
            sc = pbelab::builtin_scenario(builtin);
        } else {
            throw pbelab::Error(pbelab::ErrorKind::ValidationError, "no scenario: pass --scenario or --builtin");
        }
        if (seed) sc.algorithms.seed = *seed;
        if (max_iter) sc.algorithms.max_iter = *max_iter;
        if (stride) sc.algorithms.stride = *stride;
        if (tol) sc.algorithms.tol = *tol;
        if (eta) sc.eta = *eta;
        if (!eps_grid.empty()) sc.algorithms.eps_grid = parse_grid(eps_grid);
        if (!target_mode.empty()) sc.algorithms.target_mode = pbelab::parse_target_mode(target_mode);
    } catch (const pbelab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.numerical() ? pbelab::ExitCode::numerical : pbelab::ExitCode::validation);
    }
    return pbelab::run_command(command, sc, out_dir, std::cerr);
}
