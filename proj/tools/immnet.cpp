// immnet: mobility and coverage experiments for community small-cell networks.
//
//   immnet simulate [--model imm|rwp]       trajectory CSV
//   immnet figure --id N [--svg]            figure grid CSV (+ SVG)
//   immnet validate                         fast invariant report
//   immnet config --print-defaults          default config text
//
// Exit codes: 0 success, 1 computation error, 2 configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "immnet/experiment.hpp"

namespace fs = std::filesystem;
using namespace immnet;

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

immnet::ConfigOverrides parse_sets(const std::vector<std::string>& sets) {
    immnet::ConfigOverrides o;
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
        o.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mobility and coverage experiments for community small-cell networks"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed, workers;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--seed", seed, "master seed (overrides config)");
    app.add_option("--workers", workers, "worker threads (overrides config)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--set", sets, "override a config key, key=value (repeatable)");

    auto* simulate = app.add_subcommand("simulate", "write one trajectory as CSV");
    std::string model = "imm";
    simulate->add_option("--model", model, "imm or rwp")->check(CLI::IsMember({"imm", "rwp"}));

    auto* figure = app.add_subcommand("figure", "run a figure grid");
    int figure_id = 0;
    bool svg = false;
    figure->add_option("--id", figure_id, "figure id, 2..7")->required();
    figure->add_flag("--svg", svg, "also write an SVG chart");

    auto* validate_cmd = app.add_subcommand("validate", "run the fast invariant suite");

    auto* config = app.add_subcommand("config", "configuration helpers");
    bool print_defaults = false;
    config->add_flag("--print-defaults", print_defaults, "print the default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (config->parsed()) {
            if (!print_defaults) {
                std::cerr << "config: nothing to do (try --print-defaults)\n";
                return 2;
            }
            std::cout << config_text(ExperimentConfig{});
            return 0;
        }

        ConfigOverrides overrides = parse_sets(sets);
        if (seed) overrides.emplace_back("seed", std::to_string(*seed));
        if (workers) overrides.emplace_back("workers", std::to_string(*workers));
        const ExperimentConfig cfg = load_config(config_path, overrides);
        const FigureSpec spec = figure->parsed() ? figure_spec(figure_id) : FigureSpec{};

        fs::create_directories(out_dir);

        if (simulate->parsed()) {
            const Layout l = cfg.layout();
            const Trajectory t = model == "imm"
                                     ? simulate_imm(cfg.imm(), l, cfg.n_jumps, cfg.seed)
                                     : simulate_rwp(cfg.speed_mps, cfg.rwp_wait(), l, cfg.n_jumps, cfg.seed);
            const fs::path path = fs::path(out_dir) / ("trajectory_" + model + ".csv");
            std::ofstream os(path, std::ios::binary);
            if (!os) throw std::runtime_error("cannot write " + path.string());
            write_trajectory_csv(os, t);
            std::cout << path.string() << "\n";
        } else if (figure->parsed()) {
            const FigureOutput fig = run_figure(spec, cfg);
            const fs::path csv = fs::path(out_dir) / ("figure_" + std::to_string(figure_id) + ".csv");
            write_file(csv, fig.csv);
            std::cout << csv.string() << "\n";
            if (svg) {
                const fs::path p = fs::path(out_dir) / ("figure_" + std::to_string(figure_id) + ".svg");
                write_file(p, render_svg(fig));
                std::cout << p.string() << "\n";
            }
        } else if (validate_cmd->parsed()) {
            const ValidationReport rep = validate(cfg);
            std::cout << rep.text();
            std::cout << (rep.all_passed() ? "all checks passed\n" : "some checks did not pass\n");
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ConvergenceError& e) {
        std::cerr << "computation error: " << e.what() << " (estimate " << e.estimate() << ", error bound "
                  << e.error_bound() << ")\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "computation error: " << e.what() << "\n";
        return 1;
    }
}
