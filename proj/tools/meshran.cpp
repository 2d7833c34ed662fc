#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "meshran/experiment.hpp"

namespace fs = std::filesystem;
using namespace meshran;

namespace {

std::uint64_t resolve_seed(const Scenario& sc, bool seed_set, std::uint64_t cli_seed) {
    if (seed_set) return cli_seed;
    if (const char* env = std::getenv("MESHRAN_SEED")) return std::stoull(env);
    return sc.seed;
}

void write_file(const fs::path& p, const std::string& data) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << data;
}

int run_file(const std::string& path, bool seed_set, std::uint64_t cli_seed,
             const std::string& out_dir, bool want_trace, bool is_compare) {
    Scenario sc;
    try {
        sc = load_scenario(path);
    } catch (const std::exception& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    }
    std::uint64_t seed = resolve_seed(sc, seed_set, cli_seed);

    std::size_t feasible = 0;
    for (const Cell& c : sc.cells)
        if (!cell_infeasibility(sc, c)) ++feasible;
    if (feasible == 0) {
        for (const Cell& c : sc.cells)
            if (auto why = cell_infeasibility(sc, c))
                std::cerr << "validation error: cell " << to_string(c.variant) << "/"
                          << to_string(c.approach) << ": " << *why << '\n';
        return 2;
    }

    ComparisonReport rep;
    try {
        rep = run_cells(sc, seed);
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 3;
    }

    std::cout << report_table(rep);
    try {
        fs::path dir(out_dir);
        fs::create_directories(dir);
        write_file(dir / (sc.name + "_metrics.csv"), metrics_csv(rep));
        write_file(dir / (sc.name + "_report.txt"), report_table(rep));
        if (want_trace) {
            std::string all;
            for (const CellResult& c : rep.cells) {
                all += "# cell " + std::string(to_string(c.cell.variant)) + " " +
                       to_string(c.cell.approach) +
                       (c.infeasible ? " infeasible: " + c.reason : "") + "\n";
                all += c.trace;
            }
            write_file(dir / (sc.name + "_trace.log"), all);
        }
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 3;
    }
    (void)is_compare;
    return 0;
}

int validate_file(const std::string& path) {
    Scenario sc;
    try {
        sc = load_scenario(path);
    } catch (const std::exception& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    }
    int rc = 0;
    for (const Cell& c : sc.cells) {
        if (auto why = cell_infeasibility(sc, c)) {
            std::cerr << "validation error: cell " << to_string(c.variant) << "/"
                      << to_string(c.approach) << ": " << *why << '\n';
            rc = 2;
        }
    }
    if (rc == 0) std::cout << "ok: " << sc.name << " (" << sc.cells.size() << " cells)\n";
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mesh RAN session-establishment simulator"};
    app.require_subcommand(1);

    std::string file, out_dir = ".";
    std::uint64_t seed = 0;
    bool want_trace = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("file", file, "scenario file")->required();
        cmd->add_option("--seed", seed, "override the seed");
        cmd->add_option("--out", out_dir, "artifact output directory");
        cmd->add_flag("--trace", want_trace, "write the event trace");
    };
    CLI::App* run = app.add_subcommand("run", "run a scenario and write artifacts");
    add_common(run);
    CLI::App* cmp = app.add_subcommand("compare", "run a comparison matrix");
    add_common(cmp);
    CLI::App* val = app.add_subcommand("validate", "check a scenario file");
    val->add_option("file", file, "scenario file")->required();

    CLI11_PARSE(app, argc, argv);

    if (val->parsed()) return validate_file(file);
    bool seed_set = (run->parsed() ? run : cmp)->count("--seed") > 0;
    return run_file(file, seed_set, seed, out_dir, want_trace, cmp->parsed());
}
