// legtr: synthetic data, inversion and basis tables from the command line.
//
// Exit status: 0 success, 2 invalid input or configuration, 3 solver failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "legtr/legtr.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::string data;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid;
    std::optional<int> modes;
    std::optional<double> eps;
    std::optional<double> noise;
    std::optional<int> test;
    bool no_convection = false;
    bool dump_system = false;
    bool write_modes = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON configuration (a meta.json from a previous run also works)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "noise seed");
    cmd->add_option("--grid", o.grid, "nodes per direction");
    cmd->add_option("--modes", o.modes, "highest Legendre index N");
    cmd->add_option("--eps", o.eps, "regularization parameter");
    cmd->add_option("--noise", o.noise, "relative noise level delta");
    cmd->add_option("--test", o.test, "reference initial field (1, 2 or 3)");
    cmd->add_flag("--no-convection", o.no_convection, "drop the convection term in the forward and inverse models");
    cmd->add_flag("--dump-system", o.dump_system, "write the design matrix and right-hand sides (MatrixMarket)");
    cmd->add_flag("--write-modes", o.write_modes, "write every computed mode as a field CSV");
    cmd->add_flag("-q,--quiet", o.quiet, "no progress output");
}

legtr::RunConfig resolve(const Overrides& o, const std::optional<fs::path>& base) {
    legtr::RunConfig c;
    if (base) legtr::apply_json(c, legtr::read_json(*base));
    if (!o.config.empty()) legtr::apply_json(c, legtr::read_json(o.config));
    if (!o.out.empty()) c.out = o.out;
    if (o.seed) c.noise.seed = *o.seed;
    if (o.grid) c.grid = *o.grid;
    if (o.modes) c.N = *o.modes;
    if (o.eps) c.eps = *o.eps;
    if (o.noise) c.noise.delta = *o.noise;
    if (o.test) {
        c.test_id = *o.test;
        c.initial_field.clear();
    }
    if (o.no_convection) c.convection = false;
    if (o.dump_system) c.dump_system = true;
    if (o.write_modes) c.write_modes = true;
    c.validate();
    return c;
}

legtr::Logger make_logger(bool quiet) {
    if (quiet) return {};
    const auto start = std::chrono::steady_clock::now();
    return [start](const std::string& msg) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "[%7.2fs] %s\n", s, msg.c_str());
    };
}

void print_metrics(const legtr::InversionResult& r) {
    if (!r.metrics) return;
    for (int c = 0; c < 2; ++c) {
        const auto& m = r.metrics->component[c];
        std::printf("component %d: max computed %.6g, max true %.6g, relative error %.4g\n", c + 1, m.max_computed, m.max_true,
                    m.relative_error);
    }
    std::printf("relative L2 error %.6g after %d iterations\n", r.metrics->relative_l2, r.state.k);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Initial velocity reconstruction from Neumann boundary data"};
    app.require_subcommand(1);
    Overrides o;
    auto* sim = app.add_subcommand("simulate", "forward run: trace.csv, u_true_t0.csv, meta.json");
    auto* inv = app.add_subcommand("invert", "inversion of trace.csv: u0_comp.csv, convergence.csv, metrics.json");
    auto* full = app.add_subcommand("full", "simulate followed by invert");
    auto* tab = app.add_subcommand("basis-tables", "S.csv, A.csv and basis samples");
    for (auto* cmd : {sim, inv, full, tab}) add_common(cmd, o);
    inv->add_option("--data", o.data, "directory holding trace.csv and meta.json (default: --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const legtr::Logger log = make_logger(o.quiet);
        if (*sim) {
            const legtr::RunConfig cfg = resolve(o, std::nullopt);
            legtr::initial_field(cfg);
            const auto r = legtr::simulate(cfg, log);
            legtr::write_simulation(cfg.out, cfg, r);
        } else if (*inv) {
            const fs::path data = !o.data.empty() ? fs::path(o.data) : fs::path(!o.out.empty() ? o.out : legtr::RunConfig{}.out);
            const fs::path meta = data / "meta.json";
            legtr::RunConfig cfg = resolve(o, fs::exists(meta) ? std::optional<fs::path>(meta) : std::nullopt);
            if (o.out.empty()) cfg.out = data.string();
            const auto trace = legtr::io::read_trace_csv(data / "trace.csv", cfg.make_grid());
            std::optional<legtr::VectorField2D> truth;
            if (fs::exists(data / "u_true_t0.csv")) truth = legtr::io::read_field_csv(data / "u_true_t0.csv");
            if (truth && !truth->grid().same_as(cfg.make_grid())) truth.reset();
            const auto r = legtr::invert(cfg, trace, truth ? &*truth : nullptr,
                                         cfg.dump_system ? fs::path(cfg.out) / "system" : fs::path{}, log);
            legtr::write_inversion(cfg.out, cfg, r);
            print_metrics(r);
        } else if (*full) {
            const legtr::RunConfig cfg = resolve(o, std::nullopt);
            print_metrics(legtr::run_full(cfg, cfg.out, log));
        } else if (*tab) {
            const legtr::RunConfig cfg = resolve(o, std::nullopt);
            legtr::write_basis_tables(cfg.out, cfg);
        }
    } catch (const legtr::SolverError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const legtr::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
