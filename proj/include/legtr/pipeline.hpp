#pragma once

// End-to-end runs: synthetic data, inversion, artifacts.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "legtr/config.hpp"
#include "legtr/error.hpp"
#include "legtr/forward_solver.hpp"
#include "legtr/inverse_solver.hpp"
#include "legtr/io.hpp"
#include "legtr/reduced_model.hpp"
#include "legtr/time_basis.hpp"

namespace legtr {

using Logger = std::function<void(const std::string&)>;

struct SimulationResult {
    VectorField2D u_true;
    BoundaryTimeSeries clean;
    BoundaryTimeSeries noisy;
};

struct InversionResult {
    PicardState state;
    VectorField2D u0_comp;
    std::optional<Metrics> metrics;
};

inline VectorField2D initial_field(const RunConfig& cfg) {
    const Grid2D g = cfg.make_grid();
    if (cfg.initial_field.empty()) return make_test_field(cfg.test_id, g);
    VectorField2D u = io::read_field_csv(cfg.initial_field);
    if (!u.grid().same_as(g))
        throw ConfigError("pipeline", "initial field grid does not match the configured " + std::to_string(cfg.grid) + "^2 grid on (-1, 1)^2");
    return u;
}

inline SimulationResult simulate(const RunConfig& cfg, const Logger& log = {}) {
    cfg.validate();
    VectorField2D u0 = initial_field(cfg);
    ForwardResult fr = run_forward(u0, cfg.forward(), false);
    if (log) log("forward: " + std::to_string(cfg.n_steps) + " steps, dt = " + io::fmt(cfg.forward().dt()));
    BoundaryTimeSeries noisy = add_noise(fr.trace, cfg.noise);
    return {std::move(u0), std::move(fr.trace), std::move(noisy)};
}

/// Pressure-gradient modes p_000.csv .. p_NNN.csv from `dir`.
inline ModeStack read_pressure_modes(const std::filesystem::path& dir, const Grid2D& g, int n_modes) {
    std::vector<VectorField2D> fields;
    for (int m = 0; m < n_modes; ++m) {
        char name[32];
        std::snprintf(name, sizeof name, "p_%03d.csv", m);
        VectorField2D f = io::read_field_csv(dir / name);
        if (!f.grid().same_as(g)) throw ShapeError("pipeline", dir.string() + "/" + name + " is not on the configured grid");
        fields.push_back(std::move(f));
    }
    return ModeStack::from_fields(fields);
}

/// Algorithm 1 on measured Neumann data. `truth` enables metrics; a
/// non-empty `dump_dir` receives the design matrix and every right-hand side.
inline InversionResult invert(const RunConfig& cfg, const BoundaryTimeSeries& data, const VectorField2D* truth,
                              const std::filesystem::path& dump_dir = {}, const Logger& log = {}) {
    cfg.validate();
    const Grid2D g = cfg.make_grid();
    if (data.n_boundary() != g.n_boundary()) throw ShapeError("pipeline", "boundary data does not match the grid");
    auto basis = std::make_shared<const BasisTable>(build_basis_table(cfg.N, cfg.T, cfg.n_quad));
    InverseProblem problem{g, cfg.viscosity(), basis, compute_couplings(*basis), project_boundary_data(data, *basis), std::nullopt,
                           cfg.eps};
    if (!cfg.pressure_modes.empty()) problem.pressure_modes = read_pressure_modes(cfg.pressure_modes, g, basis->modes());
    const ModeStack* pressure = problem.pressure_modes ? &*problem.pressure_modes : nullptr;
    PicardOptions opt = cfg.picard();

    PicardObserver observer;
    if (log) {
        observer = [&](const PicardState& s) {
            log("picard k=" + std::to_string(s.k) + " increment=" + io::fmt(s.increments.back()));
        };
    }
    std::optional<ReducedOperator> dump_op;
    const CouplingTensor zero(basis->modes());
    if (!dump_dir.empty()) {
        dump_op.emplace(g, problem.mu, problem.couplings.S, cfg.eps, problem.weights);
        const ReducedOperator& op = *dump_op;
        io::write_matrix_market(dump_dir / "design.mtx", op.design());
        const CouplingTensor& A = opt.convection ? problem.couplings.A : zero;
        io::write_matrix_market(dump_dir / "rhs_001.mtx", op.rhs(ModeStack(g, basis->modes()), pressure, problem.boundary_modes));
        // rhs of iteration k + 1 depends on U^(k).
        observer = [&, inner = observer](const PicardState& s) {
            if (inner) inner(s);
            if (s.k >= opt.K) return;
            char name[32];
            std::snprintf(name, sizeof name, "rhs_%03d.mtx", s.k + 1);
            io::write_matrix_market(dump_dir / name, op.rhs(convection_source(s.U, A), pressure, problem.boundary_modes));
        };
    }
    PicardState state = picard_run(problem, opt, observer);
    ReconstructionResult rec = reconstruct(state.U, *basis);
    std::optional<Metrics> m;
    if (truth) m = compute_metrics(rec.u0_comp, *truth, support_masks(*truth));
    return {std::move(state), std::move(rec.u0_comp), m};
}

// --- Artifacts ---------------------------------------------------------------

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream f = io::open_out(path);
    f << j.dump(2) << '\n';
    io::close_out(f, path);
}

inline nlohmann::json meta_json(const RunConfig& cfg) {
    const Grid2D g = cfg.make_grid();
    return {{"config", to_json(cfg)},
            {"dt", cfg.T / cfg.n_steps},
            {"hx", g.hx()},
            {"n_boundary", g.n_boundary()},
            {"n_interior", g.n_interior()}};
}

inline void write_simulation(const std::filesystem::path& out, const RunConfig& cfg, const SimulationResult& sim) {
    io::write_trace_csv(out / "trace.csv", sim.noisy, cfg.make_grid());
    io::write_field_csv(out / "u_true_t0.csv", sim.u_true);
    write_json(out / "meta.json", meta_json(cfg));
}

inline std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return io::fmt(v);
}

inline nlohmann::json metrics_json(const InversionResult& r) {
    nlohmann::json j;
    j["iterations"] = r.state.k;
    j["early_stopped"] = r.state.early_stopped;
    j["degenerate"] = r.state.degenerate;
    nlohmann::json inc = nlohmann::json::array();
    for (double v : r.state.increments) {
        if (std::isfinite(v)) inc.push_back(v);
        else inc.push_back(nullptr);
    }
    j["increments"] = inc;
    for (int c = 0; c < 2; ++c) {
        const std::string key = "component_" + std::to_string(c + 1);
        if (r.metrics) {
            const ComponentMetrics& m = r.metrics->component[c];
            j[key] = {{"max_computed", m.max_computed}, {"max_true", m.max_true}, {"relative_error", m.relative_error}};
        } else {
            j[key] = {{"max_computed", r.u0_comp.component(c).maxCoeff()}};
        }
    }
    if (r.metrics) j["relative_l2"] = r.metrics->relative_l2;
    return j;
}

/// Plot data: the computed field, the convergence log and, with
/// `write_modes`, every mode.
inline void emit_plot_data(const InversionResult& r, const std::filesystem::path& out, bool write_modes) {
    io::write_field_csv(out / "u0_comp.csv", r.u0_comp);
    {
        const std::filesystem::path p = out / "convergence.csv";
        std::ofstream f = io::open_out(p);
        f << "k,increment,log_increment\n";
        for (std::size_t k = 0; k < r.state.increments.size(); ++k) {
            const double v = r.state.increments[k];
            f << k + 1 << ',' << csv_number(v) << ',' << csv_number(std::log(v)) << '\n';
        }
        io::close_out(f, p);
    }
    if (write_modes) {
        for (int m = 0; m < r.state.U.n_modes(); ++m) {
            char name[32];
            std::snprintf(name, sizeof name, "u_%03d.csv", m);
            io::write_field_csv(out / "modes" / name, r.state.U.field(m));
        }
    }
}

inline void write_inversion(const std::filesystem::path& out, const RunConfig& cfg, const InversionResult& r) {
    emit_plot_data(r, out, cfg.write_modes);
    write_json(out / "metrics.json", metrics_json(r));
}

/// Coupling tables and basis samples for the configured N and T.
inline void write_basis_tables(const std::filesystem::path& out, const RunConfig& cfg) {
    cfg.validate();
    const BasisTable basis = build_basis_table(cfg.N, cfg.T, cfg.n_quad);
    const CouplingCoefficients cc = compute_couplings(basis);
    io::write_s_csv(out / "S.csv", cc.S);
    io::write_a_csv(out / "A.csv", cc.A);
    io::write_basis_csv(out / "basis.csv", basis);
    write_json(out / "meta.json", meta_json(cfg));
}

inline InversionResult run_full(const RunConfig& cfg, const std::filesystem::path& out, const Logger& log = {}) {
    cfg.validate();
    initial_field(cfg);  // fail before any output exists
    const SimulationResult sim = simulate(cfg, log);
    write_simulation(out, cfg, sim);
    const InversionResult r = invert(cfg, sim.noisy, &sim.u_true, cfg.dump_system ? out / "system" : std::filesystem::path{}, log);
    write_inversion(out, cfg, r);
    return r;
}

} // namespace legtr
