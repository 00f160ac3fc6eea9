#pragma once

// Run configuration: JSON schema, defaults and validation.
//
//   {
//     "grid": 41,              nodes per direction on (-1, 1)^2
//     "T": 1.0,
//     "n_steps": 700,
//     "N": 30,                 highest Legendre index
//     "n_quad": 0,             0 picks max(200, 4 (N + 1))
//     "eps": 1e-6,
//     "K": 10,
//     "picard_tol": 1e-6,
//     "noise": {"delta": 0.1, "seed": 1},
//     "test_id": 1,            ignored when initial_field is set
//     "initial_field": "",     field CSV (x,y,u1,u2)
//     "pressure_modes": "",    directory with p_000.csv .. p_NNN.csv (grad p_m); empty means zero
//     "lambda": 2.0,           recorded only
//     "convection": true,
//     "mu": [[...4x4...]],     flattened viscosity tensor
//     "solver": {"method": "auto", "tolerance": 1e-8, "max_iterations": 200},
//     "write_modes": false,
//     "dump_system": false,
//     "out": "out"
//   }

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"

#include "legtr/error.hpp"
#include "legtr/forward_solver.hpp"
#include "legtr/inverse_solver.hpp"
#include "legtr/viscosity.hpp"

namespace legtr {

struct RunConfig {
    int grid = 41;
    double T = 1.0;
    int n_steps = 700;
    int N = 30;
    int n_quad = 0;
    double eps = 1e-6;
    int K = 10;
    double picard_tol = 1e-6;
    NoiseSpec noise{0.1, 1};
    int test_id = 1;
    std::string initial_field;
    std::string pressure_modes;
    double lambda = 2.0;
    bool convection = true;
    Eigen::Matrix4d mu = ViscosityTensor::anisotropic_reference().flat();
    std::string solver_method = "auto";
    double solver_tolerance = 1e-8;
    int solver_max_iterations = 200;
    bool write_modes = false;
    bool dump_system = false;
    std::string out = "out";

    Grid2D make_grid() const { return Grid2D::square(grid); }
    ViscosityTensor viscosity() const { return ViscosityTensor(mu); }

    ForwardConfig forward() const {
        ForwardConfig f;
        f.grid = make_grid();
        f.T = T;
        f.n_steps = n_steps;
        f.mu = viscosity();
        f.convection = convection;
        return f;
    }

    SolverOptions solver() const {
        SolverOptions s;
        s.method = solver_method == "direct" ? SolverMethod::Direct
                   : solver_method == "iterative" ? SolverMethod::Iterative
                                                  : SolverMethod::Auto;
        s.tolerance = solver_tolerance;
        s.max_iterations = solver_max_iterations;
        return s;
    }

    PicardOptions picard() const {
        PicardOptions p;
        p.K = K;
        p.tolerance = picard_tol;
        p.convection = convection;
        p.solver = solver();
        return p;
    }

    void validate() const {
        auto fail = [](const std::string& what) { throw ConfigError("config", what); };
        if (grid < 5) fail("grid must have at least 5 nodes per direction");
        if (!(T > 0.0) || !std::isfinite(T)) fail("T must be positive");
        if (n_steps < 1) fail("n_steps must be >= 1");
        if (N < 0) fail("N must be >= 0");
        if (n_quad != 0 && n_quad < N + 1) fail("n_quad must be 0 or >= N + 1");
        if (!(eps > 0.0) || !std::isfinite(eps)) fail("eps must be > 0");
        if (K < 1) fail("K must be >= 1");
        if (!(picard_tol >= 0.0)) fail("picard_tol must be >= 0");
        if (!(noise.delta >= 0.0) || !std::isfinite(noise.delta)) fail("noise.delta must be >= 0");
        if (initial_field.empty() && (test_id < 1 || test_id > 3)) fail("test_id must be 1, 2 or 3");
        if (!mu.allFinite()) fail("mu has non-finite entries");
        if (solver_method != "auto" && solver_method != "direct" && solver_method != "iterative")
            fail("solver.method must be auto, direct or iterative");
        if (!(solver_tolerance > 0.0) || solver_tolerance > 1e-8) fail("solver.tolerance must be in (0, 1e-8]");
        if (solver_max_iterations < 1) fail("solver.max_iterations must be >= 1");
        if (out.empty()) fail("out must not be empty");
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json mu = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) mu.push_back({c.mu(r, 0), c.mu(r, 1), c.mu(r, 2), c.mu(r, 3)});
    return {{"grid", c.grid},
            {"T", c.T},
            {"n_steps", c.n_steps},
            {"N", c.N},
            {"n_quad", c.n_quad},
            {"eps", c.eps},
            {"K", c.K},
            {"picard_tol", c.picard_tol},
            {"noise", {{"delta", c.noise.delta}, {"seed", c.noise.seed}}},
            {"test_id", c.test_id},
            {"initial_field", c.initial_field},
            {"pressure_modes", c.pressure_modes},
            {"lambda", c.lambda},
            {"convection", c.convection},
            {"mu", mu},
            {"solver", {{"method", c.solver_method}, {"tolerance", c.solver_tolerance}, {"max_iterations", c.solver_max_iterations}}},
            {"write_modes", c.write_modes},
            {"dump_system", c.dump_system},
            {"out", c.out}};
}

/// Applies the keys present in `j` on top of `c`. Unknown keys are an error.
/// A meta.json written by a previous run is accepted too: its "config"
/// member is used.
inline void apply_json(RunConfig& c, const nlohmann::json& j_in) {
    const nlohmann::json& j = j_in.contains("config") && j_in.at("config").is_object() ? j_in.at("config") : j_in;
    if (!j.is_object()) throw ConfigError("config", "configuration must be a JSON object");
    static const std::set<std::string> known = {"grid", "T", "n_steps", "N", "n_quad", "eps", "K", "picard_tol", "noise",
                                                "test_id", "initial_field", "pressure_modes", "lambda", "convection", "mu", "solver",
                                                "write_modes", "dump_system", "out"};
    try {
        for (const auto& [key, v] : j.items()) {
            if (!known.count(key)) throw ConfigError("config", "unknown key '" + key + "'");
            if (key == "grid") c.grid = v.get<int>();
            else if (key == "T") c.T = v.get<double>();
            else if (key == "n_steps") c.n_steps = v.get<int>();
            else if (key == "N") c.N = v.get<int>();
            else if (key == "n_quad") c.n_quad = v.get<int>();
            else if (key == "eps") c.eps = v.get<double>();
            else if (key == "K") c.K = v.get<int>();
            else if (key == "picard_tol") c.picard_tol = v.get<double>();
            else if (key == "noise") {
                for (const auto& [nk, nv] : v.items()) {
                    if (nk == "delta") c.noise.delta = nv.get<double>();
                    else if (nk == "seed") c.noise.seed = nv.get<std::uint64_t>();
                    else throw ConfigError("config", "unknown key 'noise." + nk + "'");
                }
            } else if (key == "test_id") c.test_id = v.get<int>();
            else if (key == "initial_field") c.initial_field = v.get<std::string>();
            else if (key == "pressure_modes") c.pressure_modes = v.get<std::string>();
            else if (key == "lambda") c.lambda = v.get<double>();
            else if (key == "convection") c.convection = v.get<bool>();
            else if (key == "mu") {
                if (!v.is_array() || v.size() != 4) throw ConfigError("config", "mu must be a 4x4 array");
                for (int r = 0; r < 4; ++r) {
                    if (!v[r].is_array() || v[r].size() != 4) throw ConfigError("config", "mu must be a 4x4 array");
                    for (int k = 0; k < 4; ++k) c.mu(r, k) = v[r][k].get<double>();
                }
            } else if (key == "solver") {
                for (const auto& [sk, sv] : v.items()) {
                    if (sk == "method") c.solver_method = sv.get<std::string>();
                    else if (sk == "tolerance") c.solver_tolerance = sv.get<double>();
                    else if (sk == "max_iterations") c.solver_max_iterations = sv.get<int>();
                    else throw ConfigError("config", "unknown key 'solver." + sk + "'");
                }
            } else if (key == "write_modes") c.write_modes = v.get<bool>();
            else if (key == "dump_system") c.dump_system = v.get<bool>();
            else if (key == "out") c.out = v.get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config", std::string("bad value type: ") + e.what());
    }
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config", "cannot open " + path.string());
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config", path.string() + ": " + e.what());
    }
}

inline RunConfig load_config(const std::filesystem::path& path) {
    RunConfig c;
    apply_json(c, read_json(path));
    return c;
}

} // namespace legtr
