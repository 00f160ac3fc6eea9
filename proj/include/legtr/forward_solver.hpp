#pragma once

// Synthetic data generation: semi-implicit time stepping of
//   u_t + (u . grad) u = -grad p + div(mu : grad u),  u = 0 on the boundary,
// Neumann trace extraction and multiplicative noise.

#include <cmath>
#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "legtr/error.hpp"
#include "legtr/grid.hpp"
#include "legtr/spatial_disc.hpp"
#include "legtr/viscosity.hpp"

namespace legtr {

struct ForwardConfig {
    Grid2D grid = Grid2D::square(41);
    double T = 1.0;
    int n_steps = 700;
    ViscosityTensor mu = ViscosityTensor::anisotropic_reference();
    bool convection = true;
    /// grad p evaluated at time t; empty means zero.
    std::function<VectorField2D(double t)> pressure_gradient;

    double dt() const { return T / n_steps; }

    void validate() const {
        if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("forward_solver", "T must be positive");
        if (n_steps < 1) throw ConfigError("forward_solver", "n_steps must be >= 1");
    }
};

/// Neumann samples over time. Row s holds time `times[s]`; column
/// c * n_boundary + b holds component c at boundary node b.
struct BoundaryTimeSeries {
    std::vector<double> times;
    Eigen::MatrixXd values;

    int n_boundary() const { return static_cast<int>(values.cols() / 2); }
};

struct NoiseSpec {
    double delta = 0.0;
    std::uint64_t seed = 0;
};

/// Stepper with the implicit matrix (I/dt - L) factorized once.
class ForwardStepper {
public:
    explicit ForwardStepper(ForwardConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const Grid2D& g = cfg_.grid;
        const SparseOperator L = assemble_diffusion(g, cfg_.mu);
        SparseOperator I(L.rows(), L.cols());
        I.setIdentity();
        system_ = I / cfg_.dt() - L;
        solver_.compute(system_);
        if (solver_.info() != Eigen::Success) throw SolverError("forward_solver", "factorization of (I/dt - L) failed");
    }

    const ForwardConfig& config() const { return cfg_; }

    /// u_next from u_prev; `t_next` is the time level being computed.
    VectorField2D step(const VectorField2D& u_prev, double t_next) const {
        require_same_grid(u_prev.grid(), cfg_.grid, "forward_solver");
        const Grid2D& g = cfg_.grid;
        Eigen::VectorXd rhs = pack_interior(u_prev) / cfg_.dt();
        if (cfg_.convection) rhs -= pack_interior(convection(u_prev, u_prev));
        if (cfg_.pressure_gradient) rhs -= pack_interior(cfg_.pressure_gradient(t_next));
        const Eigen::VectorXd x = solver_.solve(rhs);
        const double rhs_norm = rhs.norm();
        if (rhs_norm > 0.0) {
            const double res = (system_ * x - rhs).norm() / rhs_norm;
            if (!(res <= 1e-10))
                throw SolverError("forward_solver", "time step solve residual " + std::to_string(res) + " > 1e-10");
        }
        return unpack_interior(g, x);
    }

private:
    ForwardConfig cfg_;
    SparseOperator system_;
    Eigen::SimplicialLDLT<SparseOperator> solver_;
};

/// One semi-implicit step: (I/dt - L) u_next = u_prev/dt - (u_prev . grad) u_prev - grad p.
inline VectorField2D step(const VectorField2D& u_prev, const ForwardConfig& cfg) {
    return ForwardStepper(cfg).step(u_prev, cfg.dt());
}

struct ForwardResult {
    std::vector<VectorField2D> snapshots;  ///< empty unless requested
    BoundaryTimeSeries trace;
};

inline void append_trace_row(BoundaryTimeSeries& ts, Eigen::Index row, const BoundarySamples& s) {
    const Eigen::Index nb = s.rows();
    ts.values.row(row).head(nb) = s.col(0).transpose();
    ts.values.row(row).tail(nb) = s.col(1).transpose();
}

/// Runs n_steps steps from U0 and records the Neumann trace at every time
/// level, including t = 0.
inline ForwardResult run_forward(const VectorField2D& U0, const ForwardConfig& cfg, bool keep_snapshots = true) {
    require_same_grid(U0.grid(), cfg.grid, "forward_solver");
    if (!U0.boundary_is_zero()) throw DomainError("forward_solver", "initial field must vanish on the boundary");
    if (!U0.all_finite()) throw DomainError("forward_solver", "initial field has non-finite values");
    const ForwardStepper stepper(cfg);
    const Grid2D& g = cfg.grid;

    ForwardResult out;
    out.trace.times.resize(cfg.n_steps + 1);
    out.trace.values.resize(cfg.n_steps + 1, 2 * g.n_boundary());
    if (keep_snapshots) out.snapshots.reserve(cfg.n_steps + 1);

    VectorField2D u = U0;
    out.trace.times[0] = 0.0;
    append_trace_row(out.trace, 0, neumann_trace(u));
    if (keep_snapshots) out.snapshots.push_back(u);
    for (int s = 1; s <= cfg.n_steps; ++s) {
        const double t = s == cfg.n_steps ? cfg.T : s * cfg.dt();
        u = stepper.step(u, t);
        if (!u.all_finite()) throw SolverError("forward_solver", "non-finite velocity at step " + std::to_string(s));
        out.trace.times[s] = t;
        append_trace_row(out.trace, s, neumann_trace(u));
        if (keep_snapshots) out.snapshots.push_back(u);
    }
    return out;
}

/// Uniform draw on [-1, 1] from the top 53 bits of a 64-bit Mersenne
/// twister; independent of the standard library's distribution code.
inline double uniform_symmetric(std::mt19937_64& gen) {
    return 2.0 * static_cast<double>(gen() >> 11) * 0x1.0p-53 - 1.0;
}

/// f = f* (1 + delta r), r i.i.d. uniform on [-1, 1], drawn row by row.
inline BoundaryTimeSeries add_noise(const BoundaryTimeSeries& f_star, const NoiseSpec& spec) {
    if (!(spec.delta >= 0.0)) throw ConfigError("forward_solver", "noise level delta must be >= 0");
    BoundaryTimeSeries f = f_star;
    if (spec.delta == 0.0) return f;
    std::mt19937_64 gen(spec.seed);
    for (Eigen::Index r = 0; r < f.values.rows(); ++r)
        for (Eigen::Index c = 0; c < f.values.cols(); ++c) f.values(r, c) *= 1.0 + spec.delta * uniform_symmetric(gen);
    return f;
}

// --- Reference initial fields ------------------------------------------------

/// Value of the reference initial field `test_id` at (x, y).
inline std::array<double, 2> test_field_value(int test_id, double x, double y) {
    switch (test_id) {
        case 1:
            return {8.0 * (x - 0.4) * (x - 0.4) + y * y < 0.64 ? 4.0 : 0.0,
                    x * x + 8.0 * (y - 0.3) * (y - 0.3) < 0.64 ? 4.0 : 0.0};
        case 2:
            return {1.5 * (x + y) * (x + y) + y * y < 0.49 ? 1.0 : 0.0,
                    x * x + 1.5 * (x - y) * (x - y) < 0.49 ? 1.0 : 0.0};
        case 3: {
            const double r2 = x * x + y * y;
            const double m = std::max(std::abs(x), std::abs(y));
            return {r2 > 0.36 && r2 < 0.81 ? 1.0 : 0.0, m > 0.6 && m < 0.9 ? 1.0 : 0.0};
        }
        default:
            throw DomainError("forward_solver", "unknown test id " + std::to_string(test_id) + " (expected 1, 2 or 3)");
    }
}

inline VectorField2D make_test_field(int test_id, const Grid2D& grid) {
    test_field_value(test_id, 0.0, 0.0);  // validates the id
    if (grid.x_min() > -1.0 || grid.x_max() < 1.0 || grid.y_min() > -1.0 || grid.y_max() < 1.0)
        throw DomainError("forward_solver", "reference fields are defined on (-1, 1)^2");
    VectorField2D u = VectorField2D::from_function(grid, [&](double x, double y) { return test_field_value(test_id, x, y); });
    u.zero_boundary();
    return u;
}

} // namespace legtr
