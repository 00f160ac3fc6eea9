#pragma once

// The time-reduced elliptic system for the Fourier modes u_0..u_N and the
// regularized least-squares problem whose minimizer is one Picard update.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "legtr/error.hpp"
#include "legtr/forward_solver.hpp"
#include "legtr/grid.hpp"
#include "legtr/spatial_disc.hpp"
#include "legtr/time_basis.hpp"
#include "legtr/viscosity.hpp"

namespace legtr {

/// Mode fields u_0..u_N stored as packed interior values, mode-major, then
/// component-major, then row-major over (y, x). Boundary values are zero by
/// construction.
class ModeStack {
public:
    ModeStack(const Grid2D& grid, int n_modes)
        : grid_(grid), n_modes_(n_modes), coeffs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_modes) * 2 * grid.n_interior())) {}

    ModeStack(const Grid2D& grid, int n_modes, Eigen::VectorXd coeffs) : grid_(grid), n_modes_(n_modes), coeffs_(std::move(coeffs)) {
        if (coeffs_.size() != static_cast<Eigen::Index>(n_modes) * 2 * grid.n_interior())
            throw ShapeError("reduced_model", "coefficient vector does not match (modes x interior unknowns)");
    }

    static ModeStack from_fields(const std::vector<VectorField2D>& fields) {
        if (fields.empty()) throw ShapeError("reduced_model", "empty mode list");
        ModeStack s(fields.front().grid(), static_cast<int>(fields.size()));
        for (int m = 0; m < s.n_modes(); ++m) {
            require_same_grid(fields[m].grid(), s.grid(), "reduced_model");
            s.mode(m) = pack_interior(fields[m]);
        }
        return s;
    }

    const Grid2D& grid() const { return grid_; }
    int n_modes() const { return n_modes_; }
    Eigen::Index mode_size() const { return 2 * grid_.n_interior(); }

    Eigen::VectorXd& coeffs() { return coeffs_; }
    const Eigen::VectorXd& coeffs() const { return coeffs_; }

    Eigen::VectorBlock<Eigen::VectorXd> mode(int m) { return coeffs_.segment(m * mode_size(), mode_size()); }
    Eigen::VectorBlock<const Eigen::VectorXd> mode(int m) const { return coeffs_.segment(m * mode_size(), mode_size()); }

    VectorField2D field(int m) const { return unpack_interior(grid_, mode(m)); }

    double max_abs() const { return coeffs_.size() ? coeffs_.cwiseAbs().maxCoeff() : 0.0; }

private:
    Grid2D grid_;
    int n_modes_;
    Eigen::VectorXd coeffs_;
};

/// Per-mode Neumann data f_m: (N+1) rows, 2 * n_boundary columns laid out
/// like BoundaryTimeSeries::values.
using BoundaryModes = Eigen::MatrixXd;

// --- Boundary data projection ------------------------------------------------

/// Local cubic (4-point Lagrange) interpolation from `times` to `targets`
/// as a sparse matrix. Fewer than four samples reduce the degree.
inline Eigen::SparseMatrix<double> temporal_interpolation(const std::vector<double>& times, const std::vector<double>& targets) {
    const int n = static_cast<int>(times.size());
    if (n < 2) throw ConfigError("reduced_model", "need at least two time samples");
    const int width = std::min(4, n);
    std::vector<Triplet> trips;
    trips.reserve(targets.size() * width);
    for (std::size_t r = 0; r < targets.size(); ++r) {
        const double t = targets[r];
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        int k = static_cast<int>(it - times.begin()) - 1;  // times[k] <= t < times[k+1]
        int first = std::clamp(k - (width / 2 - 1), 0, n - width);
        for (int a = 0; a < width; ++a) {
            double w = 1.0;
            for (int b = 0; b < width; ++b)
                if (b != a) w *= (t - times[first + b]) / (times[first + a] - times[first + b]);
            trips.emplace_back(static_cast<int>(r), first + a, w);
        }
    }
    Eigen::SparseMatrix<double> P(static_cast<Eigen::Index>(targets.size()), n);
    P.setFromTriplets(trips.begin(), trips.end());
    return P;
}

/// f_m = int_0^T e^{-2t} f(x, t) Psi_m(t) dt per boundary node and
/// component, after cubic interpolation of the trace onto the quadrature
/// nodes.
inline BoundaryModes project_boundary_data(const BoundaryTimeSeries& trace, const BasisTable& basis) {
    if (trace.times.size() != static_cast<std::size_t>(trace.values.rows()))
        throw ShapeError("reduced_model", "trace times and values disagree in length");
    if (trace.times.size() < 2) throw ConfigError("reduced_model", "trace needs at least two time samples");
    if (!std::is_sorted(trace.times.begin(), trace.times.end()))
        throw ConfigError("reduced_model", "trace times must be increasing");
    const double T = basis.T();
    if (trace.times.front() > 1e-12 * T || trace.times.back() < T * (1.0 - 1e-12))
        throw ConfigError("reduced_model", "trace does not cover [0, T]");
    const Eigen::SparseMatrix<double> P = temporal_interpolation(trace.times, basis.quadrature().nodes);
    const Eigen::MatrixXd at_nodes = P * trace.values;
    return fourier_coefficients(at_nodes, basis);
}

// --- Operator blocks ---------------------------------------------------------

/// Maps a packed ModeStack to the interior residuals
/// r_m = div(mu : grad u_m) - sum_n s_mn u_n, m = 0..N.
inline SparseOperator assemble_interior_blocks(const ViscosityTensor& mu, const Grid2D& grid, const Eigen::MatrixXd& S) {
    if (S.rows() != S.cols()) throw ShapeError("reduced_model", "coupling matrix must be square");
    const SparseOperator L = assemble_diffusion(grid, mu);
    const int M = static_cast<int>(S.rows());
    const Eigen::Index nm = L.rows();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(M) * (L.nonZeros() + nm * M));
    for (int m = 0; m < M; ++m) {
        for (Eigen::Index col = 0; col < L.outerSize(); ++col)
            for (SparseOperator::InnerIterator it(L, col); it; ++it)
                trips.emplace_back(m * nm + it.row(), m * nm + it.col(), it.value());
        for (int n = 0; n < M; ++n) {
            const double s = S(m, n);
            if (s == 0.0) continue;
            for (Eigen::Index k = 0; k < nm; ++k) trips.emplace_back(m * nm + k, n * nm + k, -s);
        }
    }
    SparseOperator op(M * nm, M * nm);
    op.setFromTriplets(trips.begin(), trips.end());
    return op;
}

namespace detail {

struct InteriorGradient {
    Eigen::VectorXd value[2];
    Eigen::VectorXd dx[2];
    Eigen::VectorXd dy[2];
};

// Central differences of one packed mode at interior nodes, with the zero
// Dirichlet values filled in.
inline InteriorGradient interior_gradient(const Grid2D& g, const Eigen::Ref<const Eigen::VectorXd>& packed) {
    const int ni = g.n_interior();
    const int mx = g.nx() - 2;
    InteriorGradient out;
    const double ihx = 0.5 / g.hx(), ihy = 0.5 / g.hy();
    for (int c = 0; c < 2; ++c) {
        const auto v = packed.segment(c * ni, ni);
        out.value[c] = v;
        out.dx[c].resize(ni);
        out.dy[c].resize(ni);
        for (int j = 1; j < g.ny() - 1; ++j)
            for (int i = 1; i < g.nx() - 1; ++i) {
                const int k = g.interior_index(i, j);
                const double e = i + 1 < g.nx() - 1 ? v[k + 1] : 0.0;
                const double w = i - 1 > 0 ? v[k - 1] : 0.0;
                const double n = j + 1 < g.ny() - 1 ? v[k + mx] : 0.0;
                const double s = j - 1 > 0 ? v[k - mx] : 0.0;
                out.dx[c][k] = (e - w) * ihx;
                out.dy[c][k] = (n - s) * ihy;
            }
    }
    return out;
}

} // namespace detail

/// source_m = sum_l sum_n a_mnl (u_l . grad) u_n, evaluated at interior
/// nodes. This is right-hand-side data for the next Picard update.
inline ModeStack convection_source(const ModeStack& U, const CouplingTensor& A) {
    const int M = U.n_modes();
    if (A.size() != M) throw ShapeError("reduced_model", "coupling tensor size does not match the mode count");
    const Grid2D& g = U.grid();
    const int ni = g.n_interior();
    ModeStack out(g, M);
    if (U.max_abs() == 0.0) return out;

    std::vector<detail::InteriorGradient> grads;
    grads.reserve(M);
    for (int n = 0; n < M; ++n) grads.push_back(detail::interior_gradient(g, U.mode(n)));

    Eigen::VectorXd prod(2 * ni);
    for (int l = 0; l < M; ++l) {
        const auto& ul = grads[l];
        for (int n = 0; n < M; ++n) {
            const auto& gn = grads[n];
            for (int c = 0; c < 2; ++c)
                prod.segment(c * ni, ni) = (ul.value[0].array() * gn.dx[c].array() + ul.value[1].array() * gn.dy[c].array()).matrix();
            for (int m = 0; m < M; ++m) {
                const double a = A(m, n, l);
                if (a != 0.0) out.mode(m) += a * prod;
            }
        }
    }
    return out;
}

// --- Least-squares system -----------------------------------------------------

struct RowBlock {
    std::string name;
    Eigen::Index begin;
    Eigen::Index end;
};

/// Scale factors applied to each row group; all default to the discrete
/// measure so the objective approximates the continuous integrals.
struct BlockWeights {
    double interior = 1.0;     ///< multiplies sqrt(hx * hy)
    double boundary = 1.0;     ///< multiplies sqrt(segment length)
    double regularizer = 1.0;  ///< multiplies sqrt(eps * hx * hy)
};

/// The fixed part of the least-squares problem: the design matrix and the
/// structural pieces the solver's preconditioner needs. Independent of the
/// Picard iterate, so it is built once per run.
class ReducedOperator {
public:
    using RowMajorMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    ReducedOperator(const Grid2D& grid, const ViscosityTensor& mu, const Eigen::MatrixXd& S, double eps, BlockWeights weights = {})
        : grid_(grid), mu_(mu), S_(S), eps_(eps), weights_(weights) {
        if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("reduced_model", "regularization eps must be > 0");
        if (grid.nx() < 3 || grid.ny() < 3) throw ConfigError("reduced_model", "grid too small");
        n_modes_ = static_cast<int>(S.rows());
        diffusion_ = assemble_diffusion(grid, mu);
        interior_ = assemble_interior_blocks(mu, grid, S);
        neumann_ = assemble_neumann(grid);
        assemble_design();
    }

    const Grid2D& grid() const { return grid_; }
    const ViscosityTensor& mu() const { return mu_; }
    int n_modes() const { return n_modes_; }
    double eps() const { return eps_; }
    const BlockWeights& weights() const { return weights_; }
    const Eigen::MatrixXd& S() const { return S_; }
    const SparseOperator& diffusion() const { return diffusion_; }
    const SparseOperator& interior_blocks() const { return interior_; }
    const SparseOperator& neumann() const { return neumann_; }
    const RowMajorMatrix& design() const { return design_; }
    const std::vector<RowBlock>& blocks() const { return blocks_; }

    Eigen::Index n_unknowns() const { return design_.cols(); }
    Eigen::Index n_rows() const { return design_.rows(); }
    double interior_scale() const { return weights_.interior * std::sqrt(grid_.hx() * grid_.hy()); }
    double regularizer_scale() const { return weights_.regularizer * std::sqrt(eps_ * grid_.hx() * grid_.hy()); }
    double boundary_scale(int b) const { return weights_.boundary * std::sqrt(grid_.boundary()[b].segment); }

    const RowBlock& block(const std::string& name) const {
        for (const auto& b : blocks_)
            if (b.name == name) return b;
        throw ShapeError("reduced_model", "no row block named " + name);
    }

    /// Right-hand side for given convection source, pressure-gradient modes
    /// (may be null) and boundary modes.
    Eigen::VectorXd rhs(const ModeStack& source, const ModeStack* pressure, const BoundaryModes& f) const {
        const int nb = grid_.n_boundary();
        if (source.n_modes() != n_modes_ || !source.grid().same_as(grid_))
            throw ShapeError("reduced_model", "convection source does not match the operator");
        if (pressure && (pressure->n_modes() != n_modes_ || !pressure->grid().same_as(grid_)))
            throw ShapeError("reduced_model", "pressure modes do not match the operator");
        if (f.rows() != n_modes_ || f.cols() != 2 * nb)
            throw ShapeError("reduced_model", "boundary modes have shape " + std::to_string(f.rows()) + "x" +
                                                  std::to_string(f.cols()) + ", expected " + std::to_string(n_modes_) +
                                                  "x" + std::to_string(2 * nb));
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n_rows());
        const RowBlock& in = block("interior");
        b.segment(in.begin, in.end - in.begin) = interior_scale() * source.coeffs();
        if (pressure) b.segment(in.begin, in.end - in.begin) += interior_scale() * pressure->coeffs();
        const RowBlock& bd = block("neumann");
        for (int m = 0; m < n_modes_; ++m)
            for (int c = 0; c < 2; ++c)
                for (int k = 0; k < nb; ++k)
                    b[bd.begin + (m * 2 + c) * nb + k] = boundary_scale(k) * f(m, c * nb + k);
        return b;
    }

private:
    // Rows of the discrete H^2 norm for one scalar component: value, d/dx,
    // d/dy, d2/dx2, d2/dy2, d2/dxdy, each on all interior nodes. Central
    // stencils throughout, reading the zero Dirichlet value at the boundary.
    SparseOperator h2_rows() const {
        const Grid2D& g = grid_;
        const int ni = g.n_interior();
        const double hx = g.hx(), hy = g.hy();
        std::vector<Triplet> trips;
        auto put = [&](int kind, int i, int j, int ci, int cj, double v) {
            if (g.is_interior(ci, cj)) trips.emplace_back(kind * ni + g.interior_index(i, j), g.interior_index(ci, cj), v);
        };
        for (int j = 1; j < g.ny() - 1; ++j)
            for (int i = 1; i < g.nx() - 1; ++i) {
                put(0, i, j, i, j, 1.0);
                put(1, i, j, i + 1, j, 0.5 / hx);
                put(1, i, j, i - 1, j, -0.5 / hx);
                put(2, i, j, i, j + 1, 0.5 / hy);
                put(2, i, j, i, j - 1, -0.5 / hy);
                put(3, i, j, i - 1, j, 1.0 / (hx * hx));
                put(3, i, j, i, j, -2.0 / (hx * hx));
                put(3, i, j, i + 1, j, 1.0 / (hx * hx));
                put(4, i, j, i, j - 1, 1.0 / (hy * hy));
                put(4, i, j, i, j, -2.0 / (hy * hy));
                put(4, i, j, i, j + 1, 1.0 / (hy * hy));
                const double cxy = 1.0 / (4.0 * hx * hy);
                put(5, i, j, i + 1, j + 1, cxy);
                put(5, i, j, i - 1, j - 1, cxy);
                put(5, i, j, i + 1, j - 1, -cxy);
                put(5, i, j, i - 1, j + 1, -cxy);
            }
        SparseOperator R(6 * ni, ni);
        R.setFromTriplets(trips.begin(), trips.end());
        return R;
    }

    void assemble_design() {
        const int M = n_modes_;
        const int ni = grid_.n_interior(), nb = grid_.n_boundary();
        const Eigen::Index nm = 2 * ni;
        const Eigen::Index n_int_rows = M * nm;
        const Eigen::Index n_bd_rows = static_cast<Eigen::Index>(M) * 2 * nb;
        const Eigen::Index n_reg_rows = static_cast<Eigen::Index>(M) * 2 * 6 * ni;
        blocks_ = {{"interior", 0, n_int_rows},
                   {"neumann", n_int_rows, n_int_rows + n_bd_rows},
                   {"regularizer", n_int_rows + n_bd_rows, n_int_rows + n_bd_rows + n_reg_rows}};

        std::vector<Triplet> trips;
        trips.reserve(static_cast<std::size_t>(interior_.nonZeros() + M * neumann_.nonZeros() + M * 2 * 20 * ni));
        const double wi = interior_scale();
        for (Eigen::Index col = 0; col < interior_.outerSize(); ++col)
            for (SparseOperator::InnerIterator it(interior_, col); it; ++it)
                trips.emplace_back(it.row(), it.col(), wi * it.value());

        const Eigen::Index off_b = blocks_[1].begin;
        for (int m = 0; m < M; ++m)
            for (Eigen::Index col = 0; col < neumann_.outerSize(); ++col)
                for (SparseOperator::InnerIterator it(neumann_, col); it; ++it) {
                    const int b = static_cast<int>(it.row() % nb);
                    trips.emplace_back(off_b + m * 2 * nb + it.row(), m * nm + it.col(), boundary_scale(b) * it.value());
                }

        const SparseOperator R = h2_rows();
        const double wr = regularizer_scale();
        const Eigen::Index off_r = blocks_[2].begin;
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < 2; ++c) {
                const Eigen::Index row0 = off_r + (m * 2 + c) * 6 * ni;
                const Eigen::Index col0 = m * nm + c * ni;
                for (Eigen::Index col = 0; col < R.outerSize(); ++col)
                    for (SparseOperator::InnerIterator it(R, col); it; ++it)
                        trips.emplace_back(row0 + it.row(), col0 + it.col(), wr * it.value());
            }

        design_.resize(blocks_[2].end, M * nm);
        design_.setFromTriplets(trips.begin(), trips.end());
        design_.makeCompressed();
    }

    Grid2D grid_;
    ViscosityTensor mu_;
    Eigen::MatrixXd S_;
    double eps_;
    BlockWeights weights_;
    int n_modes_ = 0;
    SparseOperator diffusion_;
    SparseOperator interior_;
    SparseOperator neumann_;
    RowMajorMatrix design_;
    std::vector<RowBlock> blocks_;
};

/// Design matrix plus right-hand side of one Picard update. Minimizing
/// |design * x - rhs|^2 is the discrete form of
///   sum_m |L phi_m - sum_n s_mn phi_n - source_m - grad p_m|^2_Omega
///       + |d_nu phi_m - f_m|^2_dOmega + eps |phi_m|^2_H2
/// with phi_m = 0 on the boundary imposed by elimination.
struct LeastSquaresSystem {
    std::shared_ptr<const ReducedOperator> op;
    Eigen::VectorXd rhs;

    const ReducedOperator::RowMajorMatrix& design() const { return op->design(); }
};

inline LeastSquaresSystem assemble_system(const ModeStack& U_prev, const ViscosityTensor& mu, const Grid2D& grid,
                                          const BasisTable& basis, const CouplingCoefficients& couplings,
                                          const BoundaryModes& boundary_modes, const ModeStack* pressure_modes, double eps,
                                          BlockWeights weights = {}) {
    if (!(eps > 0.0)) throw ConfigError("reduced_model", "regularization eps must be > 0");
    if (basis.modes() != couplings.S.rows() || U_prev.n_modes() != basis.modes())
        throw ShapeError("reduced_model", "mode counts of basis, couplings and iterate disagree");
    require_same_grid(U_prev.grid(), grid, "reduced_model");
    auto op = std::make_shared<const ReducedOperator>(grid, mu, couplings.S, eps, weights);
    const ModeStack source = convection_source(U_prev, couplings.A);
    return {op, op->rhs(source, pressure_modes, boundary_modes)};
}

} // namespace legtr
