#pragma once

// Finite-difference operators on Grid2D: the anisotropic diffusion
// div(mu : grad u), convection (a . grad) b and the Neumann trace.

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "legtr/error.hpp"
#include "legtr/grid.hpp"
#include "legtr/viscosity.hpp"

namespace legtr {

using SparseOperator = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

namespace detail {

/// Calls emit(ci, i, j, ck, ii, jj, value) for every entry of the
/// constant-coefficient stencil
///   L(u)_c = sum_k mu_c0k0 u_k,xx + mu_c1k1 u_k,yy + (mu_c0k1 + mu_c1k0) u_k,xy
/// at interior node (i, j). Entry order is fixed.
template <class Emit>
void diffusion_stencil(const Grid2D& g, const ViscosityTensor& mu, int i, int j, Emit&& emit) {
    const double ihx2 = 1.0 / (g.hx() * g.hx());
    const double ihy2 = 1.0 / (g.hy() * g.hy());
    const double ihxy = 1.0 / (4.0 * g.hx() * g.hy());
    for (int c = 0; c < 2; ++c) {
        for (int k = 0; k < 2; ++k) {
            const double cxx = mu(c, 0, k, 0) * ihx2;
            const double cyy = mu(c, 1, k, 1) * ihy2;
            const double cxy = (mu(c, 0, k, 1) + mu(c, 1, k, 0)) * ihxy;
            if (cxx != 0.0 || cyy != 0.0) {
                emit(c, i, j, k, i, j, -2.0 * cxx - 2.0 * cyy);
            }
            if (cxx != 0.0) {
                emit(c, i, j, k, i - 1, j, cxx);
                emit(c, i, j, k, i + 1, j, cxx);
            }
            if (cyy != 0.0) {
                emit(c, i, j, k, i, j - 1, cyy);
                emit(c, i, j, k, i, j + 1, cyy);
            }
            if (cxy != 0.0) {
                emit(c, i, j, k, i + 1, j + 1, cxy);
                emit(c, i, j, k, i - 1, j - 1, cxy);
                emit(c, i, j, k, i + 1, j - 1, -cxy);
                emit(c, i, j, k, i - 1, j + 1, -cxy);
            }
        }
    }
}

inline void require_min_size(const Grid2D& g) {
    if (g.nx() < 3 || g.ny() < 3)
        throw ConfigError("spatial_disc", "grid too small: need at least 3 nodes per direction");
}

} // namespace detail

/// Diffusion operator on the packed interior unknowns (component-major,
/// row-major over (y, x)) with homogeneous Dirichlet values eliminated.
inline SparseOperator assemble_diffusion(const Grid2D& g, const ViscosityTensor& mu) {
    detail::require_min_size(g);
    const int ni = g.n_interior();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(ni) * 2 * 18);
    for (int j = 1; j < g.ny() - 1; ++j)
        for (int i = 1; i < g.nx() - 1; ++i)
            detail::diffusion_stencil(g, mu, i, j, [&](int c, int ri, int rj, int k, int ci, int cj, double v) {
                if (!g.is_interior(ci, cj)) return;
                trips.emplace_back(c * ni + g.interior_index(ri, rj), k * ni + g.interior_index(ci, cj), v);
            });
    SparseOperator L(2 * ni, 2 * ni);
    L.setFromTriplets(trips.begin(), trips.end());
    return L;
}

/// Applies the diffusion stencil to a full-grid field, including any
/// non-zero boundary values. The result is zero on the boundary.
inline VectorField2D apply_diffusion(const VectorField2D& u, const ViscosityTensor& mu) {
    const Grid2D& g = u.grid();
    detail::require_min_size(g);
    VectorField2D out(g);
    for (int j = 1; j < g.ny() - 1; ++j)
        for (int i = 1; i < g.nx() - 1; ++i)
            detail::diffusion_stencil(g, mu, i, j, [&](int c, int ri, int rj, int k, int ci, int cj, double v) {
                out(c, ri, rj) += v * u(k, ci, cj);
            });
    return out;
}

/// (a . grad) b with central differences at interior nodes, zero on the
/// boundary.
inline VectorField2D convection(const VectorField2D& a, const VectorField2D& b) {
    require_same_grid(a.grid(), b.grid(), "spatial_disc");
    const Grid2D& g = a.grid();
    detail::require_min_size(g);
    const double ihx = 0.5 / g.hx(), ihy = 0.5 / g.hy();
    VectorField2D out(g);
    for (int j = 1; j < g.ny() - 1; ++j)
        for (int i = 1; i < g.nx() - 1; ++i) {
            const double ax = a(0, i, j), ay = a(1, i, j);
            for (int c = 0; c < 2; ++c) {
                const double dx = (b(c, i + 1, j) - b(c, i - 1, j)) * ihx;
                const double dy = (b(c, i, j + 1) - b(c, i, j - 1)) * ihy;
                out(c, i, j) = ax * dx + ay * dy;
            }
        }
    return out;
}

/// Neumann trace samples, one row per Grid2D::boundary() node, one column
/// per component.
using BoundarySamples = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Outward normal derivative at every (non-corner) boundary node using the
/// one-sided second-order stencil (3/2 u_0 - 2 u_1 + 1/2 u_2) / h along the
/// inward normal line.
inline BoundarySamples neumann_trace(const VectorField2D& u) {
    const Grid2D& g = u.grid();
    detail::require_min_size(g);
    BoundarySamples out(g.n_boundary(), 2);
    for (int b = 0; b < g.n_boundary(); ++b) {
        const BoundaryNode& n = g.boundary()[b];
        const double h = n.nu_x != 0 ? g.hx() : g.hy();
        for (int c = 0; c < 2; ++c) {
            const double u0 = u(c, n.i, n.j);
            const double u1 = u(c, n.i - n.nu_x, n.j - n.nu_y);
            const double u2 = u(c, n.i - 2 * n.nu_x, n.j - 2 * n.nu_y);
            out(b, c) = (1.5 * u0 - 2.0 * u1 + 0.5 * u2) / h;
        }
    }
    return out;
}

/// The Neumann trace as a matrix acting on packed interior unknowns (zero
/// Dirichlet values). Rows are component-major over the boundary list.
inline SparseOperator assemble_neumann(const Grid2D& g) {
    detail::require_min_size(g);
    const int ni = g.n_interior(), nb = g.n_boundary();
    std::vector<Triplet> trips;
    for (int c = 0; c < 2; ++c)
        for (int b = 0; b < nb; ++b) {
            const BoundaryNode& n = g.boundary()[b];
            const double h = n.nu_x != 0 ? g.hx() : g.hy();
            const int i1 = n.i - n.nu_x, j1 = n.j - n.nu_y;
            const int i2 = n.i - 2 * n.nu_x, j2 = n.j - 2 * n.nu_y;
            if (g.is_interior(i1, j1)) trips.emplace_back(c * nb + b, c * ni + g.interior_index(i1, j1), -2.0 / h);
            if (g.is_interior(i2, j2)) trips.emplace_back(c * nb + b, c * ni + g.interior_index(i2, j2), 0.5 / h);
        }
    SparseOperator B(2 * nb, 2 * ni);
    B.setFromTriplets(trips.begin(), trips.end());
    return B;
}

} // namespace legtr
