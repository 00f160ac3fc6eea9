#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "legtr/error.hpp"

namespace legtr {

/// A boundary node that carries Neumann data. Corners are not listed.
struct BoundaryNode {
    int i;
    int j;
    int nu_x;        ///< outward normal, one of (+-1, 0), (0, +-1)
    int nu_y;
    double segment;  ///< boundary length attributed to the node
};

/// Uniform node-centred grid on [x_min, x_max] x [y_min, y_max].
///
/// Interior unknowns are numbered row-major over (y, x):
/// k = (j - 1) * (nx - 2) + (i - 1). Boundary nodes are enumerated face by
/// face: bottom (left to right), right (bottom to top), top (left to right),
/// left (bottom to top).
class Grid2D {
public:
    Grid2D(int nx, int ny, double x_min, double x_max, double y_min, double y_max)
        : nx_(nx), ny_(ny), x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
        if (nx < 2 || ny < 2) throw ConfigError("spatial_disc", "grid needs at least 2 nodes per direction");
        if (!(x_max > x_min) || !(y_max > y_min)) throw ConfigError("spatial_disc", "empty grid rectangle");
        hx_ = (x_max - x_min) / (nx - 1);
        hy_ = (y_max - y_min) / (ny - 1);
        for (int i = 1; i < nx - 1; ++i) boundary_.push_back({i, 0, 0, -1, hx_});
        for (int j = 1; j < ny - 1; ++j) boundary_.push_back({nx - 1, j, 1, 0, hy_});
        for (int i = 1; i < nx - 1; ++i) boundary_.push_back({i, ny - 1, 0, 1, hx_});
        for (int j = 1; j < ny - 1; ++j) boundary_.push_back({0, j, -1, 0, hy_});
    }

    /// n x n nodes on the square [lo, hi]^2.
    static Grid2D square(int n, double lo = -1.0, double hi = 1.0) { return Grid2D(n, n, lo, hi, lo, hi); }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double y_min() const { return y_min_; }
    double y_max() const { return y_max_; }

    double x(int i) const { return i == nx_ - 1 ? x_max_ : x_min_ + i * hx_; }
    double y(int j) const { return j == ny_ - 1 ? y_max_ : y_min_ + j * hy_; }

    int n_nodes() const { return nx_ * ny_; }
    int node(int i, int j) const { return j * nx_ + i; }
    int n_interior() const { return (nx_ - 2) * (ny_ - 2); }
    bool is_interior(int i, int j) const { return i > 0 && i < nx_ - 1 && j > 0 && j < ny_ - 1; }
    int interior_index(int i, int j) const { return (j - 1) * (nx_ - 2) + (i - 1); }

    const std::vector<BoundaryNode>& boundary() const { return boundary_; }
    int n_boundary() const { return static_cast<int>(boundary_.size()); }

    bool same_as(const Grid2D& o) const {
        return nx_ == o.nx_ && ny_ == o.ny_ && x_min_ == o.x_min_ && x_max_ == o.x_max_ && y_min_ == o.y_min_ &&
               y_max_ == o.y_max_;
    }

private:
    int nx_, ny_;
    double x_min_, x_max_, y_min_, y_max_;
    double hx_, hy_;
    std::vector<BoundaryNode> boundary_;
};

inline void require_same_grid(const Grid2D& a, const Grid2D& b, const char* module) {
    if (!a.same_as(b)) throw ShapeError(module, "fields live on different grids");
}

/// Two-component field sampled at every grid node, row-major over (y, x).
class VectorField2D {
public:
    explicit VectorField2D(const Grid2D& grid)
        : grid_(grid), comp_{Eigen::VectorXd::Zero(grid.n_nodes()), Eigen::VectorXd::Zero(grid.n_nodes())} {}

    template <class F>
    static VectorField2D from_function(const Grid2D& grid, F&& f) {
        VectorField2D u(grid);
        for (int j = 0; j < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i) {
                const std::array<double, 2> v = f(grid.x(i), grid.y(j));
                u(0, i, j) = v[0];
                u(1, i, j) = v[1];
            }
        return u;
    }

    const Grid2D& grid() const { return grid_; }

    double& operator()(int c, int i, int j) { return comp_[c][grid_.node(i, j)]; }
    double operator()(int c, int i, int j) const { return comp_[c][grid_.node(i, j)]; }

    Eigen::VectorXd& component(int c) { return comp_[c]; }
    const Eigen::VectorXd& component(int c) const { return comp_[c]; }

    double max_abs() const { return std::max(comp_[0].cwiseAbs().maxCoeff(), comp_[1].cwiseAbs().maxCoeff()); }
    bool all_finite() const { return comp_[0].allFinite() && comp_[1].allFinite(); }

    bool boundary_is_zero() const {
        for (int j = 0; j < grid_.ny(); ++j)
            for (int i = 0; i < grid_.nx(); ++i)
                if (!grid_.is_interior(i, j) && ((*this)(0, i, j) != 0.0 || (*this)(1, i, j) != 0.0)) return false;
        return true;
    }

    void zero_boundary() {
        for (int j = 0; j < grid_.ny(); ++j)
            for (int i = 0; i < grid_.nx(); ++i)
                if (!grid_.is_interior(i, j)) (*this)(0, i, j) = (*this)(1, i, j) = 0.0;
    }

private:
    Grid2D grid_;
    std::array<Eigen::VectorXd, 2> comp_;
};

/// Interior values, component-major then row-major over (y, x).
inline Eigen::VectorXd pack_interior(const VectorField2D& u) {
    const Grid2D& g = u.grid();
    const int ni = g.n_interior();
    Eigen::VectorXd v(2 * ni);
    for (int c = 0; c < 2; ++c)
        for (int j = 1; j < g.ny() - 1; ++j)
            for (int i = 1; i < g.nx() - 1; ++i) v[c * ni + g.interior_index(i, j)] = u(c, i, j);
    return v;
}

/// Inverse of pack_interior; boundary values are zero.
inline VectorField2D unpack_interior(const Grid2D& g, const Eigen::Ref<const Eigen::VectorXd>& v) {
    const int ni = g.n_interior();
    if (v.size() != 2 * ni) throw ShapeError("spatial_disc", "packed vector does not match the grid interior");
    VectorField2D u(g);
    for (int c = 0; c < 2; ++c)
        for (int j = 1; j < g.ny() - 1; ++j)
            for (int i = 1; i < g.nx() - 1; ++i) u(c, i, j) = v[c * ni + g.interior_index(i, j)];
    return u;
}

} // namespace legtr
