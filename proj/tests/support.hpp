#pragma once

// Shared oracles for the test programs: a smooth scalar field with
// closed-form derivatives and the continuous diffusion operator built from
// them by hand.

#include <array>
#include <cmath>
#include <numbers>

#include "legtr/grid.hpp"
#include "legtr/viscosity.hpp"

namespace legtr::testing {

/// amp * sin(a (x + 1)) sin(b (y + 1)) with a = p pi / 2, b = q pi / 2.
/// Vanishes on the boundary of (-1, 1)^2.
struct SineMode {
    double amp = 1.0;
    int p = 1;
    int q = 1;

    double a() const { return p * std::numbers::pi / 2; }
    double b() const { return q * std::numbers::pi / 2; }
    double value(double x, double y) const { return amp * std::sin(a() * (x + 1)) * std::sin(b() * (y + 1)); }
    double dx(double x, double y) const { return amp * a() * std::cos(a() * (x + 1)) * std::sin(b() * (y + 1)); }
    double dy(double x, double y) const { return amp * b() * std::sin(a() * (x + 1)) * std::cos(b() * (y + 1)); }
    double dxx(double x, double y) const { return -a() * a() * value(x, y); }
    double dyy(double x, double y) const { return -b() * b() * value(x, y); }
    double dxy(double x, double y) const { return amp * a() * b() * std::cos(a() * (x + 1)) * std::cos(b() * (y + 1)); }
};

/// A two-component field made of one SineMode per component.
struct SineField {
    std::array<SineMode, 2> c;

    /// Grid samples; boundary values are set to exact zeros.
    VectorField2D sample(const Grid2D& g) const {
        VectorField2D u = VectorField2D::from_function(g, [&](double x, double y) {
            return std::array<double, 2>{c[0].value(x, y), c[1].value(x, y)};
        });
        u.zero_boundary();
        return u;
    }

    /// div(mu : grad u)_i = sum_jkl mu_ijkl d_j d_l u_k, written out.
    std::array<double, 2> diffusion(const ViscosityTensor& mu, double x, double y) const {
        std::array<double, 2> out{0.0, 0.0};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l < 2; ++l) {
                        double d;
                        if (j == 0 && l == 0) d = c[k].dxx(x, y);
                        else if (j == 1 && l == 1) d = c[k].dyy(x, y);
                        else d = c[k].dxy(x, y);
                        out[i] += mu(i, j, k, l) * d;
                    }
        return out;
    }

    /// Outward normal derivative at a boundary point with normal (nx, ny).
    std::array<double, 2> normal_derivative(double x, double y, int nx, int ny) const {
        return {nx * c[0].dx(x, y) + ny * c[0].dy(x, y), nx * c[1].dx(x, y) + ny * c[1].dy(x, y)};
    }
};

inline double convergence_rate(double e_coarse, double e_fine) { return std::log2(e_coarse / e_fine); }

} // namespace legtr::testing
