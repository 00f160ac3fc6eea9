#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "legtr/spatial_disc.hpp"
#include "support.hpp"

using namespace legtr;
using legtr::testing::SineField;

namespace {

const ViscosityTensor kRef = ViscosityTensor::anisotropic_reference();

double interior_max_abs_diff(const VectorField2D& a, const std::function<std::array<double, 2>(double, double)>& f) {
    const Grid2D& g = a.grid();
    double worst = 0.0;
    for (int j = 1; j < g.ny() - 1; ++j)
        for (int i = 1; i < g.nx() - 1; ++i) {
            const auto v = f(g.x(i), g.y(j));
            for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(a(c, i, j) - v[c]));
        }
    return worst;
}

} // namespace

TEST(Grid, BoundaryOrderingAndSegments) {
    const Grid2D g = Grid2D::square(6);
    ASSERT_EQ(g.n_boundary(), 4 * 4);
    EXPECT_EQ(g.boundary()[0].j, 0);
    EXPECT_EQ(g.boundary()[0].i, 1);
    EXPECT_EQ(g.boundary()[4].i, g.nx() - 1);
    EXPECT_EQ(g.boundary()[8].j, g.ny() - 1);
    EXPECT_EQ(g.boundary()[12].i, 0);
    double total = 0.0;
    for (const auto& b : g.boundary()) total += b.segment;
    // Corners carry no data: every listed node owns one cell edge.
    EXPECT_NEAR(total, 16 * g.hx(), 1e-12);
}

TEST(Grid, PackRoundTrip) {
    const Grid2D g = Grid2D::square(7);
    VectorField2D u = VectorField2D::from_function(g, [](double x, double y) { return std::array<double, 2>{x + 2 * y, x * y}; });
    u.zero_boundary();
    const VectorField2D v = unpack_interior(g, pack_interior(u));
    EXPECT_EQ(v.component(0), u.component(0));
    EXPECT_EQ(v.component(1), u.component(1));
    EXPECT_THROW(unpack_interior(g, Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST(Diffusion, ConstantAndLinearFieldsVanish) {
    const Grid2D g = Grid2D::square(9);
    for (auto f : {+[](double, double) { return std::array<double, 2>{3.0, -1.0}; },
                   +[](double x, double y) { return std::array<double, 2>{2 * x - y, x + 5 * y}; }}) {
        const VectorField2D Lu = apply_diffusion(VectorField2D::from_function(g, f), kRef);
        EXPECT_LE(interior_max_abs_diff(Lu, [](double, double) { return std::array<double, 2>{0.0, 0.0}; }), 1e-10);
    }
}

TEST(Diffusion, QuadraticFieldReferenceTensor) {
    const Grid2D g = Grid2D::square(21);
    const VectorField2D u = VectorField2D::from_function(g, [](double x, double) { return std::array<double, 2>{x * x, 0.0}; });
    const VectorField2D Lu = apply_diffusion(u, kRef);
    EXPECT_LE(interior_max_abs_diff(Lu, [](double, double) { return std::array<double, 2>{2.0, 0.125}; }), 1e-10);
}

TEST(Diffusion, MixedQuadraticUsesCrossCoefficients) {
    // u = (xy, 0): only d_xy u_1 = 1 survives, L_i = mu_i011 + mu_i110.
    const Grid2D g = Grid2D::square(11);
    const VectorField2D u = VectorField2D::from_function(g, [](double x, double y) { return std::array<double, 2>{x * y, 0.0}; });
    const VectorField2D Lu = apply_diffusion(u, kRef);
    const double e1 = kRef(0, 0, 0, 1) + kRef(0, 1, 0, 0);
    const double e2 = kRef(1, 0, 0, 1) + kRef(1, 1, 0, 0);
    EXPECT_LE(interior_max_abs_diff(Lu, [&](double, double) { return std::array<double, 2>{e1, e2}; }), 1e-10);
}

TEST(Diffusion, AssembledMatchesApplied) {
    const Grid2D g = Grid2D::square(8);
    const SineField s{{{{1.0, 1, 2}, {0.5, 3, 1}}}};
    const VectorField2D u = s.sample(g);
    const Eigen::VectorXd a = assemble_diffusion(g, kRef) * pack_interior(u);
    const Eigen::VectorXd b = pack_interior(apply_diffusion(u, kRef));
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Diffusion, SymmetricAndNegativeSemidefinite) {
    const Grid2D g = Grid2D::square(9);
    const Eigen::MatrixXd L = Eigen::MatrixXd(assemble_diffusion(g, kRef));
    EXPECT_LE((L - L.transpose()).cwiseAbs().maxCoeff(), 1e-12 * L.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L, Eigen::EigenvaluesOnly);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1e-10);
}

TEST(Diffusion, SecondOrderConvergence) {
    const SineField s{{{{1.0, 1, 2}, {0.7, 2, 1}}}};
    std::vector<double> err;
    for (int n : {21, 41, 81}) {
        const Grid2D g = Grid2D::square(n);
        err.push_back(interior_max_abs_diff(apply_diffusion(s.sample(g), kRef),
                                            [&](double x, double y) { return s.diffusion(kRef, x, y); }));
    }
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double r = legtr::testing::convergence_rate(err[k - 1], err[k]);
        EXPECT_GE(r, 1.8);
        EXPECT_LE(r, 2.2);
    }
}

TEST(Diffusion, GridTooSmall) {
    EXPECT_THROW(assemble_diffusion(Grid2D::square(2), kRef), ConfigError);
    EXPECT_THROW(apply_diffusion(VectorField2D(Grid2D::square(2)), kRef), ConfigError);
}

TEST(Convection, ConstantTransportOfLinearField) {
    const Grid2D g = Grid2D::square(9);
    const VectorField2D a = VectorField2D::from_function(g, [](double, double) { return std::array<double, 2>{1.0, 0.0}; });
    const VectorField2D b = VectorField2D::from_function(g, [](double x, double) { return std::array<double, 2>{x, 0.0}; });
    EXPECT_LE(interior_max_abs_diff(convection(a, b), [](double, double) { return std::array<double, 2>{1.0, 0.0}; }), 1e-12);
}

TEST(Convection, RotationalTransport) {
    // a = (-y, x), b = (x, y): (a . grad) b = (-y, x).
    const Grid2D g = Grid2D::square(11);
    const VectorField2D a = VectorField2D::from_function(g, [](double x, double y) { return std::array<double, 2>{-y, x}; });
    const VectorField2D b = VectorField2D::from_function(g, [](double x, double y) { return std::array<double, 2>{x, y}; });
    const VectorField2D c = convection(a, b);
    EXPECT_LE(interior_max_abs_diff(c, [](double x, double y) { return std::array<double, 2>{-y, x}; }), 1e-12);
    EXPECT_EQ(c(0, 0, 3), 0.0);
}

TEST(Convection, ZeroVelocityAndMismatch) {
    const Grid2D g = Grid2D::square(7);
    const SineField s{{{{1.0, 1, 1}, {1.0, 2, 2}}}};
    EXPECT_EQ(convection(VectorField2D(g), s.sample(g)).max_abs(), 0.0);
    EXPECT_THROW(convection(VectorField2D(g), VectorField2D(Grid2D::square(8))), ShapeError);
}

TEST(NeumannTrace, LinearField) {
    const Grid2D g = Grid2D::square(9);
    const VectorField2D u = VectorField2D::from_function(g, [](double x, double) { return std::array<double, 2>{x, 0.0}; });
    const BoundarySamples t = neumann_trace(u);
    for (int b = 0; b < g.n_boundary(); ++b) {
        EXPECT_NEAR(t(b, 0), g.boundary()[b].nu_x, 1e-12);
        EXPECT_NEAR(t(b, 1), 0.0, 1e-12);
    }
}

TEST(NeumannTrace, QuadraticExactOnVerticalFaces) {
    const Grid2D g = Grid2D::square(13);
    const VectorField2D u = VectorField2D::from_function(g, [](double x, double) { return std::array<double, 2>{x * x, 0.0}; });
    const BoundarySamples t = neumann_trace(u);
    for (int b = 0; b < g.n_boundary(); ++b)
        if (g.boundary()[b].nu_x != 0) EXPECT_NEAR(t(b, 0), 2.0, 1e-11);
}

TEST(NeumannTrace, SecondOrderConvergence) {
    const SineField s{{{{1.0, 1, 1}, {0.5, 2, 1}}}};
    std::vector<double> err;
    for (int n : {21, 41, 81}) {
        const Grid2D g = Grid2D::square(n);
        const BoundarySamples t = neumann_trace(s.sample(g));
        double worst = 0.0;
        for (int b = 0; b < g.n_boundary(); ++b) {
            const BoundaryNode& nd = g.boundary()[b];
            const auto ex = s.normal_derivative(g.x(nd.i), g.y(nd.j), nd.nu_x, nd.nu_y);
            for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(t(b, c) - ex[c]));
        }
        err.push_back(worst);
    }
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double r = legtr::testing::convergence_rate(err[k - 1], err[k]);
        EXPECT_GE(r, 1.8);
        EXPECT_LE(r, 2.2);
    }
}

TEST(NeumannTrace, AssembledMatchesFieldTrace) {
    const Grid2D g = Grid2D::square(10);
    const SineField s{{{{1.0, 2, 1}, {-0.3, 1, 3}}}};
    const VectorField2D u = s.sample(g);
    const Eigen::VectorXd a = assemble_neumann(g) * pack_interior(u);
    const BoundarySamples t = neumann_trace(u);
    const int nb = g.n_boundary();
    for (int c = 0; c < 2; ++c)
        for (int b = 0; b < nb; ++b) EXPECT_NEAR(a[c * nb + b], t(b, c), 1e-9);
}

TEST(Coercivity, IdentityTensor) {
    const CoercivityReport r = coercivity_report(ViscosityTensor::identity());
    EXPECT_NEAR(r.min_sym_eig, 1.0, 1e-14);
    EXPECT_NEAR(r.min_full_eig, 1.0, 1e-14);
    EXPECT_TRUE(r.symmetric);
}

TEST(Coercivity, ReferenceTensorOnlyOnSymmetricMatrices) {
    const CoercivityReport r = coercivity_report(kRef);
    EXPECT_NEAR(r.min_full_eig, 0.0, 1e-12);
    EXPECT_GT(r.min_sym_eig, 0.1);
    EXPECT_TRUE(r.symmetric);
}
