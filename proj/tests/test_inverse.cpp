#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "legtr/forward_solver.hpp"
#include "legtr/inverse_solver.hpp"
#include "support.hpp"

using namespace legtr;
using legtr::testing::SineField;

namespace {

const ViscosityTensor kRef = ViscosityTensor::anisotropic_reference();

std::shared_ptr<const ReducedOperator> make_op(int n, int N, double eps, const ViscosityTensor& mu = kRef) {
    const BasisTable basis = build_basis_table(N, 1.0);
    return std::make_shared<const ReducedOperator>(Grid2D::square(n), mu, coupling_s(basis), eps);
}

Eigen::VectorXd random_rhs(const ReducedOperator& op, unsigned seed) {
    std::srand(seed);
    Eigen::VectorXd b = Eigen::VectorXd::Random(op.n_rows());
    b.tail(op.n_rows() - op.block("neumann").end).setZero();
    return b;
}

// A small forward run; its boundary trace projected on the basis.
InverseProblem small_problem(int n, int N, bool conv, double eps = 1e-6) {
    ForwardConfig cfg;
    cfg.grid = Grid2D::square(n);
    cfg.n_steps = 200;
    cfg.convection = conv;
    const VectorField2D u0 = SineField{{{{1.0, 1, 1}, {0.5, 1, 2}}}}.sample(cfg.grid);
    const ForwardResult fr = run_forward(u0, cfg, false);
    auto basis = std::make_shared<const BasisTable>(build_basis_table(N, 1.0));
    return {cfg.grid, cfg.mu, basis, compute_couplings(*basis), project_boundary_data(fr.trace, *basis), std::nullopt, eps};
}

} // namespace

TEST(LeastSquares, ZeroRhsGivesZero) {
    for (SolverMethod m : {SolverMethod::Direct, SolverMethod::Iterative}) {
        const auto op = make_op(7, 2, 1e-6);
        const LeastSquaresSolver s(op, {.method = m});
        EXPECT_EQ(s.solve(Eigen::VectorXd::Zero(op->n_rows())).x.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(LeastSquares, MatchesDenseReference) {
    const auto op = make_op(5, 1, 1e-6);
    const Eigen::VectorXd b = random_rhs(*op, 3);
    const Eigen::MatrixXd A(op->design());
    const Eigen::VectorXd ref = A.householderQr().solve(b);
    for (SolverMethod m : {SolverMethod::Direct, SolverMethod::Iterative}) {
        const SolveReport r = LeastSquaresSolver(op, {.method = m}).solve(b);
        EXPECT_LE((r.x - ref).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    }
}

TEST(LeastSquares, NormalEquationOptimality) {
    const auto op = make_op(13, 4, 1e-6);
    const Eigen::VectorXd b = random_rhs(*op, 5);
    const auto& A = op->design();
    const Eigen::VectorXd atb = A.transpose() * b;
    for (SolverMethod m : {SolverMethod::Direct, SolverMethod::Iterative}) {
        const SolveReport r = LeastSquaresSolver(op, {.method = m}).solve(b);
        const Eigen::VectorXd g = A.transpose() * (b - A * r.x);
        EXPECT_LE(g.norm(), 1e-8 * atb.norm());
        EXPECT_LE(r.relative_residual, 1e-8);
    }
}

TEST(LeastSquares, WrongRhsLength) {
    const auto op = make_op(5, 1, 1e-6);
    EXPECT_THROW(LeastSquaresSolver(op).solve(Eigen::VectorXd::Zero(3)), ShapeError);
    EXPECT_THROW(LeastSquaresSolver(nullptr), ConfigError);
}

TEST(LeastSquares, NonConvergenceIsReported) {
    const auto op = make_op(7, 2, 1e-6);
    SolverOptions opt;
    opt.method = SolverMethod::Iterative;
    opt.tolerance = 1e-300;
    opt.max_iterations = 2;
    EXPECT_THROW(LeastSquaresSolver(op, opt).solve(random_rhs(*op, 1)), SolverError);
}

TEST(NormalInverse, InvertsNormalMatrix) {
    for (int N : {0, 1, 3, 6}) {
        const auto op = make_op(9, N, 1e-5);
        const NormalInverse inv(*op);
        const Eigen::MatrixXd A(op->design());
        const Eigen::MatrixXd AtA = A.transpose() * A;
        std::srand(11);
        const Eigen::VectorXd r = Eigen::VectorXd::Random(op->n_unknowns());
        const Eigen::VectorXd x = inv.apply(r);
        EXPECT_LE((AtA * x - r).norm(), 1e-9 * r.norm()) << "N=" << N;
        EXPECT_EQ(inv.size(), op->n_unknowns());
    }
}

TEST(NormalInverse, RankOfCouplingCorrection) {
    EXPECT_LE(NormalInverse(*make_op(7, 5, 1e-6)).rank(), 2);
}

TEST(NormalInverse, RejectsNonSymmetricDiffusion) {
    Eigen::Matrix4d flat = Eigen::Matrix4d::Identity();
    flat(0, 3) = 0.3;
    EXPECT_THROW(NormalInverse(*make_op(7, 2, 1e-6, ViscosityTensor(flat))), ConfigError);
}

TEST(Picard, ZeroDataIsDegenerate) {
    InverseProblem p = small_problem(9, 2, true);
    p.boundary_modes.setZero();
    PicardOptions opt;
    opt.K = 3;
    const PicardState s = picard_run(p, opt);
    EXPECT_EQ(s.k, 3);
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.U.max_abs(), 0.0);
    ASSERT_EQ(s.increments.size(), 3u);
    for (double v : s.increments) EXPECT_TRUE(std::isinf(v));
}

TEST(Picard, LinearProblemConvergesInOneStep) {
    const InverseProblem p = small_problem(11, 4, false);
    PicardOptions opt;
    opt.K = 5;
    opt.convection = false;
    opt.tolerance = 0.0;
    const PicardState s = picard_run(p, opt);
    ASSERT_EQ(s.increments.size(), 5u);
    EXPECT_EQ(s.increments[0], 1.0);
    EXPECT_LE(s.increments[1], 1e-10);
}

TEST(Picard, EarlyStopAndObserver) {
    const InverseProblem p = small_problem(9, 3, false);
    PicardOptions opt;
    opt.convection = false;
    std::vector<int> seen;
    const PicardState s = picard_run(p, opt, [&](const PicardState& st) { seen.push_back(st.k); });
    EXPECT_TRUE(s.early_stopped);
    EXPECT_EQ(s.k, 2);
    EXPECT_EQ(seen, (std::vector<int>{1, 2}));
    EXPECT_EQ(s.increments.size(), static_cast<std::size_t>(s.k));
}

TEST(Picard, DirectAndIterativeAgree) {
    const InverseProblem p = small_problem(11, 3, true);
    PicardOptions a, b;
    a.K = b.K = 3;
    a.solver.method = SolverMethod::Direct;
    b.solver.method = SolverMethod::Iterative;
    const PicardState sa = picard_run(p, a), sb = picard_run(p, b);
    EXPECT_LE((sa.U.coeffs() - sb.U.coeffs()).cwiseAbs().maxCoeff(), 1e-7 * sa.U.max_abs());
}

TEST(Picard, Deterministic) {
    const InverseProblem p = small_problem(9, 3, true);
    PicardOptions opt;
    opt.K = 3;
    const PicardState a = picard_run(p, opt), b = picard_run(p, opt);
    EXPECT_EQ(a.U.coeffs(), b.U.coeffs());
    EXPECT_EQ(a.increments, b.increments);
}

TEST(Picard, RejectsBadOptions) {
    const InverseProblem p = small_problem(7, 1, true);
    PicardOptions opt;
    opt.K = 0;
    EXPECT_THROW(picard_run(p, opt), ConfigError);
}

TEST(Picard, NonFiniteDataIsASolverFailure) {
    InverseProblem p = small_problem(7, 1, true);
    p.boundary_modes(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(picard_run(p, PicardOptions{}), SolverError);
}

TEST(Increment, HandBuiltStacks) {
    const Grid2D g = Grid2D::square(4);
    ModeStack a(g, 1), b(g, 1);
    ASSERT_EQ(a.coeffs().size(), 8);
    a.coeffs() << 1, 2, 0, 0, 0, 0, 0, -1;
    b.coeffs() << 1.5, -3, 0, 0, 0, 0, 0, -1;
    EXPECT_DOUBLE_EQ(relative_increment(b, a), 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(relative_increment(a, b), 5.0 / 2.0);
    EXPECT_EQ(relative_increment(a, a), 0.0);
    EXPECT_TRUE(std::isinf(relative_increment(ModeStack(g, 1), a)));
}

TEST(Reconstruct, SingleModeIsIdentity) {
    const Grid2D g = Grid2D::square(8);
    const BasisTable basis = build_basis_table(0, 1.0);
    const ModeStack U = ModeStack::from_fields({SineField{{{{1.0, 1, 2}, {2.0, 2, 1}}}}.sample(g)});
    const ReconstructionResult r = reconstruct(U, basis);
    EXPECT_LE((pack_interior(r.u0_comp) - U.mode(0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Reconstruct, AgreesWithEvaluationAtZero) {
    const Grid2D g = Grid2D::square(7);
    const BasisTable basis = build_basis_table(5, 1.0);
    std::srand(2);
    const ModeStack U(g, 6, Eigen::VectorXd::Random(6 * 2 * g.n_interior()));
    const VectorField2D a = reconstruct(U, basis).u0_comp, b = evaluate_stack(U, basis, 0.0);
    EXPECT_LE((pack_interior(a) - pack_interior(b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reconstruct, SignFlipOfFirstMode) {
    const Grid2D g = Grid2D::square(7);
    const BasisTable basis = build_basis_table(3, 1.0);
    std::srand(4);
    ModeStack U(g, 4, Eigen::VectorXd::Random(4 * 2 * g.n_interior()));
    const Eigen::VectorXd before = pack_interior(reconstruct(U, basis).u0_comp);
    const Eigen::VectorXd u1 = U.mode(1);
    U.mode(1) = -u1;
    const Eigen::VectorXd after = pack_interior(reconstruct(U, basis).u0_comp);
    // Psi_1(0) = -sqrt(3): flipping u_1 adds 2 sqrt(3) u_1.
    EXPECT_LE((after - before - 2.0 * std::sqrt(3.0) * u1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reconstruct, SynthesisOfCoefficientsIsProjection) {
    const Grid2D g = Grid2D::square(6);
    const BasisTable basis = build_basis_table(8, 1.0);
    const Eigen::Index n = 2 * g.n_interior();
    std::srand(9);
    const Eigen::VectorXd phi1 = Eigen::VectorXd::Random(n), phi2 = Eigen::VectorXd::Random(n);
    Eigen::MatrixXd samples(basis.n_nodes(), n);
    for (Eigen::Index q = 0; q < basis.n_nodes(); ++q) {
        const double t = basis.quadrature().nodes[q];
        samples.row(q) = (std::sin(5 * t) * phi1 + std::exp(-t * t) * phi2).transpose();
    }
    const Eigen::MatrixXd c = fourier_coefficients(samples, basis);
    const Eigen::VectorXd coeffs = Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd(c.transpose()).data(), c.size());
    const ModeStack U(g, basis.modes(), coeffs);
    const Eigen::MatrixXd P = project(samples, basis);
    for (Eigen::Index q = 0; q < basis.n_nodes(); q += 23) {
        const Eigen::VectorXd v = pack_interior(evaluate_stack(U, basis, basis.quadrature().nodes[q]));
        EXPECT_LE((v - P.row(q).transpose()).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Reconstruct, ModeCountMismatch) {
    const Grid2D g = Grid2D::square(6);
    EXPECT_THROW(reconstruct(ModeStack(g, 3), build_basis_table(3, 1.0)), ShapeError);
}

TEST(Metrics, IdenticalFields) {
    const VectorField2D u = make_test_field(1, Grid2D::square(21));
    const Metrics m = compute_metrics(u, u, support_masks(u));
    for (int c = 0; c < 2; ++c) {
        EXPECT_EQ(m.component[c].relative_error, 0.0);
        EXPECT_EQ(m.component[c].max_true, 4.0);
    }
    EXPECT_EQ(m.relative_l2, 0.0);
}

TEST(Metrics, KnownValues) {
    const Grid2D g = Grid2D::square(21);
    const VectorField2D u = make_test_field(2, g);
    VectorField2D v = u;
    v.component(0) *= 0.8;
    v.component(1) *= 1.1;
    const Metrics m = compute_metrics(v, u, support_masks(u));
    EXPECT_NEAR(m.component[0].max_computed, 0.8, 1e-15);
    EXPECT_NEAR(m.component[0].relative_error, 0.2, 1e-15);
    EXPECT_NEAR(m.component[1].relative_error, 0.1, 1e-15);
    const double n0 = u.component(0).squaredNorm(), n1 = u.component(1).squaredNorm();
    EXPECT_NEAR(m.relative_l2, std::sqrt((0.04 * n0 + 0.01 * n1) / (n0 + n1)), 1e-14);
}

TEST(Metrics, EmptyMask) {
    const Grid2D g = Grid2D::square(9);
    const VectorField2D u = make_test_field(1, g);
    RegionMasks masks = support_masks(u);
    std::fill(masks[1].begin(), masks[1].end(), false);
    EXPECT_THROW(compute_metrics(u, u, masks), DomainError);
    EXPECT_THROW(compute_metrics(u, VectorField2D(Grid2D::square(10)), masks), ShapeError);
}
