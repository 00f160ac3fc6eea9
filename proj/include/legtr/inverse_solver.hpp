#pragma once

// Picard iteration over regularized least-squares updates, then
// reconstruction of the velocity field and of the initial data.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "legtr/error.hpp"
#include "legtr/normal_inverse.hpp"
#include "legtr/reduced_model.hpp"
#include "legtr/time_basis.hpp"

namespace legtr {

enum class SolverMethod { Auto, Direct, Iterative };

struct SolverOptions {
    SolverMethod method = SolverMethod::Auto;
    /// Stop when |A^T (b - A x)| <= tolerance * |A^T b|.
    double tolerance = 1e-8;
    int max_iterations = 50000;
    /// Auto picks the direct solver up to this many unknowns.
    Eigen::Index direct_limit = 4000;
    /// Called every `progress_every` CG iterations with (iteration, relative residual).
    std::function<void(int, double)> progress;
    int progress_every = 100;
};

struct SolveReport {
    Eigen::VectorXd x;
    int iterations = 0;
    double relative_residual = 0.0;
    SolverMethod method = SolverMethod::Iterative;
};

/// Minimizes |A x - b| for a fixed ReducedOperator and many right-hand
/// sides. All set-up work happens in the constructor.
///
/// The direct path factorizes A^T A with a sparse LDL^T. The iterative path
/// runs conjugate gradients on A^T A x = A^T b preconditioned by
/// NormalInverse, which is exact up to rounding, so only a few iterations
/// are needed to polish the result.
class LeastSquaresSolver {
public:
    explicit LeastSquaresSolver(std::shared_ptr<const ReducedOperator> op, SolverOptions opt = {})
        : op_(std::move(op)), opt_(opt) {
        if (!op_) throw ConfigError("inverse_solver", "null operator");
        method_ = opt_.method;
        if (method_ == SolverMethod::Auto)
            method_ = op_->n_unknowns() <= opt_.direct_limit ? SolverMethod::Direct : SolverMethod::Iterative;
        if (method_ == SolverMethod::Direct) {
            const Eigen::SparseMatrix<double> A = op_->design();
            normal_ = (A.transpose() * A).pruned();
            direct_.compute(normal_);
            if (direct_.info() != Eigen::Success) throw SolverError("inverse_solver", "normal-matrix factorization failed");
        } else {
            inverse_ = std::make_unique<NormalInverse>(*op_);
        }
    }

    SolverMethod method() const { return method_; }
    const ReducedOperator& op() const { return *op_; }

    SolveReport solve(const Eigen::VectorXd& rhs, const Eigen::VectorXd* warm_start = nullptr) const {
        const auto& A = op_->design();
        if (rhs.size() != A.rows()) throw ShapeError("inverse_solver", "right-hand side length does not match the design matrix");
        const Eigen::VectorXd atb = A.transpose() * rhs;
        const double atb_norm = atb.norm();
        SolveReport rep;
        rep.method = method_;
        if (atb_norm == 0.0) {
            rep.x = Eigen::VectorXd::Zero(A.cols());
            return rep;
        }
        if (method_ == SolverMethod::Direct) {
            rep.x = direct_.solve(atb);
            // One step of iterative refinement against the assembled normal matrix.
            const Eigen::VectorXd r = atb - normal_ * rep.x;
            rep.x += direct_.solve(r);
            rep.relative_residual = (atb - A.transpose() * (A * rep.x)).norm() / atb_norm;
            if (!(rep.relative_residual <= std::max(opt_.tolerance, 1e-8)))
                throw SolverError("inverse_solver", "direct solve residual " + std::to_string(rep.relative_residual) +
                                                        " exceeds tolerance");
            return rep;
        }
        return pcg(atb, atb_norm, warm_start);
    }

    /// Applies the structured inverse of A^T A; exposed for tests.
    Eigen::VectorXd precondition(const Eigen::VectorXd& r) const { return inverse_->apply(r); }

private:
    SolveReport pcg(const Eigen::VectorXd& atb, double atb_norm, const Eigen::VectorXd* warm_start) const {
        const auto& A = op_->design();
        auto normal_apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            const Eigen::VectorXd av = A * v;
            return A.transpose() * av;
        };
        SolveReport rep;
        rep.method = SolverMethod::Iterative;
        rep.x = (warm_start && warm_start->size() == A.cols()) ? *warm_start : Eigen::VectorXd::Zero(A.cols());
        const double target = opt_.tolerance * atb_norm;

        Eigen::VectorXd r = atb - normal_apply(rep.x);
        double rnorm = r.norm();
        int it = 0;
        for (int restart = 0; restart < 5 && rnorm > target; ++restart) {
            Eigen::VectorXd z = precondition(r);
            Eigen::VectorXd p = z;
            double rz = r.dot(z);
            while (rnorm > target && it < opt_.max_iterations) {
                const Eigen::VectorXd q = normal_apply(p);
                const double pq = p.dot(q);
                if (!(pq > 0.0)) break;
                const double alpha = rz / pq;
                rep.x += alpha * p;
                r -= alpha * q;
                rnorm = r.norm();
                ++it;
                if (opt_.progress && it % opt_.progress_every == 0) opt_.progress(it, rnorm / atb_norm);
                if (rnorm <= target) break;
                z = precondition(r);
                const double rz_new = r.dot(z);
                p = z + (rz_new / rz) * p;
                rz = rz_new;
            }
            // The recurrence residual drifts; confirm against the true one.
            r = atb - normal_apply(rep.x);
            rnorm = r.norm();
            if (it >= opt_.max_iterations) break;
        }
        rep.iterations = it;
        rep.relative_residual = rnorm / atb_norm;
        if (!(rnorm <= target))
            throw SolverError("inverse_solver", "CG did not converge: relative residual " + std::to_string(rep.relative_residual) +
                                                    " after " + std::to_string(it) + " iterations");
        return rep;
    }

    std::shared_ptr<const ReducedOperator> op_;
    SolverOptions opt_;
    SolverMethod method_;

    Eigen::SparseMatrix<double> normal_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> direct_;

    std::unique_ptr<NormalInverse> inverse_;
};

/// The unique minimizer of the system as a mode stack.
inline ModeStack solve_least_squares(const LeastSquaresSystem& system, SolverOptions opt = {}) {
    const LeastSquaresSolver solver(system.op, opt);
    const SolveReport rep = solver.solve(system.rhs);
    return ModeStack(system.op->grid(), system.op->n_modes(), rep.x);
}

// --- Picard iteration ---------------------------------------------------------

struct InverseProblem {
    Grid2D grid;
    ViscosityTensor mu;
    std::shared_ptr<const BasisTable> basis;
    CouplingCoefficients couplings;
    BoundaryModes boundary_modes;
    std::optional<ModeStack> pressure_modes;
    double eps = 1e-6;
    BlockWeights weights{};
};

struct PicardOptions {
    int K = 10;
    /// Early stop once the relative increment falls below this value.
    double tolerance = 1e-6;
    bool convection = true;
    SolverOptions solver{};
};

struct PicardState {
    int k = 0;
    ModeStack U;
    std::vector<double> increments;
    std::vector<int> solver_iterations;
    bool early_stopped = false;
    /// Some iterate was identically zero, so its increment is +inf.
    bool degenerate = false;
};

/// |U_new - U_old|_inf / |U_new|_inf over all modes, components and nodes;
/// +inf when U_new vanishes.
inline double relative_increment(const ModeStack& U_new, const ModeStack& U_old) {
    const double denom = U_new.max_abs();
    const double num = (U_new.coeffs() - U_old.coeffs()).cwiseAbs().maxCoeff();
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return num / denom;
}

using PicardObserver = std::function<void(const PicardState&)>;

inline PicardState picard_run(const InverseProblem& problem, const PicardOptions& opt, const PicardObserver& observer = {}) {
    if (opt.K < 1) throw ConfigError("inverse_solver", "Picard iteration count K must be >= 1");
    if (!problem.basis) throw ConfigError("inverse_solver", "missing basis table");
    const int M = problem.basis->modes();
    auto op = std::make_shared<const ReducedOperator>(problem.grid, problem.mu, problem.couplings.S, problem.eps, problem.weights);
    const LeastSquaresSolver solver(op, opt.solver);
    const ModeStack* pressure = problem.pressure_modes ? &*problem.pressure_modes : nullptr;

    CouplingTensor zero_a;
    if (!opt.convection) {
        zero_a = CouplingTensor(M);
    }
    const CouplingTensor& A = opt.convection ? problem.couplings.A : zero_a;

    PicardState state{0, ModeStack(problem.grid, M), {}, {}, false, false};
    for (int k = 0; k < opt.K; ++k) {
        const ModeStack source = convection_source(state.U, A);
        const Eigen::VectorXd b = op->rhs(source, pressure, problem.boundary_modes);
        const SolveReport rep = solver.solve(b, &state.U.coeffs());
        if (!rep.x.allFinite())
            throw SolverError("inverse_solver", "Picard iterate " + std::to_string(k + 1) + " is not finite");
        ModeStack next(problem.grid, M, rep.x);
        const double inc = relative_increment(next, state.U);
        if (!std::isfinite(inc)) state.degenerate = true;
        state.increments.push_back(inc);
        state.solver_iterations.push_back(rep.iterations);
        state.U = std::move(next);
        state.k = k + 1;
        if (observer) observer(state);
        if (inc < opt.tolerance) {
            state.early_stopped = true;
            break;
        }
    }
    return state;
}

// --- Reconstruction and metrics ---------------------------------------------

/// u(x, t) = sum_n u_n(x) Psi_n(t).
inline VectorField2D evaluate_stack(const ModeStack& U, const BasisTable& basis, double t) {
    if (U.n_modes() != basis.modes()) throw ShapeError("inverse_solver", "stack and basis disagree on N");
    const BasisSample s = basis.at(t);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(U.mode_size());
    for (int n = 0; n < U.n_modes(); ++n) v += s.psi[n] * U.mode(n);
    return unpack_interior(U.grid(), v);
}

struct ReconstructionResult {
    ModeStack U_comp;
    VectorField2D u0_comp;
};

/// Initial field from the computed modes, using Psi_n(0) = (-1)^n sqrt((2n+1)/T).
inline ReconstructionResult reconstruct(const ModeStack& U, const BasisTable& basis) {
    if (U.n_modes() != basis.modes()) throw ShapeError("inverse_solver", "stack and basis disagree on N");
    const Eigen::VectorXd psi0 = rescaled_legendre_at_start(basis.N(), basis.T());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(U.mode_size());
    for (int n = 0; n < U.n_modes(); ++n) v += psi0[n] * U.mode(n);
    return {U, unpack_interior(U.grid(), v)};
}

/// One boolean per grid node and component.
using RegionMasks = std::array<std::vector<bool>, 2>;

/// Nodes where the reference field is non-zero.
inline RegionMasks support_masks(const VectorField2D& u) {
    RegionMasks masks;
    for (int c = 0; c < 2; ++c) {
        masks[c].resize(u.grid().n_nodes());
        for (int k = 0; k < u.grid().n_nodes(); ++k) masks[c][k] = u.component(c)[k] != 0.0;
    }
    return masks;
}

struct ComponentMetrics {
    double max_computed;
    double max_true;
    double relative_error;
};

struct Metrics {
    std::array<ComponentMetrics, 2> component;
    double relative_l2;
};

inline Metrics compute_metrics(const VectorField2D& u0_comp, const VectorField2D& u0_true, const RegionMasks& masks) {
    require_same_grid(u0_comp.grid(), u0_true.grid(), "inverse_solver");
    const int nn = u0_true.grid().n_nodes();
    Metrics out{};
    for (int c = 0; c < 2; ++c) {
        if (static_cast<int>(masks[c].size()) != nn) throw ShapeError("inverse_solver", "mask does not match the grid");
        double mc = -std::numeric_limits<double>::infinity(), mt = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (int k = 0; k < nn; ++k) {
            if (!masks[c][k]) continue;
            any = true;
            mc = std::max(mc, u0_comp.component(c)[k]);
            mt = std::max(mt, u0_true.component(c)[k]);
        }
        if (!any) throw DomainError("inverse_solver", "empty region mask for component " + std::to_string(c + 1));
        out.component[c] = {mc, mt, std::abs(mc - mt) / std::abs(mt)};
    }
    double num = 0.0, den = 0.0;
    for (int c = 0; c < 2; ++c) {
        num += (u0_comp.component(c) - u0_true.component(c)).squaredNorm();
        den += u0_true.component(c).squaredNorm();
    }
    out.relative_l2 = std::sqrt(num / den);
    return out;
}

} // namespace legtr
