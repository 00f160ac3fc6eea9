#pragma once

// Direct inverse of the normal matrix A^T A of a ReducedOperator with a
// symmetric diffusion block, built from two eigendecompositions and one
// dense capacitance factorization.
//
// With T = I (x) L - S (x) I, w the interior weight and H the per-mode
// boundary + regularizer Gram matrix,
//   A^T A = I (x) G + w S^T S (x) I - w E (x) L,
//   G = w L^2 - c w L + H,   S + S^T = c I + E.
// For the coupling matrix of the time basis E has rank two. Diagonalizing
// S^T S = V diag(sigma) V^T and G = W diag(lambda) W^T leaves a diagonal
// matrix plus a rank-(r n) correction, which is eliminated through an
// (r n) x (r n) dense system.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#ifdef LEGTR_HAVE_LAPACKE
#include <lapacke.h>
#endif

#include "legtr/error.hpp"
#include "legtr/reduced_model.hpp"

namespace legtr {

namespace detail {

/// Eigenvalues (ascending) and orthonormal eigenvectors of a dense
/// symmetric matrix; `a` is overwritten with the eigenvectors.
inline void symmetric_eigen(Eigen::MatrixXd& a, Eigen::VectorXd& values) {
    const Eigen::Index n = a.rows();
    values.resize(n);
#ifdef LEGTR_HAVE_LAPACKE
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n), a.data(),
                                           static_cast<lapack_int>(n), values.data());
    if (info != 0) throw SolverError("normal_inverse", "dsyevd failed with info " + std::to_string(info));
#else
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw SolverError("normal_inverse", "symmetric eigensolver failed");
    values = es.eigenvalues();
    a = es.eigenvectors();
#endif
}

} // namespace detail

class NormalInverse {
public:
    explicit NormalInverse(const ReducedOperator& op) {
        const SparseOperator& L = op.diffusion();
        if ((SparseOperator(L.transpose()) - L).norm() > 1e-12 * L.norm())
            throw ConfigError("normal_inverse", "diffusion operator is not symmetric");
        const Eigen::MatrixXd& S = op.S();
        modes_ = static_cast<int>(S.rows());
        n_ = L.rows();
        w_ = op.interior_scale() * op.interior_scale();

        // Mode-space pieces.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sts(S.transpose() * S);
        V_ = sts.eigenvectors();
        const Eigen::VectorXd sigma = sts.eigenvalues();
        const Eigen::MatrixXd sym = S + S.transpose();
        const double c = sym.diagonal().mean();
        const Eigen::MatrixXd E = sym - c * Eigen::MatrixXd::Identity(modes_, modes_);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ees(E);
        const double cut = 1e-12 * std::max(1.0, E.cwiseAbs().maxCoeff());
        std::vector<int> keep;
        for (int k = 0; k < modes_; ++k)
            if (std::abs(ees.eigenvalues()[k]) > cut) keep.push_back(k);
        rank_ = static_cast<int>(keep.size());
        e_.resize(rank_);
        et_.resize(modes_, rank_);
        for (int r = 0; r < rank_; ++r) {
            e_[r] = ees.eigenvalues()[keep[r]];
            et_.col(r) = V_.transpose() * ees.eigenvectors().col(keep[r]);
        }

        // Space pieces.
        const Eigen::Index nm = n_;
        const auto& A = op.design();
        const RowBlock& bd = op.block("neumann");
        const RowBlock& rg = op.block("regularizer");
        const Eigen::Index nb_rows = (bd.end - bd.begin) / modes_;
        const Eigen::Index rg_rows = (rg.end - rg.begin) / modes_;
        const SparseOperator Ab = SparseOperator(A.middleRows(bd.begin, nb_rows)).leftCols(nm);
        const SparseOperator Ar = SparseOperator(A.middleRows(rg.begin, rg_rows)).leftCols(nm);
        const SparseOperator L2 = L * L;
        const SparseOperator Hs = SparseOperator(Ab.transpose() * Ab) + SparseOperator(Ar.transpose() * Ar);
        W_ = Eigen::MatrixXd(w_ * L2 - c * w_ * L + Hs);
        detail::symmetric_eigen(W_, lambda_);

        d_.resize(n_, modes_);
        for (int j = 0; j < modes_; ++j) d_.col(j) = lambda_.array() + w_ * sigma[j];
        if (!(d_.minCoeff() > 0.0)) throw SolverError("normal_inverse", "shifted Gram matrix is not positive definite");

        if (rank_ > 0) {
            Lw_ = W_.transpose() * (L * W_);
            const Eigen::Index rn = rank_ * n_;
            Eigen::MatrixXd K = Eigen::MatrixXd::Identity(rn, rn);
            for (int s = 0; s < rank_; ++s)
                for (int r = 0; r < rank_; ++r) {
                    Eigen::VectorXd delta = Eigen::VectorXd::Zero(n_);
                    for (int j = 0; j < modes_; ++j) delta.array() += et_(j, s) * et_(j, r) / d_.col(j).array();
                    K.block(s * n_, r * n_, n_, n_).noalias() -= (w_ * e_[r]) * (delta.asDiagonal() * Lw_);
                }
            lu_.compute(K);
        }
    }

    int rank() const { return rank_; }
    Eigen::Index size() const { return n_ * modes_; }

    /// x = (A^T A)^{-1} r, unknowns mode-major.
    Eigen::VectorXd apply(const Eigen::VectorXd& r) const {
        if (r.size() != size()) throw ShapeError("normal_inverse", "vector length does not match the operator");
        const Eigen::Map<const Eigen::MatrixXd> R(r.data(), n_, modes_);
        const Eigen::MatrixXd rho = W_.transpose() * (R * V_);
        Eigen::MatrixXd Z = rho.cwiseQuotient(d_);
        if (rank_ > 0) {
            Eigen::VectorXd g(rank_ * n_);
            for (int s = 0; s < rank_; ++s) g.segment(s * n_, n_) = Z * et_.col(s);
            const Eigen::VectorXd alpha = lu_.solve(g);
            Eigen::MatrixXd corr(n_, rank_);
            for (int r2 = 0; r2 < rank_; ++r2) corr.col(r2) = (w_ * e_[r2]) * (Lw_ * alpha.segment(r2 * n_, n_));
            Z.noalias() += (corr * et_.transpose()).cwiseQuotient(d_);
        }
        Eigen::VectorXd x(size());
        Eigen::Map<Eigen::MatrixXd>(x.data(), n_, modes_) = W_ * Z * V_.transpose();
        return x;
    }

private:
    int modes_ = 0;
    int rank_ = 0;
    Eigen::Index n_ = 0;
    double w_ = 1.0;
    Eigen::MatrixXd V_;
    Eigen::VectorXd e_;
    Eigen::MatrixXd et_;
    Eigen::MatrixXd W_;
    Eigen::VectorXd lambda_;
    Eigen::MatrixXd d_;
    Eigen::MatrixXd Lw_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

} // namespace legtr
