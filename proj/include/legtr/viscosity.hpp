#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace legtr {

/// Constant fourth-order viscosity tensor mu_ijkl for d = 2, stored in the
/// flattened 4x4 form with rows (i,j) and columns (k,l) both ordered
/// 11, 12, 21, 22. Indices passed to operator() are zero-based.
class ViscosityTensor {
public:
    ViscosityTensor() : flat_(Eigen::Matrix4d::Identity()) {}
    explicit ViscosityTensor(const Eigen::Matrix4d& flat) : flat_(flat) {}

    /// The anisotropic tensor used in the reference experiments.
    static ViscosityTensor anisotropic_reference() {
        Eigen::Matrix4d m;
        m << 1.0, 1.0 / 16, 1.0 / 16, 3.0 / 8,  //
            1.0 / 16, 1.0 / 4, 1.0 / 4, 0.0,    //
            1.0 / 16, 1.0 / 4, 1.0 / 4, 0.0,    //
            3.0 / 8, 0.0, 0.0, 1.0 / 2;
        return ViscosityTensor(m);
    }

    /// mu_ijkl = delta_ik delta_jl.
    static ViscosityTensor identity() { return ViscosityTensor(Eigen::Matrix4d::Identity()); }

    double operator()(int i, int j, int k, int l) const { return flat_(2 * i + j, 2 * k + l); }
    const Eigen::Matrix4d& flat() const { return flat_; }

    bool is_symmetric(double tol = 1e-14) const {
        return (flat_ - flat_.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, flat_.cwiseAbs().maxCoeff());
    }

private:
    Eigen::Matrix4d flat_;
};

struct CoercivityReport {
    double min_sym_eig;   ///< min of the quadratic form over unit symmetric xi
    double min_full_eig;  ///< min over all unit xi in R^{2x2}
    bool symmetric;
};

/// Minimum Rayleigh quotients of xi -> sum mu_ijkl xi_ij xi_kl. Only the
/// symmetric part of mu_flat enters a quadratic form, so a non-symmetric
/// tensor is reported through `symmetric` but still analysed.
inline CoercivityReport coercivity_report(const ViscosityTensor& mu) {
    const Eigen::Matrix4d sym = 0.5 * (mu.flat() + mu.flat().transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> full(sym, Eigen::EigenvaluesOnly);

    // Orthonormal basis of symmetric 2x2 matrices in flattened coordinates.
    Eigen::Matrix<double, 4, 3> basis = Eigen::Matrix<double, 4, 3>::Zero();
    basis(0, 0) = 1.0;
    basis(1, 1) = basis(2, 1) = std::sqrt(0.5);
    basis(3, 2) = 1.0;
    const Eigen::Matrix3d restricted = basis.transpose() * sym * basis;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> sub(restricted, Eigen::EigenvaluesOnly);

    return {sub.eigenvalues().minCoeff(), full.eigenvalues().minCoeff(), mu.is_symmetric()};
}

} // namespace legtr
