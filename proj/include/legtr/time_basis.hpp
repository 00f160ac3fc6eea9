#pragma once

// Legendre polynomial-exponential basis Psi_n(t) = e^t Q_n(t) on (0, T),
// orthonormal in L^2 with weight e^{-2t}, together with the spectral
// operators built on it and the time-coupling coefficients of the reduced
// model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "legtr/error.hpp"

namespace legtr {

struct LegendreValue {
    double value;
    double derivative;
};

/// Classical Legendre polynomial P_n and its derivative at x in [-1, 1].
/// Uses the three-term recurrence for P_n and
/// P'_{k+1} = P'_{k-1} + (2k+1) P_k for the derivative, which stays finite at
/// the endpoints.
inline LegendreValue legendre_eval(int n, double x) {
    if (n < 0) throw DomainError("time_basis", "Legendre degree must be non-negative");
    if (!(std::abs(x) <= 1.0 + 1e-12)) throw DomainError("time_basis", "Legendre argument outside [-1, 1]");
    if (n == 0) return {1.0, 0.0};
    double p_prev = 1.0, p = x;
    double d_prev = 0.0, d = 1.0;
    for (int k = 1; k < n; ++k) {
        const double p_next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
        const double d_next = d_prev + (2.0 * k + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    return {p, d};
}

/// Gauss-Legendre rule mapped to (0, T). Exact for polynomials of degree
/// up to 2 * size() - 1.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    double T = 1.0;

    std::size_t size() const { return nodes.size(); }
    int exactness_degree() const { return 2 * static_cast<int>(nodes.size()) - 1; }
};

inline QuadratureRule gauss_legendre(int n, double T) {
    if (n < 1) throw ConfigError("time_basis", "quadrature needs at least one node");
    if (!(T > 0.0)) throw ConfigError("time_basis", "final time T must be positive");
    QuadratureRule rule;
    rule.T = T;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    // Roots are symmetric; Newton from the Tricomi-type initial guess.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        LegendreValue pv{};
        for (int it = 0; it < 100; ++it) {
            pv = legendre_eval(n, x);
            const double dx = pv.value / pv.derivative;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        pv = legendre_eval(n, x);
        const double w = 2.0 / ((1.0 - x * x) * pv.derivative * pv.derivative);
        // x is in descending order; store ascending on (0, T).
        rule.nodes[i] = 0.5 * T * (1.0 - x);
        rule.nodes[n - 1 - i] = 0.5 * T * (1.0 + x);
        rule.weights[i] = rule.weights[n - 1 - i] = 0.5 * T * w;
    }
    return rule;
}

/// Values of Psi_0..Psi_N and their derivatives at a single time t.
struct BasisSample {
    Eigen::VectorXd psi;
    Eigen::VectorXd dpsi;
};

inline BasisSample evaluate_basis(int N, double T, double t) {
    BasisSample s{Eigen::VectorXd(N + 1), Eigen::VectorXd(N + 1)};
    const double x = std::clamp(2.0 * t / T - 1.0, -1.0, 1.0);
    const double et = std::exp(t);
    // Inline recurrence rather than N calls to legendre_eval.
    double p_prev = 1.0, p = x, d_prev = 0.0, d = 1.0;
    for (int n = 0; n <= N; ++n) {
        double pn, dn;
        if (n == 0) {
            pn = 1.0;
            dn = 0.0;
        } else if (n == 1) {
            pn = p;
            dn = d;
        } else {
            const int k = n - 1;
            const double p_next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
            const double d_next = d_prev + (2.0 * k + 1.0) * p;
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
            pn = p;
            dn = d;
        }
        const double scale = std::sqrt((2.0 * n + 1.0) / T);
        const double q = scale * pn;
        const double dq = scale * (2.0 / T) * dn;
        s.psi[n] = et * q;
        s.dpsi[n] = et * (q + dq);
    }
    return s;
}

/// Basis values tabulated on a quadrature rule. Immutable after
/// construction.
class BasisTable {
public:
    BasisTable(int N, QuadratureRule rule)
        : N_(N), quad_(std::move(rule)) {
        const auto nq = static_cast<Eigen::Index>(quad_.size());
        psi_.resize(N + 1, nq);
        dpsi_.resize(N + 1, nq);
        weighted_.resize(nq);
        for (Eigen::Index q = 0; q < nq; ++q) {
            const double t = quad_.nodes[q];
            const BasisSample s = evaluate_basis(N, quad_.T, t);
            psi_.col(q) = s.psi;
            dpsi_.col(q) = s.dpsi;
            weighted_[q] = quad_.weights[q] * std::exp(-2.0 * t);
        }
    }

    int N() const { return N_; }
    int modes() const { return N_ + 1; }
    double T() const { return quad_.T; }
    const QuadratureRule& quadrature() const { return quad_; }
    Eigen::Index n_nodes() const { return static_cast<Eigen::Index>(quad_.size()); }

    /// (N+1) x n_nodes, Psi_n(t_q).
    const Eigen::MatrixXd& psi() const { return psi_; }
    /// (N+1) x n_nodes, Psi_n'(t_q).
    const Eigen::MatrixXd& dpsi() const { return dpsi_; }
    /// Quadrature weight times e^{-2 t_q}.
    const Eigen::VectorXd& weighted_weights() const { return weighted_; }

    BasisSample at(double t) const {
        if (!(t >= -1e-12 * T() && t <= T() * (1.0 + 1e-12)))
            throw DomainError("time_basis", "time outside [0, T]");
        return evaluate_basis(N_, T(), std::clamp(t, 0.0, T()));
    }

    /// Gram matrix <Psi_m, Psi_n>_w under the stored quadrature.
    Eigen::MatrixXd gram() const {
        return psi_ * weighted_.asDiagonal() * psi_.transpose();
    }

private:
    int N_;
    QuadratureRule quad_;
    Eigen::MatrixXd psi_;
    Eigen::MatrixXd dpsi_;
    Eigen::VectorXd weighted_;
};

inline int default_quadrature_nodes(int N) { return std::max(200, 4 * (N + 1)); }

namespace detail {

// Integrals of e^t P_k(2t/T - 1), k <= kmax: the function class of the
// triple-product integrand.
inline Eigen::VectorXd exp_legendre_moments(const QuadratureRule& rule, int kmax) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(kmax + 1);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double t = rule.nodes[q];
        const double x = std::clamp(2.0 * t / rule.T - 1.0, -1.0, 1.0);
        const double wt = rule.weights[q] * std::exp(t);
        double p_prev = 1.0, p = x;
        out[0] += wt;
        if (kmax >= 1) out[1] += wt * x;
        for (int k = 1; k < kmax; ++k) {
            const double p_next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
            p_prev = p;
            p = p_next;
            out[k + 1] += wt * p;
        }
    }
    return out;
}

} // namespace detail

/// Tabulates the basis on a Gauss-Legendre rule with n_quad nodes
/// (n_quad <= 0 selects max(200, 4(N+1))). The rule is certified before
/// use: the Gram matrix must be the identity to 1e-10, and the integrals of
/// e^t times polynomials of degree <= 3N must agree with a rule of twice
/// the size to 1e-10 (relative to int_0^T e^t dt).
inline BasisTable build_basis_table(int N, double T, int n_quad = 0) {
    if (N < 0) throw ConfigError("time_basis", "mode cutoff N must be >= 0");
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("time_basis", "final time T must be positive");
    if (n_quad <= 0) n_quad = default_quadrature_nodes(N);
    if (n_quad < N + 1)
        throw ConfigError("time_basis", "n_quad = " + std::to_string(n_quad) +
                                            " cannot integrate the Gram matrix exactly for N = " + std::to_string(N));
    BasisTable table(N, gauss_legendre(n_quad, T));

    const Eigen::MatrixXd defect = table.gram() - Eigen::MatrixXd::Identity(N + 1, N + 1);
    if (defect.cwiseAbs().maxCoeff() > 1e-10)
        throw ConfigError("time_basis", "orthonormality defect exceeds 1e-10; increase n_quad");

    const Eigen::VectorXd coarse = detail::exp_legendre_moments(table.quadrature(), 3 * N);
    const Eigen::VectorXd fine = detail::exp_legendre_moments(gauss_legendre(2 * n_quad, T), 3 * N);
    const double scale = std::max(1.0, std::expm1(T));
    if ((coarse - fine).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw ConfigError("time_basis", "quadrature failed the doubling self-convergence check; increase n_quad");
    return table;
}

// --- Spectral operators ----------------------------------------------------

/// Samples of a scalar function of time at the quadrature nodes.
inline Eigen::VectorXd sample_on_nodes(const BasisTable& basis, const std::function<double(double)>& f) {
    Eigen::VectorXd v(basis.n_nodes());
    for (Eigen::Index q = 0; q < v.size(); ++q) v[q] = f(basis.quadrature().nodes[q]);
    return v;
}

/// Fourier coefficients u_n = int_0^T e^{-2t} u(t) Psi_n(t) dt for every
/// column of `samples` (rows are quadrature nodes). Result is (N+1) x cols.
inline Eigen::MatrixXd fourier_coefficients(const Eigen::Ref<const Eigen::MatrixXd>& samples, const BasisTable& basis) {
    if (samples.rows() != basis.n_nodes())
        throw ShapeError("time_basis", "samples have " + std::to_string(samples.rows()) + " rows but the basis has " +
                                           std::to_string(basis.n_nodes()) + " quadrature nodes");
    return basis.psi() * basis.weighted_weights().asDiagonal() * samples;
}

/// Sum_n modes(n, :) Psi_n(t). Returns a column vector with one entry per
/// column of `modes`.
inline Eigen::VectorXd expand(const Eigen::Ref<const Eigen::MatrixXd>& modes, const BasisTable& basis, double t) {
    if (modes.rows() != basis.modes()) throw ShapeError("time_basis", "mode count does not match the basis");
    const BasisSample s = basis.at(t);
    return modes.transpose() * s.psi;
}

/// Projection onto span{Psi_0..Psi_N}, evaluated back at the nodes.
inline Eigen::MatrixXd project(const Eigen::Ref<const Eigen::MatrixXd>& samples, const BasisTable& basis) {
    return basis.psi().transpose() * fourier_coefficients(samples, basis);
}

/// Time derivative of the projection, evaluated at the nodes.
inline Eigen::MatrixXd project_derivative(const Eigen::Ref<const Eigen::MatrixXd>& samples, const BasisTable& basis) {
    return basis.dpsi().transpose() * fourier_coefficients(samples, basis);
}

/// Weighted L^2_{e^{-2t}} norm of node samples (Frobenius over columns).
inline double weighted_norm(const Eigen::Ref<const Eigen::MatrixXd>& samples, const BasisTable& basis) {
    if (samples.rows() != basis.n_nodes()) throw ShapeError("time_basis", "sample/node mismatch");
    return std::sqrt((basis.weighted_weights().asDiagonal() * samples.cwiseAbs2()).sum());
}

// --- Coupling coefficients -------------------------------------------------

/// Dense fully symmetric (N+1)^3 tensor a_mnl.
class CouplingTensor {
public:
    CouplingTensor() = default;
    explicit CouplingTensor(int size) : n_(size), data_(static_cast<std::size_t>(size) * size * size, 0.0) {}

    int size() const { return n_; }
    double operator()(int m, int n, int l) const { return data_[index(m, n, l)]; }
    double& operator()(int m, int n, int l) { return data_[index(m, n, l)]; }
    const std::vector<double>& data() const { return data_; }
    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

private:
    std::size_t index(int m, int n, int l) const {
        return (static_cast<std::size_t>(m) * n_ + n) * n_ + l;
    }
    int n_ = 0;
    std::vector<double> data_;
};

struct CouplingCoefficients {
    Eigen::MatrixXd S;
    CouplingTensor A;
};

/// s_mn = int_0^T e^{-2t} Psi_n'(t) Psi_m(t) dt.
inline Eigen::MatrixXd coupling_s(const BasisTable& basis) {
    return basis.psi() * basis.weighted_weights().asDiagonal() * basis.dpsi().transpose();
}

/// a_mnl = int_0^T e^{-2t} Psi_l Psi_n Psi_m dt. Each unordered index triple
/// is integrated once and copied to all its permutations.
inline CouplingTensor coupling_a(const BasisTable& basis) {
    const int M = basis.modes();
    CouplingTensor A(M);
    const Eigen::MatrixXd& psi = basis.psi();
    const Eigen::VectorXd& w = basis.weighted_weights();
    for (int m = 0; m < M; ++m) {
        for (int n = m; n < M; ++n) {
            const Eigen::VectorXd pmn = (w.array() * psi.row(m).transpose().array() * psi.row(n).transpose().array()).matrix();
            for (int l = n; l < M; ++l) {
                const double v = psi.row(l).dot(pmn);
                A(m, n, l) = A(m, l, n) = A(n, m, l) = A(n, l, m) = A(l, m, n) = A(l, n, m) = v;
            }
        }
    }
    return A;
}

inline CouplingCoefficients compute_couplings(const BasisTable& basis) {
    return {coupling_s(basis), coupling_a(basis)};
}

/// Q_n(0) and Q_n(T) for the rescaled Legendre polynomials.
inline Eigen::VectorXd rescaled_legendre_at_start(int N, double T) {
    Eigen::VectorXd q(N + 1);
    for (int n = 0; n <= N; ++n) q[n] = (n % 2 == 0 ? 1.0 : -1.0) * std::sqrt((2.0 * n + 1.0) / T);
    return q;
}

inline Eigen::VectorXd rescaled_legendre_at_end(int N, double T) {
    Eigen::VectorXd q(N + 1);
    for (int n = 0; n <= N; ++n) q[n] = std::sqrt((2.0 * n + 1.0) / T);
    return q;
}

} // namespace legtr
