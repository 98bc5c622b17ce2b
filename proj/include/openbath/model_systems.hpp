#pragma once

// Benchmark systems: the two-level system with Q = sigma_z / 2, the
// seven-site FMO Hamiltonian with one Drude-Lorentz bath per site, and
// thermal states.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "openbath/bath_models.hpp"

namespace openbath {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

struct SystemCoupling {
    Matrix Q;
    BathSpec bath;
};

struct SystemModel {
    Matrix H; // cm^-1
    std::vector<SystemCoupling> couplings;
    std::vector<std::string> labels;

    Eigen::Index dim() const { return H.rows(); }
};

inline bool is_hermitian(const Matrix& m, double tol = 1e-12) {
    return m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

inline void validate(const SystemModel& s) {
    if (s.H.rows() == 0 || !is_hermitian(s.H)) throw DomainError("system: H_S must be a non-empty Hermitian matrix");
    for (const auto& c : s.couplings) {
        if (c.Q.rows() != s.H.rows() || !is_hermitian(c.Q))
            throw DomainError("system: every coupling operator must be Hermitian with the dimension of H_S");
    }
}

// H_S = (E/2) sigma_z + V sigma_x, Q_S = sigma_z / 2, basis {|0>, |1>}.
inline SystemModel two_level(double E, double V, const BathSpec& bath = {}) {
    SystemModel s;
    s.H = Matrix::Zero(2, 2);
    s.H << 0.5 * E, V, V, -0.5 * E;
    Matrix q = Matrix::Zero(2, 2);
    q(0, 0) = 0.5;
    q(1, 1) = -0.5;
    s.couplings.push_back({q, bath});
    s.labels = {"0", "1"};
    return s;
}

// Columns |g>, |e> (ascending energy) for E = 0: |g> = (|0> - |1>)/sqrt2,
// |e> = (|0> + |1>)/sqrt2 when V > 0.
inline Matrix two_level_eigenbasis(double E, double V) {
    if (E == 0.0 && V > 0.0) {
        const double r = 1.0 / std::sqrt(2.0);
        Matrix u(2, 2);
        u << r, r, -r, r;
        return u;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(two_level(E, V).H);
    return es.eigenvectors();
}

inline double fmo_reorganization_energy() { return 35.0; }
inline double fmo_temperature() { return 77.0; }

// Drude-Lorentz bath with relaxation time tau = 1/gamma_D (fs).
inline BathSpec drude_lorentz_from_tau(double lambda, double tau_fs, double temperature) {
    return {DrudeLorentz{lambda, from_angular(1.0 / tau_fs)}, temperature};
}

inline SystemModel fmo(const BathSpec& site_bath = drude_lorentz_from_tau(35.0, 50.0, 77.0)) {
    static const double h[7][7] = {
        {200, -87.7, 5.5, -5.9, 6.7, -13.7, -9.9},   {-87.7, 320, 30.8, 8.2, 0.7, 11.8, 4.3},
        {5.5, 30.8, 0, -53.5, -2.2, -9.6, 6},        {-5.9, 8.2, -53.5, 110, -70.7, -17, -63.3},
        {6.7, 0.7, -2.2, -70.7, 270, 71.1, -1.3},    {-13.7, 11.8, -9.6, -17, 71.1, 420, 39.7},
        {-9.9, 4.3, 6, -63.3, -1.3, 39.7, 230}};
    SystemModel s;
    s.H = Matrix::Zero(7, 7);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) s.H(i, j) = h[i][j];
    for (int i = 0; i < 7; ++i) {
        Matrix q = Matrix::Zero(7, 7);
        q(i, i) = 1.0;
        s.couplings.push_back({q, site_bath});
        s.labels.push_back(std::to_string(i + 1));
    }
    return s;
}

// exp(-H / kT) / Tr exp(-H / kT)
inline Matrix thermal_state(const Matrix& H, double temperature) {
    const double kT = thermal_energy(temperature);
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const Eigen::VectorXd e = es.eigenvalues();
    const double e0 = e.minCoeff();
    Eigen::VectorXd w = (-(e.array() - e0) / kT).exp();
    w /= w.sum();
    Matrix rho = es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    return 0.5 * (rho + rho.adjoint());
}

// Eigenvectors of H as columns, ascending energy.
inline Matrix eigenbasis(const Matrix& H) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    return es.eigenvectors();
}

} // namespace openbath
