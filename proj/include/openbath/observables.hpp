#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "openbath/model_systems.hpp"

namespace openbath {

struct Observables {
    std::vector<double> populations;
    std::vector<double> coherences; // |rho_ij|, i < j, row-major
    double purity = 0.0;
    double trace = 0.0;
    double min_eigenvalue = 0.0;
};

// rho expressed in the basis whose vectors are the columns of U.
inline Matrix to_basis(const Matrix& rho, const Matrix& U) { return U.adjoint() * rho * U; }

inline double purity(const Matrix& rho) { return (rho * rho).trace().real(); }

inline double hermiticity_error(const Matrix& rho) { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

inline double min_eigenvalue(const Matrix& rho) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline Observables observables(const Matrix& rho) {
    Observables o;
    const auto d = rho.rows();
    for (Eigen::Index i = 0; i < d; ++i) o.populations.push_back(rho(i, i).real());
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) o.coherences.push_back(std::abs(rho(i, j)));
    o.purity = purity(rho);
    o.trace = rho.trace().real();
    o.min_eigenvalue = min_eigenvalue(rho);
    return o;
}

inline Observables observables(const Matrix& rho, const Matrix& basis) { return observables(to_basis(rho, basis)); }

} // namespace openbath
