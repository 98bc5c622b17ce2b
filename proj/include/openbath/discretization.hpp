#pragma once

// Explicit discretization of the effective spectrum C(w) = J(w)(1 + n(w))
// into signed-frequency harmonic modes, plus observables of the discrete bath.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "openbath/bath_models.hpp"

namespace openbath {

enum class DiscretizationStrategy { Log, Equalized, BSDO };

inline std::string to_string(DiscretizationStrategy s) {
    switch (s) {
    case DiscretizationStrategy::Log: return "log";
    case DiscretizationStrategy::Equalized: return "equalized";
    default: return "bsdo";
    }
}

inline DiscretizationStrategy parse_strategy(const std::string& s) {
    if (s == "log" || s == "logarithmic") return DiscretizationStrategy::Log;
    if (s == "equalized") return DiscretizationStrategy::Equalized;
    if (s == "bsdo") return DiscretizationStrategy::BSDO;
    throw DomainError("unknown discretization strategy '" + s + "' (expected log, equalized or bsdo)");
}

struct Mode {
    double omega; // cm^-1, may be negative
    double g;     // coupling, cm^-1
};

struct DiscreteBath {
    std::vector<Mode> modes; // ascending in omega
    DiscretizationStrategy strategy = DiscretizationStrategy::Log;
    double cutoff = 0.0; // cm^-1
    BathSpec spec;
    int requested = 0;
    // Equalized only: bin boundaries (equal measure per bin), ascending.
    std::vector<double> bin_edges;

    std::size_t size() const { return modes.size(); }

    double total_weight() const {
        double s = 0.0;
        for (const auto& m : modes) s += m.g * m.g;
        return s;
    }
};

inline void validate(const DiscreteBath& b) {
    for (std::size_t j = 0; j < b.modes.size(); ++j) {
        const auto& m = b.modes[j];
        if (!std::isfinite(m.omega) || !std::isfinite(m.g) || m.g < 0.0)
            throw DomainError("discrete bath: mode " + std::to_string(j) + " has an invalid frequency or coupling");
        if (b.cutoff > 0.0 && !(std::abs(m.omega) < b.cutoff))
            throw DomainError("discrete bath: mode " + std::to_string(j) + " lies outside the cutoff");
        if (j > 0 && !(m.omega > b.modes[j - 1].omega))
            throw DomainError("discrete bath: frequencies must be strictly ascending");
    }
}

// int_lo^hi C(w) dw
inline double spectrum_weight(const BathSpec& spec, double lo, double hi, quad::Tolerance tol = {1e-12, 1e-11}) {
    auto f = [&](double w) { return effective_spectrum(spec, w); };
    const double s = model_scale(spec.model);
    std::vector<double> edges{lo};
    const double step = 0.25 * s;
    for (double e = lo + step; e < hi; e += step) edges.push_back(e);
    edges.push_back(hi);
    return quad::integrate_panels(f, edges, tol).value;
}

inline DiscreteBath discretize_logarithmic(const BathSpec& spec, int K, double omega_min, double omega_c) {
    validate(spec);
    if (K < 1) throw DomainError("discretize_logarithmic: K must be at least 1");
    if (!(omega_min > 0.0) || !(omega_min < omega_c)) throw DomainError("discretize_logarithmic: need 0 < omega_min < omega_c");
    const double delta = (std::log(omega_c) - std::log(omega_min)) / K;
    std::vector<double> w(K + 2);
    w[0] = 0.0;
    for (int k = 1; k <= K; ++k) w[k] = omega_min * std::exp((k - 1) * delta);
    w[K + 1] = omega_c;
    DiscreteBath b{{}, DiscretizationStrategy::Log, omega_c, spec, 2 * K, {}};
    std::vector<Mode> pos;
    for (int k = 1; k <= K; ++k) {
        const double dk = 0.5 * std::abs(w[k + 1] - w[k - 1]);
        b.modes.push_back({-w[k], std::sqrt(effective_spectrum(spec, -w[k]) * dk)});
        pos.push_back({w[k], std::sqrt(effective_spectrum(spec, w[k]) * dk)});
    }
    std::reverse(b.modes.begin(), b.modes.end());
    b.modes.insert(b.modes.end(), pos.begin(), pos.end());
    return b;
}

namespace detail {

// Cumulative integral of a positive integrand on [0, hi] from a fixed
// composite Gauss-Legendre table, with exact evaluation inside a panel.
class Cumulative {
public:
    template <class F>
    Cumulative(F f, double hi, std::size_t panels) : f_(f), hi_(hi), h_(hi / static_cast<double>(panels)) {
        cum_.resize(panels + 1, 0.0);
        for (std::size_t p = 0; p < panels; ++p) cum_[p + 1] = cum_[p] + panel(h_ * p, h_ * (p + 1));
    }

    double total() const { return cum_.back(); }

    double at(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= hi_) return total();
        const auto p = std::min(cum_.size() - 2, static_cast<std::size_t>(x / h_));
        return cum_[p] + panel(h_ * p, x);
    }

    // x with at(x) = target
    double invert(double target) const {
        const auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
        const auto p = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cum_.begin() - 1, 0, cum_.size() - 2));
        double lo = h_ * p, hi = std::min(hi_, h_ * (p + 1));
        auto g = [&](double x) { return at(x) - target; };
        double glo = g(lo), ghi = g(hi);
        if (glo == 0.0) return lo;
        if (ghi == 0.0) return hi;
        if (glo * ghi > 0.0) throw NumericalError("equalized discretization: root not bracketed", target, 0.0);
        std::uintmax_t iters = 200;
        auto r = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, boost::math::tools::eps_tolerance<double>(50), iters);
        return 0.5 * (r.first + r.second);
    }

private:
    double panel(double a, double b) const {
        return boost::math::quadrature::gauss<double, 20>::integrate(f_, a, b);
    }

    std::function<double(double)> f_;
    double hi_, h_;
    std::vector<double> cum_;
};

} // namespace detail

// Nodes at cumulative fraction (k - 1/2)/K of the weight on each side; bin
// edges at k/K. Every positive mode carries A/K, every negative mode A'/K.
inline DiscreteBath discretize_equalized(const BathSpec& spec, int K, double omega_c) {
    validate(spec);
    if (K < 1) throw DomainError("discretize_equalized: K must be at least 1");
    if (!(omega_c > 0.0)) throw DomainError("discretize_equalized: omega_c must be positive");
    const auto panels = static_cast<std::size_t>(std::max(200.0, std::ceil(8.0 * omega_c / model_scale(spec.model))) * 8);
    detail::Cumulative pos([&](double w) { return effective_spectrum(spec, w); }, omega_c, panels);
    detail::Cumulative neg([&](double w) { return effective_spectrum(spec, -w); }, omega_c, panels);
    DiscreteBath b{{}, DiscretizationStrategy::Equalized, omega_c, spec, 2 * K, {}};
    const double A = pos.total(), An = neg.total();
    std::vector<Mode> pm, nm;
    std::vector<double> pe{0.0}, ne;
    for (int k = 1; k <= K; ++k) {
        const double frac = (k - 0.5) / K;
        pm.push_back({pos.invert(frac * A), std::sqrt(A / K)});
        nm.push_back({-neg.invert(frac * An), std::sqrt(An / K)});
        const double ef = static_cast<double>(k) / K;
        pe.push_back(k == K ? omega_c : pos.invert(ef * A));
        ne.push_back(k == K ? -omega_c : -neg.invert(ef * An));
    }
    std::reverse(nm.begin(), nm.end());
    std::reverse(ne.begin(), ne.end());
    b.modes = nm;
    b.modes.insert(b.modes.end(), pm.begin(), pm.end());
    b.bin_edges = ne;
    b.bin_edges.insert(b.bin_edges.end(), pe.begin(), pe.end());
    return b;
}

inline constexpr std::size_t bsdo_grid_panels = 1000; // x 20 Gauss-Legendre nodes

// Gauss quadrature of the measure C(w) dw on (-omega_c, omega_c) via Lanczos
// on the discretized measure, followed by diagonalization of the Jacobi matrix.
inline DiscreteBath discretize_bsdo(const BathSpec& spec, int J, double omega_c, std::size_t panels = bsdo_grid_panels) {
    validate(spec);
    if (J < 1) throw DomainError("discretize_bsdo: mode count must be at least 1");
    if (!(omega_c > 0.0)) throw DomainError("discretize_bsdo: omega_c must be positive");
    const auto nodes = quad::composite_gauss_legendre(-omega_c, omega_c, panels);
    const auto n = static_cast<Eigen::Index>(nodes.size());
    if (J > n) throw DomainError("discretize_bsdo: more modes than grid points");
    Eigen::VectorXd x(n), q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = nodes[i].x;
        q(i) = std::sqrt(effective_spectrum(spec, nodes[i].x) * nodes[i].w);
    }
    const double mu = q.squaredNorm();
    q /= std::sqrt(mu);
    Eigen::MatrixXd Qm(n, J);
    Eigen::VectorXd alpha(J), beta(std::max(J - 1, 1));
    Qm.col(0) = q;
    for (int k = 0; k < J; ++k) {
        Eigen::VectorXd v = x.cwiseProduct(Qm.col(k));
        alpha(k) = Qm.col(k).dot(v);
        if (k + 1 == J) break;
        // full reorthogonalization (twice is enough)
        for (int pass = 0; pass < 2; ++pass) v -= Qm.leftCols(k + 1) * (Qm.leftCols(k + 1).transpose() * v);
        const double bk = v.norm();
        if (!(bk > 1e-12 * omega_c))
            throw NumericalError("discretize_bsdo: recurrence broke down; refine the quadrature grid", bk, 0.0);
        beta(k) = bk;
        Qm.col(k + 1) = v / bk;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    if (J == 1) {
        DiscreteBath b{{{alpha(0), std::sqrt(mu)}}, DiscretizationStrategy::BSDO, omega_c, spec, J, {}};
        return b;
    }
    es.computeFromTridiagonal(alpha, beta.head(J - 1), Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericalError("discretize_bsdo: eigen-solver failed", 0.0, 0.0);
    DiscreteBath b{{}, DiscretizationStrategy::BSDO, omega_c, spec, J, {}};
    for (int j = 0; j < J; ++j)
        b.modes.push_back({es.eigenvalues()(j), std::sqrt(mu) * std::abs(es.eigenvectors()(0, j))});
    validate(b);
    return b;
}

// sum_j g_j^2 exp(-i w_j t)
inline cplx discrete_bcf(const DiscreteBath& bath, double t_fs) {
    const double tw = to_angular(1.0) * t_fs;
    cplx s = 0.0;
    for (const auto& m : bath.modes) s += m.g * m.g * std::exp(cplx(0.0, -m.omega * tw));
    return s;
}

// Standard deviation, in cm^-1, of the Gaussian a window of width sigma (fs) imposes.
inline double window_width_wavenumber(double sigma_fs) { return 1.0 / to_angular(sigma_fs); }

// (1/2pi) int exp(-t^2 / 2 sigma^2) C_bar(t) exp(i w t) dt, evaluated in closed form.
inline double windowed_spectrum(const DiscreteBath& bath, double sigma_fs, double omega) {
    if (!(sigma_fs > 0.0)) throw DomainError("windowed_spectrum: sigma must be positive");
    const double s = to_angular(sigma_fs); // cm
    const double norm = s / std::sqrt(2.0 * std::numbers::pi);
    double v = 0.0;
    for (const auto& m : bath.modes) {
        const double d = s * (omega - m.omega);
        v += m.g * m.g * norm * std::exp(-0.5 * d * d);
    }
    return v;
}

// Independent-boson coherence exp(-sum_j g_j^2 (1 - cos w_j t) / w_j^2), modes in vacuum.
inline double dephasing_coherence_discrete(const DiscreteBath& bath, double t_fs) {
    const double tw = to_angular(1.0) * t_fs;
    double phi = 0.0;
    for (const auto& m : bath.modes) {
        if (m.omega == 0.0) throw DomainError("dephasing_coherence_discrete: zero-frequency mode");
        const double s = std::sin(0.5 * m.omega * tw);
        phi += m.g * m.g * 2.0 * s * s / (m.omega * m.omega);
    }
    return std::exp(-phi);
}

namespace detail {

inline std::string model_parameters(const SpectralModel& m) {
    std::ostringstream os;
    os << std::setprecision(17);
    if (const auto* d = std::get_if<DrudeLorentz>(&m))
        os << "drude_lorentz " << d->lambda << ' ' << d->gamma;
    else {
        const auto& b = std::get<Brownian>(m);
        os << "brownian " << b.lambda << ' ' << b.gamma << ' ' << b.Omega;
    }
    return os.str();
}

} // namespace detail

// Plain-text table: '#' header (strategy, cutoff, temperature, model), then
// one "omega g" row per mode.
inline void write_discrete_bath(std::ostream& os, const DiscreteBath& b) {
    os << "# openbath discrete bath\n";
    os << "# strategy " << to_string(b.strategy) << "\n";
    os << std::setprecision(17);
    os << "# cutoff_cm " << b.cutoff << "\n";
    os << "# temperature_K " << b.spec.temperature << "\n";
    os << "# model " << detail::model_parameters(b.spec.model) << "\n";
    os << "# requested " << b.requested << "\n";
    os << "# omega_cm g_cm\n";
    os << std::scientific << std::setprecision(16);
    for (const auto& m : b.modes) os << m.omega << ' ' << m.g << '\n';
    os << std::defaultfloat;
}

inline DiscreteBath read_discrete_bath(std::istream& is) {
    DiscreteBath b;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key;
            ls >> hash >> key;
            if (key == "strategy") {
                std::string s;
                ls >> s;
                b.strategy = parse_strategy(s);
            } else if (key == "cutoff_cm") ls >> b.cutoff;
            else if (key == "temperature_K") ls >> b.spec.temperature;
            else if (key == "requested") ls >> b.requested;
            else if (key == "model") {
                std::string name;
                ls >> name;
                if (name == "drude_lorentz") {
                    DrudeLorentz d;
                    ls >> d.lambda >> d.gamma;
                    b.spec.model = d;
                } else if (name == "brownian") {
                    Brownian br;
                    ls >> br.lambda >> br.gamma >> br.Omega;
                    b.spec.model = br;
                }
            }
            continue;
        }
        Mode m;
        if (!(ls >> m.omega >> m.g)) throw DomainError("discrete bath table line " + std::to_string(lineno) + ": expected 'omega g'");
        b.modes.push_back(m);
    }
    validate(b);
    return b;
}

} // namespace openbath
