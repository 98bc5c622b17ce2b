#pragma once

// Decomposition of the bath correlation function into decaying complex
// exponentials, C(t) = sum_k c_k exp(gamma_k t), from the poles of
// J(w)(1 + n(w)) in the lower half plane. The Bose function is replaced by a
// Pade or Matsubara pole series; poles of J use the exact Bose factor.

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "openbath/bath_models.hpp"

namespace openbath {

enum class PoleSeriesKind { Pade, Matsubara };

inline std::string to_string(PoleSeriesKind k) { return k == PoleSeriesKind::Pade ? "pade" : "matsubara"; }

struct PoleTerm {
    double omega; // pole frequency, cm^-1 (pole of n at w = -i omega)
    double eta;   // residue weight
};

struct PoleSeries {
    PoleSeriesKind kind = PoleSeriesKind::Pade;
    int order = 0;
    double temperature = 0.0;
    std::vector<PoleTerm> poles;

    // Approximant of 1 + n(w, T): kT/w + 1/2 + sum_j 2 eta_j kT w / (w^2 + omega_j^2).
    double one_plus_n(double w) const {
        const double kT = thermal_energy(temperature);
        double s = kT / w + 0.5;
        for (const auto& p : poles) s += 2.0 * p.eta * kT * w / (w * w + p.omega * p.omega);
        return s;
    }
};

namespace detail {

// Positive eigenvalues of the symmetric tridiagonal matrix with zero diagonal
// and off-diagonal 1/sqrt((2m + s)(2m + s + 2)), m = 1..n-1, in descending order.
inline std::vector<double> pade_tridiagonal_roots(int n, int s) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd off(n - 1);
    for (int m = 1; m < n; ++m) off(m - 1) = 1.0 / std::sqrt(double(2 * m + s) * double(2 * m + s + 2));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("pade_pole_series: eigen-solver failed", 0.0, 0.0);
    // odd n carries an exact zero eigenvalue; keep it out of the positive set
    const double floor = 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff();
    std::vector<double> pos;
    for (int i = 0; i < n; ++i)
        if (es.eigenvalues()(i) > floor) pos.push_back(es.eigenvalues()(i));
    std::sort(pos.rbegin(), pos.rend());
    return pos;
}

} // namespace detail

// [N-1/N] Pade spectrum decomposition of the Bose function.
inline PoleSeries pade_pole_series(int N, double temperature) {
    if (N < 1) throw DomainError("pade_pole_series: N must be at least 1");
    const double kT = thermal_energy(temperature);
    const auto lam = detail::pade_tridiagonal_roots(2 * N, 1);
    if (static_cast<int>(lam.size()) != N) throw NumericalError("pade_pole_series: unexpected spectrum", 0.0, 0.0);
    std::vector<double> xi(N), zeta;
    for (int j = 0; j < N; ++j) xi[j] = 2.0 / lam[j];
    if (N > 1) {
        const auto lt = detail::pade_tridiagonal_roots(2 * N - 1, 3);
        for (double v : lt) zeta.push_back(2.0 / v);
        if (static_cast<int>(zeta.size()) != N - 1)
            throw NumericalError("pade_pole_series: unexpected spectrum", 0.0, 0.0);
    }
    PoleSeries ps{PoleSeriesKind::Pade, N, temperature, {}};
    for (int j = 0; j < N; ++j) {
        double eta = 0.5 * N * (2.0 * N + 3.0);
        const double x2 = xi[j] * xi[j];
        for (int k = 0; k < N - 1; ++k) eta *= zeta[k] * zeta[k] - x2;
        for (int k = 0; k < N; ++k)
            if (k != j) eta /= xi[k] * xi[k] - x2;
        if (!(eta > 0.0) || !std::isfinite(eta)) throw NumericalError("pade_pole_series: non-positive weight", eta, 0.0);
        ps.poles.push_back({xi[j] * kT, eta});
    }
    return ps;
}

// Matsubara frequencies 2 pi j kT, unit weights. N = 0 gives the bare
// high-temperature form kT/w + 1/2.
inline PoleSeries matsubara_pole_series(int N, double temperature) {
    if (N < 0) throw DomainError("matsubara_pole_series: N must be non-negative");
    const double kT = thermal_energy(temperature);
    PoleSeries ps{PoleSeriesKind::Matsubara, N, temperature, {}};
    for (int j = 1; j <= N; ++j) ps.poles.push_back({2.0 * std::numbers::pi * j * kT, 1.0});
    return ps;
}

struct Feature {
    cplx c;     // coefficient of C(t), cm^-2
    cplx c_bar; // coefficient of C*(t) on the same exponent, cm^-2
    cplx gamma; // exponent, fs^-1, Re < 0
};

struct FeatureProvenance {
    std::string model;
    double temperature = 0.0;
    PoleSeriesKind kind = PoleSeriesKind::Pade;
    int order = 0;
};

struct FeatureSet {
    std::vector<Feature> features;
    FeatureProvenance provenance;
    // |sum_k c_k - exact_bcf(spec, 0)|, recorded at construction; NaN if unknown.
    double residual_bound = std::numeric_limits<double>::quiet_NaN();

    std::size_t size() const { return features.size(); }
};

inline constexpr double degenerate_pole_tolerance = 1e-6; // cm^-1

namespace detail {

struct JPole {
    cplx z;       // cm^-1, Im z < 0
    cplx residue; // residue of J at z
};

inline std::vector<JPole> spectral_poles(const SpectralModel& model) {
    const double pi = std::numbers::pi;
    if (const auto* m = std::get_if<DrudeLorentz>(&model)) return {{cplx(0.0, -m->gamma), m->lambda * m->gamma / pi}};
    const auto& b = std::get<Brownian>(model);
    const double w1 = b.omega1();
    std::vector<JPole> out;
    for (double s : {1.0, -1.0}) {
        const cplx z(s * w1, -b.gamma);
        const cplx dprime = 4.0 * z * (z * z - b.Omega * b.Omega) + 8.0 * b.gamma * b.gamma * z;
        out.push_back({z, (4.0 * b.lambda / pi) * b.gamma * b.Omega * b.Omega * z / dprime});
    }
    return out;
}

// 1 + n(z) at complex z.
inline cplx complex_one_plus_n(cplx z, double kT) { return 1.0 / (1.0 - std::exp(-z / kT)); }

inline void assign_conjugate_coefficients(std::vector<Feature>& fs) {
    for (auto& f : fs) {
        const Feature* partner = nullptr;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& g : fs) {
            const double d = std::abs(g.gamma - std::conj(f.gamma));
            if (d < best) best = d, partner = &g;
        }
        if (partner == nullptr || best > 1e-12 * std::abs(f.gamma))
            throw NumericalError("decompose: exponent set is not closed under conjugation", best, 0.0);
        f.c_bar = std::conj(partner->c);
    }
}

} // namespace detail

inline cplx reconstruct_bcf(const FeatureSet& fs, double t_fs);

// Generic residue decomposition; decompose_dl and decompose_brownian check
// the model and forward here.
inline FeatureSet decompose(const BathSpec& spec, const PoleSeries& series) {
    validate(spec);
    if (series.temperature != spec.temperature)
        throw DomainError("decompose: pole series temperature differs from the bath temperature");
    const double kT = thermal_energy(spec.temperature);
    const double a = to_angular(1.0);
    const cplx minus_2pi_i(0.0, -2.0 * std::numbers::pi);
    const auto jp = detail::spectral_poles(spec.model);
    for (const auto& p : jp)
        for (const auto& q : series.poles)
            if (std::abs(p.z - cplx(0.0, -q.omega)) < degenerate_pole_tolerance)
                throw DomainError("decompose: spectral-density pole coincides with a Bose pole at " +
                                  std::to_string(q.omega) + " cm^-1; perturb the parameters");
    FeatureSet out;
    out.provenance = {model_name(spec.model), spec.temperature, series.kind, series.order};
    for (const auto& p : jp)
        out.features.push_back({minus_2pi_i * p.residue * detail::complex_one_plus_n(p.z, kT), {}, cplx(0.0, -a) * p.z});
    for (const auto& q : series.poles) {
        const cplx z(0.0, -q.omega);
        out.features.push_back({minus_2pi_i * q.eta * kT * spectral_density<cplx>(spec.model, z), {}, cplx(-a * q.omega, 0.0)});
    }
    // Bose-pole coefficients are real by symmetry; drop round-off.
    for (std::size_t k = jp.size(); k < out.features.size(); ++k) out.features[k].c.imag(0.0);
    detail::assign_conjugate_coefficients(out.features);
    for (const auto& f : out.features)
        if (!(f.gamma.real() < 0.0) || !std::isfinite(std::abs(f.c)) || !std::isfinite(std::abs(f.gamma)))
            throw NumericalError("decompose: invalid feature", std::abs(f.c), 0.0);
    out.residual_bound = std::abs(reconstruct_bcf(out, 0.0) - exact_bcf(spec, 0.0));
    return out;
}

inline FeatureSet decompose_dl(const BathSpec& spec, const PoleSeries& series) {
    if (!std::holds_alternative<DrudeLorentz>(spec.model)) throw DomainError("decompose_dl: bath is not Drude-Lorentz");
    return decompose(spec, series);
}

inline FeatureSet decompose_brownian(const BathSpec& spec, const PoleSeries& series) {
    if (!std::holds_alternative<Brownian>(spec.model)) throw DomainError("decompose_brownian: bath is not Brownian");
    return decompose(spec, series);
}

// sum_k c_k exp(gamma_k t)
inline cplx reconstruct_bcf(const FeatureSet& fs, double t_fs) {
    if (t_fs < 0.0) throw DomainError("reconstruct_bcf: t must be non-negative");
    cplx s = 0.0;
    for (const auto& f : fs.features) s += f.c * std::exp(f.gamma * t_fs);
    return s;
}

// sum_k c_bar_k exp(gamma_k t), the expansion of C*(t)
inline cplx reconstruct_bcf_conj(const FeatureSet& fs, double t_fs) {
    if (t_fs < 0.0) throw DomainError("reconstruct_bcf_conj: t must be non-negative");
    cplx s = 0.0;
    for (const auto& f : fs.features) s += f.c_bar * std::exp(f.gamma * t_fs);
    return s;
}

// Plain-text table: '#' header lines, then one feature per row with
// Re c, Im c, Re c_bar, Im c_bar, Re gamma, Im gamma.
inline void write_feature_table(std::ostream& os, const FeatureSet& fs) {
    os << "# openbath feature set\n";
    os << "# model " << fs.provenance.model << "\n";
    os << "# temperature_K " << std::setprecision(17) << fs.provenance.temperature << "\n";
    os << "# series " << to_string(fs.provenance.kind) << " " << fs.provenance.order << "\n";
    os << "# residual_bound " << fs.residual_bound << "\n";
    os << "# re_c im_c re_cbar im_cbar re_gamma_per_fs im_gamma_per_fs\n";
    os << std::scientific << std::setprecision(16);
    for (const auto& f : fs.features)
        os << f.c.real() << ' ' << f.c.imag() << ' ' << f.c_bar.real() << ' ' << f.c_bar.imag() << ' '
           << f.gamma.real() << ' ' << f.gamma.imag() << '\n';
    os << std::defaultfloat;
}

inline FeatureSet read_feature_table(std::istream& is) {
    FeatureSet fs;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key;
            ls >> hash >> key;
            if (key == "model") ls >> fs.provenance.model;
            else if (key == "temperature_K") ls >> fs.provenance.temperature;
            else if (key == "residual_bound") {
                std::string v;
                ls >> v;
                fs.residual_bound = std::strtod(v.c_str(), nullptr);
            } else if (key == "series") {
                std::string kind;
                ls >> kind >> fs.provenance.order;
                fs.provenance.kind = kind == "matsubara" ? PoleSeriesKind::Matsubara : PoleSeriesKind::Pade;
            }
            continue;
        }
        double v[6];
        for (double& x : v)
            if (!(ls >> x)) throw DomainError("feature table line " + std::to_string(lineno) + ": expected 6 numbers");
        Feature f{{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}};
        if (!(f.gamma.real() < 0.0))
            throw DomainError("feature table line " + std::to_string(lineno) + ": Re gamma must be negative");
        fs.features.push_back(f);
    }
    return fs;
}

} // namespace openbath
