#pragma once

// Spectral densities, thermal occupation, the effective (thermally weighted)
// spectrum C(w) = J(w)(1 + n(w, T)), the exact bath correlation function by
// quadrature, and the closed-form pure-dephasing coherence.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "openbath/errors.hpp"
#include "openbath/quadrature.hpp"
#include "openbath/units.hpp"

namespace openbath {

using cplx = std::complex<double>;

// J(w) = (2 lambda / pi) gamma w / (w^2 + gamma^2)
struct DrudeLorentz {
    double lambda = 0.0; // reorganization energy, cm^-1
    double gamma = 0.0;  // characteristic frequency, cm^-1
};

// J(w) = (4 lambda / pi) gamma Omega^2 w / ((w^2 - Omega^2)^2 + 4 gamma^2 w^2)
struct Brownian {
    double lambda = 0.0; // reorganization energy, cm^-1
    double gamma = 0.0;  // damping, cm^-1
    double Omega = 0.0;  // bare frequency, cm^-1

    // Effective oscillation frequency sqrt(Omega^2 - gamma^2).
    double omega1() const { return std::sqrt(Omega * Omega - gamma * gamma); }

    static Brownian from_effective_frequency(double lambda, double gamma, double omega1) {
        return Brownian{lambda, gamma, std::sqrt(omega1 * omega1 + gamma * gamma)};
    }
};

using SpectralModel = std::variant<DrudeLorentz, Brownian>;

inline void validate(const SpectralModel& model) {
    std::visit(
        [](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if (!(m.lambda > 0.0) || !(m.gamma > 0.0) || !std::isfinite(m.lambda) || !std::isfinite(m.gamma))
                throw DomainError("spectral model: lambda and gamma must be positive and finite");
            if constexpr (std::is_same_v<M, Brownian>) {
                if (!(m.Omega > m.gamma) || !std::isfinite(m.Omega))
                    throw DomainError("Brownian model: Omega must exceed gamma so that omega1 is real");
            }
        },
        model);
}

inline std::string model_name(const SpectralModel& model) {
    return std::holds_alternative<DrudeLorentz>(model) ? "drude_lorentz" : "brownian";
}

// Largest intrinsic frequency of the model; sets integration scales.
inline double model_scale(const SpectralModel& model) {
    return std::visit(
        [](const auto& m) {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Brownian>)
                return std::max(m.gamma, m.Omega);
            else
                return m.gamma;
        },
        model);
}

struct BathSpec {
    SpectralModel model;
    double temperature = 0.0; // K
};

inline void validate(const BathSpec& spec) {
    validate(spec.model);
    if (!(spec.temperature > 0.0) || !std::isfinite(spec.temperature))
        throw DomainError("bath: temperature must be positive");
}

// J(z)/z, usable at complex arguments for residue evaluation. Even in z.
template <class T>
T spectral_density_over_omega(const SpectralModel& model, T z) {
    return std::visit(
        [&](const auto& m) -> T {
            using M = std::decay_t<decltype(m)>;
            const double pi = std::numbers::pi;
            if constexpr (std::is_same_v<M, DrudeLorentz>) {
                return (2.0 * m.lambda / pi) * m.gamma / (z * z + m.gamma * m.gamma);
            } else {
                const T d = z * z - m.Omega * m.Omega;
                return (4.0 * m.lambda / pi) * m.gamma * m.Omega * m.Omega / (d * d + 4.0 * m.gamma * m.gamma * z * z);
            }
        },
        model);
}

template <class T>
T spectral_density(const SpectralModel& model, T z) {
    return z * spectral_density_over_omega(model, z);
}

inline double spectral_density(const SpectralModel& model, double w) {
    return spectral_density<double>(model, w);
}

// 1 / (exp(w / kT) - 1)
inline double bose_occupation(double w, double temperature_K) {
    const double kT = thermal_energy(temperature_K);
    if (w == 0.0) throw DomainError("bose_occupation: undefined at zero frequency");
    return 1.0 / std::expm1(w / kT);
}

// C(w) = J(w)(1 + n(w, T)), continuous through w = 0 where it equals kT * J'(0).
// Written as (J(w)/w) * kT * x / (1 - exp(-x)), x = w / kT, which is positive
// and free of cancellation for every real w.
inline double effective_spectrum(const BathSpec& spec, double w) {
    const double kT = thermal_energy(spec.temperature);
    const double x = w / kT;
    const double boson = (x == 0.0) ? 1.0 : x / -std::expm1(-x);
    return spectral_density_over_omega(spec.model, w) * kT * boson;
}

// J(w) coth(w / 2kT) for w >= 0, continuous at 0 (= 2 kT J'(0)).
inline double symmetrized_spectrum(const BathSpec& spec, double w) {
    const double kT = thermal_energy(spec.temperature);
    const double y = 0.5 * w / kT;
    const double ycoth = (y == 0.0) ? 1.0 : y / std::tanh(y);
    return spectral_density_over_omega(spec.model, w) * 2.0 * kT * ycoth;
}

// Relative floor below which C(w) is treated as zero when the equal-time
// correlation int C(w) dw is evaluated.
inline constexpr double bcf_relative_floor = 1e-12;

struct BcfCutoffs {
    double lower; // negative frequency, cm^-1
    double upper; // positive frequency, cm^-1
};

// Frequencies beyond which C(w) < bcf_relative_floor * max C.
inline BcfCutoffs exact_bcf_cutoffs(const BathSpec& spec) {
    validate(spec);
    const double s = std::max(model_scale(spec.model), thermal_energy(spec.temperature));
    double cmax = 0.0;
    for (int i = -4000; i <= 4000; ++i) cmax = std::max(cmax, effective_spectrum(spec, 20.0 * s * i / 4000.0));
    const double floor = bcf_relative_floor * cmax;
    BcfCutoffs c{-s, s};
    while (effective_spectrum(spec, c.upper) >= floor) c.upper *= 2.0;
    while (effective_spectrum(spec, c.lower) >= floor) c.lower *= 2.0;
    return c;
}

namespace detail {

inline std::vector<double> positive_edges(double scale, double cutoff) {
    std::vector<double> e{0.0};
    if (cutoff <= scale) {
        e.push_back(cutoff);
        return e;
    }
    auto tail = quad::log_edges(scale, cutoff);
    e.insert(e.end(), tail.begin(), tail.end());
    return e;
}

} // namespace detail

// C(0) = int C(w) dw over the band where C exceeds the relative floor.
// For the Drude-Lorentz model this integral grows logarithmically with the
// cutoff (J ~ 1/w), so the value is only meaningful together with the floor.
inline double exact_bcf_at_zero(const BathSpec& spec, quad::Tolerance tol = {}) {
    const auto cut = exact_bcf_cutoffs(spec);
    const double s = model_scale(spec.model);
    auto f = [&](double w) { return effective_spectrum(spec, w); };
    auto g = [&](double w) { return effective_spectrum(spec, -w); };
    const double pos = quad::integrate_panels(f, detail::positive_edges(s, cut.upper), tol).value;
    const double neg = quad::integrate_panels(g, detail::positive_edges(s, -cut.lower), tol).value;
    return pos + neg;
}

// C(t) = int C(w) exp(-i w t) dw, t in fs, result in cm^-2.
// For t != 0 the Fourier integrals over the half line are done without a
// cutoff; C(-t) = conj(C(t)).
inline cplx exact_bcf(const BathSpec& spec, double t_fs, quad::Tolerance tol = {}) {
    validate(spec);
    if (t_fs == 0.0) return {exact_bcf_at_zero(spec, tol), 0.0};
    if (t_fs < 0.0) return std::conj(exact_bcf(spec, -t_fs, tol));
    // Conversion: w t with w in cm^-1 and t in fs needs the 2 pi c factor.
    const double tw = to_angular(1.0) * t_fs;
    auto re_f = [&](double w) { return symmetrized_spectrum(spec, w); };
    auto im_f = [&](double w) { return spectral_density(spec.model, w); };
    const double re = quad::fourier_cos(re_f, tw, std::max(tol.rel, 1e-9)).value;
    const double im = -quad::fourier_sin(im_f, tw, std::max(tol.rel, 1e-9)).value;
    return {re, im};
}

// Exponent Phi(t) = int_0^inf J(w) coth(w/2kT) (1 - cos w t) / w^2 dw.
inline double dephasing_exponent(const BathSpec& spec, double t_fs, quad::Tolerance tol = {}) {
    validate(spec);
    if (t_fs < 0.0) throw DomainError("dephasing_coherence_exact: t must be non-negative");
    if (t_fs == 0.0) return 0.0;
    const double tw = to_angular(1.0) * t_fs;
    auto h = [&](double w) { return symmetrized_spectrum(spec, w) / (w * w); };
    // 1 - cos(x) = 2 sin^2(x/2) avoids cancellation at small w.
    auto body = [&](double w) {
        if (w == 0.0) return symmetrized_spectrum(spec, 0.0) * 0.5 * tw * tw;
        const double s = std::sin(0.5 * w * tw);
        return symmetrized_spectrum(spec, w) * 2.0 * s * s / (w * w);
    };
    const double scale = model_scale(spec.model);
    const double W = 100.0 * std::max(scale, thermal_energy(spec.temperature));
    const double period = 2.0 * std::numbers::pi / tw;
    const double width = std::min(scale, period);
    const auto panels = static_cast<std::size_t>(std::ceil(W / width));
    std::vector<double> edges(panels + 1);
    for (std::size_t i = 0; i <= panels; ++i) edges[i] = W * static_cast<double>(i) / static_cast<double>(panels);
    double phi = quad::integrate_panels(body, edges, tol).value;
    // tail: int_W^inf h - int_W^inf h cos(w t)
    phi += quad::integrate(h, W, std::numeric_limits<double>::infinity(), tol).value;
    auto hs = [&](double u) { return h(W + u); };
    const double fc = quad::fourier_cos(hs, tw, 1e-8).value;
    const double fsn = quad::fourier_sin(hs, tw, 1e-8).value;
    phi -= std::cos(W * tw) * fc - std::sin(W * tw) * fsn;
    return phi;
}

// Normalized pure-dephasing coherence |rho_01(t)| / |rho_01(0)| for Q = sigma_z / 2.
inline double dephasing_coherence_exact(const BathSpec& spec, double t_fs, quad::Tolerance tol = {}) {
    return std::exp(-dephasing_exponent(spec, t_fs, tol));
}

} // namespace openbath
