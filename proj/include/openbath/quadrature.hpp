#pragma once

// Thin adapters over Boost.Math quadrature. Every routine reports failure to
// meet the tolerance pair as a NumericalError carrying the estimate and bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include "openbath/errors.hpp"

namespace openbath::quad {

struct Tolerance {
    double abs = 1e-10;
    double rel = 1e-8;
};

struct Result {
    double value = 0.0;
    double error = 0.0;
};

namespace detail {

inline void check(const Result& r, const Tolerance& tol, const char* who) {
    if (!std::isfinite(r.value) || r.error > std::max(tol.abs, tol.rel * std::abs(r.value)))
        throw NumericalError(std::string(who) + ": quadrature did not converge (estimate " +
                                 std::to_string(r.value) + ", error bound " + std::to_string(r.error) + ")",
                             r.value, r.error);
}

} // namespace detail

// Adaptive Gauss-Kronrod (61 points) on [a, b]; a and b may be infinite.
template <class F>
Result integrate(F&& f, double a, double b, Tolerance tol = {}, unsigned max_depth = 30) {
    Result r;
    if (a == b) return r;
    // Boost's adaptive rule bisects until |err| <= rel * L1; request a little
    // more than the caller so the absolute floor is honoured as well.
    const double rel = std::min(tol.rel, 1e-3) * 0.1;
    r.value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, max_depth, rel, &r.error);
    detail::check(r, tol, "integrate");
    return r;
}

// Sum of adaptive integrals over consecutive panels [edges[i], edges[i+1]].
// Useful when the integrand varies over many decades.
template <class F>
Result integrate_panels(F&& f, const std::vector<double>& edges, Tolerance tol = {}) {
    Result total;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const Tolerance local{tol.abs / static_cast<double>(edges.size()), tol.rel};
        auto r = integrate(f, edges[i], edges[i + 1], local);
        total.value += r.value;
        total.error += r.error;
    }
    detail::check(total, tol, "integrate_panels");
    return total;
}

// Log-spaced panel edges covering [lo, hi], lo > 0.
inline std::vector<double> log_edges(double lo, double hi, double panels_per_decade = 4.0) {
    const double decades = std::log10(hi / lo);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(decades * panels_per_decade)));
    std::vector<double> e(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        e[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n));
    e.front() = lo;
    e.back() = hi;
    return e;
}

// int_0^inf f(x) cos(w x) dx  and  int_0^inf f(x) sin(w x) dx  for slowly
// decaying f (double-exponential rule of Ooura and Mori).
template <class F>
Result fourier_cos(F&& f, double w, double rel = 1e-10) {
    thread_local boost::math::quadrature::ooura_fourier_cos<double> rule(1e-11);
    auto [v, relerr] = rule.integrate(f, w);
    Result r{v, relerr * std::abs(v)};
    if (!std::isfinite(v) || relerr > rel)
        throw NumericalError("fourier_cos: quadrature did not converge", v, r.error);
    return r;
}

template <class F>
Result fourier_sin(F&& f, double w, double rel = 1e-10) {
    thread_local boost::math::quadrature::ooura_fourier_sin<double> rule(1e-11);
    auto [v, relerr] = rule.integrate(f, w);
    Result r{v, relerr * std::abs(v)};
    if (!std::isfinite(v) || relerr > rel)
        throw NumericalError("fourier_sin: quadrature did not converge", v, r.error);
    return r;
}

struct Node {
    double x;
    double w;
};

// Composite 20-point Gauss-Legendre rule with `panels` equal panels on [a, b].
inline std::vector<Node> composite_gauss_legendre(double a, double b, std::size_t panels) {
    using rule = boost::math::quadrature::gauss<double, 20>;
    const auto& xs = rule::abscissa();
    const auto& ws = rule::weights();
    std::vector<Node> nodes;
    nodes.reserve(panels * 20);
    const double h = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double mid = a + (static_cast<double>(p) + 0.5) * h;
        const double half = 0.5 * h;
        // abscissa() holds the non-negative half of the symmetric rule
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i] == 0.0) {
                nodes.push_back({mid, half * ws[i]});
                continue;
            }
            nodes.push_back({mid - half * xs[i], half * ws[i]});
            nodes.push_back({mid + half * xs[i], half * ws[i]});
        }
    }
    std::sort(nodes.begin(), nodes.end(), [](const Node& l, const Node& r) { return l.x < r.x; });
    return nodes;
}

} // namespace openbath::quad
