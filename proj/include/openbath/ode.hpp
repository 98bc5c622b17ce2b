#pragma once

// Dormand-Prince RK4(5) with FSAL, PI step control and step alignment on the
// requested output times.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <complex>
#include <vector>

#include <Eigen/Core>

#include "openbath/errors.hpp"

namespace openbath {

using cplx = std::complex<double>;

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double h_init = 0.0; // 0: automatic
    double h_min = 1e-6;
    double h_max = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 50'000'000;
};

struct OdeStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_calls = 0;
    double last_h = 0.0;
};

namespace dp45 {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
} // namespace dp45

// Integrates y' = f(t, y) from t0 through every time in `times` (ascending,
// >= t0). f is called as f(t, y, dydt). obs(t, y) fires at each requested
// time, which the stepper hits exactly.
template <class Vec, class Rhs, class Obs>
OdeStats dormand_prince(Rhs&& f, Vec& y, double t0, const std::vector<double>& times, Obs&& obs, const OdeOptions& opt = {}) {
    using namespace dp45;
    OdeStats st;
    const auto n = y.size();
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);
    double t = t0;
    std::size_t next = 0;
    while (next < times.size() && times[next] <= t0) {
        obs(t, y);
        ++next;
    }
    if (next == times.size()) return st;

    auto err_norm = [&](const Vec& e, const Vec& a, const Vec& b) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.atol + opt.rtol * std::sqrt(std::max(std::norm(a[i]), std::norm(b[i])));
            s += std::norm(e[i]) / (sc * sc);
        }
        return std::sqrt(s / static_cast<double>(std::max<Eigen::Index>(n, 1)));
    };

    f(t, y, k1);
    ++st.rhs_calls;
    double h = opt.h_init;
    if (h <= 0.0) {
        double d0 = 0.0, d1 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.atol + opt.rtol * std::sqrt(std::norm(y[i]));
            d0 += std::norm(y[i]) / (sc * sc);
            d1 += std::norm(k1[i]) / (sc * sc);
        }
        h = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * std::sqrt(d0 / d1);
        h = std::min(h, times.back() - t0);
    }
    h = std::min(h, opt.h_max);

    double err_old = 1e-4;
    bool last_rejected = false;
    while (next < times.size()) {
        if (st.accepted + st.rejected >= opt.max_steps)
            throw StiffnessError("dormand_prince: step limit reached", t);
        const double target = times[next];
        bool clamped = false;
        double hs = h;
        if (t + hs >= target || t + 1.01 * hs >= target) {
            hs = target - t;
            clamped = true;
        }
        if (h < opt.h_min) throw StiffnessError("dormand_prince: step size underflow", t);

        tmp = y + hs * a21 * k1;
        f(t + c2 * hs, tmp, k2);
        tmp = y + hs * (a31 * k1 + a32 * k2);
        f(t + c3 * hs, tmp, k3);
        tmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        f(t + c4 * hs, tmp, k4);
        tmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(t + c5 * hs, tmp, k5);
        tmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + hs, tmp, k6);
        ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        f(t + hs, ynew, k7);
        st.rhs_calls += 6;
        tmp = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = err_norm(tmp, y, ynew);

        if (!std::isfinite(err)) err = 1e10;
        if (err <= 1.0) {
            // PI controller
            double fac = 0.9 * std::pow(err, -0.17) * std::pow(err_old, 0.04);
            if (err == 0.0) fac = 5.0;
            fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
            err_old = std::max(err, 1e-4);
            t = clamped ? target : t + hs;
            y.swap(ynew);
            k1.swap(k7);
            ++st.accepted;
            st.last_h = hs;
            const double proposal = std::min(hs * fac, opt.h_max);
            h = clamped ? std::max(h, proposal) : proposal;
            h = std::min(h, opt.h_max);
            last_rejected = false;
            while (next < times.size() && times[next] <= t) {
                obs(t, y);
                ++next;
            }
        } else {
            const double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
            h = hs * fac;
            ++st.rejected;
            last_rejected = true;
        }
    }
    return st;
}

// Integrating-factor (Lawson) form of the same RK4(5) pair for
// y' = Lambda y + N(t, y) with Lambda diagonal and constant on blocks of
// `block` consecutive components. The diagonal part is integrated exactly,
// so the step size is set by N alone. n(t, y, out) must omit Lambda.
template <class Rhs, class Obs>
OdeStats lawson_dormand_prince(Rhs&& n, const Eigen::VectorXcd& lambda, Eigen::Index block, Eigen::VectorXcd& y,
                               double t0, const std::vector<double>& times, Obs&& obs, const OdeOptions& opt = {}) {
    using namespace dp45;
    using Vec = Eigen::VectorXcd;
    OdeStats st;
    const Eigen::Index len = y.size();
    const Eigen::Index nb = lambda.size();
    if (nb * block != len) throw DomainError("lawson_dormand_prince: block layout does not match the state");
    const double c[7] = {0.0, c2, c3, c4, c5, 1.0, 1.0};
    const double A[7][6] = {{0},
                            {a21},
                            {a31, a32},
                            {a41, a42, a43},
                            {a51, a52, a53, a54},
                            {a61, a62, a63, a64, a65},
                            {a71, 0.0, a73, a74, a75, a76}};
    const double E[7] = {e1, 0.0, e3, e4, e5, e6, e7};
    const bool real_lambda = lambda.imag().cwiseAbs().maxCoeff() == 0.0;

    // distinct offsets c_s - c_j and 1 - c_j used by the scheme
    std::vector<double> deltas;
    auto slot = [&](double dlt) {
        for (std::size_t i = 0; i < deltas.size(); ++i)
            if (std::abs(deltas[i] - dlt) < 1e-14) return static_cast<int>(i);
        deltas.push_back(dlt);
        return static_cast<int>(deltas.size() - 1);
    };
    int S[7][7];
    for (int s = 0; s < 7; ++s)
        for (int j = 0; j <= s; ++j) S[s][j] = slot(c[s] - c[j]);
    int Serr[7];
    for (int j = 0; j < 7; ++j) Serr[j] = slot(1.0 - c[j]);
    Eigen::MatrixXcd ex(nb, static_cast<Eigen::Index>(deltas.size()));
    double ex_h = -1.0;
    auto tabulate = [&](double h) {
        if (h == ex_h) return;
        for (Eigen::Index q = 0; q < ex.cols(); ++q) {
            const double dh = deltas[q] * h;
            if (real_lambda)
                for (Eigen::Index b = 0; b < nb; ++b) ex(b, q) = std::exp(lambda[b].real() * dh);
            else
                for (Eigen::Index b = 0; b < nb; ++b) ex(b, q) = std::exp(lambda[b] * dh);
        }
        ex_h = h;
    };

    double t = t0;
    std::size_t next = 0;
    while (next < times.size() && times[next] <= t0) {
        obs(t, y);
        ++next;
    }
    if (next == times.size()) return st;

    std::vector<Vec> K(7, Vec(len));
    Vec Y(len), err(len);
    n(t, y, K[0]);
    ++st.rhs_calls;
    double h = opt.h_init > 0.0 ? opt.h_init : std::min(0.1, times.back() - t0);
    h = std::min(h, opt.h_max);
    double err_old = 1e-4;
    bool last_rejected = false;
    while (next < times.size()) {
        if (st.accepted + st.rejected >= opt.max_steps) throw StiffnessError("lawson_dormand_prince: step limit reached", t);
        if (h < opt.h_min) throw StiffnessError("lawson_dormand_prince: step size underflow", t);
        const double target = times[next];
        bool clamped = false;
        double hs = h;
        if (t + 1.01 * hs >= target) {
            hs = target - t;
            clamped = true;
        }
        tabulate(hs);
        for (int s = 1; s < 7; ++s) {
            for (Eigen::Index b = 0; b < nb; ++b) {
                const cplx e0 = ex(b, S[s][0]);
                cplx f[6];
                for (int j = 0; j < s; ++j) f[j] = hs * A[s][j] * ex(b, S[s][j]);
                for (Eigen::Index q = b * block; q < (b + 1) * block; ++q) {
                    cplx v = e0 * y[q];
                    for (int j = 0; j < s; ++j) v += f[j] * K[j][q];
                    Y[q] = v;
                }
            }
            n(t + c[s] * hs, Y, K[s]);
        }
        st.rhs_calls += 6;
        double acc = 0.0;
        for (Eigen::Index b = 0; b < nb; ++b) {
            cplx f[7];
            for (int j = 0; j < 7; ++j) f[j] = hs * E[j] * ex(b, Serr[j]);
            for (Eigen::Index q = b * block; q < (b + 1) * block; ++q) {
                cplx e = 0.0;
                for (int j = 0; j < 7; ++j) e += f[j] * K[j][q];
                const double sc = opt.atol + opt.rtol * std::sqrt(std::max(std::norm(y[q]), std::norm(Y[q])));
                acc += std::norm(e) / (sc * sc);
            }
        }
        double en = std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(len, 1)));
        if (!std::isfinite(en)) en = 1e10;
        if (en <= 1.0) {
            double fac = en == 0.0 ? 5.0 : 0.9 * std::pow(en, -0.17) * std::pow(err_old, 0.04);
            fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
            err_old = std::max(en, 1e-4);
            t = clamped ? target : t + hs;
            y.swap(Y);
            K[0].swap(K[6]);
            ++st.accepted;
            st.last_h = hs;
            const double proposal = std::min(hs * fac, opt.h_max);
            h = clamped ? std::max(h, proposal) : proposal;
            h = std::min(h, opt.h_max);
            last_rejected = false;
            while (next < times.size() && times[next] <= t) {
                obs(t, y);
                ++next;
            }
        } else {
            h = hs * std::max(0.2, 0.9 * std::pow(en, -0.2));
            ++st.rejected;
            last_rejected = true;
        }
    }
    return st;
}

} // namespace openbath
