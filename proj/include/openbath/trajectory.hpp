#pragma once

// Reduced-density trajectories: CSV schema shared by both engines and the
// sample-by-sample comparison report.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "openbath/observables.hpp"

namespace openbath {

struct TrajectoryPoint {
    double t = 0.0; // fs
    Matrix rho;
    std::optional<double> energy; // <H>, cm^-1
};

using Trajectory = std::vector<TrajectoryPoint>;

inline Trajectory to_basis(const Trajectory& traj, const Matrix& U) {
    Trajectory out = traj;
    for (auto& p : out) p.rho = to_basis(p.rho, U);
    return out;
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

// Columns: t_fs, re_rho_i_j, im_rho_i_j (row-major), purity[, energy_cm].
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const Eigen::Index d = traj.empty() ? 0 : traj.front().rho.rows();
    const bool energy = !traj.empty() && traj.front().energy.has_value();
    os << "t_fs";
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) os << ",re_rho_" << i << '_' << j << ",im_rho_" << i << '_' << j;
    os << ",purity";
    if (energy) os << ",energy_cm";
    os << '\n';
    for (const auto& p : traj) {
        os << format_number(p.t);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                os << ',' << format_number(p.rho(i, j).real()) << ',' << format_number(p.rho(i, j).imag());
        os << ',' << format_number(purity(p.rho));
        if (energy) os << ',' << format_number(p.energy.value_or(0.0));
        os << '\n';
    }
}

inline Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw DomainError("trajectory CSV: empty input");
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    if (cols.empty() || cols[0] != "t_fs") throw DomainError("trajectory CSV line 1: first column must be t_fs");
    const bool energy = cols.back() == "energy_cm";
    const std::size_t rho_cols = cols.size() - 2 - (energy ? 1 : 0);
    const auto d = static_cast<Eigen::Index>(std::lround(std::sqrt(rho_cols / 2.0)));
    if (static_cast<std::size_t>(2 * d * d) != rho_cols) throw DomainError("trajectory CSV line 1: malformed header");
    Trajectory traj;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) {
            char* end = nullptr;
            v.push_back(std::strtod(c.c_str(), &end));
            if (end == c.c_str()) throw DomainError("trajectory CSV line " + std::to_string(lineno) + ": bad number");
        }
        if (v.size() != cols.size())
            throw DomainError("trajectory CSV line " + std::to_string(lineno) + ": wrong column count");
        TrajectoryPoint p;
        p.t = v[0];
        p.rho.resize(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) {
                const std::size_t k = 1 + 2 * static_cast<std::size_t>(i * d + j);
                p.rho(i, j) = cplx(v[k], v[k + 1]);
            }
        if (energy) p.energy = v.back();
        traj.push_back(std::move(p));
    }
    return traj;
}

// Observable names: pop_i, coh_i_j (|rho_ij|), re_rho_i_j, im_rho_i_j, purity, trace.
inline double evaluate_observable(const std::string& name, const Matrix& rho) {
    auto idx = [&](const std::string& rest) {
        std::vector<Eigen::Index> out;
        std::stringstream ss(rest);
        std::string tok;
        while (std::getline(ss, tok, '_')) out.push_back(std::stol(tok));
        for (auto i : out)
            if (i < 0 || i >= rho.rows()) throw DomainError("observable '" + name + "': index out of range");
        return out;
    };
    try {
        if (name == "purity") return purity(rho);
        if (name == "trace") return rho.trace().real();
        if (name.rfind("pop_", 0) == 0) {
            auto i = idx(name.substr(4));
            if (i.size() == 1) return rho(i[0], i[0]).real();
        }
        if (name.rfind("coh_", 0) == 0) {
            auto i = idx(name.substr(4));
            if (i.size() == 2) return std::abs(rho(i[0], i[1]));
        }
        if (name.rfind("re_rho_", 0) == 0) {
            auto i = idx(name.substr(7));
            if (i.size() == 2) return rho(i[0], i[1]).real();
        }
        if (name.rfind("im_rho_", 0) == 0) {
            auto i = idx(name.substr(7));
            if (i.size() == 2) return rho(i[0], i[1]).imag();
        }
    } catch (const std::invalid_argument&) {
    }
    throw DomainError("unknown observable '" + name + "'");
}

inline std::vector<std::string> default_observables(Eigen::Index d) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < d; ++i) out.push_back("pop_" + std::to_string(i));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) out.push_back("coh_" + std::to_string(i) + "_" + std::to_string(j));
    out.push_back("purity");
    return out;
}

struct ComparisonReport {
    std::vector<std::string> observables;
    std::vector<double> times;
    std::vector<std::vector<double>> errors; // [observable][sample]
    std::vector<double> max_error;
    std::vector<double> time_of_max;

    double overall_max() const { return max_error.empty() ? 0.0 : *std::max_element(max_error.begin(), max_error.end()); }
};

inline constexpr double time_grid_tolerance = 1e-9; // fs

inline ComparisonReport compare(const Trajectory& a, const Trajectory& b, std::vector<std::string> names = {}) {
    if (a.size() != b.size()) throw DomainError("compare: trajectories have different sample counts");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i].t - b[i].t) > time_grid_tolerance * std::max(1.0, std::abs(a[i].t)))
            throw DomainError("compare: sample grids differ at index " + std::to_string(i));
    if (!a.empty() && a.front().rho.rows() != b.front().rho.rows())
        throw DomainError("compare: trajectories have different system dimensions");
    if (names.empty() && !a.empty()) names = default_observables(a.front().rho.rows());
    ComparisonReport r;
    r.observables = names;
    for (const auto& p : a) r.times.push_back(p.t);
    for (const auto& name : names) {
        std::vector<double> e;
        double m = 0.0, tm = a.empty() ? 0.0 : a.front().t;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double v = std::abs(evaluate_observable(name, a[i].rho) - evaluate_observable(name, b[i].rho));
            e.push_back(v);
            if (v > m) m = v, tm = a[i].t;
        }
        r.errors.push_back(std::move(e));
        r.max_error.push_back(m);
        r.time_of_max.push_back(tm);
    }
    return r;
}

inline void write_comparison_csv(std::ostream& os, const ComparisonReport& r) {
    os << "t_fs";
    for (const auto& n : r.observables) os << ",abs_err_" << n;
    os << '\n';
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        os << format_number(r.times[i]);
        for (const auto& e : r.errors) os << ',' << format_number(e[i]);
        os << '\n';
    }
}

} // namespace openbath
