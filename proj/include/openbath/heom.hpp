#pragma once

// Bexcitonic hierarchical equations of motion. Each feature k of each bath
// carries a bosonic index n_k; an auxiliary density operator (ADO) is stored
// for every multi-index inside the truncation. The generator is
//
//   d rho_n/dt = -i[H, rho_n] + (sum_k n_k gamma_k) rho_n
//     + sum_k [ -z_k sqrt(n_k + 1) (Q rho_{n+e_k} - rho_{n+e_k} Q)
//               + sqrt(n_k) (c_k / z_k) Q rho_{n-e_k}
//               - sqrt(n_k) (c_bar_k / z_k) rho_{n-e_k} Q ]
//
// with c, c_bar in fs^-2 and gamma, z in fs^-1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "openbath/bcf_features.hpp"
#include "openbath/model_systems.hpp"
#include "openbath/ode.hpp"
#include "openbath/trajectory.hpp"

namespace openbath {

struct HierarchySpec {
    int per_mode_cap = 20;        // Fock dimension per bexciton, n_k < per_mode_cap
    std::optional<int> level_cap; // sum_k n_k <= level_cap
    std::vector<cplx> z;          // per-feature scaling, fs^-1; empty selects sqrt|c_k|
};

inline void validate(const HierarchySpec& h) {
    if (h.per_mode_cap < 1 || h.per_mode_cap > 255) throw DomainError("hierarchy: per_mode_cap must be in [1, 255]");
    if (h.level_cap && *h.level_cap < 1) throw DomainError("hierarchy: level_cap must be at least 1");
    for (const auto& z : h.z)
        if (z == 0.0 || !std::isfinite(std::abs(z))) throw DomainError("hierarchy: scaling factors must be nonzero");
}

struct BathCoupling {
    Matrix Q;
    FeatureSet features;
};

// Multi-indices in lexicographic order (last mode fastest); index 0 is the root.
class HierarchyIndex {
public:
    HierarchyIndex(int K, int cap, std::optional<int> level_cap) : K_(K) {
        const int L = level_cap ? *level_cap : K * (cap - 1);
        std::vector<std::uint8_t> cur(K, 0);
        std::vector<std::vector<std::uint8_t>> all;
        std::function<void(int, int)> rec = [&](int k, int left) {
            if (k == K) {
                all.push_back(cur);
                return;
            }
            for (int n = 0; n < cap && n <= left; ++n) {
                cur[k] = static_cast<std::uint8_t>(n);
                rec(k + 1, left - n);
            }
            cur[k] = 0;
        };
        rec(0, L);
        n_ = all.size();
        flat_.reserve(n_ * K);
        std::unordered_map<std::string, std::int32_t> lookup;
        lookup.reserve(n_ * 2);
        for (std::size_t i = 0; i < n_; ++i) {
            flat_.insert(flat_.end(), all[i].begin(), all[i].end());
            lookup.emplace(std::string(all[i].begin(), all[i].end()), static_cast<std::int32_t>(i));
        }
        up_.assign(n_ * K, -1);
        down_.assign(n_ * K, -1);
        std::string key;
        for (std::size_t i = 0; i < n_; ++i) {
            key.assign(all[i].begin(), all[i].end());
            for (int k = 0; k < K; ++k) {
                key[k] = static_cast<char>(all[i][k] + 1);
                if (auto it = lookup.find(key); it != lookup.end()) up_[i * K + k] = it->second;
                if (all[i][k] > 0) {
                    key[k] = static_cast<char>(all[i][k] - 1);
                    down_[i * K + k] = lookup.at(key);
                }
                key[k] = static_cast<char>(all[i][k]);
            }
        }
    }

    std::size_t size() const { return n_; }
    int modes() const { return K_; }
    int n(std::size_t i, int k) const { return flat_[i * K_ + k]; }
    std::int32_t up(std::size_t i, int k) const { return up_[i * K_ + k]; }
    std::int32_t down(std::size_t i, int k) const { return down_[i * K_ + k]; }

    int level(std::size_t i) const {
        int s = 0;
        for (int k = 0; k < K_; ++k) s += n(i, k);
        return s;
    }

private:
    int K_;
    std::size_t n_ = 0;
    std::vector<std::uint8_t> flat_;
    std::vector<std::int32_t> up_, down_;
};

namespace detail {

// Deterministic static partition of [0, n) over worker threads.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
    if (threads <= 1 || n < 64) {
        fn(std::size_t{0}, n);
        return;
    }
    const auto T = static_cast<std::size_t>(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < T; ++w)
        pool.emplace_back([&, w] { fn(n * w / T, n * (w + 1) / T); });
    fn(0, n / T);
    for (auto& th : pool) th.join();
}

} // namespace detail

class HeomGenerator {
public:
    HeomGenerator(const Matrix& H_cm, std::vector<BathCoupling> baths, HierarchySpec spec)
        : H_(H_cm), baths_(std::move(baths)), spec_(std::move(spec)) {
        validate(spec_);
        d_ = H_.rows();
        if (d_ == 0 || !is_hermitian(H_)) throw DomainError("heom: H_S must be a non-empty Hermitian matrix");
        const double a = to_angular(1.0);
        for (std::size_t b = 0; b < baths_.size(); ++b) {
            const auto& bc = baths_[b];
            if (bc.Q.rows() != d_ || !is_hermitian(bc.Q)) throw DomainError("heom: coupling operators must be Hermitian");
            for (const auto& f : bc.features.features) {
                if (!(f.gamma.real() < 0.0)) throw DomainError("heom: feature exponents must decay");
                const cplx c = f.c * a * a, cb = f.c_bar * a * a;
                c_.push_back(c);
                cbar_.push_back(cb);
                gamma_.push_back(f.gamma);
                bath_of_.push_back(static_cast<int>(b));
                const double m = std::sqrt(std::abs(c));
                z_.push_back(m > 0.0 ? cplx(m, 0.0) : cplx(1.0, 0.0));
            }
            const bool diag = (bc.Q - Matrix(bc.Q.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
            qdiag_.push_back(diag);
        }
        if (!spec_.z.empty()) {
            if (spec_.z.size() != z_.size()) throw DomainError("heom: scaling list length must equal the feature count");
            z_ = spec_.z;
        }
        K_ = static_cast<int>(z_.size());
        index_.emplace(K_, spec_.per_mode_cap, spec_.level_cap);
        build_tables();
    }

    void set_time_dependent_hamiltonian(std::function<Matrix(double)> H_of_t) { H_of_t_ = std::move(H_of_t); }
    void set_threads(int threads) { threads_ = std::max(1, threads); }

    Eigen::Index system_dim() const { return d_; }
    int feature_count() const { return K_; }
    std::size_t ado_count() const { return index_->size(); }
    std::size_t state_size() const { return ado_count() * static_cast<std::size_t>(d_ * d_); }
    const HierarchyIndex& index() const { return *index_; }
    const std::vector<cplx>& scaling() const { return z_; }
    const std::vector<cplx>& coefficients() const { return c_; }
    const std::vector<cplx>& conj_coefficients() const { return cbar_; }
    const std::vector<cplx>& exponents() const { return gamma_; }
    const std::vector<int>& bath_of_feature() const { return bath_of_; }
    const std::vector<BathCoupling>& baths() const { return baths_; }
    const Matrix& hamiltonian() const { return H_; }

    Matrix hamiltonian_at(double t) const { return H_of_t_ ? H_of_t_(t) : H_; }

    // Per-ADO number-operator damping sum_k n_k gamma_k, fs^-1.
    const std::vector<cplx>& damping() const { return damping_; }

    // dx = L x. Without damping the diagonal term sum_k n_k gamma_k is left out.
    void apply(double t, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx, bool with_damping = true) const {
        dx.resize(x.size());
        const Matrix Ha = cplx(0.0, -to_angular(1.0)) * hamiltonian_at(t);
        switch (d_) {
        case 2: run<2>(Ha, x, dx, with_damping); break;
        case 3: run<3>(Ha, x, dx, with_damping); break;
        case 7: run<7>(Ha, x, dx, with_damping); break;
        default: run<0>(Ha, x, dx, with_damping); break;
        }
    }

private:
    struct Up {
        std::int32_t nbr;
        std::int32_t bath;
        cplx coef;
    };
    struct Down {
        std::int32_t nbr;
        std::int32_t bath;
        cplx cl, cr;
    };

    void build_tables() {
        const auto& ix = *index_;
        const std::size_t n = ix.size();
        damping_.assign(n, 0.0);
        up_ptr_.assign(n + 1, 0);
        down_ptr_.assign(n + 1, 0);
        // features grouped by bath so entries come out sorted by bath
        std::vector<int> order(K_);
        for (int k = 0; k < K_; ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return bath_of_[l] < bath_of_[r]; });
        for (std::size_t i = 0; i < n; ++i) {
            cplx damp = 0.0;
            for (int k : order) {
                const int nk = ix.n(i, k);
                damp += static_cast<double>(nk) * gamma_[k];
                // a feature with c = c_bar = 0 is uncoupled; its ladder terms are dropped
                if (c_[k] == 0.0 && cbar_[k] == 0.0) continue;
                if (auto u = ix.up(i, k); u >= 0)
                    up_.push_back({u, bath_of_[k], -z_[k] * std::sqrt(nk + 1.0)});
                if (nk > 0) {
                    const double s = std::sqrt(static_cast<double>(nk));
                    down_.push_back({ix.down(i, k), bath_of_[k], s * c_[k] / z_[k], -s * cbar_[k] / z_[k]});
                }
            }
            damping_[i] = damp;
            up_ptr_[i + 1] = up_.size();
            down_ptr_[i + 1] = down_.size();
        }
    }

    static cplx mul(cplx a, cplx b) {
        return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
    }

    // D > 0 fixes the system dimension at compile time; D = 0 is the general case.
    template <int D>
    void run(const Matrix& Ha, const Eigen::VectorXcd& x, Eigen::VectorXcd& dx, bool with_damping) const {
        const int d = D > 0 ? D : static_cast<int>(d_);
        const int dd = d * d;
        const int B = static_cast<int>(baths_.size());
        // column-major copies of -i a H and of every Q
        std::vector<cplx> H(Ha.data(), Ha.data() + dd);
        std::vector<cplx> Q;
        for (int b = 0; b < B; ++b) Q.insert(Q.end(), baths_[b].Q.data(), baths_[b].Q.data() + dd);
        const cplx* xd = x.data();
        cplx* yd = dx.data();
        detail::parallel_for(index_->size(), threads_, [&](std::size_t begin, std::size_t end) {
            std::vector<cplx> Ub(dd), Lb(dd), Rb(dd), Ob(dd);
            cplx* U = Ub.data();
            cplx* L = Lb.data();
            cplx* R = Rb.data();
            cplx* out = Ob.data();
            for (std::size_t i = begin; i < end; ++i) {
                const cplx* X = xd + i * dd;
                const cplx damp = with_damping ? damping_[i] : cplx(0.0);
                for (int c = 0; c < d; ++c)
                    for (int r = 0; r < d; ++r) {
                        cplx v = mul(damp, X[r + c * d]);
                        for (int m = 0; m < d; ++m)
                            v += mul(H[r + m * d], X[m + c * d]) - mul(X[r + m * d], H[m + c * d]);
                        out[r + c * d] = v;
                    }
                const Up* up = up_.data() + up_ptr_[i];
                const Up* up_end = up_.data() + up_ptr_[i + 1];
                const Down* dn = down_.data() + down_ptr_[i];
                const Down* dn_end = down_.data() + down_ptr_[i + 1];
                for (int b = 0; b < B; ++b) {
                    if ((up == up_end || up->bath != b) && (dn == dn_end || dn->bath != b)) continue;
                    for (int e = 0; e < dd; ++e) U[e] = L[e] = R[e] = 0.0;
                    for (; up != up_end && up->bath == b; ++up) {
                        const cplx* Y = xd + static_cast<std::size_t>(up->nbr) * dd;
                        for (int e = 0; e < dd; ++e) U[e] += mul(up->coef, Y[e]);
                    }
                    for (; dn != dn_end && dn->bath == b; ++dn) {
                        const cplx* Y = xd + static_cast<std::size_t>(dn->nbr) * dd;
                        for (int e = 0; e < dd; ++e) {
                            L[e] += mul(dn->cl, Y[e]);
                            R[e] += mul(dn->cr, Y[e]);
                        }
                    }
                    const cplx* Qb = Q.data() + b * dd;
                    if (qdiag_[b]) {
                        for (int c = 0; c < d; ++c)
                            for (int r = 0; r < d; ++r) {
                                const int e = r + c * d;
                                const cplx qr = Qb[r + r * d], qc = Qb[c + c * d];
                                out[e] += mul(qr - qc, U[e]) + mul(qr, L[e]) + mul(qc, R[e]);
                            }
                    } else {
                        // Q U - U Q + Q L + R Q = Q (L + U) + (R - U) Q
                        for (int e = 0; e < dd; ++e) {
                            L[e] += U[e];
                            R[e] -= U[e];
                        }
                        for (int c = 0; c < d; ++c)
                            for (int r = 0; r < d; ++r) {
                                cplx v = 0.0;
                                for (int m = 0; m < d; ++m)
                                    v += mul(Qb[r + m * d], L[m + c * d]) + mul(R[r + m * d], Qb[m + c * d]);
                                out[r + c * d] += v;
                            }
                    }
                }
                std::copy(out, out + dd, yd + i * dd);
            }
        });
    }

    Matrix H_;
    std::function<Matrix(double)> H_of_t_;
    std::vector<BathCoupling> baths_;
    HierarchySpec spec_;
    Eigen::Index d_ = 0;
    int K_ = 0;
    int threads_ = 1;
    std::vector<cplx> c_, cbar_, gamma_, z_;
    std::vector<int> bath_of_;
    std::vector<bool> qdiag_;
    std::optional<HierarchyIndex> index_;
    std::vector<cplx> damping_;
    std::vector<std::size_t> up_ptr_, down_ptr_;
    std::vector<Up> up_;
    std::vector<Down> down_;
};

struct ExtendedState {
    Eigen::VectorXcd data; // ADO-major, each ADO a column-major d x d block
    Eigen::Index d = 0;
    double time = 0.0;

    Matrix root() const { return Eigen::Map<const Matrix>(data.data(), d, d); }
    Matrix ado(std::size_t i) const { return Eigen::Map<const Matrix>(data.data() + i * d * d, d, d); }
};

inline constexpr double density_tolerance = 1e-10;

inline void validate_density(const Matrix& rho, Eigen::Index d) {
    if (rho.rows() != d || rho.cols() != d) throw DomainError("initial state: dimension does not match the system");
    if (!is_hermitian(rho, density_tolerance)) throw DomainError("initial state: density matrix must be Hermitian");
    if (std::abs(rho.trace() - 1.0) > density_tolerance) throw DomainError("initial state: trace must be 1");
    if (min_eigenvalue(rho) < -density_tolerance) throw DomainError("initial state: density matrix must be positive semidefinite");
}

inline ExtendedState init_state(const Matrix& rho0, const HeomGenerator& gen) {
    validate_density(rho0, gen.system_dim());
    ExtendedState s;
    s.d = gen.system_dim();
    s.data = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(gen.state_size()));
    Eigen::Map<Matrix>(s.data.data(), s.d, s.d) = rho0;
    return s;
}

inline Eigen::VectorXcd apply_generator(const HeomGenerator& gen, const ExtendedState& s) {
    Eigen::VectorXcd dx;
    gen.apply(s.time, s.data, dx);
    return dx;
}

inline Matrix reduced_density(const ExtendedState& s) { return s.root(); }

inline constexpr double trace_tolerance = 1e-6;

enum class HeomIntegrator {
    IntegratingFactor, // RK4(5) with the number-operator damping integrated exactly
    RungeKutta,        // plain RK4(5) on the full generator
};

// Advances `state` through every sample time (ascending, >= state.time) and
// returns the root ADO at each.
inline Trajectory propagate(const HeomGenerator& gen, ExtendedState& state, const std::vector<double>& times,
                            const OdeOptions& opt = {}, OdeStats* stats = nullptr,
                            const std::function<void(double, const Matrix&)>& monitor = {},
                            HeomIntegrator integrator = HeomIntegrator::IntegratingFactor) {
    if (times.empty() || times.back() <= state.time) throw DomainError("propagate: t_end must exceed the current time");
    Trajectory traj;
    auto rhs = [&](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) { gen.apply(t, y, dy); };
    auto obs = [&](double t, const Eigen::VectorXcd& y) {
        Matrix rho = Eigen::Map<const Matrix>(y.data(), state.d, state.d);
        if (!std::isfinite(rho.cwiseAbs().maxCoeff())) throw NumericalError("propagate: non-finite state", t, 0.0);
        if (monitor) monitor(t, rho);
        traj.push_back({t, std::move(rho), std::nullopt});
    };
    OdeStats st;
    if (integrator == HeomIntegrator::RungeKutta) {
        st = dormand_prince(rhs, state.data, state.time, times, obs, opt);
    } else {
        auto rest = [&](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) { gen.apply(t, y, dy, false); };
        const auto& damp = gen.damping();
        const Eigen::VectorXcd lambda = Eigen::Map<const Eigen::VectorXcd>(damp.data(), static_cast<Eigen::Index>(damp.size()));
        st = lawson_dormand_prince(rest, lambda, state.d * state.d, state.data, state.time, times, obs, opt);
    }
    state.time = times.back();
    if (stats) *stats = st;
    const double tr_err = std::abs(state.root().trace() - 1.0);
    if (tr_err > trace_tolerance)
        throw NumericalError("propagate: root trace drifted from 1", tr_err, trace_tolerance);
    return traj;
}

} // namespace openbath
