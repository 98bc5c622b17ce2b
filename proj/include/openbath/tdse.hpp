#pragma once

// Explicit route: system plus discretized harmonic bath as one wavefunction,
// propagated with short-iterative Lanczos steps.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "openbath/discretization.hpp"
#include "openbath/errors.hpp"
#include "openbath/model_systems.hpp"
#include "openbath/trajectory.hpp"
#include "openbath/units.hpp"

namespace openbath {

inline constexpr std::size_t default_amplitude_budget = std::size_t{1} << 24;

// Amplitude layout: A[i, n_1, ..., n_J] row-major, last mode fastest.
struct DiscreteHilbert {
    int system_dim = 2;
    std::vector<int> mode_dims;
    std::size_t budget = default_amplitude_budget;

    std::size_t bath_dim() const {
        std::size_t n = 1;
        for (int d : mode_dims) n *= static_cast<std::size_t>(d);
        return n;
    }
    std::size_t total_dim() const { return static_cast<std::size_t>(system_dim) * bath_dim(); }

    // Distance in the flattened bath index between n_j and n_j + 1.
    std::size_t stride(std::size_t j) const {
        std::size_t s = 1;
        for (std::size_t k = j + 1; k < mode_dims.size(); ++k) s *= static_cast<std::size_t>(mode_dims[k]);
        return s;
    }
};

inline void validate(const DiscreteHilbert& h) {
    if (h.system_dim < 1) throw DomainError("hilbert space: system dimension must be positive");
    double total = h.system_dim;
    for (std::size_t j = 0; j < h.mode_dims.size(); ++j) {
        if (h.mode_dims[j] < 2)
            throw DomainError("hilbert space: mode " + std::to_string(j) + " needs at least 2 levels");
        total *= h.mode_dims[j];
    }
    if (total > static_cast<double>(h.budget))
        throw CapacityError("hilbert space: " + std::to_string(static_cast<long double>(total)) +
                            " amplitudes exceed the budget of " + std::to_string(h.budget));
}

struct WaveState {
    Vector amplitudes;
    double time = 0.0; // fs
};

inline constexpr double norm_tolerance = 1e-8;

// One product term: weight * system ⊗ op_mode (op acts on a single mode;
// mode < 0 means the bath identity).
struct ProductTerm {
    Matrix system;
    int mode = -1;
    Eigen::MatrixXd op;
    double weight = 1.0;
};

class SparseHamiltonian {
public:
    SparseHamiltonian(DiscreteHilbert space, std::vector<ProductTerm> terms)
        : space_(std::move(space)), terms_(std::move(terms)) {
        validate(space_);
        plan();
    }

    const DiscreteHilbert& space() const { return space_; }
    const std::vector<ProductTerm>& terms() const { return terms_; }
    std::size_t dim() const { return space_.total_dim(); }

    // y = H x, H in cm^-1.
    void apply(const Vector& x, Vector& y) const {
        const auto d = static_cast<std::size_t>(space_.system_dim);
        const std::size_t nb = space_.bath_dim();
        y.resize(x.size());
        const cplx* xp = x.data();
        cplx* yp = y.data();
        for (std::size_t i = 0; i < d; ++i) {
            const double* dg = diag_.data() + i * nb;
            const double* xi = reinterpret_cast<const double*>(xp + i * nb);
            double* yi = reinterpret_cast<double*>(yp + i * nb);
            for (std::size_t b = 0; b < nb; ++b) {
                yi[2 * b] = dg[b] * xi[2 * b];
                yi[2 * b + 1] = dg[b] * xi[2 * b + 1];
            }
        }
        for (const auto& s : sys_) axpy(s.value, xp + s.col * nb, yp + s.row * nb, nb);
        for (const auto& l : ladders_) {
            const auto N = static_cast<std::size_t>(space_.mode_dims[l.mode]);
            const std::size_t st = space_.stride(l.mode);
            const std::size_t block = N * st;
            for (const auto& e : l.entries) {
                cplx* yi = yp + e.row * nb;
                const cplx* xi = xp + e.col * nb;
                if (st == 1 && N == 2) {
                    // last mode, two levels: interleaved pairs
                    const double cr = e.value.real() * l.offdiag[0], ci = e.value.imag() * l.offdiag[0];
                    const double* xd = reinterpret_cast<const double*>(xi);
                    double* yd = reinterpret_cast<double*>(yi);
                    for (std::size_t b = 0; b < 2 * nb; b += 4) {
                        yd[b] += cr * xd[b + 2] - ci * xd[b + 3];
                        yd[b + 1] += cr * xd[b + 3] + ci * xd[b + 2];
                        yd[b + 2] += cr * xd[b] - ci * xd[b + 1];
                        yd[b + 3] += cr * xd[b + 1] + ci * xd[b];
                    }
                    continue;
                }
                for (std::size_t base = 0; base < nb; base += block) {
                    for (std::size_t n = 0; n + 1 < N; ++n) {
                        const cplx c = e.value * l.offdiag[n];
                        const std::size_t lo = base + n * st;
                        axpy(c, xi + lo + st, yi + lo, st);
                        axpy(c, xi + lo, yi + lo + st, st);
                    }
                }
            }
        }
        for (const auto& g : general_) apply_general(g, xp, yp);
    }

    Vector operator*(const Vector& x) const {
        Vector y;
        apply(x, y);
        return y;
    }

    // Dense matrix; small spaces only.
    Matrix dense() const {
        const auto n = static_cast<Eigen::Index>(dim());
        Matrix m(n, n);
        Vector e = Vector::Zero(n), col;
        for (Eigen::Index k = 0; k < n; ++k) {
            e.setZero();
            e(k) = 1.0;
            apply(e, col);
            m.col(k) = col;
        }
        return m;
    }

private:
    // y += c x without the library's checked complex multiply.
    static void axpy(cplx c, const cplx* x, cplx* y, std::size_t n) {
        const double cr = c.real(), ci = c.imag();
        const double* xd = reinterpret_cast<const double*>(x);
        double* yd = reinterpret_cast<double*>(y);
        for (std::size_t k = 0; k < 2 * n; k += 2) {
            yd[k] += cr * xd[k] - ci * xd[k + 1];
            yd[k + 1] += cr * xd[k + 1] + ci * xd[k];
        }
    }

    struct Entry {
        std::size_t row, col;
        cplx value;
    };
    // Symmetric tridiagonal single-mode op: sum_n offdiag[n] (|n><n+1| + h.c.)
    // times system entries.
    struct Ladder {
        std::size_t mode;
        std::vector<double> offdiag;
        std::vector<Entry> entries;
    };
    struct General {
        std::size_t mode;
        Eigen::MatrixXd op;
        std::vector<Entry> entries;
    };

    static bool is_diagonal(const Eigen::MatrixXd& m) {
        return (m - Eigen::MatrixXd(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    }
    static bool is_symmetric_tridiagonal(const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                if (std::abs(r - c) != 1 && m(r, c) != 0.0) return false;
                if (m(r, c) != m(c, r)) return false;
            }
        return true;
    }

    static std::vector<Entry> entries_of(const Matrix& s, double w) {
        std::vector<Entry> out;
        for (Eigen::Index r = 0; r < s.rows(); ++r)
            for (Eigen::Index c = 0; c < s.cols(); ++c)
                if (s(r, c) != 0.0) out.push_back({std::size_t(r), std::size_t(c), w * s(r, c)});
        return out;
    }

    void plan() {
        const auto d = static_cast<std::size_t>(space_.system_dim);
        const std::size_t nb = space_.bath_dim();
        diag_.assign(d * nb, 0.0);
        Matrix sys_part = Matrix::Zero(space_.system_dim, space_.system_dim);
        for (const auto& t : terms_) {
            if (t.system.rows() != space_.system_dim || t.system.cols() != space_.system_dim)
                throw DomainError("hamiltonian: system operator has the wrong dimension");
            if (!is_hermitian(t.system)) throw DomainError("hamiltonian: system operator is not Hermitian");
            if (t.mode < 0) {
                sys_part += t.weight * t.system;
                continue;
            }
            const auto j = static_cast<std::size_t>(t.mode);
            if (j >= space_.mode_dims.size()) throw DomainError("hamiltonian: term refers to a missing mode");
            const auto N = static_cast<Eigen::Index>(space_.mode_dims[j]);
            if (t.op.rows() != N || t.op.cols() != N || (t.op - t.op.transpose()).cwiseAbs().maxCoeff() != 0.0)
                throw DomainError("hamiltonian: mode operator must be real symmetric with the mode dimension");
            const bool sys_diag = (t.system - Matrix(t.system.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
            if (sys_diag && is_diagonal(t.op)) {
                const std::size_t st = space_.stride(j);
                for (std::size_t i = 0; i < d; ++i) {
                    const double s = t.weight * t.system(Eigen::Index(i), Eigen::Index(i)).real();
                    if (s == 0.0) continue;
                    for (std::size_t b = 0; b < nb; ++b)
                        diag_[i * nb + b] += s * t.op((b / st) % std::size_t(N), (b / st) % std::size_t(N));
                }
            } else if (is_symmetric_tridiagonal(t.op)) {
                Ladder l{j, std::vector<double>(std::size_t(N - 1)), entries_of(t.system, t.weight)};
                for (Eigen::Index n = 0; n + 1 < N; ++n) l.offdiag[std::size_t(n)] = t.op(n, n + 1);
                ladders_.push_back(std::move(l));
            } else {
                general_.push_back({j, t.op, entries_of(t.system, t.weight)});
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            const double h = sys_part(Eigen::Index(i), Eigen::Index(i)).real();
            for (std::size_t b = 0; b < nb; ++b) diag_[i * nb + b] += h;
            for (std::size_t k = 0; k < d; ++k) {
                const cplx v = sys_part(Eigen::Index(i), Eigen::Index(k));
                if (k != i && v != 0.0) sys_.push_back({i, k, v});
            }
        }
    }

    void apply_general(const General& g, const cplx* xp, cplx* yp) const {
        const std::size_t nb = space_.bath_dim();
        const auto N = static_cast<std::size_t>(space_.mode_dims[g.mode]);
        const std::size_t st = space_.stride(g.mode);
        for (const auto& e : g.entries) {
            cplx* yi = yp + e.row * nb;
            const cplx* xi = xp + e.col * nb;
            for (std::size_t base = 0; base < nb; base += N * st)
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t m = 0; m < N; ++m) {
                        const double o = g.op(Eigen::Index(n), Eigen::Index(m));
                        if (o == 0.0) continue;
                        axpy(e.value * o, xi + base + m * st, yi + base + n * st, st);
                    }
        }
    }

    DiscreteHilbert space_;
    std::vector<ProductTerm> terms_;
    std::vector<double> diag_;
    std::vector<Entry> sys_;
    std::vector<Ladder> ladders_;
    std::vector<General> general_;
};

inline Eigen::MatrixXd number_operator(int N) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
    for (int n = 0; n < N; ++n) m(n, n) = n;
    return m;
}

// a + a^dagger
inline Eigen::MatrixXd position_operator(int N) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
    for (int n = 0; n + 1 < N; ++n) m(n, n + 1) = m(n + 1, n) = std::sqrt(double(n + 1));
    return m;
}

struct BathAttachment {
    Matrix Q;
    DiscreteBath bath;
};

// H = H_S ⊗ 1 + sum_j w_j n_j + sum_c Q_c ⊗ sum_{j in c} g_j (a_j + a_j^dagger).
// Modes of successive attachments are laid out in order. mode_dims empty
// means two levels per mode.
inline SparseHamiltonian build_hamiltonian(const Matrix& H_S, const std::vector<BathAttachment>& baths,
                                           std::vector<int> mode_dims = {},
                                           std::size_t budget = default_amplitude_budget) {
    if (!is_hermitian(H_S)) throw DomainError("hamiltonian: H_S must be Hermitian");
    std::size_t J = 0;
    for (const auto& b : baths) {
        if (b.Q.rows() != H_S.rows() || b.Q.cols() != H_S.cols())
            throw DomainError("hamiltonian: coupling operator dimension differs from H_S");
        J += b.bath.size();
    }
    if (mode_dims.empty()) mode_dims.assign(J, 2);
    if (mode_dims.size() != J)
        throw DomainError("hamiltonian: " + std::to_string(mode_dims.size()) + " mode dimensions given for " +
                          std::to_string(J) + " modes");
    DiscreteHilbert space{static_cast<int>(H_S.rows()), std::move(mode_dims), budget};
    validate(space);

    std::vector<ProductTerm> terms;
    terms.push_back({H_S, -1, {}, 1.0});
    const Matrix id = Matrix::Identity(H_S.rows(), H_S.cols());
    int j = 0;
    for (const auto& b : baths) {
        for (const auto& m : b.bath.modes) {
            const int N = space.mode_dims[std::size_t(j)];
            if (m.omega != 0.0) terms.push_back({id, j, number_operator(N), m.omega});
            if (m.g != 0.0) terms.push_back({b.Q, j, position_operator(N), m.g});
            ++j;
        }
    }
    return SparseHamiltonian(std::move(space), std::move(terms));
}

inline SparseHamiltonian build_hamiltonian(const Matrix& H_S, const Matrix& Q_S, const DiscreteBath& bath,
                                           std::vector<int> mode_dims = {},
                                           std::size_t budget = default_amplitude_budget) {
    return build_hamiltonian(H_S, std::vector<BathAttachment>{{Q_S, bath}}, std::move(mode_dims), budget);
}

// psi_S ⊗ |0...0>
inline WaveState initial_vacuum(const Vector& psi_S, const DiscreteHilbert& space) {
    if (psi_S.size() != space.system_dim) throw DomainError("initial state: wrong system dimension");
    if (std::abs(psi_S.norm() - 1.0) > norm_tolerance) throw DomainError("initial state: system vector is not normalized");
    validate(space);
    WaveState s;
    s.amplitudes = Vector::Zero(static_cast<Eigen::Index>(space.total_dim()));
    const auto nb = static_cast<Eigen::Index>(space.bath_dim());
    for (Eigen::Index i = 0; i < psi_S.size(); ++i) s.amplitudes(i * nb) = psi_S(i);
    return s;
}

inline Matrix reduced_density(const WaveState& s, const DiscreteHilbert& space) {
    const auto d = static_cast<Eigen::Index>(space.system_dim);
    const auto nb = static_cast<Eigen::Index>(space.bath_dim());
    if (s.amplitudes.size() != d * nb) throw DomainError("reduced density: state does not match the Hilbert space");
    Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(s.amplitudes.data(), d, nb);
    Matrix rho = A * A.adjoint();
    return 0.5 * (rho + rho.adjoint());
}

inline double energy(const SparseHamiltonian& H, const WaveState& s) {
    return s.amplitudes.dot(H * s.amplitudes).real();
}

struct KrylovOptions {
    int m = 16;
    double dt = 0.25;    // fs
    double tol = 1e-10;  // residual estimate per (sub)step
    int max_substeps = 4096;
};

struct KrylovStats {
    std::size_t steps = 0;
    std::size_t substeps = 0;
    std::size_t matvecs = 0;
};

// Reusable Krylov basis storage.
struct KrylovWorkspace {
    Matrix V;
    Vector v, w;
};

// state <- exp(-i H dt) state, sub-stepping within one Krylov space until the
// residual estimate meets opt.tol.
inline void propagate_krylov(const SparseHamiltonian& H, WaveState& state, double dt, const KrylovOptions& opt = {},
                             KrylovStats* stats = nullptr, KrylovWorkspace* workspace = nullptr) {
    if (!(dt > 0.0)) throw DomainError("krylov: dt must be positive");
    if (opt.m < 2) throw DomainError("krylov: subspace dimension must be at least 2");
    const auto n = static_cast<Eigen::Index>(H.dim());
    if (state.amplitudes.size() != n) throw DomainError("krylov: state does not match the Hamiltonian");
    const double a = to_angular(1.0);
    const double t_end = state.time + dt;
    double remaining = dt;
    KrylovWorkspace local;
    KrylovWorkspace& ws = workspace ? *workspace : local;
    if (ws.V.rows() != n || ws.V.cols() != opt.m + 1) ws.V.resize(n, opt.m + 1);
    Matrix& V = ws.V;
    Vector& v = ws.v;
    Vector& w = ws.w;
    int substeps = 0;

    // exp(-i a T tau) e_1 for the leading m x m block of the Lanczos matrix
    auto small_exp = [a](const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta, int m, double tau) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        if (m == 1) return Eigen::VectorXcd::Constant(1, std::polar(1.0, -a * alpha(0) * tau)).eval();
        es.computeFromTridiagonal(alpha.head(m), beta.head(m - 1), Eigen::ComputeEigenvectors);
        const Eigen::VectorXd& ev = es.eigenvalues();
        const Eigen::MatrixXd& U = es.eigenvectors();
        Eigen::VectorXcd c(m);
        for (int i = 0; i < m; ++i) c(i) = std::polar(U(0, i), -a * ev(i) * tau);
        return Eigen::VectorXcd(U.cast<cplx>() * c);
    };

    while (remaining > 0.0) {
        const double beta0 = state.amplitudes.norm();
        if (beta0 == 0.0) break;
        V.col(0) = state.amplitudes / beta0;
        Eigen::VectorXd alpha(opt.m), beta(opt.m);
        int m = 0;
        bool exact = false;
        Eigen::VectorXcd c;
        double err = 0.0;
        for (int k = 0; k < opt.m; ++k) {
            v = V.col(k);
            H.apply(v, w);
            if (stats) ++stats->matvecs;
            // classical Gram-Schmidt, twice
            Vector h = V.leftCols(k + 1).adjoint() * w;
            w.noalias() -= V.leftCols(k + 1) * h;
            alpha(k) = h(k).real();
            h = V.leftCols(k + 1).adjoint() * w;
            w.noalias() -= V.leftCols(k + 1) * h;
            beta(k) = w.norm();
            m = k + 1;
            if (beta(k) <= 1e-13 * std::max(1.0, std::abs(alpha(k)))) {
                exact = true;
                break;
            }
            V.col(k + 1) = w / beta(k);
            if (m >= 2) {
                c = small_exp(alpha, beta, m, remaining);
                err = beta(k) * std::abs(c(m - 1));
                if (err <= opt.tol) break;
            }
        }

        double tau = remaining;
        if (exact || m < 2 || c.size() != m) c = small_exp(alpha, beta, m, tau);
        if (!exact) {
            err = beta(m - 1) * std::abs(c(m - 1));
            while (err > opt.tol) {
                tau *= 0.5;
                if (++substeps > opt.max_substeps)
                    throw NumericalError("krylov: residual did not converge; increase m or reduce dt", err, opt.tol);
                c = small_exp(alpha, beta, m, tau);
                err = beta(m - 1) * std::abs(c(m - 1));
            }
        }
        state.amplitudes.noalias() = V.leftCols(m) * (beta0 * c);
        remaining -= tau;
        if (remaining < 1e-12 * dt) remaining = 0.0;
        if (stats) ++stats->substeps;
    }
    state.time = t_end;
    if (stats) ++stats->steps;
}

// Samples the reduced density (and <H>) at each requested time, taking steps
// of at most opt.dt in between.
inline Trajectory propagate(const SparseHamiltonian& H, WaveState& state, const std::vector<double>& times,
                            const KrylovOptions& opt = {}, KrylovStats* stats = nullptr,
                            const std::function<void(double, const Matrix&)>& monitor = {}) {
    if (times.empty() || times.back() <= state.time) throw DomainError("propagate: t_end must exceed the current time");
    if (!(opt.dt > 0.0)) throw DomainError("propagate: dt must be positive");
    Trajectory traj;
    KrylovWorkspace ws;
    for (double t : times) {
        if (t < state.time - 1e-12) throw DomainError("propagate: sample times must be ascending and not before the state");
        while (t - state.time > 1e-12) {
            const double h = std::min(opt.dt, t - state.time);
            propagate_krylov(H, state, h, opt, stats, &ws);
        }
        state.time = t;
        const double nrm = state.amplitudes.norm();
        if (!std::isfinite(nrm)) throw NumericalError("propagate: non-finite state", t, 0.0);
        if (std::abs(nrm - 1.0) > norm_tolerance)
            throw NumericalError("propagate: norm drifted from 1", std::abs(nrm - 1.0), norm_tolerance);
        Matrix rho = reduced_density(state, H.space());
        if (monitor) monitor(t, rho);
        traj.push_back({t, std::move(rho), energy(H, state)});
    }
    return traj;
}

// Total relaxation rate at the resonance Omega, cm^-1:
// (pi/2) J(Omega) coth(Omega / 2kT).
inline double relaxation_rate(const BathSpec& spec, double Omega) {
    if (!(Omega > 0.0)) throw DomainError("rate correction: Omega must be positive");
    const double J = spectral_density(spec.model, Omega);
    const double x = Omega / (2.0 * thermal_energy(spec.temperature));
    return 0.5 * std::numbers::pi * J / std::tanh(x);
}

// rho in the {g, e} eigenbasis (index 0 = g). Populations: ee scaled by
// exp(-eta t), gg its complement; coherences by sqrt(p_g p_e).
inline Trajectory rate_correction(const Trajectory& traj, const BathSpec& spec, double Omega) {
    const double eta = to_angular(relaxation_rate(spec, Omega)); // fs^-1
    Trajectory out;
    out.reserve(traj.size());
    for (const auto& p : traj) {
        if (p.rho.rows() != 2 || p.rho.cols() != 2) throw DomainError("rate correction: needs a two-level density");
        const double gg = p.rho(0, 0).real();
        const bool coherent = p.rho(0, 1) != 0.0 || p.rho(1, 0) != 0.0;
        // p_g is only needed to scale coherences
        if (gg == 0.0 && coherent)
            throw DomainError("rate correction: ground population vanishes at t = " + std::to_string(p.t));
        const double pe = std::exp(-eta * p.t);
        Matrix rho = p.rho;
        rho(1, 1) = pe * p.rho(1, 1).real();
        rho(0, 0) = 1.0 - rho(1, 1).real();
        if (coherent) {
            const double s = std::sqrt(rho(0, 0).real() / gg * pe);
            rho(0, 1) *= s;
            rho(1, 0) *= s;
        }
        out.push_back({p.t, std::move(rho), p.energy});
    }
    return out;
}

} // namespace openbath
