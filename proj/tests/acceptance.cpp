// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance            all criteria
//   acceptance 1 5 7      a selection
// Exit status is the number of failed criteria.

#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "openbath/experiment.hpp"
#include "oracles.hpp"

using namespace openbath;

namespace {

const std::string config_dir = OPENBATH_CONFIG_DIR;

struct Check {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

Trajectory run_config(const std::string& name) {
    const auto cfg = load_config(config_dir + "/" + name);
    return run(cfg).trajectory;
}

const BathSpec dl_bath{DrudeLorentz{200.0, 100.0}, 300.0};

Check pure_dephasing_heom() {
    Check c;
    const auto traj = run_config("dephasing_heom.yaml");
    double worst = 0.0;
    for (const auto& p : traj)
        worst = std::max(worst, std::abs(std::abs(p.rho(0, 1)) - 0.5 * dephasing_coherence_exact(dl_bath, p.t)));
    c.require(traj.back().t == 500.0, "window [0, 500] fs");
    c.require(worst < 1e-2, "max ||rho01| - analytic| = " + sci(worst) + " < 1e-2");
    return c;
}

Check pure_dephasing_tdse() {
    Check c;
    const auto cfg = load_config(config_dir + "/dephasing_tdse_j16.yaml");
    const auto bath = resolve_discrete_bath(cfg);
    c.require(bath.size() == 16, "J = " + std::to_string(bath.size()));
    const auto traj = run(cfg).trajectory;
    double worst = 0.0;
    for (const auto& p : traj)
        worst = std::max(worst, std::abs(std::abs(p.rho(0, 1)) - 0.5 * dephasing_coherence_discrete(bath, p.t)));
    c.require(worst < 1e-6, "TDSE (N_j = 2) vs discrete closed form over [0, 300] fs: " + sci(worst) + " < 1e-6");

    const auto b240 = discretize_equalized(dl_bath, 120, 1000.0);
    double gap = 0.0;
    for (int t = 0; t <= 500; ++t)
        gap = std::max(gap, std::abs(dephasing_coherence_discrete(b240, t) - dephasing_coherence_exact(dl_bath, t)));
    c.require(gap < 1e-2, "J = 240 closed form vs continuum over [0, 500] fs: " + sci(gap) + " < 1e-2");
    return c;
}

Check relaxation_equilibrium() {
    Check c;
    const auto traj = run_config("relaxation_heom.yaml");
    const double gg = traj.back().rho(0, 0).real();
    c.require(std::abs(gg - 0.99993) <= 0.01, "rho_gg(" + fmt("%.0f", traj.back().t) + " fs) = " + fmt("%.5f", gg) +
                                                  " within 0.01 of 0.99993");
    std::vector<double> P;
    for (const auto& p : traj) P.push_back(purity(p.rho));
    const auto imin = std::min_element(P.begin(), P.end()) - P.begin();
    c.require(P[imin] < 0.7, "purity minimum " + fmt("%.4f", P[imin]) + " at " + fmt("%.0f", traj[imin].t) + " fs < 0.7");
    // a single dip: no later fall below the running maximum
    double peak = P[imin], dip = 0.0;
    for (std::size_t k = imin; k < P.size(); ++k) {
        peak = std::max(peak, P[k]);
        dip = std::max(dip, peak - P[k]);
    }
    c.require(dip < 1e-3, "second dip depth " + sci(dip) + " < 1e-3");
    c.require(P.back() > 0.99, "final purity " + fmt("%.4f", P.back()) + " > 0.99");
    return c;
}

Check rate_correction_formula() {
    Check c;
    const double eta = relaxation_rate(dl_bath, 2000.0);
    const double ref = oracle::dl_golden_rule(200.0, 100.0, 300.0, 2000.0);
    const double rel = std::abs(eta - ref) / ref;
    c.require(rel < 1e-12, "eta = " + fmt("%.12f", eta) + " cm^-1, relative error " + sci(rel) + " < 1e-12");

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Trajectory traj;
    for (int k = 0; k <= 200; ++k) {
        const double pg = 0.01 + 0.98 * u(rng);
        const double r = std::sqrt(pg * (1.0 - pg)) * u(rng);
        Matrix rho(2, 2);
        rho << pg, std::polar(r, 6.3 * u(rng)), 0.0, 1.0 - pg;
        rho(1, 0) = std::conj(rho(0, 1));
        traj.push_back({5.0 * k, rho, std::nullopt});
    }
    double drift = 0.0;
    for (const auto& p : rate_correction(traj, dl_bath, 2000.0))
        drift = std::max(drift, std::abs(p.rho.trace() - 1.0));
    c.require(drift <= 2.0 * std::numeric_limits<double>::epsilon(), "trace error on 201 samples " + sci(drift));
    return c;
}

Check discretization_quality() {
    Check c;
    const int K = 120;
    const auto b = discretize_equalized(dl_bath, K, 1000.0);
    const double A = oracle::spectrum_integral(dl_bath, 0.0, 1000.0);
    const double An = oracle::spectrum_integral(dl_bath, -1000.0, 0.0);
    double worst = 0.0;
    for (int k = 0; k < 2 * K; ++k) {
        const double ref = k < K ? An / K : A / K;
        const double bin = oracle::spectrum_integral(dl_bath, b.bin_edges[k], b.bin_edges[k + 1]);
        worst = std::max(worst, std::abs(bin - ref) / ref);
    }
    c.require(worst < 1e-6, "equalized K = 120 bins: max relative error " + sci(worst) + " < 1e-6");

    const auto g = discretize_bsdo(dl_bath, 6, 1000.0);
    double mworst = 0.0;
    for (int p = 1; p <= 11; ++p) {
        const double ref = oracle::spectrum_integral(dl_bath, -1000.0, 1000.0, p);
        mworst = std::max(mworst, std::abs(oracle::moment(g, p) - ref) / std::abs(ref));
    }
    c.require(mworst < 1e-6, "BSDO J = 6 moments p = 1..11: max relative error " + sci(mworst) + " < 1e-6");
    return c;
}

double reconstruction_error(const FeatureSet& fs, const std::function<cplx(double)>& exact, int t0, double norm) {
    double e = 0.0;
    for (int t = t0; t <= 500; ++t) e = std::max(e, std::abs(reconstruct_bcf(fs, t) - exact(t)));
    return e / norm;
}

Check bcf_reconstruction() {
    Check c;
    // Drude-Lorentz C(t) diverges logarithmically at t = 0: compare on (0, 500] fs
    // and normalize by the finite feature sum.
    auto dl = [](double t) { return oracle::dl_matsubara(200.0, 100.0, 300.0, t); };
    double e[3];
    for (int i = 0; i < 3; ++i) {
        const auto fs = decompose_dl(dl_bath, pade_pole_series(2 * i + 1, 300.0));
        e[i] = reconstruction_error(fs, dl, 1, std::abs(reconstruct_bcf(fs, 0.0)));
    }
    c.require(e[1] < 1e-2, "DL K = 4 on t = 1..500 fs: " + sci(e[1]) + " < 1e-2");
    c.require(e[0] > e[1] && e[1] > e[2], "K = 2, 4, 6: " + sci(e[0]) + ", " + sci(e[1]) + ", " + sci(e[2]) + " decreasing");

    const BathSpec br{Brownian::from_effective_frequency(200.0, 100.0, 1000.0), 300.0};
    const auto fs = decompose_brownian(br, pade_pole_series(3, 300.0));
    const double eb = reconstruction_error(fs, [&](double t) { return exact_bcf(br, t); }, 0, std::abs(exact_bcf(br, 0.0)));
    c.require(fs.size() == 5 && eb < 2e-2, "Brownian K = " + std::to_string(fs.size()) + ": " + sci(eb) + " < 2e-2");
    return c;
}

Check dense_oracles() {
    Check c;
    const auto sys = two_level(150.0, 300.0);
    const BathSpec br{Brownian::from_effective_frequency(200.0, 100.0, 1000.0), 300.0};
    const std::vector<FeatureSet> sets{decompose_dl(dl_bath, matsubara_pole_series(0, 300.0)),
                                       decompose_dl(dl_bath, pade_pole_series(1, 300.0)),
                                       decompose_brownian(br, matsubara_pole_series(0, 300.0))};
    double worst = 0.0;
    for (const auto& fs : sets)
        for (int N = 2; N <= 4; ++N) {
            const std::vector<BathCoupling> baths{{sys.couplings[0].Q, fs}};
            const HierarchySpec hs{N, {}, {}};
            const HeomGenerator gen(sys.H, baths, hs);
            const Matrix R = oracle::restricted_heom_generator(gen, sys.H, baths, hs);
            Eigen::VectorXcd x = Eigen::VectorXcd::Zero(R.cols()), y;
            for (Eigen::Index j = 0; j < R.cols(); ++j) {
                x[j] = 1.0;
                gen.apply(0.0, x, y);
                worst = std::max(worst, (y - R.col(j)).cwiseAbs().maxCoeff());
                x[j] = 0.0;
            }
        }
    c.require(worst < 1e-12, "HEOM generator vs dense (d = 2, K <= 2, N <= 4): " + sci(worst) + " < 1e-12");

    const auto tl = two_level(200.0, 1000.0);
    const auto bath = discretize_equalized(dl_bath, 2, 1000.0);
    const std::vector<int> dims{2, 4, 2, 2};
    const auto H = build_hamiltonian(tl.H, {{tl.couplings[0].Q, bath}}, dims);
    const Matrix Hd = oracle::dense_hamiltonian(tl.H, {{tl.couplings[0].Q, bath}}, dims);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    Vector psi0(H.dim());
    for (auto& v : psi0) v = cplx(g(rng), g(rng));
    psi0.normalize();
    WaveState s{psi0, 0.0};
    double kworst = 0.0;
    for (int step = 1; step <= 400; ++step) {
        propagate_krylov(H, s, 0.25);
        if (step % 20 == 0) {
            const Matrix U = (cplx(0.0, -oracle::a_conv * s.time) * Hd).exp();
            kworst = std::max(kworst, (s.amplitudes - U * psi0).cwiseAbs().maxCoeff());
        }
    }
    c.require(H.dim() == 64 && kworst < 1e-9,
              "Krylov vs dense expm (dim " + std::to_string(H.dim()) + ", 100 fs): " + sci(kworst) + " < 1e-9");
    return c;
}

Check fmo_properties() {
    Check c;
    const auto traj = run_config("fmo_heom.yaml");
    double drift = 0.0, herm = 0.0, psum = 0.0;
    for (const auto& p : traj) {
        drift = std::max(drift, std::abs(p.rho.trace() - 1.0));
        herm = std::max(herm, hermiticity_error(p.rho));
        psum = std::max(psum, std::abs(p.rho.diagonal().real().sum() - 1.0));
    }
    c.require(traj.back().t == 1000.0, "window [0, 1000] fs");
    c.require(drift < 1e-5, "trace drift " + sci(drift) + " < 1e-5");
    c.require(herm < 1e-7, "Hermiticity " + sci(herm) + " < 1e-7");
    c.require(psum < 1e-5, "population sum " + sci(psum) + " < 1e-5");
    const double p1_0 = traj.front().rho(0, 0).real(), p1_end = traj.back().rho(0, 0).real();
    c.require(p1_0 == 1.0 && traj[1].rho(0, 0).real() < 1.0 && p1_end < p1_0,
              "site 1 population " + fmt("%.3f", p1_0) + " -> " + fmt("%.3f", p1_end));
    // p1 - p2 falls, turns back up, then falls again within 300 fs
    std::vector<double> d;
    for (const auto& p : traj)
        if (p.t <= 300.0) d.push_back(p.rho(0, 0).real() - p.rho(1, 1).real());
    std::size_t kmin = 0, kmax = 0;
    for (std::size_t k = 1; k + 1 < d.size(); ++k) {
        if (!kmin && d[k] < d[k - 1] && d[k] <= d[k + 1])
            kmin = k;
        else if (kmin && d[k] > d[k - 1] && d[k] >= d[k + 1] && d[k] - d[kmin] > 1e-3) {
            kmax = k;
            break;
        }
    }
    c.require(kmin && kmax, kmax ? "p1 - p2 minimum " + fmt("%.3f", d[kmin]) + " at " + fmt("%.0f", traj[kmin].t) +
                                       " fs, maximum " + fmt("%.3f", d[kmax]) + " at " + fmt("%.0f", traj[kmax].t) + " fs"
                                 : std::string("no oscillation of p1 - p2 within 300 fs"));
    return c;
}

Check recurrence() {
    Check c;
    const auto cfg = load_config(config_dir + "/recurrence_tdse_j8.yaml");
    c.require(resolve_discrete_bath(cfg).size() == 8, "J = 8");
    const auto traj = run(cfg).trajectory;
    std::vector<double> P;
    for (const auto& p : traj) P.push_back(purity(p.rho));
    // first local minimum once purity has dropped by 1e-2
    std::size_t k1 = 0;
    for (std::size_t k = 1; k + 1 < P.size(); ++k)
        if (P[k] < 1.0 - 1e-2 && P[k] < P[k - 1] && P[k] <= P[k + 1]) {
            k1 = k;
            break;
        }
    c.require(k1 > 0, "initial decay to " + fmt("%.4f", P[k1]) + " at " + fmt("%.0f", traj[k1].t) + " fs");
    if (k1 == 0) return c;
    std::size_t back = 0, earlier = 0;
    for (std::size_t k2 = k1 + 1; k2 < P.size() && !back; ++k2)
        for (std::size_t k = 0; k < k1; ++k)
            if (P[k] >= P[k1] + 2e-2 && std::abs(P[k2] - P[k]) < 1e-2) {
                back = k2, earlier = k;
                break;
            }
    c.require(back > 0, back ? "purity " + fmt("%.4f", P[back]) + " at " + fmt("%.0f", traj[back].t) +
                                   " fs within 1e-2 of " + fmt("%.4f", P[earlier]) + " at " +
                                   fmt("%.0f", traj[earlier].t) + " fs"
                             : std::string("no return of purity"));
    c.detail += "; rho_ee(500 fs) = " + fmt("%.4f", traj.back().rho(1, 1).real());
    return c;
}

} // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<const char*, std::function<Check()>>> criteria{
        {1, {"pure dephasing, HEOM vs analytic", pure_dephasing_heom}},
        {2, {"pure dephasing, TDSE vs discrete closed form", pure_dephasing_tdse}},
        {3, {"relaxation equilibrium, HEOM", relaxation_equilibrium}},
        {4, {"rate correction formula", rate_correction_formula}},
        {5, {"discretization quality", discretization_quality}},
        {6, {"BCF reconstruction", bcf_reconstruction}},
        {7, {"dense oracle equivalence", dense_oracles}},
        {8, {"FMO properties, HEOM", fmo_properties}},
        {9, {"finite-bath recurrence, TDSE", recurrence}},
    };
    std::vector<int> pick;
    for (int i = 1; i < argc; ++i) pick.push_back(std::stoi(argv[i]));
    if (pick.empty())
        for (const auto& [k, v] : criteria) pick.push_back(k);

    int failed = 0;
    for (int k : pick) {
        const auto it = criteria.find(k);
        if (it == criteria.end()) {
            std::fprintf(stderr, "unknown criterion %d\n", k);
            return 64;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Check c;
        try {
            c = it->second.second();
        } catch (const std::exception& e) {
            c.pass = false;
            c.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d %s: %s (%s) [%.1f s]\n", k, c.pass ? "PASS" : "FAIL", it->second.first, c.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failed += !c.pass;
    }
    return failed;
}
