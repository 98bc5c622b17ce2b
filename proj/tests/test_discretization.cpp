#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"

using namespace openbath;

namespace {

using oracle::a_conv;
using oracle::pi;

BathSpec dl_bath(double T = 300.0) { return {DrudeLorentz{200.0, 100.0}, T}; }

double gk(const BathSpec& spec, double lo, double hi, int p = 0) { return oracle::spectrum_integral(spec, lo, hi, p); }
double gk_abs(const BathSpec& spec, double lo, double hi, int p) { return oracle::spectrum_abs_integral(spec, lo, hi, p); }
using oracle::moment;

} // namespace

TEST(Logarithmic, SingleModeCollapse) {
    const auto b = discretize_logarithmic(dl_bath(), 1, 5.0, 1000.0);
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b.modes[0].omega, -5.0);
    EXPECT_EQ(b.modes[1].omega, 5.0);
    EXPECT_NEAR(b.modes[1].g, std::sqrt(effective_spectrum(dl_bath(), 5.0) * 500.0), 1e-12);
    EXPECT_NEAR(b.modes[0].g, std::sqrt(effective_spectrum(dl_bath(), -5.0) * 500.0), 1e-12);
}

TEST(Logarithmic, SymmetricGridAndSpacing) {
    const auto b = discretize_logarithmic(dl_bath(), 120, 0.01, 1000.0);
    ASSERT_EQ(b.size(), 240u);
    EXPECT_NO_THROW(validate(b));
    for (int k = 0; k < 120; ++k) EXPECT_EQ(b.modes[119 - k].omega, -b.modes[120 + k].omega);
    EXPECT_NEAR(b.modes[120].omega, 0.01, 1e-15);
    const double delta = std::log(1000.0 / 0.01) / 120.0;
    for (int k = 121; k < 240; ++k) EXPECT_NEAR(std::log(b.modes[k].omega / b.modes[k - 1].omega), delta, 1e-12);
    // second mode: width (w3 - w1)/2
    const double w1 = b.modes[120].omega, w2 = b.modes[121].omega, w3 = b.modes[122].omega;
    EXPECT_NEAR(b.modes[121].g * b.modes[121].g, effective_spectrum(dl_bath(), w2) * 0.5 * (w3 - w1), 1e-10);
    const double total = b.total_weight();
    EXPECT_TRUE(std::isfinite(total));
    EXPECT_GT(total, 0.0);
}

TEST(Logarithmic, InvalidRange) {
    EXPECT_THROW(discretize_logarithmic(dl_bath(), 10, 0.0, 1000.0), DomainError);
    EXPECT_THROW(discretize_logarithmic(dl_bath(), 10, 2000.0, 1000.0), DomainError);
    EXPECT_THROW(discretize_logarithmic(dl_bath(), 0, 1.0, 1000.0), DomainError);
}

TEST(Equalized, EqualBinsAndTotals) {
    const auto spec = dl_bath();
    const int K = 120;
    const auto b = discretize_equalized(spec, K, 1000.0);
    ASSERT_EQ(b.size(), 2u * K);
    EXPECT_NO_THROW(validate(b));
    const double A = gk(spec, 0.0, 1000.0), An = gk(spec, -1000.0, 0.0);
    double pos = 0.0, neg = 0.0;
    for (const auto& m : b.modes) (m.omega > 0 ? pos : neg) += m.g * m.g;
    EXPECT_NEAR(pos, A, 1e-9 * A);
    EXPECT_NEAR(neg, An, 1e-9 * An);
    // bins between consecutive edges carry A/K
    ASSERT_EQ(b.bin_edges.size(), 2u * K + 1);
    EXPECT_EQ(b.bin_edges.front(), -1000.0);
    EXPECT_EQ(b.bin_edges[K], 0.0);
    EXPECT_EQ(b.bin_edges.back(), 1000.0);
    for (int k = 0; k < 2 * K; ++k) {
        const double ref = k < K ? An / K : A / K;
        EXPECT_NEAR(gk(spec, b.bin_edges[k], b.bin_edges[k + 1]), ref, 1e-6 * ref) << k;
        EXPECT_GT(b.modes[k].omega, b.bin_edges[k]);
        EXPECT_LT(b.modes[k].omega, b.bin_edges[k + 1]);
    }
    // node-to-node intervals on the positive side, k >= 2
    for (int k = K + 1; k < 2 * K; ++k)
        EXPECT_NEAR(gk(spec, b.modes[k - 1].omega, b.modes[k].omega), A / K, 1e-6 * A / K);
    EXPECT_NEAR(gk(spec, 0.0, b.modes[K].omega), 0.5 * A / K, 1e-6 * A / K);
}

TEST(Equalized, HighTemperatureDensity) {
    // At kT / gamma = 50, C(w) ~ kT J(w)/w + J(w)/2. The bin edges should follow
    // that density closely and stay near the reorganization-energy equalized ones.
    const double T = 50.0 * 100.0 / 0.695034800;
    const auto spec = dl_bath(T);
    const double kT = thermal_energy(T);
    const int K = 40;
    const auto b = discretize_equalized(spec, K, 1000.0);
    auto edges_for = [&](auto density) {
        auto F = [&](double x) { return quad::integrate(density, 0.0, x, {1e-14, 1e-12}).value; };
        const double tot = F(1000.0);
        std::vector<double> e;
        for (int k = 1; k < K; ++k) {
            std::uintmax_t it = 200;
            auto r = boost::math::tools::bisect([&](double x) { return F(x) - tot * k / K; }, 0.0, 1000.0,
                                                boost::math::tools::eps_tolerance<double>(45), it);
            e.push_back(0.5 * (r.first + r.second));
        }
        return e;
    };
    const auto hi_t = edges_for([&](double w) { return spectral_density_over_omega(spec.model, w) * (kT + 0.5 * w); });
    const auto reorg = edges_for([&](double w) { return spectral_density_over_omega(spec.model, w); });
    double dev_hi = 0.0, dev_reorg = 0.0;
    for (int k = 1; k < K; ++k) {
        const double e = b.bin_edges[K + k];
        dev_hi = std::max(dev_hi, std::abs(e - hi_t[k - 1]) / e);
        dev_reorg = std::max(dev_reorg, std::abs(e - reorg[k - 1]) / e);
    }
    // next term of x coth x is x^2/3 with x = w/2kT <= 0.1
    EXPECT_LT(dev_hi, 4e-3);
    EXPECT_LT(dev_reorg, 0.1);
    EXPECT_LT(dev_hi, dev_reorg);
}

TEST(Bsdo, GaussProperties) {
    const auto spec = dl_bath();
    const int J = 6;
    const auto b = discretize_bsdo(spec, J, 1000.0);
    ASSERT_EQ(b.size(), 6u);
    const double mu = gk(spec, -1000.0, 1000.0);
    EXPECT_NEAR(b.total_weight(), mu, 1e-8 * mu);
    for (const auto& m : b.modes) {
        EXPECT_GT(m.omega, -1000.0);
        EXPECT_LT(m.omega, 1000.0);
    }
    for (int p = 1; p <= 2 * J - 1; ++p) {
        const double ref = gk(spec, -1000.0, 1000.0, p);
        const double scale = gk_abs(spec, -1000.0, 1000.0, p);
        EXPECT_NEAR(moment(b, p), ref, 1e-6 * scale) << "p=" << p;
    }
    // Gauss rule beats equalized placement at the same mode count
    const auto e = discretize_equalized(spec, J / 2, 1000.0);
    for (int p = 1; p <= 7; ++p) {
        const double ref = gk(spec, -1000.0, 1000.0, p);
        EXPECT_LT(std::abs(moment(b, p) - ref), std::abs(moment(e, p) - ref)) << "p=" << p;
    }
}

TEST(Convergence, TotalWeightByK240) {
    const auto spec = dl_bath();
    const double mu = gk(spec, -1000.0, 1000.0);
    EXPECT_NEAR(discretize_logarithmic(spec, 240, 0.01, 1000.0).total_weight(), mu, 5e-3 * mu);
    EXPECT_NEAR(discretize_equalized(spec, 240, 1000.0).total_weight(), mu, 5e-3 * mu);
    EXPECT_NEAR(discretize_bsdo(spec, 240, 1000.0).total_weight(), mu, 5e-3 * mu);
}

TEST(DiscreteBcf, EqualTimeAndRecurrence) {
    const auto spec = dl_bath();
    const auto b = discretize_equalized(spec, 120, 1000.0);
    const cplx c0 = discrete_bcf(b, 0.0);
    EXPECT_EQ(c0.imag(), 0.0);
    EXPECT_NEAR(c0.real(), b.total_weight(), 1e-9 * c0.real());
    const double truncated = gk(spec, -1000.0, 1000.0);
    EXPECT_LT(std::abs(c0.real() - truncated), 1e-2 * truncated);

    const auto b60 = discretize_equalized(spec, 60, 1000.0);
    const double c60 = discrete_bcf(b60, 0.0).real();
    bool recurred = false;
    // skip the initial decay, then scan to 10 ps
    for (double t = 1000.0; t <= 10000.0 && !recurred; t += 0.5)
        recurred = std::abs(discrete_bcf(b60, t)) > 0.1 * c60;
    EXPECT_TRUE(recurred);
}

TEST(WindowedSpectrum, SingleModeAndNormalization) {
    DiscreteBath one{{{500.0, 2.0}}, DiscretizationStrategy::Log, 1000.0, dl_bath(), 1, {}};
    const double s = 300.0;
    const double peak = windowed_spectrum(one, s, 500.0);
    EXPECT_GT(peak, windowed_spectrum(one, s, 499.0));
    EXPECT_GT(peak, windowed_spectrum(one, s, 501.0));
    const double width = window_width_wavenumber(s);
    EXPECT_NEAR(width, 1.0 / (a_conv * 300.0), 1e-12);
    EXPECT_NEAR(width, 17.7, 0.05);
    EXPECT_NEAR(windowed_spectrum(one, s, 500.0 + width) / peak, std::exp(-0.5), 1e-12);

    const auto b = discretize_equalized(dl_bath(), 60, 1000.0);
    double integral = 0.0;
    const double h = 0.05;
    for (double w = -1400.0; w <= 1400.0; w += h) {
        const double v = windowed_spectrum(b, s, w);
        EXPECT_GE(v, 0.0);
        integral += v * h;
    }
    EXPECT_NEAR(integral, discrete_bcf(b, 0.0).real(), 1e-8 * discrete_bcf(b, 0.0).real());
    EXPECT_THROW(windowed_spectrum(b, 0.0, 1.0), DomainError);
}

TEST(DephasingDiscrete, Basics) {
    DiscreteBath one{{{500.0, 100.0}}, DiscretizationStrategy::Log, 1000.0, dl_bath(), 1, {}};
    EXPECT_EQ(dephasing_coherence_discrete(one, 0.0), 1.0);
    const double period = 2.0 * pi / (a_conv * 500.0);
    EXPECT_NEAR(dephasing_coherence_discrete(one, period), 1.0, 1e-12);
    EXPECT_NEAR(dephasing_coherence_discrete(one, 0.5 * period), std::exp(-2.0 * 100.0 * 100.0 / (500.0 * 500.0)), 1e-12);
    DiscreteBath zero{{{0.0, 1.0}}, DiscretizationStrategy::Log, 1000.0, dl_bath(), 1, {}};
    EXPECT_THROW(dephasing_coherence_discrete(zero, 1.0), DomainError);
}

TEST(DephasingDiscrete, MatchesContinuum) {
    const auto spec = dl_bath();
    const auto b = discretize_equalized(spec, 120, 1000.0);
    double worst = 0.0;
    for (double t = 0.0; t <= 500.0; t += 5.0)
        worst = std::max(worst, std::abs(dephasing_coherence_discrete(b, t) - dephasing_coherence_exact(spec, t)));
    EXPECT_LT(worst, 1e-2);
}

TEST(DiscreteBathTable, RoundTrip) {
    const auto b = discretize_bsdo({Brownian::from_effective_frequency(200, 100, 1000), 300.0}, 8, 3000.0);
    std::stringstream ss;
    write_discrete_bath(ss, b);
    const auto r = read_discrete_bath(ss);
    ASSERT_EQ(r.size(), b.size());
    for (std::size_t j = 0; j < b.size(); ++j) {
        EXPECT_EQ(r.modes[j].omega, b.modes[j].omega);
        EXPECT_EQ(r.modes[j].g, b.modes[j].g);
    }
    EXPECT_EQ(r.strategy, DiscretizationStrategy::BSDO);
    EXPECT_EQ(r.cutoff, 3000.0);
    EXPECT_EQ(r.spec.temperature, 300.0);
    EXPECT_EQ(std::get<Brownian>(r.spec.model).Omega, std::get<Brownian>(b.spec.model).Omega);
    std::stringstream bad("# strategy log\n3 2\n1 2\n");
    EXPECT_THROW(read_discrete_bath(bad), DomainError);
}
