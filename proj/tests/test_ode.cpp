#include <gtest/gtest.h>

#include <cmath>

#include "openbath/ode.hpp"

using namespace openbath;

TEST(DormandPrince, HarmonicOscillatorAtRequestedTimes) {
    Eigen::VectorXcd y(2);
    y << 1.0, 0.0;
    auto f = [](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& d) {
        d.resize(2);
        d[0] = v[1];
        d[1] = -v[0];
    };
    std::vector<double> times{0.0, 0.5, 1.0, 3.0, 10.0};
    std::vector<double> seen;
    auto st = dormand_prince(f, y, 0.0, times, [&](double t, const Eigen::VectorXcd& v) {
        seen.push_back(t);
        EXPECT_NEAR(v[0].real(), std::cos(t), 1e-7);
        EXPECT_NEAR(v[1].real(), -std::sin(t), 1e-7);
    });
    EXPECT_EQ(seen, times);
    EXPECT_GT(st.accepted, 10u);
    EXPECT_EQ(st.rhs_calls, 1 + 6 * (st.accepted + st.rejected));
}

TEST(DormandPrince, FifthOrderConvergence) {
    auto run = [](double h) {
        Eigen::VectorXcd y(1);
        y << 1.0;
        auto f = [](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& d) { d = cplx(0.0, 1.0) * std::cos(t) * v; };
        OdeOptions o{1.0, 1.0, h, 1e-12, h};
        dormand_prince(f, y, 0.0, {2.0}, [](double, const Eigen::VectorXcd&) {}, o);
        return std::abs(y[0] - std::exp(cplx(0.0, std::sin(2.0))));
    };
    const double e1 = run(0.1), e2 = run(0.05);
    EXPECT_GT(e1 / e2, 20.0); // ~2^5
}

TEST(DormandPrince, UnderflowThrows) {
    Eigen::VectorXcd y(1);
    y << 1.0;
    auto f = [](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& d) { d = -1e9 * v.array().square().matrix(); };
    OdeOptions o{1e-12, 1e-14, 1e-3, 1e-6};
    EXPECT_THROW(dormand_prince(f, y, 0.0, {1.0}, [](double, const Eigen::VectorXcd&) {}, o), StiffnessError);
}

TEST(Lawson, StiffDiagonalIsExact) {
    // y' = lambda y + 1 per block; exact y = (y0 + 1/lambda) e^{lambda t} - 1/lambda
    Eigen::VectorXcd lambda(3);
    lambda << -1000.0, cplx(-50.0, 20.0), -0.1;
    Eigen::VectorXcd y = Eigen::VectorXcd::Ones(6);
    auto n = [](double, const Eigen::VectorXcd&, Eigen::VectorXcd& d) { d = Eigen::VectorXcd::Ones(6); };
    OdeStats st = lawson_dormand_prince(n, lambda, 2, y, 0.0, {5.0}, [](double, const Eigen::VectorXcd&) {}, {1e-10, 1e-12});
    for (int b = 0; b < 3; ++b) {
        const cplx l = lambda[b];
        const cplx ref = (1.0 + 1.0 / l) * std::exp(l * 5.0) - 1.0 / l;
        EXPECT_LT(std::abs(y[2 * b] - ref), 1e-9);
        EXPECT_LT(std::abs(y[2 * b + 1] - ref), 1e-9);
    }
    EXPECT_GT(st.accepted, 0u);
}

TEST(Lawson, HomogeneousStiffPartNeedsFewSteps) {
    Eigen::VectorXcd lambda(2);
    lambda << -1e4, cplx(-1.0, 300.0);
    Eigen::VectorXcd y = Eigen::VectorXcd::Ones(2);
    auto n = [](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& d) { d = Eigen::VectorXcd::Zero(v.size()); };
    OdeStats st = lawson_dormand_prince(n, lambda, 1, y, 0.0, {3.0}, [](double, const Eigen::VectorXcd&) {}, {1e-10, 1e-12});
    EXPECT_EQ(y[0], 0.0);
    EXPECT_LT(std::abs(y[1] - std::exp(lambda[1] * 3.0)), 1e-14);
    EXPECT_LT(st.accepted, 10u);
}

TEST(Lawson, MatchesPlainSchemeOnCoupledProblem) {
    Eigen::VectorXcd lambda(2);
    lambda << -3.0, -0.5;
    auto full = [&](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& d) {
        d.resize(2);
        d[0] = lambda[0] * v[0] + 0.7 * v[1] * std::cos(t);
        d[1] = lambda[1] * v[1] - 0.7 * v[0];
    };
    auto rest = [&](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& d) {
        d.resize(2);
        d[0] = 0.7 * v[1] * std::cos(t);
        d[1] = -0.7 * v[0];
    };
    Eigen::VectorXcd a(2), b(2);
    a << 1.0, 0.5;
    b = a;
    dormand_prince(full, a, 0.0, {4.0}, [](double, const Eigen::VectorXcd&) {}, {1e-12, 1e-14});
    lawson_dormand_prince(rest, lambda, 1, b, 0.0, {4.0}, [](double, const Eigen::VectorXcd&) {}, {1e-12, 1e-14});
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
}
