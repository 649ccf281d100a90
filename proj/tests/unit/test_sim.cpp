#include "fobs/error.hpp"
#include "fobs/sim.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace fobs;

namespace {

using cd = std::complex<double>;

const SystemDef kBatch = builtin_batch_reactor(1, 0.5, 0.3);
const std::vector<double> kX0{1, 0.2, 0};

ObserverIO batch_observer(double lambda) {
    return synthesize_nonlinear(load_psi(FOBS_DATA_DIR "/psi_batch.json"), poles_to_alphas({cd{lambda}}), true);
}

LinearSystemDef double_integrator() { return load_linear_system(FOBS_DATA_DIR "/double_integrator.json"); }

} // namespace

TEST(IntegratePlant, ClosedFormFirstState) {
    const auto tr = integrate_plant(kBatch, kX0, 1.0, 1e-3);
    ASSERT_EQ(tr.size(), 1001u);
    EXPECT_FALSE(tr.event);
    EXPECT_LE(std::abs(tr.x.back()[0] - std::exp(-1.0)), 1e-10);
    EXPECT_DOUBLE_EQ(tr.t.back(), 1.0);
    EXPECT_TRUE(std::isnan(tr.zhat[0]));
}

TEST(IntegratePlant, ZeroFieldIsConstant) {
    SystemDef sys = kBatch;
    sys.f = {parse("0"), parse("0"), parse("0")};
    const auto tr = integrate_plant(sys, kX0, 0.5, 1e-2);
    for (const auto& x : tr.x) EXPECT_EQ(x, kX0);
}

TEST(IntegratePlant, FirstStateNonincreasing) {
    const auto tr = integrate_plant(kBatch, kX0, 5.0);
    for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_LE(tr.x[k][0], tr.x[k - 1][0]);
    for (std::size_t k = 0; k < tr.size(); ++k) EXPECT_EQ(tr.z[k], tr.x[k][0]);
}

TEST(IntegratePlant, Preconditions) {
    EXPECT_THROW(integrate_plant(kBatch, kX0, 1.0, 0.0), ValidationError);
    EXPECT_THROW(integrate_plant(kBatch, kX0, 1e-4, 1e-3), ValidationError);
    EXPECT_THROW(integrate_plant(kBatch, std::vector<double>{1, 2}, 1.0), ValidationError);
}

TEST(IntegratePlant, DomainExitTruncates) {
    SystemDef sys;
    sys.states = {"x"};
    sys.f = {parse("-1")};
    sys.h = {parse("x")};
    sys.q = parse("ln(x)");
    sys.box = {{"x", {0.1, 1}}};
    const auto tr = integrate_plant(sys, std::vector<double>{0.5}, 1.0, 1e-2);
    EXPECT_TRUE(tr.event);
    EXPECT_LT(tr.size(), 101u);
    EXPECT_EQ(tr.x.size(), tr.size());
    EXPECT_EQ(tr.z.size(), tr.size());
}

TEST(IntegratePlant, Rk4Order) {
    const auto ref = integrate_plant(kBatch, kX0, 2.0, 1e-5).x.back();
    const auto err = [&](double dt) {
        const auto x = integrate_plant(kBatch, kX0, 2.0, dt).x.back();
        double m = 0;
        for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - ref[i]));
        return m;
    };
    const double ratio = err(0.1) / err(0.05);
    EXPECT_GE(ratio, 10.0);
    EXPECT_LE(ratio, 24.0);
}

TEST(SimulateCoupled, ExactInitStaysOnManifold) {
    const auto obs = batch_observer(-2);
    const auto tr = simulate_coupled(kBatch, obs, kX0, exact_chain_init(kBatch, 1, kX0), 5.0);
    EXPECT_LE(tr.max_abs_error(), 1e-7);
}

TEST(SimulateCoupled, ErrorFollowsAssignedPole) {
    const auto tr = simulate_coupled(kBatch, batch_observer(-2), kX0, {0.0}, 5.0);
    EXPECT_DOUBLE_EQ(tr.err[0], -1.0);
    for (std::size_t k = 0; k < tr.size(); k += 100) EXPECT_NEAR(tr.err[k], -std::exp(-2 * tr.t[k]), 1e-6);
}

TEST(SimulateCoupled, UnstableOverrideGrows) {
    const auto tr = simulate_coupled(kBatch, batch_observer(1), kX0, {0.0}, 3.0);
    EXPECT_NEAR(error_decay_fit(tr, 1, 3), 1.0, 1e-3);
}

TEST(SimulateCoupled, DivergenceEvent) {
    const auto tr = simulate_coupled(kBatch, batch_observer(4), kX0, {0.0}, 20.0);
    EXPECT_TRUE(tr.event);
    EXPECT_GT(std::abs(tr.zhat.back()), kDivergenceCutoff);
    EXPECT_LT(tr.t.back(), 20.0);
}

TEST(SimulateCoupled, ChainLengthChecked) {
    EXPECT_THROW(simulate_coupled(kBatch, batch_observer(-2), kX0, {0.0, 1.0}, 1.0), ValidationError);
}

TEST(SimulateCustom, StateSpaceRealizationMatchesChain) {
    const double lambda = -2.0;
    const double k1 = 1.0;
    const std::string g = "(1 + (" + std::to_string(lambda) + ")/k1)";
    const Expr sigma = parse(std::to_string(lambda) + "*xi1 - " + g + "*(" + std::to_string(lambda) + "*y1 + k2*y1^2)");
    const Expr omega = parse("xi1 - " + g + "*y1");
    // zhat(0) = 0 => xi(0) = (1 + lambda/k1) y(0).
    const std::vector<double> xi0{(1 + lambda / k1) * kX0[1]};
    const auto ss = simulate_custom_observer(kBatch, {sigma}, omega, kX0, xi0, 5.0);
    const auto ch = simulate_coupled(kBatch, batch_observer(lambda), kX0, {0.0}, 5.0);
    ASSERT_EQ(ss.size(), ch.size());
    double m = 0;
    for (std::size_t k = 0; k < ss.size(); ++k) m = std::max(m, std::abs(ss.zhat[k] - ch.zhat[k]));
    EXPECT_LE(m, 1e-8);
}

TEST(SimulateCustom, FrozenStateAndManifold) {
    const auto frozen = simulate_custom_observer(kBatch, {parse("0")}, parse("xi1"), kX0, std::vector<double>{0.7}, 1.0);
    for (double z : frozen.zhat) EXPECT_EQ(z, 0.7);

    // xi = zhat + (1 - 2/k1) y started at zhat(0) = q(x0).
    const Expr sigma = parse("-2*xi1 - (1 - 2/k1)*(-2*y1 + k2*y1^2)");
    const Expr omega = parse("xi1 - (1 - 2/k1)*y1");
    const std::vector<double> xi0{kX0[0] + (1 - 2.0) * kX0[1]};
    const auto tr = simulate_custom_observer(kBatch, {sigma}, omega, kX0, xi0, 5.0);
    EXPECT_LE(tr.max_abs_error(), 1e-7);
}

TEST(SimulateCustom, UnknownSymbolRejected) {
    EXPECT_THROW(simulate_custom_observer(kBatch, {parse("cA")}, parse("xi1"), kX0, std::vector<double>{0}, 1.0),
                 ValidationError);
}

TEST(SimulateLinear, DoubleIntegrator) {
    const auto l = double_integrator();
    const auto obs = synthesize_linear(l, {cd{-3}}, 3);
    const auto tr = simulate_linear_observer(l, obs, std::vector<double>{0, 1}, std::vector<double>{0}, 5.0);
    EXPECT_DOUBLE_EQ(tr.err[0], -1.0);
    for (std::size_t k = 0; k < tr.size(); k += 50) EXPECT_NEAR(tr.err[k], -std::exp(-3 * tr.t[k]), 1e-8);
}

TEST(SimulateLinear, ExactInit) {
    const auto l = double_integrator();
    const auto obs = synthesize_linear(l, {cd{-1}, cd{-2}}, 3);
    const std::vector<double> x0{0.3, -0.8};
    const Eigen::VectorXd xi0 = exact_linear_init(l, obs, x0);
    const auto e0 = linear_initial_error_derivatives(l, obs, x0, {xi0.data(), 2});
    EXPECT_LE(std::abs(e0[0]) + std::abs(e0[1]), 1e-14);
    const auto tr = simulate_linear_observer(l, obs, x0, {xi0.data(), 2}, 10.0);
    EXPECT_LE(tr.max_abs_error(), 1e-9);
}

TEST(SimulateLinear, DominantPoleSlope) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1, 1);
    LinearSystemDef l;
    l.F = Eigen::MatrixXd::NullaryExpr(5, 5, [&] { return u(rng); });
    const double abscissa = l.F.eigenvalues().real().maxCoeff();
    l.F -= (abscissa + 0.5) * Eigen::MatrixXd::Identity(5, 5);
    l.H = Eigen::MatrixXd::NullaryExpr(2, 5, [&] { return u(rng); });
    l.q = Eigen::RowVectorXd::NullaryExpr(5, [&] { return u(rng); });
    ASSERT_EQ(linear_functional_index(l, 3), 2);
    const auto obs = synthesize_linear(l, {cd{-1}, cd{-2}}, 3);
    const std::vector<double> x0{0.5, -0.2, 0.1, 0.9, -0.4};
    // e = c1 e^-t + c2 e^-2t; the window [2, 6] sees the slow mode within 2%
    // only while the fast one carries comparable weight.
    const std::vector<double> xi0{1.0, 0.0};
    const auto e0 = linear_initial_error_derivatives(l, obs, x0, xi0);
    const double c1 = 2 * e0[0] + e0[1], c2 = -(e0[0] + e0[1]);
    ASSERT_LE(std::abs(c2 / c1), 1.0);
    const auto tr = simulate_linear_observer(l, obs, x0, xi0, 6.0);
    EXPECT_NEAR(error_decay_fit(tr, 2, 6), -1.0, 0.02);
}

TEST(SimulateLinear, ChainFormAgrees) {
    const auto l = double_integrator();
    const auto obs = synthesize_linear(l, {cd{-1, 1}, cd{-1, -1}}, 3);
    const std::vector<double> x0{0.3, -0.8}, xi0{0.5, -0.1};
    const auto lin = simulate_linear_observer(l, obs, x0, xi0, 5.0);

    const SystemDef sys = as_system(l);
    const auto e0 = linear_initial_error_derivatives(l, obs, x0, xi0);
    ChainState chain0 = exact_chain_init(sys, 2, x0);
    for (std::size_t k = 0; k < chain0.size(); ++k) chain0[k] += e0[k];
    const auto ch = simulate_coupled(sys, as_observer_io(obs), x0, chain0, 5.0);
    double m = 0;
    for (std::size_t k = 0; k < lin.size(); ++k) m = std::max(m, std::abs(lin.zhat[k] - ch.zhat[k]));
    EXPECT_LE(m, 1e-8);
}

TEST(ExactError, Examples) {
    EXPECT_NEAR(exact_error_solution(poles_to_alphas({cd{-2}}), std::vector<double>{-1}, 2), -std::exp(-4.0), 1e-15);
    EXPECT_NEAR(exact_error_solution(alphas_from_coefficients({2, 1}), std::vector<double>{1, 0}, 1),
                2 * std::exp(-1.0), 1e-13);
    EXPECT_EQ(exact_error_solution(poles_to_alphas({cd{-1}, cd{-5}}), std::vector<double>{0, 0}, 3), 0.0);
    EXPECT_THROW(exact_error_solution(poles_to_alphas({cd{-1}}), std::vector<double>{0, 0}, 1), ValidationError);
}

TEST(ExactError, MatchesCoupledSimulation) {
    const auto obs = batch_observer(-0.5);
    const auto tr = simulate_coupled(kBatch, obs, kX0, {0.3}, 10.0);
    const auto e0 = initial_error_derivatives(kBatch, kX0, {0.3});
    for (std::size_t k = 0; k < tr.size(); k += 250) {
        EXPECT_NEAR(tr.err[k], exact_error_solution(obs.alphas, e0, tr.t[k]), 1e-6);
    }
}

TEST(DecayFit, Examples) {
    EXPECT_NEAR(error_decay_fit(simulate_coupled(kBatch, batch_observer(-2), kX0, {0.0}, 5.0), 1, 5), -2.0, 0.02);
    EXPECT_NEAR(error_decay_fit(simulate_coupled(kBatch, batch_observer(-0.5), kX0, {0.0}, 10.0), 1, 10), -0.5,
                0.005);
    const auto exact = simulate_coupled(kBatch, batch_observer(-2), kX0, exact_chain_init(kBatch, 1, kX0), 1.0);
    EXPECT_THROW(error_decay_fit(exact, 0, 1), ValidationError);
}

TEST(DecayFit, OscillatoryWindowRejected) {
    const auto l = double_integrator();
    const auto obs = synthesize_linear(l, {cd{-0.5, 3}, cd{-0.5, -3}}, 3);
    const auto tr = simulate_linear_observer(l, obs, std::vector<double>{0, 1}, std::vector<double>{0, 0}, 6.0);
    EXPECT_THROW(error_decay_fit(tr, 1, 6), ValidationError);
}

TEST(Csv, HeaderAndDeterminism) {
    const auto run = [] {
        std::ostringstream os;
        write_csv(os, simulate_coupled(kBatch, batch_observer(-2), kX0, {0.0}, 0.01));
        return os.str();
    };
    const std::string a = run();
    EXPECT_EQ(a, run());
    EXPECT_EQ(a.substr(0, a.find('\n')), "t,x1,x2,x3,y1,z,zhat,err");
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 12);
    EXPECT_NE(a.find("\n0.001,"), std::string::npos);

    std::ostringstream plant;
    write_csv(plant, integrate_plant(kBatch, kX0, 0.002, 1e-3));
    EXPECT_NE(plant.str().find(",nan,nan\n"), std::string::npos);
}
