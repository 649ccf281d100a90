#include "fobs/error.hpp"
#include "fobs/synthesis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace fobs;

namespace {

using cd = std::complex<double>;

const SystemDef kBatch = builtin_batch_reactor(1, 0.5, 0.3);

LinearSystemDef double_integrator() { return load_linear_system(FOBS_DATA_DIR "/double_integrator.json"); }

PsiRepresentation batch_psi() { return load_psi(FOBS_DATA_DIR "/psi_batch.json"); }

bool same_on_box(const Expr& a, const Expr& b, const Box& box, const Bindings& fixed = {}) {
    return equivalent_numeric(a, b, box, 100, 42, 1e-12, fixed).equivalent;
}

} // namespace

TEST(Poles, Expansion) {
    const auto a1 = poles_to_alphas({cd{-2}});
    EXPECT_EQ(a1.alpha, std::vector<double>{2});
    EXPECT_TRUE(a1.hurwitz);
    EXPECT_EQ(poles_to_alphas({cd{-1, 1}, cd{-1, -1}}).alpha, (std::vector<double>{2, 2}));
    EXPECT_EQ(poles_to_alphas({cd{-1}, cd{-2}, cd{-3}}).alpha, (std::vector<double>{6, 11, 6}));
}

TEST(Poles, HurwitzFlagAndClosure) {
    EXPECT_FALSE(poles_to_alphas({cd{1}}).hurwitz);
    EXPECT_FALSE(poles_to_alphas({cd{0, 1}, cd{0, -1}}).hurwitz);
    EXPECT_THROW(poles_to_alphas({cd{-1, 1}}), ValidationError);
    EXPECT_THROW(poles_to_alphas({cd{-1, 1}, cd{-1, 2}}), ValidationError);
    EXPECT_THROW(poles_to_alphas({}), ValidationError);
}

TEST(Poles, RootRoundTrip) {
    const std::vector<cd> poles{cd{-0.5}, cd{-1, 2}, cd{-1, -2}, cd{-3}};
    auto roots = polynomial_roots(poles_to_alphas(poles).alpha);
    ASSERT_EQ(roots.size(), poles.size());
    for (const auto& p : poles) {
        const auto it = std::min_element(roots.begin(), roots.end(),
                                         [&](cd a, cd b) { return std::abs(a - p) < std::abs(b - p); });
        EXPECT_LE(std::abs(*it - p), 1e-9);
        roots.erase(it);
    }
}

TEST(Poles, ParseList) {
    const auto p = parse_poles("-2, -1+1i,-1-1i, -3e-1, 2.5j, -i");
    ASSERT_EQ(p.size(), 6u);
    EXPECT_EQ(p[0], cd(-2, 0));
    EXPECT_EQ(p[1], cd(-1, 1));
    EXPECT_EQ(p[2], cd(-1, -1));
    EXPECT_EQ(p[3], cd(-0.3, 0));
    EXPECT_EQ(p[4], cd(0, 2.5));
    EXPECT_EQ(p[5], cd(0, -1));
    EXPECT_THROW(parse_poles("-2,,"), ValidationError);
    EXPECT_THROW(parse_poles("abc"), ValidationError);
}

TEST(SynthesizeNonlinear, BatchReactorMatchesClosedForm) {
    const auto obs = synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{-2}}));
    // dzhat/dt - lambda zhat = -(1 + lambda/k1)(dy/dt + k2 y^2) with lambda = -2.
    const Expr closed_form = parse("-(1 + (-2)/k1)*(w1_1 + k2*w0_1^2)");
    const Box box{{"k1", {0.5, 2}}, {"k2", {0.1, 1}}, {"w0_1", {0, 2}}, {"w1_1", {-2, 2}}};
    EXPECT_TRUE(same_on_box(obs.T, closed_form, box));
    EXPECT_EQ(obs.v, 1);
}

TEST(SynthesizeNonlinear, ZeroPsi) {
    const auto obs = synthesize_nonlinear(PsiRepresentation{1, {parse("0"), parse("0")}}, poles_to_alphas({cd{-1}}));
    EXPECT_TRUE(obs.T.is_zero());
}

TEST(SynthesizeNonlinear, CstrMatchesClosedForm) {
    const SystemDef sys = builtin_cstr();
    const double lambda = -1.0;
    const auto obs = synthesize_nonlinear(load_psi(FOBS_DATA_DIR "/psi_cstr.json"), poles_to_alphas({cd{lambda}}));
    // Closed-form right-hand side with the 1/k(theta) factors.
    const Expr G = parse("w1_1 - FV*(thetain - w0_1) + UAV*(w0_1 - w0_2)");
    const Expr k = parse("k0*exp(-ER/w0_1)");
    const Expr closed_form = simplify(parse("FV*cAin") - (Expr::integer(1) + (parse("FV") + Expr::real(lambda)) / k) * G /
                                                       parse("J"));
    const Box box{{"w0_1", {0.8, 1.6}}, {"w0_2", {0.6, 1.4}}, {"w1_1", {-2, 2}}};
    EXPECT_TRUE(same_on_box(obs.T, closed_form, box, sys.params));
}

TEST(SynthesizeNonlinear, Rejections) {
    EXPECT_THROW(synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{-1}, cd{-2}})), ValidationError);
    EXPECT_THROW(synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{1}})), UnstableError);
    EXPECT_NO_THROW(synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{1}}), true));
}

TEST(VerifyInvariance, Examples) {
    const auto obs = synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{-2}}));
    const auto r = verify_invariance(kBatch, obs, 100, 42, 1e-12);
    EXPECT_TRUE(r.pass);
    EXPECT_LE(r.report.max_residual, 1e-12);

    auto bad = obs;
    bad.T = obs.T + Expr::real(1e-3);
    const auto rb = verify_invariance(kBatch, bad, 100, 42, 1e-12);
    EXPECT_FALSE(rb.pass);
    EXPECT_NEAR(rb.report.max_residual, 1e-3, 1e-12);

    const SystemDef cstr = builtin_cstr();
    const auto oc = synthesize_nonlinear(load_psi(FOBS_DATA_DIR "/psi_cstr.json"), poles_to_alphas({cd{-1}}));
    const auto rc = verify_invariance(cstr, oc, 100, 42, 1e-9);
    EXPECT_TRUE(rc.pass);
    EXPECT_LE(rc.report.max_residual, 1e-9);
}

TEST(LinearIndex, Examples) {
    EXPECT_EQ(linear_functional_index(double_integrator(), 3), 1);

    LinearSystemDef qh = double_integrator();
    qh.q = qh.H;
    EXPECT_EQ(linear_functional_index(qh, 3), 1);

    // Measured block (x1, x2) decoupled from an unmeasured x3.
    LinearSystemDef blocked;
    blocked.F = Eigen::MatrixXd{{0, 1, 0}, {-1, 0, 0}, {0, 0, -1}};
    blocked.H = Eigen::MatrixXd{{1, 0, 0}};
    blocked.q = Eigen::RowVectorXd{{0, 0, 1}};
    EXPECT_FALSE(linear_functional_index(blocked, 4).has_value());
}

TEST(ComputeM, DoubleIntegrator) {
    const auto m = compute_M(double_integrator(), 1);
    EXPECT_TRUE(m.M.isApprox(Eigen::MatrixXd{{0, 1}, {0, 0}}));
    EXPECT_LE(m.residual, 1e-12);
}

TEST(ComputeM, OutputFunctional) {
    LinearSystemDef qh = double_integrator();
    qh.q = qh.H;
    const auto m = compute_M(qh, 1);
    EXPECT_LE((m.M - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ComputeM, ConstructiveOracle) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    LinearSystemDef l;
    l.F = Eigen::MatrixXd::NullaryExpr(4, 4, [&] { return u(rng); });
    l.H = Eigen::MatrixXd::NullaryExpr(2, 4, [&] { return u(rng); });
    // q in the row space of [H; HF] reaches every higher power through F.
    const Eigen::MatrixXd O1 = measurement_stack(l, 1);
    l.q = 0.3 * O1.row(0) - 1.2 * O1.row(3);
    const int v = linear_functional_index(l, 3).value();
    const auto m = compute_M(l, v);
    EXPECT_LE((m.M * measurement_stack(l, v) - functional_stack(l, v)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ComputeM, RejectsInvalidIndex) {
    LinearSystemDef blocked;
    blocked.F = Eigen::MatrixXd{{0, 1, 0}, {-1, 0, 0}, {0, 0, -1}};
    blocked.H = Eigen::MatrixXd{{1, 0, 0}};
    blocked.q = Eigen::RowVectorXd{{0, 0, 1}};
    EXPECT_THROW(compute_M(blocked, 2), ValidationError);
}

TEST(Betas, Examples) {
    const double a = 3.0;
    const auto alphas = poles_to_alphas({cd{-a}});
    const auto betas = compute_betas(Eigen::MatrixXd{{0, 1}, {0, 0}}, alphas);
    EXPECT_EQ(betas[0](0), a);
    EXPECT_EQ(betas[1](0), 0.0);

    for (const auto& b : compute_betas(Eigen::MatrixXd::Zero(2, 2), alphas)) EXPECT_EQ(b(0), 0.0);
    EXPECT_THROW(compute_betas(Eigen::MatrixXd::Zero(3, 2), alphas), ValidationError);

    // qF + a q = beta_0 HF + beta_1 H.
    const auto l = double_integrator();
    const Eigen::RowVectorXd lhs = l.q * l.F + a * l.q;
    const Eigen::RowVectorXd rhs = betas[0] * l.H * l.F + betas[1] * l.H;
    EXPECT_EQ(lhs, rhs);
}

TEST(Realization, Examples) {
    const double a = 2.5;
    const auto alphas = poles_to_alphas({cd{-a}});
    const std::vector<Eigen::RowVectorXd> betas{Eigen::RowVectorXd::Constant(1, a), Eigen::RowVectorXd::Zero(1)};
    const auto obs = linear_realization(alphas, betas);
    EXPECT_EQ(obs.A(0, 0), -a);
    EXPECT_EQ(obs.B(0, 0), -a * a);
    EXPECT_EQ(obs.C(0), 1.0);
    EXPECT_EQ(obs.D(0), a);

    const auto zero = linear_realization(alphas, {Eigen::RowVectorXd::Zero(2), Eigen::RowVectorXd::Zero(2)});
    EXPECT_EQ(zero.B.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(zero.D.cwiseAbs().maxCoeff(), 0.0);

    const auto a2 = alphas_from_coefficients({3, 2});
    const std::vector<Eigen::RowVectorXd> b2(3, Eigen::RowVectorXd::Ones(1));
    const auto o2 = linear_realization(a2, b2);
    EXPECT_EQ(o2.A, (Eigen::MatrixXd{{0, -2}, {1, -3}}));
    EXPECT_EQ(o2.C, (Eigen::RowVectorXd{{0, 1}}));
    EXPECT_EQ(o2.B, (Eigen::MatrixXd{{1 - 2}, {1 - 3}}));
}

TEST(SynthesizeLinear, DoubleIntegrator) {
    const auto obs = synthesize_linear(double_integrator(), {cd{-3}}, 3);
    EXPECT_EQ(obs.A, Eigen::MatrixXd::Constant(1, 1, -3));
    EXPECT_EQ(obs.B, Eigen::MatrixXd::Constant(1, 1, -9));
    EXPECT_EQ(obs.C, Eigen::RowVectorXd::Constant(1, 1));
    EXPECT_EQ(obs.D, Eigen::RowVectorXd::Constant(1, 3));
    EXPECT_LE(linear_identity_residual(double_integrator(), obs), 1e-14);
    EXPECT_THROW(synthesize_linear(double_integrator(), {cd{3}}, 3), UnstableError);
}

TEST(SynthesizeLinear, HigherOrderThanIndex) {
    const auto l = double_integrator();
    const auto obs = synthesize_linear(l, {cd{-1}, cd{-2}}, 3);
    EXPECT_EQ(obs.v, 2);
    EXPECT_LE(linear_identity_residual(l, obs), 1e-10);
}

TEST(SynthesizeLinear, IdentityHoldsOnRandomSystems) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    int synthesized = 0;
    for (int trial = 0; trial < 30; ++trial) {
        LinearSystemDef l;
        const int n = 2 + trial % 4;
        l.F = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
        l.H = Eigen::MatrixXd::NullaryExpr(1 + trial % 2, n, [&] { return u(rng); });
        l.q = Eigen::RowVectorXd::NullaryExpr(n, [&] { return u(rng); });
        const auto v = linear_functional_index(l, 3);
        if (!v) continue;
        std::vector<cd> poles;
        for (int k = 1; k <= *v; ++k) poles.emplace_back(-k);
        const auto obs = synthesize_linear(l, poles, 3);
        EXPECT_LE(linear_identity_residual(l, obs), 1e-10);
        ++synthesized;
    }
    EXPECT_GT(synthesized, 10);
}

TEST(ObserverJson, RoundTrip) {
    const auto nl = synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{-2}}));
    const auto text = observer_to_json(nl);
    EXPECT_FALSE(is_linear_observer_json(text));
    const auto back = parse_observer_io_json(text);
    EXPECT_EQ(back.T, nl.T);
    EXPECT_EQ(back.alphas.alpha, nl.alphas.alpha);

    const auto lin = synthesize_linear(double_integrator(), {cd{-1, 1}, cd{-1, -1}}, 3);
    const auto ltext = observer_to_json(lin);
    EXPECT_TRUE(is_linear_observer_json(ltext));
    const auto lback = parse_linear_observer_json(ltext);
    EXPECT_EQ(lback.A, lin.A);
    EXPECT_EQ(lback.B, lin.B);
    EXPECT_EQ(lback.C, lin.C);
    EXPECT_EQ(lback.D, lin.D);
    EXPECT_THROW(parse_observer_io_json(R"({"v": 1})"), ValidationError);
}
