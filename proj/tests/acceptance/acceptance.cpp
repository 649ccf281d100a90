// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 on any FAIL.

#include "fobs/error.hpp"
#include "fobs/sim.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace fobs;

namespace {

using cd = std::complex<double>;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

const std::vector<double> kBatchX0{1, 0.2, 0};

SystemDef batch() { return builtin_batch_reactor(1, 0.5, 0.3); }
PsiRepresentation batch_psi() { return load_psi(FOBS_DATA_DIR "/psi_batch.json"); }
PsiRepresentation cstr_psi() { return load_psi(FOBS_DATA_DIR "/psi_cstr.json"); }
LinearSystemDef double_integrator() { return load_linear_system(FOBS_DATA_DIR "/double_integrator.json"); }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

// Batch reactor, k = (1, 0.5, 0.3), poles {-2}, zhat(0) = 0.
void batch_end_to_end(Outcome& out) {
    const SystemDef sys = batch();
    const auto rep = batch_psi();
    out.require(verify_psi(sys, rep, 100, 42, 1e-12).pass, "verify_psi");
    const auto obs = synthesize_nonlinear(rep, poles_to_alphas({cd{-2}}));

    const Expr closed_form = parse("-(1 + (-2)/k1)*(w1_1 + k2*w0_1^2)");
    const auto cmp = equivalent_numeric(substitute_measurements(sys, obs.T), substitute_measurements(sys, closed_form),
                                        sys.box, 100, 42, 1e-10, sys.params);
    out.require(cmp.equivalent && cmp.max_residual <= 1e-10, "T vs closed-form observer");

    const auto tr = simulate_coupled(sys, obs, kBatchX0, {0.0}, 5.0);
    double worst = 0;
    for (double t : {1.0, 2.0, 5.0}) worst = std::max(worst, std::abs(tr.err[tr.index_at(t)] + std::exp(-2 * t)));
    out.require(!tr.event && worst <= 1e-6, "error vs -exp(-2t)");
    const double rate = error_decay_fit(tr, 1, 5);
    out.require(std::abs(rate + 2) <= 0.02, "decay rate");
    out.detail << "T residual " << cmp.max_residual << ", max |e + exp(-2t)| at t=1,2,5: " << worst
               << ", fitted rate " << rate;
}

// Hand-derived state-space realization vs the chain form.
void batch_realization(Outcome& out) {
    const SystemDef sys = batch();
    const double lambda = -2.0, k1 = 1.0;
    const Expr sigma = parse("-2*xi1 - (1 + (-2)/k1)*(-2*y1 + k2*y1^2)");
    const Expr omega = parse("xi1 - (1 + (-2)/k1)*y1");
    const std::vector<double> xi0{(1 + lambda / k1) * kBatchX0[1]};
    const auto ss = simulate_custom_observer(sys, {sigma}, omega, kBatchX0, xi0, 5.0);
    const auto ch = simulate_coupled(sys, synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{lambda}})), kBatchX0,
                                     {0.0}, 5.0);
    const double d = max_abs_diff(ss.zhat, ch.zhat);
    out.require(ss.size() == ch.size() && !ss.event && !ch.event, "complete traces");
    out.require(d <= 1e-8, "zhat agreement");
    out.detail << "max |zhat_ss - zhat_chain| over [0,5]: " << d;
}

// CSTR with the default dimensionless constants, lambda = -1.
void cstr_end_to_end(Outcome& out) {
    const SystemDef sys = builtin_cstr();
    const auto rep = cstr_psi();
    const auto pv = verify_psi(sys, rep, 100, 42, 1e-8);
    out.require(pv.pass && pv.max_residual <= 1e-8, "verify_psi");
    const auto obs = synthesize_nonlinear(rep, poles_to_alphas({cd{-1}}));
    const auto inv = verify_invariance(sys, obs, 100, 42, 1e-8);
    out.require(inv.pass && inv.report.max_residual <= 1e-8, "invariance");

    const std::vector<double> x0{0.5, 1.0, 0.8};
    const auto tr = simulate_coupled(sys, obs, x0, {0.0}, 10.0);
    double worst = 0;
    for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, std::abs(tr.err[k] - tr.err[0] * std::exp(-tr.t[k])));
    out.require(!tr.event && worst <= 1e-5, "error vs e(0) exp(-t)");
    out.detail << "psi residual " << pv.max_residual << ", invariance residual " << inv.report.max_residual
               << ", max |e - e(0)exp(-t)| " << worst;
}

// cC is unobservable but z = cA is functionally observable with index 1.
void structural(Outcome& out) {
    const SystemDef sys = batch();
    const auto idx = observability_index(sys, 6, 100, 42);
    out.require(!idx.index.has_value(), "no observability index");
    bool saturated = true;
    for (std::size_t m = 1; m < idx.table.size(); ++m) saturated = saturated && idx.table[m].max_rank == 2;
    out.require(saturated && idx.table.size() == 6, "rank saturates at 2 for m = 2..6");
    const auto frc = functional_rank_check(sys, 2, 100, 42);
    out.require(frc.holds, "functional rank check");
    const auto cand = functional_index_candidate(sys, 3, 100, 42);
    out.require(cand.candidate == 1, "candidate v = 1");
    out.detail << "ranks m=1..6:";
    for (const auto& r : idx.table) out.detail << ' ' << r.max_rank;
    out.detail << "/3, functional check " << (frc.holds ? "holds" : "fails") << ", candidate v="
               << (cand.candidate ? std::to_string(*cand.candidate) : "none");
}

// Double integrator through the linear pipeline.
void linear_pipeline(Outcome& out) {
    const auto l = double_integrator();
    const double a = 3.0;
    const auto v = linear_functional_index(l, 4);
    out.require(v == 1, "v = 1");
    const auto m = compute_M(l, 1);
    out.require((m.M - Eigen::MatrixXd{{0, 1}, {0, 0}}).cwiseAbs().maxCoeff() <= 1e-12 && m.residual <= 1e-12, "M");
    const auto obs = synthesize_linear(l, {cd{-a}}, 4);
    out.require(obs.betas[0](0) == a && obs.betas[1](0) == 0.0, "betas");
    out.require(obs.A(0, 0) == -a && obs.B(0, 0) == -a * a && obs.C(0) == 1.0 && obs.D(0) == a, "realization");
    const auto tr = simulate_linear_observer(l, obs, std::vector<double>{0, 1}, std::vector<double>{0}, 5.0);
    double worst = 0;
    for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, std::abs(tr.err[k] + std::exp(-a * tr.t[k])));
    out.require(worst <= 1e-8, "error vs closed form");
    out.detail << "M residual " << m.residual << ", A=[" << obs.A(0, 0) << "] B=[" << obs.B(0, 0) << "] C=["
               << obs.C(0) << "] D=[" << obs.D(0) << "], max |e + exp(-3t)| " << worst;
}

// 50 seeded random stable systems.
void random_linear(Outcome& out) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<int> pick_n(2, 6);
    int synthesized = 0;
    double worst_err = 0, worst_identity = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = pick_n(rng);
        const int p = std::uniform_int_distribution<int>(1, 2)(rng);
        LinearSystemDef l;
        l.F = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
        l.F -= (l.F.eigenvalues().real().maxCoeff() + 0.5) * Eigen::MatrixXd::Identity(n, n);
        l.H = Eigen::MatrixXd::NullaryExpr(p, n, [&] { return u(rng); });
        l.q = Eigen::RowVectorXd::NullaryExpr(n, [&] { return u(rng); });
        std::vector<double> x0(static_cast<std::size_t>(n));
        for (auto& x : x0) x = u(rng);
        const auto v = linear_functional_index(l, 3);
        if (!v) continue;
        const std::vector<cd> all{cd{-1}, cd{-2}, cd{-3}};
        const auto obs = synthesize_linear(l, {all.begin(), all.begin() + *v}, 3);
        worst_identity = std::max(worst_identity, linear_identity_residual(l, obs));
        const std::vector<double> xi0(static_cast<std::size_t>(*v), 0.0);
        const auto e0 = linear_initial_error_derivatives(l, obs, x0, xi0);
        const auto tr = simulate_linear_observer(l, obs, x0, xi0, 10.0);
        for (std::size_t k = 0; k < tr.size(); k += 10) {
            worst_err = std::max(worst_err, std::abs(tr.err[k] - exact_error_solution(obs.alphas, e0, tr.t[k])));
        }
        ++synthesized;
    }
    out.require(synthesized > 0, "at least one system with v <= 3");
    out.require(worst_err <= 1e-6, "simulated vs exact error");
    out.require(worst_identity <= 1e-10, "stacked identity");
    out.detail << synthesized << "/50 systems with v <= 3, max |e_sim - e_exact| " << worst_err
               << ", max identity residual " << worst_identity;
}

// Truncation error of the Lie series shrinks as t^(m+1).
void lie_series(Outcome& out) {
    const SystemDef sys = batch();
    const auto error_at = [&](double t, int m) {
        const auto tr = integrate_plant(sys, kBatchX0, t, t / 1000);
        return std::abs(lie_series_predict(sys, kBatchX0, t, m)[0] - tr.y.back()[0]);
    };
    out.detail << "ratios/2^(m+1):";
    for (int m = 1; m <= 3; ++m) {
        const double scaled = error_at(0.02, m) / error_at(0.01, m) / std::pow(2.0, m + 1);
        out.require(scaled >= 0.8 && scaled <= 1.25, "m=" + std::to_string(m));
        out.detail << ' ' << scaled;
    }
}

// Exact initialization keeps the estimate on the invariant manifold.
void invariant_manifold(Outcome& out) {
    const SystemDef b = batch();
    const auto tb = simulate_coupled(b, synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{-2}})), kBatchX0,
                                     exact_chain_init(b, 1, kBatchX0), 10.0);
    const SystemDef c = builtin_cstr();
    const std::vector<double> cx0{0.5, 1.0, 0.8};
    const auto tc = simulate_coupled(c, synthesize_nonlinear(cstr_psi(), poles_to_alphas({cd{-1}})), cx0,
                                     exact_chain_init(c, 1, cx0), 10.0);
    const auto l = double_integrator();
    const auto lobs = synthesize_linear(l, {cd{-3}}, 4);
    const std::vector<double> lx0{0, 1};
    const Eigen::VectorXd xi0 = exact_linear_init(l, lobs, lx0);
    const auto tl = simulate_linear_observer(l, lobs, lx0, {xi0.data(), 1}, 10.0);
    for (const auto* tr : {&tb, &tc, &tl}) out.require(!tr->event && tr->max_abs_error() <= 1e-7, "max |e|");
    out.detail << "max |e| over [0,10]: batch " << tb.max_abs_error() << ", cstr " << tc.max_abs_error()
               << ", linear " << tl.max_abs_error();
}

// Assignable decay rate across a pole sweep.
void pole_sweep(Outcome& out) {
    const SystemDef sys = batch();
    out.detail << "fitted rates:";
    for (double lambda : {-0.5, -1.0, -2.0, -4.0}) {
        const auto obs = synthesize_nonlinear(batch_psi(), poles_to_alphas({cd{lambda}}));
        const auto tr = simulate_coupled(sys, obs, kBatchX0, {0.0}, 5.0);
        const double rate = error_decay_fit(tr, 1, 5);
        out.require(std::abs(rate - lambda) <= 0.02 * std::abs(lambda), "lambda=" + std::to_string(lambda));
        out.detail << ' ' << rate;
    }
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no runtime bound
    std::function<void(Outcome&)> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "batch reactor end-to-end", 2.0, batch_end_to_end},
        {2, "batch reactor realization equivalence", 0.0, batch_realization},
        {3, "CSTR end-to-end", 5.0, cstr_end_to_end},
        {4, "functional without state observability", 0.0, structural},
        {5, "linear pipeline on the double integrator", 0.0, linear_pipeline},
        {6, "random linear property suite", 30.0, random_linear},
        {7, "Lie-series truncation order", 0.0, lie_series},
        {8, "invariant-manifold initialization", 0.0, invariant_manifold},
        {9, "pole-assignability sweep", 0.0, pole_sweep},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome out;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s > 0) out.require(secs < c.budget_s, "runtime budget " + std::to_string(c.budget_s) + " s");
        failures += out.pass ? 0 : 1;
        std::printf("%s  %d  %s (%.2f s): %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    out.detail.str().c_str());
    }
    return failures == 0 ? 0 : 1;
}
