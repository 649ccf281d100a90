#include <benchmark/benchmark.h>

#include "fobs/lie.hpp"
#include "fobs/observability.hpp"
#include "fobs/sim.hpp"
#include "fobs/synthesis.hpp"

#include <random>

namespace {

const char* kCstrText = "FV*(thetain - theta) + J*k0*exp(-ER/theta)*cA - UAV*(theta - thetaj)";

void BM_Parse(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(fobs::parse(kCstrText));
}
BENCHMARK(BM_Parse);

void BM_Simplify(benchmark::State& state) {
    const fobs::Expr e = fobs::differentiate(fobs::parse(kCstrText), "theta");
    for (auto _ : state) benchmark::DoNotOptimize(fobs::simplify(e));
}
BENCHMARK(BM_Simplify);

void BM_Evaluate(benchmark::State& state) {
    const fobs::Expr e = fobs::parse(kCstrText);
    const fobs::Bindings b{{"FV", 1},  {"thetain", 1}, {"theta", 1.2}, {"J", 1},   {"k0", 1},
                           {"ER", 1}, {"cA", 0.5},     {"UAV", 1},     {"thetaj", 0.9}};
    for (auto _ : state) benchmark::DoNotOptimize(fobs::evaluate(e, b));
}
BENCHMARK(BM_Evaluate);

void BM_EvaluateCompiled(benchmark::State& state) {
    fobs::SlotLayout layout;
    for (const char* s : {"FV", "thetain", "theta", "J", "k0", "ER", "cA", "UAV", "thetaj"}) layout.add(s);
    const fobs::CompiledExpr c(fobs::parse(kCstrText), layout);
    const std::vector<double> slots{1, 1, 1.2, 1, 1, 1, 0.5, 1, 0.9};
    for (auto _ : state) benchmark::DoNotOptimize(c(slots));
}
BENCHMARK(BM_EvaluateCompiled);

// Symbolic observability set of order m for the CSTR.
void BM_ObservabilitySet(benchmark::State& state) {
    const fobs::SystemDef sys = fobs::builtin_cstr();
    const int m = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fobs::observability_set(sys, m));
}
BENCHMARK(BM_ObservabilitySet)->DenseRange(1, 4);

void BM_NumericalRank(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(2 * n, n);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    for (auto _ : state) benchmark::DoNotOptimize(fobs::numerical_rank(m));
}
BENCHMARK(BM_NumericalRank)->RangeMultiplier(2)->Range(4, 64);

void BM_IndexCandidateBatch(benchmark::State& state) {
    const fobs::SystemDef sys = fobs::builtin_batch_reactor(1.0, 0.5, 0.3);
    for (auto _ : state) benchmark::DoNotOptimize(fobs::functional_index_candidate(sys, 3, 100, 42));
}
BENCHMARK(BM_IndexCandidateBatch)->Unit(benchmark::kMillisecond);

// One second of coupled plant/observer RK4 at the default step.
void BM_SimulateCoupledCstr(benchmark::State& state) {
    const fobs::SystemDef sys = fobs::builtin_cstr();
    const auto obs = fobs::synthesize_nonlinear(fobs::builtin_cstr_psi(), fobs::poles_to_alphas({{-1.0, 0.0}}));
    const std::vector<double> x0{0.5, 1.0, 0.8};
    for (auto _ : state) benchmark::DoNotOptimize(fobs::simulate_coupled(sys, obs, x0, {0.0}, 1.0));
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_SimulateCoupledCstr)->Unit(benchmark::kMillisecond);

void BM_SynthesizeLinear(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    fobs::LinearSystemDef l;
    l.F = Eigen::MatrixXd::Zero(n, n);
    l.F.diagonal(1).setOnes();
    l.F(n - 1, 0) = -1.0;
    l.H = Eigen::MatrixXd::Zero(1, n);
    l.H(0, 0) = 1.0;
    l.q = Eigen::RowVectorXd::Zero(n);
    l.q(n - 1) = 1.0;
    std::vector<std::complex<double>> poles;
    for (int k = 1; k < n; ++k) poles.emplace_back(-static_cast<double>(k), 0.0);
    for (auto _ : state) benchmark::DoNotOptimize(fobs::synthesize_linear(l, poles, n));
}
BENCHMARK(BM_SynthesizeLinear)->DenseRange(3, 9, 3);

} // namespace

BENCHMARK_MAIN();
