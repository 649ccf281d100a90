#include "fobs/error.hpp"
#include "fobs/expr.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fobs {

EquivalenceReport equivalent_numeric(const Expr& e1, const Expr& e2, const Box& box, int n, std::uint64_t seed,
                                     double rtol, const Bindings& fixed) {
    if (n < 1) throw std::invalid_argument("equivalent_numeric: sample count must be >= 1");
    for (const auto& [name, iv] : box) {
        if (!(iv.lo <= iv.hi)) throw ValidationError("box interval for '" + name + "' is empty");
    }

    std::mt19937_64 rng(seed);
    EquivalenceReport report;
    report.equivalent = true;
    Bindings sample = fixed;
    for (int s = 0; s < n; ++s) {
        for (const auto& [name, iv] : box) {
            std::uniform_real_distribution<double> dist(iv.lo, iv.hi);
            sample[name] = dist(rng);
        }
        double a = 0.0;
        double b = 0.0;
        try {
            a = evaluate(e1, sample);
            b = evaluate(e2, sample);
        } catch (const EvalError& err) {
            if (report.skipped == 0) report.first_skip_reason = err.what();
            ++report.skipped;
            continue;
        }
        ++report.evaluated;
        const double diff = std::fabs(a - b);
        const double scaled = diff / (1.0 + std::max(std::fabs(a), std::fabs(b)));
        report.max_residual = std::max(report.max_residual, diff);
        if (scaled >= report.max_scaled_residual) {
            report.max_scaled_residual = scaled;
            report.worst_sample = sample;
        }
        if (scaled > rtol) report.equivalent = false;
    }
    if (2 * report.skipped > n) {
        throw IndeterminateError("numeric equivalence indeterminate: " + std::to_string(report.skipped) + " of " +
                                 std::to_string(n) + " samples failed (" + report.first_skip_reason + ")");
    }
    return report;
}

} // namespace fobs
