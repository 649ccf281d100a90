#include "fobs/observability.hpp"

#include "fobs/error.hpp"

#include <Eigen/SVD>
#include <json.hpp>

#include <algorithm>
#include <sstream>

namespace fobs {

using nlohmann::json;

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol, double abs_floor) {
    if (m.size() == 0) return 0;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 0;
    const double threshold = std::max(rel_tol * s(0), abs_floor);
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > threshold) ++r;
    }
    return r;
}

bool in_row_space(const Eigen::MatrixXd& base, const Eigen::MatrixXd& rows, double rel_tol) {
    Eigen::MatrixXd stacked(base.rows() + rows.rows(), base.cols());
    stacked << base, rows;
    return numerical_rank(stacked, rel_tol) == numerical_rank(base, rel_tol);
}

namespace {

std::string fraction_text(int count, int total) {
    std::ostringstream ss;
    ss << count << "/" << total;
    return ss.str();
}

void summarize(RankReport& r) {
    int evaluated = 0;
    r.max_rank = 0;
    for (int rank : r.ranks) {
        if (rank < 0) continue;
        ++evaluated;
        r.max_rank = std::max(r.max_rank, rank);
    }
    const int at_max = static_cast<int>(std::count(r.ranks.begin(), r.ranks.end(), r.max_rank));
    r.fraction_at_max = evaluated > 0 ? static_cast<double>(at_max) / evaluated : 0.0;
    r.condition_met = r.max_rank == r.n_states;
    std::ostringstream ss;
    ss << "rank " << r.max_rank << "/" << r.n_states << " at m=" << r.m << " (attained at "
       << fraction_text(at_max, evaluated) << " samples): ";
    ss << (r.condition_met ? "locally state-observable (sufficient condition met)"
                           : "rank condition not met");
    r.verdict = ss.str();
}

RankReport rank_report(const SystemDef& sys, std::span<const Expr> rows, int m,
                       const std::vector<std::vector<double>>& samples) {
    const GradientEvaluator grad(sys, rows);
    RankReport r;
    r.m = m;
    r.n_states = static_cast<int>(sys.n());
    for (const auto& x : samples) {
        try {
            r.ranks.push_back(numerical_rank(grad.at(x)));
        } catch (const EvalError&) {
            r.ranks.push_back(-1);
            ++r.failed_samples;
        }
    }
    if (!samples.empty() && r.failed_samples == static_cast<int>(samples.size())) {
        throw IndeterminateError("every sample failed to evaluate");
    }
    summarize(r);
    return r;
}

} // namespace

RankReport state_observability_rank(const SystemDef& sys, int m, int n_samples, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("state_observability_rank: m must be >= 1");
    const ObservabilitySet os = observability_set(sys, m);
    return rank_report(sys, os.rows(), m, sample_states(sys, n_samples, seed));
}

ObservabilityIndexResult observability_index(const SystemDef& sys, int m_max, int n_samples, std::uint64_t seed) {
    if (m_max < 1) throw std::invalid_argument("observability_index: m_max must be >= 1");
    const ObservabilitySet os = observability_set(sys, m_max);
    const auto samples = sample_states(sys, n_samples, seed);
    ObservabilityIndexResult result;
    const auto all_rows = os.rows();
    for (int m = 1; m <= m_max; ++m) {
        const std::span<const Expr> rows(all_rows.data(), static_cast<std::size_t>(m) * sys.p());
        result.table.push_back(rank_report(sys, rows, m, samples));
        if (result.table.back().condition_met) {
            result.index = m;
            break;
        }
    }
    return result;
}

namespace {

// Compares rank(J) with rank([grad targets; J]) per sample.
struct SpanTally {
    int agreeing = 0;
    int failed = 0;
    std::vector<int> base_ranks;
    std::vector<int> augmented_ranks;
};

SpanTally span_tally(const SystemDef& sys, std::span<const Expr> targets, std::span<const Expr> rows,
                     const std::vector<std::vector<double>>& samples) {
    const GradientEvaluator base(sys, rows);
    const GradientEvaluator extra(sys, targets);
    SpanTally t;
    for (const auto& x : samples) {
        Eigen::MatrixXd J;
        Eigen::MatrixXd G;
        try {
            J = base.at(x);
            G = extra.at(x);
        } catch (const EvalError&) {
            ++t.failed;
            t.base_ranks.push_back(-1);
            t.augmented_ranks.push_back(-1);
            continue;
        }
        Eigen::MatrixXd stacked(J.rows() + G.rows(), J.cols());
        stacked << G, J;
        const int rb = numerical_rank(J);
        const int ra = numerical_rank(stacked);
        t.base_ranks.push_back(rb);
        t.augmented_ranks.push_back(ra);
        if (ra == rb) ++t.agreeing;
    }
    if (!samples.empty() && t.failed == static_cast<int>(samples.size())) {
        throw IndeterminateError("every sample failed to evaluate");
    }
    return t;
}

} // namespace

FunctionalRankReport functional_rank_check(const SystemDef& sys, int m, int n_samples, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("functional_rank_check: m must be >= 1");
    const ObservabilitySet os = observability_set(sys, m);
    const auto samples = sample_states(sys, n_samples, seed);
    const auto rows = os.rows();
    const std::vector<Expr> target{sys.q};
    const SpanTally t = span_tally(sys, target, rows, samples);

    FunctionalRankReport r;
    for (RankReport* rr : {&r.base, &r.augmented}) {
        rr->m = m;
        rr->n_states = static_cast<int>(sys.n());
        rr->failed_samples = t.failed;
    }
    r.base.ranks = t.base_ranks;
    r.augmented.ranks = t.augmented_ranks;
    summarize(r.base);
    summarize(r.augmented);
    const int evaluated = static_cast<int>(samples.size()) - t.failed;
    r.agreeing_samples = t.agreeing;
    r.fraction_agreeing = evaluated > 0 ? static_cast<double>(t.agreeing) / evaluated : 0.0;
    r.holds = evaluated > 0 && t.agreeing == evaluated;
    std::ostringstream ss;
    ss << "rank[dq/dx; J] == rank[J] at m=" << m << " on " << fraction_text(t.agreeing, evaluated)
       << " samples: " << (r.holds ? "necessary condition holds" : "necessary condition fails");
    r.verdict = ss.str();
    return r;
}

FunctionalIndexCandidate functional_index_candidate(const SystemDef& sys, int v_max, int n_samples,
                                                    std::uint64_t seed) {
    if (v_max < 1) throw std::invalid_argument("functional_index_candidate: v_max must be >= 1");
    const ObservabilitySet os = observability_set(sys, v_max + 1);
    const QDerivatives qd = q_derivatives(sys, v_max);
    const auto samples = sample_states(sys, n_samples, seed);
    const auto all_rows = os.rows();

    FunctionalIndexCandidate result;
    for (int v = 1; v <= v_max; ++v) {
        const std::span<const Expr> rows(all_rows.data(), static_cast<std::size_t>(v + 1) * sys.p());
        FunctionalIndexLevel level;
        level.v = v;
        level.holds = true;
        for (int k = 0; k <= v; ++k) {
            const std::span<const Expr> target(&qd.q[static_cast<std::size_t>(k)], 1);
            const SpanTally t = span_tally(sys, target, rows, samples);
            SpanCheck c;
            c.k = k;
            c.agreeing_samples = t.agreeing;
            c.failed_samples = t.failed;
            const int evaluated = static_cast<int>(samples.size()) - t.failed;
            c.fraction_in_span = evaluated > 0 ? static_cast<double>(t.agreeing) / evaluated : 0.0;
            c.holds = evaluated > 0 && t.agreeing == evaluated;
            level.holds = level.holds && c.holds;
            level.per_k.push_back(c);
        }
        result.levels.push_back(std::move(level));
        if (result.levels.back().holds) {
            result.candidate = v;
            break;
        }
    }
    return result;
}

void validate(const PsiRepresentation& rep, const SystemDef& sys) {
    if (rep.v < 1) throw ValidationError("psi representation order v must be >= 1");
    if (rep.psi.size() != static_cast<std::size_t>(rep.v) + 1) {
        throw ValidationError("psi representation needs v+1 = " + std::to_string(rep.v + 1) + " functions, got " +
                              std::to_string(rep.psi.size()));
    }
    for (std::size_t k = 0; k < rep.psi.size(); ++k) {
        const std::string where = "psi[" + std::to_string(k) + "]";
        for (const auto& s : rep.psi[k].free_symbols()) {
            if (std::find(sys.states.begin(), sys.states.end(), s) != sys.states.end()) {
                throw ValidationError(where + ": state variable '" + s + "' is not allowed, use w<i>_<j>");
            }
            if (!sys.params.contains(s)) throw ValidationError(where + ": unknown symbol '" + s + "'");
        }
        for (const auto& w : rep.psi[k].w_variables()) {
            if (w.order > rep.v) {
                throw ValidationError(where + ": " + w.name() + " exceeds derivative order v=" + std::to_string(rep.v));
            }
            if (static_cast<std::size_t>(w.output) > sys.p()) {
                throw ValidationError(where + ": " + w.name() + " refers to output " + std::to_string(w.output) +
                                      " but the system has " + std::to_string(sys.p()));
            }
        }
    }
}

PsiRepresentation parse_psi_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("psi file is not valid JSON: ") + e.what());
    }
    PsiRepresentation rep;
    try {
        rep.v = doc.at("v").get<int>();
        std::size_t k = 0;
        for (const auto& s : doc.at("psi")) {
            try {
                rep.psi.push_back(parse(s.get<std::string>()));
            } catch (const ParseError& e) {
                throw ValidationError("psi[" + std::to_string(k) + "]: " + e.what());
            }
            ++k;
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("psi file schema violation: ") + e.what());
    }
    if (rep.psi.size() != static_cast<std::size_t>(rep.v) + 1) {
        throw ValidationError("psi file lists " + std::to_string(rep.psi.size()) + " functions, expected v+1");
    }
    return rep;
}

PsiRepresentation load_psi(const std::filesystem::path& path) { return parse_psi_json(read_text_file(path)); }

std::string psi_to_json(const PsiRepresentation& rep) {
    json doc;
    doc["v"] = rep.v;
    doc["psi"] = json::array();
    for (const auto& e : rep.psi) doc["psi"].push_back(e.to_string());
    return doc.dump(2);
}

PsiRepresentation builtin_batch_reactor_psi() {
    // cA = (dy/dt + k2 y^2) / k1 and dcA/dt = -k1 cA.
    return {1, {parse("(w1_1 + k2*w0_1^2)/k1"), parse("-(w1_1 + k2*w0_1^2)")}};
}

PsiRepresentation builtin_cstr_psi() {
    // The reactor energy balance solved for the reaction term gives cA; the
    // mass balance then gives dcA/dt.
    return {1,
            {parse("(w1_1 - FV*(thetain - w0_1) + UAV*(w0_1 - w0_2))/(J*k0*exp(-ER/w0_1))"),
             parse("FV*cAin - (FV/(k0*exp(-ER/w0_1)) + 1)*(w1_1 - FV*(thetain - w0_1) + UAV*(w0_1 - w0_2))/J")}};
}

Expr substitute_measurements(const SystemDef& sys, const Expr& e) {
    const int order = e.max_w_order();
    if (order < 0) return e;
    const ObservabilitySet os = observability_set(sys, order + 1);
    Substitution s;
    for (const auto& w : e.w_variables()) {
        if (static_cast<std::size_t>(w.output) > sys.p()) {
            throw ValidationError(w.name() + " refers to a missing output");
        }
        s.w[w] = os.table[static_cast<std::size_t>(w.order)][static_cast<std::size_t>(w.output - 1)];
    }
    return substitute(e, s);
}

PsiVerification verify_psi(const SystemDef& sys, const PsiRepresentation& rep, int n_samples, std::uint64_t seed,
                           double rtol) {
    validate(rep, sys);
    const QDerivatives qd = q_derivatives(sys, rep.v);
    PsiVerification out;
    out.pass = true;
    for (int k = 0; k <= rep.v; ++k) {
        const Expr lhs = substitute_measurements(sys, rep.psi[static_cast<std::size_t>(k)]);
        PsiResidual r;
        r.k = k;
        r.report = equivalent_numeric(lhs, qd.q[static_cast<std::size_t>(k)], sys.box, n_samples, seed, rtol,
                                      sys.params);
        out.max_residual = std::max(out.max_residual, r.report.max_residual);
        out.pass = out.pass && r.report.equivalent;
        out.per_k.push_back(std::move(r));
    }
    return out;
}

LiftResult lift_psi(const Expr& psi, int p, int v_cap) {
    std::vector<Expr> terms;
    for (const auto& w : psi.w_variables()) {
        if (w.output > p) throw ValidationError(w.name() + " refers to output beyond p=" + std::to_string(p));
        Expr d = differentiate(psi, w);
        if (d.is_zero()) continue;
        terms.push_back(d * Expr::w(w.order + 1, w.output));
    }
    LiftResult r;
    r.psi = simplify(Expr::sum(std::move(terms)));
    r.max_order = r.psi.max_w_order();
    r.exceeds_cap = r.max_order > v_cap;
    return r;
}

} // namespace fobs
