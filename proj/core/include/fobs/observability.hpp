#pragma once

#include "fobs/lie.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fobs {

/// Singular values above kRankRelTol * sigma_max (and above kRankAbsFloor)
/// count toward the numerical rank.
inline constexpr double kRankRelTol = 1e-9;
inline constexpr double kRankAbsFloor = 1e-12;

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = kRankRelTol, double abs_floor = kRankAbsFloor);

/// True when every row of `rows` lies in the row space of `base` (rank equality
/// of the augmented matrix).
bool in_row_space(const Eigen::MatrixXd& base, const Eigen::MatrixXd& rows, double rel_tol = kRankRelTol);

struct RankReport {
    int m = 0;
    int n_states = 0;
    std::vector<int> ranks;  // -1 where the sample failed to evaluate
    int max_rank = 0;
    double fraction_at_max = 0.0;
    double tolerance = kRankRelTol;
    int failed_samples = 0;
    /// max_rank == n: the sufficient rank condition for local state observability.
    bool condition_met = false;
    std::string verdict;
};

/// Numerical rank of the observability Jacobian at seeded samples of the box.
/// Throws IndeterminateError when every sample fails to evaluate.
RankReport state_observability_rank(const SystemDef& sys, int m, int n_samples, std::uint64_t seed);

struct ObservabilityIndexResult {
    std::optional<int> index;
    std::vector<RankReport> table;  // one report per m = 1..(index or m_max)
};

/// Smallest m <= m_max whose Jacobian reaches rank n.
ObservabilityIndexResult observability_index(const SystemDef& sys, int m_max, int n_samples, std::uint64_t seed);

/// Gradient of q against the observability Jacobian of order m.
struct FunctionalRankReport {
    RankReport base;
    RankReport augmented;
    int agreeing_samples = 0;
    double fraction_agreeing = 0.0;
    /// Augmented and base ranks equal at every successfully evaluated sample.
    bool holds = false;
    std::string verdict;
};

FunctionalRankReport functional_rank_check(const SystemDef& sys, int m, int n_samples, std::uint64_t seed);

struct SpanCheck {
    int k = 0;
    int agreeing_samples = 0;
    int failed_samples = 0;
    double fraction_in_span = 0.0;
    bool holds = false;
};

struct FunctionalIndexLevel {
    int v = 0;
    std::vector<SpanCheck> per_k;  // k = 0..v
    bool holds = false;
};

/// Screen for the functional observer index: the smallest v such that the
/// gradients of L_F^k q, k <= v, lie in the span of the gradients of
/// L_F^i H_j, i <= v, at every sample. A necessary condition only; existence of
/// the functions psi_k is established by verify_psi.
struct FunctionalIndexCandidate {
    std::optional<int> candidate;
    std::vector<FunctionalIndexLevel> levels;
};

FunctionalIndexCandidate functional_index_candidate(const SystemDef& sys, int v_max, int n_samples,
                                                    std::uint64_t seed);

/// psi[k] expresses L_F^k q through w(i, j) = L_F^i H_j with i <= v.
struct PsiRepresentation {
    int v = 0;
    std::vector<Expr> psi;
};

/// Throws ValidationError: psi count != v + 1, state symbols in psi, w order
/// above v, or output index above p.
void validate(const PsiRepresentation& rep, const SystemDef& sys);

/// ψ file: {"v": <int>, "psi": ["...", ...]}.
PsiRepresentation parse_psi_json(std::string_view text);
PsiRepresentation load_psi(const std::filesystem::path& path);
std::string psi_to_json(const PsiRepresentation& rep);

/// Known representations (v = 1) for the builtin systems.
PsiRepresentation builtin_batch_reactor_psi();
PsiRepresentation builtin_cstr_psi();

/// Replaces every w(i, j) by L_F^i H_j(x).
Expr substitute_measurements(const SystemDef& sys, const Expr& e);

struct PsiResidual {
    int k = 0;
    EquivalenceReport report;
};

struct PsiVerification {
    std::vector<PsiResidual> per_k;
    double max_residual = 0.0;
    bool pass = false;
};

PsiVerification verify_psi(const SystemDef& sys, const PsiRepresentation& rep, int n_samples, std::uint64_t seed,
                           double rtol);

struct LiftResult {
    Expr psi;
    int max_order = -1;
    /// The lifted expression needs derivatives beyond v_cap.
    bool exceeds_cap = false;
};

/// Time derivative of psi along the measurement chain:
/// sum over w(i, j) of (d psi / d w(i, j)) * w(i+1, j).
LiftResult lift_psi(const Expr& psi, int p, int v_cap);

} // namespace fobs
