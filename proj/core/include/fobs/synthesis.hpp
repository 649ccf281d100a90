#pragma once

#include "fobs/observability.hpp"

#include <Eigen/Core>

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace fobs {

/// Monic error polynomial lambda^v + a_1 lambda^(v-1) + ... + a_v.
struct AlphaCoeffs {
    std::vector<double> alpha;  // a_1 .. a_v
    bool hurwitz = false;

    [[nodiscard]] int order() const noexcept { return static_cast<int>(alpha.size()); }
    /// a_k for k = 1..v, with a_0 = 1.
    [[nodiscard]] double at(int k) const { return k == 0 ? 1.0 : alpha.at(static_cast<std::size_t>(k - 1)); }
};

/// Companion matrix of the monic polynomial (last row -a_v .. -a_1).
Eigen::MatrixXd companion_matrix(const std::vector<double>& alpha);

/// Roots of the monic polynomial, from the companion matrix eigenvalues.
std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& alpha);

/// Coefficients from given coefficients; sets the Hurwitz flag.
AlphaCoeffs alphas_from_coefficients(std::vector<double> alpha);

/// Expands prod (lambda - pole). Throws ValidationError unless the poles are
/// closed under conjugation.
AlphaCoeffs poles_to_alphas(const std::vector<std::complex<double>>& poles);

/// Parses "-2,-1+1i,-1-1i" style pole lists.
std::vector<std::complex<double>> parse_poles(std::string_view text);

/// Nonlinear observer in input-output form:
/// d^v zhat/dt^v + a_1 d^(v-1) zhat/dt^(v-1) + ... + a_v zhat = T(w).
struct ObserverIO {
    int v = 0;
    AlphaCoeffs alphas;
    Expr T;
    PsiRepresentation psi;
};

/// T = psi_v + a_1 psi_(v-1) + ... + a_v psi_0. Throws ValidationError on an
/// order mismatch and UnstableError for non-Hurwitz coefficients unless
/// `allow_unstable` is set.
ObserverIO synthesize_nonlinear(const PsiRepresentation& rep, const AlphaCoeffs& alphas, bool allow_unstable = false);

struct InvarianceReport {
    EquivalenceReport report;
    bool pass = false;
};

/// Residual of L_F^v q + sum a_k L_F^(v-k) q - T(w := L_F^i H_j) over the box.
InvarianceReport verify_invariance(const SystemDef& sys, const ObserverIO& obs, int n_samples, std::uint64_t seed,
                                   double rtol);

/// Stacked [H; HF; ...; HF^v], p(v+1) x n.
Eigen::MatrixXd measurement_stack(const LinearSystemDef& lsys, int v);
/// Stacked [q; qF; ...; qF^v], (v+1) x n.
Eigen::MatrixXd functional_stack(const LinearSystemDef& lsys, int v);

/// Smallest v <= v_max with qF^k, k <= v, in the row space of the measurement stack.
std::optional<int> linear_functional_index(const LinearSystemDef& lsys, int v_max);

struct MSolution {
    Eigen::MatrixXd M;  // (v+1) x p(v+1)
    double residual = 0.0;
};

/// Minimum-norm M with M * measurement_stack = functional_stack. Throws
/// ValidationError when the residual exceeds 1e-10 (1 + |functional_stack|).
MSolution compute_M(const LinearSystemDef& lsys, int v);

/// beta_0 .. beta_v, each 1 x p, from [beta_v ... beta_0] = [a_v ... a_1 1] M.
std::vector<Eigen::RowVectorXd> compute_betas(const Eigen::MatrixXd& M, const AlphaCoeffs& alphas);

/// State-space observer d xi/dt = A xi + B y, zhat = C xi + D y with (C, A) in
/// observer canonical form.
struct LinearObserver {
    int v = 0;
    AlphaCoeffs alphas;
    std::vector<Eigen::RowVectorXd> betas;
    Eigen::MatrixXd M;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::RowVectorXd C;
    Eigen::RowVectorXd D;
};

LinearObserver linear_realization(const AlphaCoeffs& alphas, const std::vector<Eigen::RowVectorXd>& betas);

/// Index search, M, betas and realization in one call. Throws ValidationError
/// when no index <= v_max exists or the pole count differs from the index, and
/// UnstableError as synthesize_nonlinear.
LinearObserver synthesize_linear(const LinearSystemDef& lsys, const std::vector<std::complex<double>>& poles,
                                 int v_max, bool allow_unstable = false);

/// The linear observer in chain form: T = sum_k beta_k . w(v-k) over the
/// outputs of as_system(lsys).
ObserverIO as_observer_io(const LinearObserver& lobs);

/// Max-abs residual of qF^v + sum a_k qF^(v-k) - sum beta_k H F^(v-k).
double linear_identity_residual(const LinearSystemDef& lsys, const LinearObserver& obs);

/// Observer files: {"v", "alphas", "T", "psi"} for nonlinear observers and
/// {"v", "alphas", "betas", "M", "A", "B", "C", "D"} for linear ones.
std::string observer_to_json(const ObserverIO& obs);
std::string observer_to_json(const LinearObserver& obs);
ObserverIO parse_observer_io_json(std::string_view text);
LinearObserver parse_linear_observer_json(std::string_view text);
/// True when the document describes a linear (A, B, C, D) observer.
bool is_linear_observer_json(std::string_view text);

} // namespace fobs
