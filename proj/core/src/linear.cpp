#include "fobs/error.hpp"
#include "fobs/synthesis.hpp"

#include <Eigen/QR>

namespace fobs {

Eigen::MatrixXd measurement_stack(const LinearSystemDef& lsys, int v) {
    const Eigen::Index p = lsys.p();
    const Eigen::Index n = lsys.n();
    Eigen::MatrixXd O(p * (v + 1), n);
    Eigen::MatrixXd block = lsys.H;
    for (int i = 0; i <= v; ++i) {
        O.middleRows(i * p, p) = block;
        block = block * lsys.F;
    }
    return O;
}

Eigen::MatrixXd functional_stack(const LinearSystemDef& lsys, int v) {
    Eigen::MatrixXd Q(v + 1, lsys.n());
    Eigen::RowVectorXd row = lsys.q;
    for (int k = 0; k <= v; ++k) {
        Q.row(k) = row;
        row = row * lsys.F;
    }
    return Q;
}

std::optional<int> linear_functional_index(const LinearSystemDef& lsys, int v_max) {
    validate(lsys);
    if (v_max < 1) throw ValidationError("v_max must be >= 1");
    for (int v = 1; v <= v_max; ++v) {
        if (in_row_space(measurement_stack(lsys, v), functional_stack(lsys, v))) return v;
    }
    return std::nullopt;
}

MSolution compute_M(const LinearSystemDef& lsys, int v) {
    const Eigen::MatrixXd O = measurement_stack(lsys, v);
    const Eigen::MatrixXd Q = functional_stack(lsys, v);
    // M O = Q  <=>  O^T M^T = Q^T; the complete orthogonal decomposition gives
    // the minimum-norm least-squares solution.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(O.transpose());
    cod.setThreshold(kRankRelTol);
    MSolution out;
    out.M = cod.solve(Q.transpose()).transpose();
    out.residual = (out.M * O - Q).norm();
    const double limit = 1e-10 * (1.0 + Q.norm());
    if (!(out.residual <= limit)) {
        throw ValidationError("no M reproduces the functional stack at v=" + std::to_string(v) +
                              " (residual " + std::to_string(out.residual) + ")");
    }
    return out;
}

std::vector<Eigen::RowVectorXd> compute_betas(const Eigen::MatrixXd& M, const AlphaCoeffs& alphas) {
    const int v = alphas.order();
    if (M.rows() != v + 1 || M.cols() % (v + 1) != 0 || M.cols() == 0) {
        throw ValidationError("M must be (v+1) x p(v+1) for v=" + std::to_string(v));
    }
    const Eigen::Index p = M.cols() / (v + 1);
    Eigen::RowVectorXd weights(v + 1);
    for (int i = 0; i <= v; ++i) weights(i) = alphas.at(v - i);
    const Eigen::RowVectorXd row = weights * M;
    std::vector<Eigen::RowVectorXd> betas(static_cast<std::size_t>(v) + 1);
    for (int i = 0; i <= v; ++i) betas[static_cast<std::size_t>(v - i)] = row.segment(i * p, p);
    return betas;
}

LinearObserver linear_realization(const AlphaCoeffs& alphas, const std::vector<Eigen::RowVectorXd>& betas) {
    const int v = alphas.order();
    if (betas.size() != static_cast<std::size_t>(v) + 1) throw ValidationError("need v+1 beta blocks");
    const Eigen::Index p = betas.front().size();
    LinearObserver obs;
    obs.v = v;
    obs.alphas = alphas;
    obs.betas = betas;
    obs.A = Eigen::MatrixXd::Zero(v, v);
    obs.B = Eigen::MatrixXd::Zero(v, p);
    for (int i = 0; i < v; ++i) {
        if (i > 0) obs.A(i, i - 1) = 1.0;
        obs.A(i, v - 1) = -alphas.at(v - i);
        obs.B.row(i) = betas[static_cast<std::size_t>(v - i)] - alphas.at(v - i) * betas[0];
    }
    obs.C = Eigen::RowVectorXd::Zero(v);
    obs.C(v - 1) = 1.0;
    obs.D = betas[0];
    return obs;
}

LinearObserver synthesize_linear(const LinearSystemDef& lsys, const std::vector<std::complex<double>>& poles,
                                 int v_max, bool allow_unstable) {
    const auto index = linear_functional_index(lsys, v_max);
    if (!index) throw ValidationError("no functional observer index up to v=" + std::to_string(v_max));
    const int v = static_cast<int>(poles.size());
    if (v < *index) {
        throw ValidationError("functional observer index is " + std::to_string(*index) + " but " +
                              std::to_string(v) + " pole(s) were given");
    }
    const AlphaCoeffs alphas = poles_to_alphas(poles);
    if (!alphas.hurwitz && !allow_unstable) {
        throw UnstableError("error polynomial is not Hurwitz; the estimation error would not converge");
    }
    const MSolution m = compute_M(lsys, v);
    LinearObserver obs = linear_realization(alphas, compute_betas(m.M, alphas));
    obs.M = m.M;
    return obs;
}

ObserverIO as_observer_io(const LinearObserver& lobs) {
    std::vector<Expr> terms;
    for (int k = 0; k <= lobs.v; ++k) {
        const auto& beta = lobs.betas.at(static_cast<std::size_t>(k));
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            if (beta(j) == 0.0) continue;
            terms.push_back(Expr::constant(Number::from_double(beta(j))) * Expr::w(lobs.v - k, static_cast<int>(j) + 1));
        }
    }
    ObserverIO obs;
    obs.v = lobs.v;
    obs.alphas = lobs.alphas;
    obs.T = simplify(Expr::sum(std::move(terms)));
    return obs;
}

double linear_identity_residual(const LinearSystemDef& lsys, const LinearObserver& obs) {
    const int v = obs.v;
    const Eigen::MatrixXd Q = functional_stack(lsys, v);
    const Eigen::MatrixXd O = measurement_stack(lsys, v);
    const Eigen::Index p = lsys.p();
    Eigen::RowVectorXd lhs = Eigen::RowVectorXd::Zero(lsys.n());
    Eigen::RowVectorXd rhs = Eigen::RowVectorXd::Zero(lsys.n());
    for (int k = 0; k <= v; ++k) {
        lhs += obs.alphas.at(k) * Q.row(v - k);
        rhs += obs.betas[static_cast<std::size_t>(k)] * O.middleRows((v - k) * p, p);
    }
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

} // namespace fobs
