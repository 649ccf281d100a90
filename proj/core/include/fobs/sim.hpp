#pragma once

#include "fobs/synthesis.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fobs {

inline constexpr double kDefaultDt = 1e-3;
inline constexpr double kDivergenceCutoff = 1e12;

/// Uniform-grid record of a run. Plant-only runs leave zhat/err as NaN.
struct SimTrace {
    double dt = kDefaultDt;
    std::string integrator = "rk4";
    std::vector<double> t;
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> y;
    std::vector<double> z;
    std::vector<double> zhat;
    std::vector<double> err;
    bool has_estimate = false;
    /// Set when the run stopped early (evaluation failure or divergence).
    bool event = false;
    std::string event_message;

    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
    /// Index of the grid point closest to `time`.
    [[nodiscard]] std::size_t index_at(double time) const;
    [[nodiscard]] double max_abs_error() const;
};

/// [zhat, zhat', ..., zhat^(v-1)].
using ChainState = std::vector<double>;

SimTrace integrate_plant(const SystemDef& sys, std::span<const double> x0, double t_final, double dt = kDefaultDt);

/// Plant and chain observer integrated jointly; the observer is fed
/// w(i, j) = L_F^i H_j(x(t)) from the plant state.
SimTrace simulate_coupled(const SystemDef& sys, const ObserverIO& obs, std::span<const double> x0,
                          const ChainState& chain0, double t_final, double dt = kDefaultDt);

/// d xi/dt = sigma(xi, y), zhat = omega(xi, y); expressions use xi1..xiK,
/// y1..yp and the system parameters.
SimTrace simulate_custom_observer(const SystemDef& sys, const std::vector<Expr>& xi_rhs, const Expr& zhat_expr,
                                  std::span<const double> x0, std::span<const double> xi0, double t_final,
                                  double dt = kDefaultDt);

SimTrace simulate_linear_observer(const LinearSystemDef& lsys, const LinearObserver& lobs,
                                  std::span<const double> x0, std::span<const double> xi0, double t_final,
                                  double dt = kDefaultDt);

/// Chain start on the invariant manifold: L_F^k q(x0), k < v.
ChainState exact_chain_init(const SystemDef& sys, int v, std::span<const double> x0);

/// e^(k)(0) = chain0[k] - L_F^k q(x0).
std::vector<double> initial_error_derivatives(const SystemDef& sys, std::span<const double> x0,
                                              const ChainState& chain0);

/// xi0 that puts the linear observer on the invariant manifold at x0.
Eigen::VectorXd exact_linear_init(const LinearSystemDef& lsys, const LinearObserver& lobs,
                                  std::span<const double> x0);

/// e^(k)(0) for the linear observer started at (x0, xi0).
std::vector<double> linear_initial_error_derivatives(const LinearSystemDef& lsys, const LinearObserver& lobs,
                                                     std::span<const double> x0, std::span<const double> xi0);

/// Solution of e^(v) + a_1 e^(v-1) + ... + a_v e = 0 at time t.
double exact_error_solution(const AlphaCoeffs& alphas, std::span<const double> e_init, double t);

/// Least-squares slope of ln|e| over [t_lo, t_hi]. Throws ValidationError
/// when |e| <= 1e-14 or e changes sign in the window.
double error_decay_fit(const SimTrace& trace, double t_lo, double t_hi);

/// Header t,x1..xn,y1..yp,z,zhat,err; 17 significant digits.
void write_csv(std::ostream& os, const SimTrace& trace);

} // namespace fobs
