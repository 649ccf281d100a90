#pragma once

#include "fobs/system.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace fobs {

/// L_F^i H_j for i = 0..m-1, j = 0..p-1 (outputs indexed from 0 here; the
/// w-variable for table[i][j] is w<i>_<j+1>).
struct ObservabilitySet {
    int m = 0;
    std::vector<std::vector<Expr>> table;

    /// Rows in i-major order: (0,0), (0,1), ..., (1,0), ...
    [[nodiscard]] std::vector<Expr> rows() const;
};

/// L_F^k q for k = 0..v.
struct QDerivatives {
    int v = 0;
    std::vector<Expr> q;
};

/// L_F h = sum_i (dh/dx_i) F_i, simplified. Throws ValidationError when h holds
/// w-variables or symbols outside states and parameters.
Expr lie_derivative(const SystemDef& sys, const Expr& h);

/// Symbolic work grows quickly with m; m <= 6 is routine, beyond 8 expect
/// large expressions.
ObservabilitySet observability_set(const SystemDef& sys, int m);

QDerivatives q_derivatives(const SystemDef& sys, int v);

/// Gradient rows of a fixed list of expressions, differentiated once and
/// evaluated at many points.
class GradientEvaluator {
public:
    GradientEvaluator(const SystemDef& sys, std::span<const Expr> rows);

    /// Throws EvalError.
    [[nodiscard]] Eigen::MatrixXd at(std::span<const double> x) const;
    [[nodiscard]] const std::vector<std::vector<Expr>>& gradients() const noexcept { return gradients_; }

private:
    std::vector<std::vector<Expr>> gradients_;
    PointEvaluator evaluator_;
    std::size_t rows_;
    std::size_t cols_;
};

/// Jacobian of the observability set at `x`, (p*m) x n, i-major rows.
Eigen::MatrixXd observability_jacobian(const SystemDef& sys, const ObservabilitySet& os, std::span<const double> x);

/// True when every state of `x` lies inside the system box.
bool in_box(const SystemDef& sys, std::span<const double> x);

/// Truncated Lie series of every output: sum_{i<=m} L_F^i H_j(x0) t^i / i!.
std::vector<double> lie_series_predict(const SystemDef& sys, std::span<const double> x0, double t, int m);

} // namespace fobs
