#include "fobs/lie.hpp"

#include "fobs/error.hpp"

#include <algorithm>
#include <cmath>

namespace fobs {

namespace {

std::vector<std::vector<Expr>> gradients_of(const SystemDef& sys, std::span<const Expr> rows) {
    std::vector<std::vector<Expr>> g;
    g.reserve(rows.size());
    for (const auto& r : rows) {
        std::vector<Expr> row;
        row.reserve(sys.n());
        for (const auto& s : sys.states) row.push_back(differentiate(r, s));
        g.push_back(std::move(row));
    }
    return g;
}

std::vector<Expr> flatten(const std::vector<std::vector<Expr>>& g) {
    std::vector<Expr> out;
    for (const auto& row : g) out.insert(out.end(), row.begin(), row.end());
    return out;
}

} // namespace

std::vector<Expr> ObservabilitySet::rows() const {
    std::vector<Expr> out;
    for (const auto& level : table) out.insert(out.end(), level.begin(), level.end());
    return out;
}

Expr lie_derivative(const SystemDef& sys, const Expr& h) {
    if (!h.w_variables().empty()) {
        throw ValidationError("lie_derivative: expression contains measurement-derivative variable " +
                              h.w_variables().begin()->name());
    }
    for (const auto& s : h.free_symbols()) {
        const bool is_state = std::find(sys.states.begin(), sys.states.end(), s) != sys.states.end();
        if (!is_state && !sys.params.contains(s)) throw ValidationError("lie_derivative: unknown symbol '" + s + "'");
    }
    std::vector<Expr> terms;
    for (std::size_t i = 0; i < sys.n(); ++i) {
        Expr d = differentiate(h, sys.states[i]);
        if (d.is_zero()) continue;
        terms.push_back(d * sys.f[i]);
    }
    return simplify(Expr::sum(std::move(terms)));
}

ObservabilitySet observability_set(const SystemDef& sys, int m) {
    if (m < 1) throw std::invalid_argument("observability_set: m must be >= 1");
    ObservabilitySet os;
    os.m = m;
    os.table.push_back(sys.h);
    for (int i = 1; i < m; ++i) {
        std::vector<Expr> next;
        next.reserve(sys.p());
        for (const auto& e : os.table.back()) next.push_back(lie_derivative(sys, e));
        os.table.push_back(std::move(next));
    }
    return os;
}

QDerivatives q_derivatives(const SystemDef& sys, int v) {
    if (v < 0) throw std::invalid_argument("q_derivatives: v must be >= 0");
    QDerivatives qd;
    qd.v = v;
    qd.q.push_back(sys.q);
    for (int k = 1; k <= v; ++k) qd.q.push_back(lie_derivative(sys, qd.q.back()));
    return qd;
}

GradientEvaluator::GradientEvaluator(const SystemDef& sys, std::span<const Expr> rows)
    : gradients_(gradients_of(sys, rows)),
      evaluator_(sys, flatten(gradients_)),
      rows_(rows.size()),
      cols_(sys.n()) {}

Eigen::MatrixXd GradientEvaluator::at(std::span<const double> x) const {
    std::vector<double> values = evaluator_(x);
    Eigen::MatrixXd J(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols_ + c];
        }
    }
    return J;
}

Eigen::MatrixXd observability_jacobian(const SystemDef& sys, const ObservabilitySet& os, std::span<const double> x) {
    const auto rows = os.rows();
    return GradientEvaluator(sys, rows).at(x);
}

bool in_box(const SystemDef& sys, std::span<const double> x) {
    for (std::size_t i = 0; i < sys.n(); ++i) {
        const auto& iv = sys.box.at(sys.states[i]);
        if (x[i] < iv.lo || x[i] > iv.hi) return false;
    }
    return true;
}

std::vector<double> lie_series_predict(const SystemDef& sys, std::span<const double> x0, double t, int m) {
    if (m < 1) throw std::invalid_argument("lie_series_predict: m must be >= 1");
    const ObservabilitySet os = observability_set(sys, m + 1);
    std::vector<double> y(sys.p(), 0.0);
    double coef = 1.0;
    for (int i = 0; i <= m; ++i) {
        if (i > 0) coef *= t / i;
        const std::vector<double> values = PointEvaluator(sys, os.table[static_cast<std::size_t>(i)])(x0);
        for (std::size_t j = 0; j < sys.p(); ++j) y[j] += values[j] * coef;
    }
    return y;
}

} // namespace fobs
