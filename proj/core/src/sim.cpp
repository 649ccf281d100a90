#include "fobs/sim.hpp"

#include "fobs/error.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>

namespace fobs {

namespace {

using Vec = Eigen::VectorXd;
using Rhs = std::function<Vec(const Vec&)>;

void check_grid(double t_final, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
    if (!(t_final >= dt) || !std::isfinite(t_final)) throw ValidationError("t_final must be >= dt");
}

Vec rk4_step(const Rhs& f, const Vec& s, double dt) {
    const Vec k1 = f(s);
    const Vec k2 = f(s + 0.5 * dt * k1);
    const Vec k3 = f(s + 0.5 * dt * k2);
    const Vec k4 = f(s + dt * k3);
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<double> to_std(const Vec& v, Eigen::Index offset, Eigen::Index len) {
    return {v.data() + offset, v.data() + offset + len};
}

// Drives the shared loop: `record` appends one row for state s (and may throw
// EvalError); returns zhat so divergence can be flagged.
struct Recorder {
    std::function<double(const Vec&, SimTrace&)> record;
};

SimTrace run(Vec state, const Rhs& f, const Recorder& rec, double t_final, double dt, bool estimate) {
    check_grid(t_final, dt);
    SimTrace tr;
    tr.dt = dt;
    tr.has_estimate = estimate;
    const auto n_steps = static_cast<long>(std::llround(t_final / dt));
    tr.t.reserve(static_cast<std::size_t>(n_steps) + 1);
    for (long k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt;
        try {
            tr.t.push_back(t);
            const double zhat = rec.record(state, tr);
            if (!state.allFinite() || (estimate && !(std::abs(zhat) <= kDivergenceCutoff))) {
                tr.event = true;
                tr.event_message = "divergence at t=" + std::to_string(t);
                return tr;
            }
            if (k == n_steps) break;
            state = rk4_step(f, state, dt);
        } catch (const EvalError& e) {
            if (tr.z.size() < tr.t.size()) {
                tr.t.pop_back();
                tr.x.resize(tr.t.size());
                tr.y.resize(tr.t.size());
            }
            tr.event = true;
            tr.event_message = "evaluation failure at t=" + std::to_string(t) + ": " + e.what();
            return tr;
        }
    }
    return tr;
}

void push_plant_row(SimTrace& tr, std::vector<double> x, std::vector<double> y, double z, double zhat,
                    bool estimate) {
    tr.x.push_back(std::move(x));
    tr.y.push_back(std::move(y));
    tr.z.push_back(z);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    tr.zhat.push_back(estimate ? zhat : nan);
    tr.err.push_back(estimate ? zhat - z : nan);
}

Vec join(std::span<const double> a, std::span<const double> b) {
    Vec s(static_cast<Eigen::Index>(a.size() + b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) s(static_cast<Eigen::Index>(i)) = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) s(static_cast<Eigen::Index>(a.size() + i)) = b[i];
    return s;
}

void check_x0(std::size_t n, std::span<const double> x0) {
    if (x0.size() != n) {
        throw ValidationError("x0 has " + std::to_string(x0.size()) + " entries, expected " + std::to_string(n));
    }
}

} // namespace

std::size_t SimTrace::index_at(double time) const {
    if (t.empty()) throw ValidationError("empty trace");
    const auto k = static_cast<std::size_t>(std::max(0.0, std::round(time / dt)));
    return std::min(k, t.size() - 1);
}

double SimTrace::max_abs_error() const {
    double m = 0.0;
    for (double e : err) m = std::max(m, std::abs(e));
    return m;
}

SimTrace integrate_plant(const SystemDef& sys, std::span<const double> x0, double t_final, double dt) {
    check_x0(sys.n(), x0);
    const auto n = static_cast<Eigen::Index>(sys.n());
    const PointEvaluator f(sys, sys.f);
    const PointEvaluator out(sys, sys.h);
    const std::vector<Expr> q{sys.q};
    const PointEvaluator z(sys, q);
    const Rhs rhs = [&](const Vec& s) {
        Vec d(n);
        f.evaluate({s.data(), static_cast<std::size_t>(n)}, {d.data(), static_cast<std::size_t>(n)});
        return d;
    };
    const Recorder rec{[&](const Vec& s, SimTrace& tr) {
        const std::span<const double> xs{s.data(), static_cast<std::size_t>(n)};
        push_plant_row(tr, to_std(s, 0, n), out(xs), z(xs)[0], 0.0, false);
        return 0.0;
    }};
    return run(join(x0, {}), rhs, rec, t_final, dt, false);
}

SimTrace simulate_coupled(const SystemDef& sys, const ObserverIO& obs, std::span<const double> x0,
                          const ChainState& chain0, double t_final, double dt) {
    check_x0(sys.n(), x0);
    const int v = obs.v;
    if (v < 1 || chain0.size() != static_cast<std::size_t>(v)) {
        throw ValidationError("chain initial state must have v=" + std::to_string(v) + " entries");
    }
    if (obs.alphas.order() != v) throw ValidationError("observer alphas do not match v");

    // T is compiled over its w-variables followed by the parameters; the
    // w-values come from Lie derivatives of the outputs at the plant state.
    SlotLayout layout;
    std::vector<Expr> w_exprs;
    const ObservabilitySet os = observability_set(sys, v + 1);
    for (const auto& w : obs.T.w_variables()) {
        if (w.order > v || w.output < 1 || static_cast<std::size_t>(w.output) > sys.p()) {
            throw ValidationError("observer uses " + w.name() + ", which is outside the measurement chain");
        }
        layout.add(w);
        w_exprs.push_back(os.table[static_cast<std::size_t>(w.order)][static_cast<std::size_t>(w.output - 1)]);
    }
    const std::size_t n_w = w_exprs.size();
    std::vector<double> param_slots;
    for (const auto& [name, value] : sys.params) {
        layout.add(name);
        param_slots.push_back(value);
    }
    const CompiledExpr T(obs.T, layout);
    const PointEvaluator w_eval(sys, w_exprs);
    const PointEvaluator f(sys, sys.f);
    const PointEvaluator out(sys, sys.h);
    const std::vector<Expr> q{sys.q};
    const PointEvaluator z(sys, q);

    const auto n = static_cast<Eigen::Index>(sys.n());
    const Rhs rhs = [&](const Vec& s) {
        Vec d(s.size());
        const std::span<const double> xs{s.data(), static_cast<std::size_t>(n)};
        f.evaluate(xs, {d.data(), static_cast<std::size_t>(n)});
        std::vector<double> slots(n_w + param_slots.size());
        w_eval.evaluate(xs, {slots.data(), n_w});
        std::copy(param_slots.begin(), param_slots.end(), slots.begin() + static_cast<std::ptrdiff_t>(n_w));
        for (int k = 0; k + 1 < v; ++k) d(n + k) = s(n + k + 1);
        double top = T(slots);
        for (int k = 1; k <= v; ++k) top -= obs.alphas.at(k) * s(n + v - k);
        d(n + v - 1) = top;
        return d;
    };
    const Recorder rec{[&](const Vec& s, SimTrace& tr) {
        const std::span<const double> xs{s.data(), static_cast<std::size_t>(n)};
        const double zhat = s(n);
        push_plant_row(tr, to_std(s, 0, n), out(xs), z(xs)[0], zhat, true);
        return zhat;
    }};
    return run(join(x0, chain0), rhs, rec, t_final, dt, true);
}

SimTrace simulate_custom_observer(const SystemDef& sys, const std::vector<Expr>& xi_rhs, const Expr& zhat_expr,
                                  std::span<const double> x0, std::span<const double> xi0, double t_final,
                                  double dt) {
    check_x0(sys.n(), x0);
    if (xi0.size() != xi_rhs.size() || xi_rhs.empty()) {
        throw ValidationError("observer state and right-hand side must have the same nonzero length");
    }
    SlotLayout layout;
    const std::size_t K = xi_rhs.size();
    const std::size_t p = sys.p();
    for (std::size_t k = 1; k <= K; ++k) layout.add("xi" + std::to_string(k));
    for (std::size_t j = 1; j <= p; ++j) layout.add("y" + std::to_string(j));
    std::vector<double> slots_init(K + p);
    for (const auto& [name, value] : sys.params) {
        layout.add(name);
        slots_init.push_back(value);
    }
    std::vector<CompiledExpr> sigma;
    for (const auto& e : xi_rhs) sigma.emplace_back(e, layout);
    const CompiledExpr omega(zhat_expr, layout);
    const PointEvaluator f(sys, sys.f);
    const PointEvaluator out(sys, sys.h);
    const std::vector<Expr> q{sys.q};
    const PointEvaluator z(sys, q);

    const auto n = static_cast<Eigen::Index>(sys.n());
    const auto fill = [&](const Vec& s, std::vector<double>& slots) {
        for (std::size_t k = 0; k < K; ++k) slots[k] = s(n + static_cast<Eigen::Index>(k));
        out.evaluate({s.data(), static_cast<std::size_t>(n)}, {slots.data() + K, p});
    };
    const Rhs rhs = [&](const Vec& s) {
        Vec d(s.size());
        f.evaluate({s.data(), static_cast<std::size_t>(n)}, {d.data(), static_cast<std::size_t>(n)});
        std::vector<double> slots = slots_init;
        fill(s, slots);
        for (std::size_t k = 0; k < K; ++k) d(n + static_cast<Eigen::Index>(k)) = sigma[k](slots);
        return d;
    };
    const Recorder rec{[&](const Vec& s, SimTrace& tr) {
        std::vector<double> slots = slots_init;
        fill(s, slots);
        const double zhat = omega(slots);
        const std::span<const double> xs{s.data(), static_cast<std::size_t>(n)};
        push_plant_row(tr, to_std(s, 0, n), {slots.begin() + static_cast<std::ptrdiff_t>(K),
                                             slots.begin() + static_cast<std::ptrdiff_t>(K + p)},
                       z(xs)[0], zhat, true);
        return zhat;
    }};
    return run(join(x0, xi0), rhs, rec, t_final, dt, true);
}

SimTrace simulate_linear_observer(const LinearSystemDef& lsys, const LinearObserver& lobs,
                                  std::span<const double> x0, std::span<const double> xi0, double t_final,
                                  double dt) {
    validate(lsys);
    const Eigen::Index n = lsys.n();
    const Eigen::Index v = lobs.v;
    check_x0(static_cast<std::size_t>(n), x0);
    if (static_cast<Eigen::Index>(xi0.size()) != v) throw ValidationError("xi0 must have v entries");
    if (lobs.A.rows() != v || lobs.B.cols() != lsys.p()) throw ValidationError("observer does not fit the system");

    const Rhs rhs = [&](const Vec& s) {
        Vec d(s.size());
        const Vec x = s.head(n);
        d.head(n) = lsys.F * x;
        d.tail(v) = lobs.A * s.tail(v) + lobs.B * (lsys.H * x);
        return d;
    };
    const Recorder rec{[&](const Vec& s, SimTrace& tr) {
        const Vec x = s.head(n);
        const Vec y = lsys.H * x;
        const double zhat = lobs.C.dot(s.tail(v)) + lobs.D.dot(y);
        push_plant_row(tr, to_std(s, 0, n), to_std(y, 0, y.size()), lsys.q.dot(x), zhat, true);
        return zhat;
    }};
    return run(join(x0, xi0), rhs, rec, t_final, dt, true);
}

ChainState exact_chain_init(const SystemDef& sys, int v, std::span<const double> x0) {
    check_x0(sys.n(), x0);
    if (v < 1) throw ValidationError("v must be >= 1");
    QDerivatives qd = q_derivatives(sys, v - 1);
    return PointEvaluator(sys, qd.q)(x0);
}

std::vector<double> initial_error_derivatives(const SystemDef& sys, std::span<const double> x0,
                                              const ChainState& chain0) {
    const ChainState exact = exact_chain_init(sys, static_cast<int>(chain0.size()), x0);
    std::vector<double> e(chain0.size());
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = chain0[k] - exact[k];
    return e;
}

namespace {

// Rows k = 0..v-1: zhat^(k) = C A^k xi + G_k x with
// G_k = sum_{j<k} C A^(k-1-j) B H F^j + D H F^k.
void linear_output_derivatives(const LinearSystemDef& lsys, const LinearObserver& lobs, Eigen::MatrixXd& O,
                               Eigen::MatrixXd& G) {
    const Eigen::Index v = lobs.v;
    O.resize(v, v);
    G.resize(v, lsys.n());
    Eigen::RowVectorXd CAk = lobs.C;
    std::vector<Eigen::RowVectorXd> CA{CAk};
    for (Eigen::Index k = 1; k < v; ++k) CA.push_back(CA.back() * lobs.A);
    Eigen::MatrixXd HFk = lsys.H;
    std::vector<Eigen::MatrixXd> HF{HFk};
    for (Eigen::Index k = 1; k < v; ++k) HF.push_back(HF.back() * lsys.F);
    for (Eigen::Index k = 0; k < v; ++k) {
        O.row(k) = CA[static_cast<std::size_t>(k)];
        Eigen::RowVectorXd g = lobs.D * HF[static_cast<std::size_t>(k)];
        for (Eigen::Index j = 0; j < k; ++j) {
            g += CA[static_cast<std::size_t>(k - 1 - j)] * lobs.B * HF[static_cast<std::size_t>(j)];
        }
        G.row(k) = g;
    }
}

} // namespace

Eigen::VectorXd exact_linear_init(const LinearSystemDef& lsys, const LinearObserver& lobs,
                                  std::span<const double> x0) {
    check_x0(static_cast<std::size_t>(lsys.n()), x0);
    Eigen::MatrixXd O, G;
    linear_output_derivatives(lsys, lobs, O, G);
    const Eigen::Map<const Eigen::VectorXd> x(x0.data(), lsys.n());
    const Eigen::MatrixXd Q = functional_stack(lsys, lobs.v - 1);
    const Eigen::VectorXd r = Q * x - G * x;
    return O.fullPivLu().solve(r);
}

std::vector<double> linear_initial_error_derivatives(const LinearSystemDef& lsys, const LinearObserver& lobs,
                                                     std::span<const double> x0, std::span<const double> xi0) {
    check_x0(static_cast<std::size_t>(lsys.n()), x0);
    Eigen::MatrixXd O, G;
    linear_output_derivatives(lsys, lobs, O, G);
    const Eigen::Map<const Eigen::VectorXd> x(x0.data(), lsys.n());
    const Eigen::Map<const Eigen::VectorXd> xi(xi0.data(), lobs.v);
    const Eigen::VectorXd e = O * xi + G * x - functional_stack(lsys, lobs.v - 1) * x;
    return {e.data(), e.data() + e.size()};
}

double exact_error_solution(const AlphaCoeffs& alphas, std::span<const double> e_init, double t) {
    const int v = alphas.order();
    if (e_init.size() != static_cast<std::size_t>(v)) throw ValidationError("e_init must have v entries");
    if (v == 1) return e_init[0] * std::exp(-alphas.at(1) * t);
    const Eigen::MatrixXd At = companion_matrix(alphas.alpha) * t;
    const Eigen::MatrixXd Phi = At.exp();
    const Eigen::Map<const Eigen::VectorXd> e0(e_init.data(), v);
    return Phi.row(0).dot(e0);
}

double error_decay_fit(const SimTrace& trace, double t_lo, double t_hi) {
    if (!trace.has_estimate) throw ValidationError("trace has no estimate");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    int sign = 0;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const double t = trace.t[k];
        if (t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
        const double e = trace.err[k];
        if (!(std::abs(e) > 1e-14)) {
            throw ValidationError("|e| falls below 1e-14 in the fit window; compare against the exact error instead");
        }
        const int s = e > 0 ? 1 : -1;
        if (sign != 0 && s != sign) {
            throw ValidationError("error changes sign in the fit window (oscillatory poles); fit the envelope or "
                                  "compare against the exact error instead");
        }
        sign = s;
        const double ly = std::log(std::abs(e));
        sx += t;
        sy += ly;
        sxx += t * t;
        sxy += t * ly;
        ++count;
    }
    if (count < 2) throw ValidationError("fit window holds fewer than two samples");
    const double denom = count * sxx - sx * sx;
    return (count * sxy - sx * sy) / denom;
}

void write_csv(std::ostream& os, const SimTrace& trace) {
    const std::size_t n = trace.x.empty() ? 0 : trace.x.front().size();
    const std::size_t p = trace.y.empty() ? 0 : trace.y.front().size();
    os << 't';
    for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
    for (std::size_t j = 1; j <= p; ++j) os << ",y" << j;
    os << ",z,zhat,err\n";
    char buf[32];
    const auto put = [&](double d) {
        std::snprintf(buf, sizeof buf, "%.17g", d);
        os << buf;
    };
    for (std::size_t k = 0; k < trace.size(); ++k) {
        put(trace.t[k]);
        for (double xi : trace.x[k]) os << ',', put(xi);
        for (double yj : trace.y[k]) os << ',', put(yj);
        os << ',', put(trace.z[k]);
        os << ',', put(trace.zhat[k]);
        os << ',', put(trace.err[k]);
        os << '\n';
    }
}

} // namespace fobs
