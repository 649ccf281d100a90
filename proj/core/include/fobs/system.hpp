#pragma once

#include "fobs/expr.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fobs {

/// Unforced nonlinear system dx/dt = F(x), y = H(x), with a scalar functional
/// z = q(x) to be estimated and a sampling box standing in for the working set.
struct SystemDef {
    std::vector<std::string> states;
    Bindings params;
    std::vector<Expr> f;
    std::vector<Expr> h;
    Expr q;
    Box box;

    [[nodiscard]] std::size_t n() const noexcept { return states.size(); }
    [[nodiscard]] std::size_t p() const noexcept { return h.size(); }

    /// Parameters plus the given state values.
    [[nodiscard]] Bindings bindings_at(std::span<const double> x) const;
    /// Slots: states in order, then parameters.
    [[nodiscard]] SlotLayout layout() const;

    friend bool operator==(const SystemDef&, const SystemDef&) = default;
};

/// Throws ValidationError naming the first violated rule.
void validate(const SystemDef& sys);

/// System file: {"states": [...], "params": {...}, "f": [...], "h": [...], "q": "...", "box": {...}}.
SystemDef parse_system_json(std::string_view text);
SystemDef load_system(const std::filesystem::path& path);
std::string system_to_json(const SystemDef& sys);

/// A -> B -> C -> D in an isothermal batch reactor; y = cB, z = cA.
SystemDef builtin_batch_reactor(double k1, double k2, double k3);

/// Grouped constants of the jacketed CSTR. Defaults are a dimensionless,
/// order-one set with k(theta) = k0 * exp(-ER / theta).
struct CstrParams {
    double flow_over_volume = 1.0;         // F/V
    double feed_concentration = 1.0;       // cA_in
    double feed_temperature = 1.0;         // theta_in
    double heat_of_reaction = 1.0;         // (-dH)_R / (rho cp)
    double reactor_transfer = 1.0;         // U A / (rho cp V)
    double jacket_flow_over_volume = 1.0;  // Fj/Vj
    double jacket_feed_temperature = 0.5;  // theta_j_in
    double jacket_transfer = 1.0;          // U A / (rho_j cp_j Vj)
    double k0 = 5.0;
    double activation = 1.0;               // E/R
    Box box{{"cA", {0.1, 1.0}}, {"theta", {0.8, 1.6}}, {"thetaj", {0.6, 1.4}}};
};

/// States (cA, theta, thetaj); y = (theta, thetaj), z = cA.
SystemDef builtin_cstr(const CstrParams& params = {});

/// `n` seeded uniform points in the system box, in state order.
std::vector<std::vector<double>> sample_states(const SystemDef& sys, int n, std::uint64_t seed);

/// Evaluates a fixed list of state-space expressions at arbitrary points with
/// the system's parameters bound once.
class PointEvaluator {
public:
    PointEvaluator(const SystemDef& sys, std::span<const Expr> exprs);

    /// Throws EvalError.
    void evaluate(std::span<const double> x, std::span<double> out) const;
    [[nodiscard]] std::vector<double> operator()(std::span<const double> x) const;
    [[nodiscard]] std::size_t size() const noexcept { return compiled_.size(); }

private:
    std::vector<CompiledExpr> compiled_;
    std::vector<double> slots_;
    std::size_t n_states_;
};

/// Linear system dx/dt = F x, y = H x, z = q x.
struct LinearSystemDef {
    Eigen::MatrixXd F;
    Eigen::MatrixXd H;
    Eigen::RowVectorXd q;

    [[nodiscard]] Eigen::Index n() const noexcept { return F.rows(); }
    [[nodiscard]] Eigen::Index p() const noexcept { return H.rows(); }
};

void validate(const LinearSystemDef& lsys);

/// Linear system file: {"F": [[...]], "H": [[...]], "q": [...] or [[...]]}, row-major.
LinearSystemDef parse_linear_system_json(std::string_view text);
LinearSystemDef load_linear_system(const std::filesystem::path& path);
std::string linear_system_to_json(const LinearSystemDef& lsys);

/// Reads a whole file; throws ValidationError when it cannot be opened.
/// The linear system as a SystemDef over states x1..xn (outputs y = Hx),
/// with every state sampled in [-box_half_width, box_half_width].
SystemDef as_system(const LinearSystemDef& lsys, double box_half_width = 1.0);

std::string read_text_file(const std::filesystem::path& path);

} // namespace fobs
