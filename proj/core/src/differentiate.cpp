#include "fobs/expr.hpp"

namespace fobs {

namespace {

bool matches(const Expr& e, const Expr& var) {
    if (e.kind() != var.kind()) return false;
    return e.name() == var.name();
}

// Raw derivative; the caller simplifies once at the end.
Expr d(const Expr& e, const Expr& var) {
    switch (e.kind()) {
    case ExprKind::Constant: return Expr::integer(0);
    case ExprKind::Symbol:
    case ExprKind::WVar: return Expr::integer(matches(e, var) ? 1 : 0);
    case ExprKind::Neg: return negate_folded(d(e.operand(0), var));
    case ExprKind::Sum: {
        std::vector<Expr> terms;
        for (const auto& t : e.operands()) terms.push_back(d(t, var));
        return Expr::sum(std::move(terms));
    }
    case ExprKind::Product: {
        const auto ops = e.operands();
        std::vector<Expr> terms;
        for (std::size_t i = 0; i < ops.size(); ++i) {
            Expr di = d(ops[i], var);
            if (di.is_zero()) continue;
            std::vector<Expr> factors(ops.begin(), ops.end());
            factors[i] = std::move(di);
            terms.push_back(Expr::product(std::move(factors)));
        }
        return Expr::sum(std::move(terms));
    }
    case ExprKind::Quotient: {
        const Expr& u = e.operand(0);
        const Expr& v = e.operand(1);
        Expr du = d(u, var);
        Expr dv = d(v, var);
        return Expr::quotient(du * v - u * dv, Expr::power(v, 2));
    }
    case ExprKind::Power: {
        const Expr& b = e.operand(0);
        const int k = e.exponent();
        return Expr::product({Expr::integer(k), Expr::power(b, k - 1), d(b, var)});
    }
    case ExprKind::Exp: return e * d(e.operand(0), var);
    case ExprKind::Ln: return Expr::quotient(d(e.operand(0), var), e.operand(0));
    case ExprKind::Sin: return Expr::function(ExprKind::Cos, e.operand(0)) * d(e.operand(0), var);
    case ExprKind::Cos: return negate_folded(Expr::function(ExprKind::Sin, e.operand(0)) * d(e.operand(0), var));
    }
    return Expr::integer(0);
}

Expr subst(const Expr& e, const Substitution& s) {
    switch (e.kind()) {
    case ExprKind::Constant: return e;
    case ExprKind::Symbol: {
        auto it = s.symbols.find(e.name());
        return it == s.symbols.end() ? e : it->second;
    }
    case ExprKind::WVar: {
        auto it = s.w.find(e.windex());
        return it == s.w.end() ? e : it->second;
    }
    case ExprKind::Neg: return Expr::neg(subst(e.operand(0), s));
    case ExprKind::Sum:
    case ExprKind::Product: {
        std::vector<Expr> ops;
        for (const auto& c : e.operands()) ops.push_back(subst(c, s));
        return e.kind() == ExprKind::Sum ? Expr::sum(std::move(ops)) : Expr::product(std::move(ops));
    }
    case ExprKind::Quotient: return Expr::quotient(subst(e.operand(0), s), subst(e.operand(1), s));
    case ExprKind::Power: return Expr::power(subst(e.operand(0), s), e.exponent());
    default: return Expr::function(e.kind(), subst(e.operand(0), s));
    }
}

} // namespace

Expr differentiate(const Expr& e, std::string_view var) { return simplify(d(e, Expr::symbol(std::string(var)))); }

Expr differentiate(const Expr& e, WIndex var) { return simplify(d(e, Expr::w(var))); }

Expr substitute(const Expr& e, const Substitution& bindings) { return simplify(subst(e, bindings)); }

} // namespace fobs
