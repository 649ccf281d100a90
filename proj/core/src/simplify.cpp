#include "fobs/expr.hpp"

#include <algorithm>

namespace fobs {

namespace {

// Normal form used between passes:
//  - no Neg or Quotient nodes (a/b is a * b^-1, -a is -1 * a);
//  - sums are flat, like terms merged, the constant term last;
//  - products are flat, at most one leading constant (never 1), like bases
//    merged into integer powers;
//  - powers have exponent != 0, 1 and a base that is not a constant, power or
//    product.
// finalize() turns the normal form back into readable quotients and negations.

Expr nf(const Expr& e);
Expr nf_sum(const std::vector<Expr>& terms);
Expr nf_product(const std::vector<Expr>& factors);
Expr nf_power(const Expr& base, int k);

struct Factor {
    Expr base;
    int exponent;
};

void split_term(const Expr& t, Number& coef, std::vector<Expr>& rest) {
    if (t.is_constant()) {
        coef = t.number();
        return;
    }
    if (t.kind() == ExprKind::Product) {
        auto ops = t.operands();
        std::size_t i = 0;
        coef = Number::rational(1);
        if (ops[0].is_constant()) {
            coef = ops[0].number();
            i = 1;
        }
        rest.assign(ops.begin() + static_cast<std::ptrdiff_t>(i), ops.end());
        return;
    }
    coef = Number::rational(1);
    rest = {t};
}

Expr rebuild_term(const Number& coef, const std::vector<Expr>& rest) {
    if (rest.empty()) return Expr::constant(coef);
    if (coef.is_zero()) return Expr::constant(coef);
    std::vector<Expr> ops;
    ops.reserve(rest.size() + 1);
    if (!(coef.is_one() && coef.is_exact())) ops.push_back(Expr::constant(coef));
    ops.insert(ops.end(), rest.begin(), rest.end());
    if (ops.size() == 1) return ops.front();
    return Expr::product(std::move(ops));
}

Expr nf_sum(const std::vector<Expr>& terms) {
    std::vector<Expr> flat;
    for (const auto& t : terms) {
        if (t.kind() == ExprKind::Sum) {
            flat.insert(flat.end(), t.operands().begin(), t.operands().end());
        } else {
            flat.push_back(t);
        }
    }

    Number constant = Number::rational(0);
    bool have_constant = false;
    std::vector<std::pair<std::vector<Expr>, Number>> groups;
    for (const auto& t : flat) {
        Number coef;
        std::vector<Expr> rest;
        split_term(t, coef, rest);
        if (rest.empty()) {
            constant = constant + coef;
            have_constant = true;
            continue;
        }
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == rest; });
        if (it == groups.end()) {
            groups.emplace_back(std::move(rest), coef);
        } else {
            it->second = it->second + coef;
        }
    }

    std::vector<Expr> out;
    for (const auto& [rest, coef] : groups) {
        if (coef.is_zero()) continue;
        out.push_back(rebuild_term(coef, rest));
    }
    if (have_constant && (!constant.is_zero() || out.empty())) out.push_back(Expr::constant(constant));
    if (out.empty()) return Expr::integer(0);
    if (out.size() == 1) return out.front();
    return Expr::sum(std::move(out));
}

Expr nf_product(const std::vector<Expr>& factors) {
    Number coef = Number::rational(1);
    std::vector<Factor> merged;
    auto add = [&](const Expr& base, int k) {
        auto it = std::find_if(merged.begin(), merged.end(), [&](const Factor& f) { return f.base == base; });
        if (it == merged.end()) {
            merged.push_back({base, k});
        } else {
            it->exponent += k;
        }
    };
    std::vector<Expr> flat;
    for (const auto& f : factors) {
        if (f.kind() == ExprKind::Product) {
            flat.insert(flat.end(), f.operands().begin(), f.operands().end());
        } else {
            flat.push_back(f);
        }
    }
    for (const auto& f : flat) {
        if (f.is_constant()) {
            coef = coef * f.number();
        } else if (f.kind() == ExprKind::Power) {
            add(f.operand(0), f.exponent());
        } else {
            add(f, 1);
        }
    }
    if (coef.is_zero()) return Expr::constant(coef);

    std::vector<Expr> rest;
    for (const auto& f : merged) {
        if (f.exponent == 0) continue;
        Expr p = nf_power(f.base, f.exponent);
        if (p.is_constant()) {
            coef = coef * p.number();
        } else {
            rest.push_back(std::move(p));
        }
    }
    if (coef.is_zero()) return Expr::constant(coef);
    return rebuild_term(coef, rest);
}

Expr nf_power(const Expr& base, int k) {
    if (k == 0) return Expr::integer(1);
    if (k == 1) return base;
    if (base.is_constant()) {
        // 0^-k stays symbolic so that evaluation reports the division by zero.
        if (base.number().is_zero() && k < 0) return Expr::power(base, k);
        return Expr::constant(base.number().pow(k));
    }
    if (base.kind() == ExprKind::Power) {
        const long combined = static_cast<long>(base.exponent()) * k;
        return nf_power(base.operand(0), static_cast<int>(combined));
    }
    if (base.kind() == ExprKind::Product) {
        std::vector<Expr> parts;
        for (const auto& f : base.operands()) parts.push_back(nf_power(f, k));
        return nf_product(parts);
    }
    return Expr::power(base, k);
}

Expr nf_function(ExprKind kind, const Expr& arg) {
    if (arg.is_constant() && arg.number().is_zero()) {
        if (kind == ExprKind::Exp || kind == ExprKind::Cos) return Expr::integer(1);
        if (kind == ExprKind::Sin) return Expr::integer(0);
    }
    if (kind == ExprKind::Ln && arg.is_constant() && arg.number().is_one()) return Expr::integer(0);
    if (kind == ExprKind::Ln && arg.kind() == ExprKind::Exp) return arg.operand(0);
    return Expr::function(kind, arg);
}

Expr nf(const Expr& e) {
    switch (e.kind()) {
    case ExprKind::Constant:
    case ExprKind::Symbol:
    case ExprKind::WVar: return e;
    case ExprKind::Neg: return nf_product({Expr::integer(-1), nf(e.operand(0))});
    case ExprKind::Sum: {
        std::vector<Expr> terms;
        for (const auto& t : e.operands()) terms.push_back(nf(t));
        return nf_sum(terms);
    }
    case ExprKind::Product: {
        std::vector<Expr> factors;
        for (const auto& f : e.operands()) factors.push_back(nf(f));
        return nf_product(factors);
    }
    case ExprKind::Quotient: return nf_product({nf(e.operand(0)), nf_power(nf(e.operand(1)), -1)});
    case ExprKind::Power: return nf_power(nf(e.operand(0)), e.exponent());
    case ExprKind::Exp:
    case ExprKind::Ln:
    case ExprKind::Sin:
    case ExprKind::Cos: return nf_function(e.kind(), nf(e.operand(0)));
    }
    return e;
}

Expr finalize(const Expr& e);

Expr join_product(std::vector<Expr> ops) {
    if (ops.empty()) return Expr::integer(1);
    if (ops.size() == 1) return ops.front();
    return Expr::product(std::move(ops));
}

Expr finalize_product(const Number& coef, std::span<const Expr> factors) {
    std::vector<Expr> num;
    std::vector<Expr> den;
    for (const auto& f : factors) {
        if (f.kind() == ExprKind::Power && f.exponent() < 0) {
            den.push_back(f.exponent() == -1 ? finalize(f.operand(0)) : Expr::power(finalize(f.operand(0)), -f.exponent()));
        } else {
            num.push_back(finalize(f));
        }
    }
    const bool negative = coef.is_negative();
    const Number mag = negative ? -coef : coef;
    Number num_coef = mag;
    Number den_coef = Number::rational(1);
    if (mag.is_exact() && mag.den() != 1 && !den.empty()) {
        num_coef = Number::rational(mag.num());
        den_coef = Number::rational(mag.den());
    }
    if (!den_coef.is_one()) den.insert(den.begin(), Expr::constant(den_coef));

    Expr result;
    if (den.empty()) {
        if (!(num_coef.is_one() && num_coef.is_exact())) num.insert(num.begin(), Expr::constant(negative ? coef : num_coef));
        else if (negative) return negate_folded(join_product(std::move(num)));
        return join_product(std::move(num));
    }
    if (!(num_coef.is_one() && num_coef.is_exact())) num.insert(num.begin(), Expr::constant(num_coef));
    result = Expr::quotient(join_product(std::move(num)), join_product(std::move(den)));
    return negative ? negate_folded(result) : result;
}

Expr finalize(const Expr& e) {
    switch (e.kind()) {
    case ExprKind::Sum: {
        std::vector<Expr> ops;
        for (const auto& t : e.operands()) ops.push_back(finalize(t));
        return Expr::sum(std::move(ops));
    }
    case ExprKind::Product: {
        auto ops = e.operands();
        if (ops[0].is_constant()) return finalize_product(ops[0].number(), ops.subspan(1));
        return finalize_product(Number::rational(1), ops);
    }
    case ExprKind::Power:
        if (e.exponent() < 0) return finalize_product(Number::rational(1), std::span<const Expr>(&e, 1));
        return Expr::power(finalize(e.operand(0)), e.exponent());
    case ExprKind::Exp:
    case ExprKind::Ln:
    case ExprKind::Sin:
    case ExprKind::Cos: return Expr::function(e.kind(), finalize(e.operand(0)));
    default: return e;
    }
}

} // namespace

Expr simplify(const Expr& e) { return finalize(nf(e)); }

} // namespace fobs
