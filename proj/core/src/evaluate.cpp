#include "fobs/error.hpp"
#include "fobs/expr.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fobs {

namespace {

double checked(double v, const Expr& e) {
    if (!std::isfinite(v)) throw EvalError("non-finite value", e.to_string());
    return v;
}

double apply_power(double b, int k, const Expr& e) {
    if (b == 0.0 && k < 0) throw EvalError("division by zero", e.to_string());
    return checked(std::pow(b, k), e);
}

double apply_function(ExprKind kind, double a, const Expr& e) {
    switch (kind) {
    case ExprKind::Exp: return checked(std::exp(a), e);
    case ExprKind::Ln:
        if (a <= 0.0) throw EvalError("ln of non-positive argument", e.to_string());
        return std::log(a);
    case ExprKind::Sin: return std::sin(a);
    case ExprKind::Cos: return std::cos(a);
    default: throw std::logic_error("not a function");
    }
}

double eval(const Expr& e, const Bindings& b, const WBindings& w) {
    switch (e.kind()) {
    case ExprKind::Constant: return e.number().value();
    case ExprKind::Symbol: {
        auto it = b.find(e.name());
        if (it == b.end()) throw EvalError("unbound symbol", e.name());
        return it->second;
    }
    case ExprKind::WVar: {
        auto it = w.find(e.windex());
        if (it != w.end()) return it->second;
        auto jt = b.find(e.name());
        if (jt != b.end()) return jt->second;
        throw EvalError("unbound measurement-derivative variable", e.name());
    }
    case ExprKind::Neg: return -eval(e.operand(0), b, w);
    case ExprKind::Sum: {
        double s = 0.0;
        for (const auto& t : e.operands()) s += eval(t, b, w);
        return checked(s, e);
    }
    case ExprKind::Product: {
        double p = 1.0;
        for (const auto& f : e.operands()) p *= eval(f, b, w);
        return checked(p, e);
    }
    case ExprKind::Quotient: {
        const double num = eval(e.operand(0), b, w);
        const double den = eval(e.operand(1), b, w);
        if (den == 0.0) throw EvalError("division by zero", e.to_string());
        return checked(num / den, e);
    }
    case ExprKind::Power: return apply_power(eval(e.operand(0), b, w), e.exponent(), e);
    default: return apply_function(e.kind(), eval(e.operand(0), b, w), e);
    }
}

} // namespace

double evaluate(const Expr& e, const Bindings& bindings, const WBindings& wvals) { return eval(e, bindings, wvals); }

int SlotLayout::add(std::string_view name) {
    if (auto found = find(name)) return *found;
    const int idx = static_cast<int>(names_.size());
    names_.emplace_back(name);
    index_.emplace(std::string(name), idx);
    return idx;
}

std::optional<int> SlotLayout::find(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

CompiledExpr::CompiledExpr(const Expr& e, const SlotLayout& layout) : source_(e) {
    std::size_t depth = 0;
    auto emit = [&](auto&& self, const Expr& x) -> void {
        const detail::Node* node = x.node();
        switch (x.kind()) {
        case ExprKind::Constant:
            program_.push_back({x.kind(), 0, x.number().value(), node});
            ++depth;
            break;
        case ExprKind::Symbol:
        case ExprKind::WVar: {
            auto slot = layout.find(x.name());
            if (!slot) throw ValidationError("symbol '" + x.name() + "' has no slot");
            program_.push_back({x.kind(), *slot, 0.0, node});
            ++depth;
            break;
        }
        default: {
            for (const auto& c : x.operands()) self(self, c);
            const int n = static_cast<int>(x.operands().size());
            const int arg = x.kind() == ExprKind::Power ? x.exponent() : n;
            program_.push_back({x.kind(), arg, 0.0, node});
            depth -= static_cast<std::size_t>(n - 1);
            break;
        }
        }
        max_stack_ = std::max(max_stack_, depth);
    };
    emit(emit, e);
}

namespace {

// Finds the subtree behind a failing instruction so the error can print it.
const Expr* find_node(const Expr& root, const detail::Node* target) {
    if (root.node() == target) return &root;
    for (const auto& c : root.operands()) {
        if (const Expr* f = find_node(c, target)) return f;
    }
    return nullptr;
}

} // namespace

double CompiledExpr::operator()(std::span<const double> slots) const {
    std::array<double, 64> small{};
    std::vector<double> big;
    double* stack = small.data();
    if (max_stack_ > small.size()) {
        big.resize(max_stack_);
        stack = big.data();
    }
    std::size_t top = 0;
    auto fail = [&](const char* msg, const detail::Node* node) {
        const Expr* sub = find_node(source_, node);
        throw EvalError(msg, sub ? sub->to_string() : source_.to_string());
    };
    for (const Instr& in : program_) {
        switch (in.op) {
        case ExprKind::Constant: stack[top++] = in.value; break;
        case ExprKind::Symbol:
        case ExprKind::WVar: stack[top++] = slots[static_cast<std::size_t>(in.arg)]; break;
        case ExprKind::Neg: stack[top - 1] = -stack[top - 1]; break;
        case ExprKind::Sum: {
            double s = 0.0;
            for (int i = 0; i < in.arg; ++i) s += stack[top - static_cast<std::size_t>(in.arg) + static_cast<std::size_t>(i)];
            top -= static_cast<std::size_t>(in.arg);
            if (!std::isfinite(s)) fail("non-finite value", in.node);
            stack[top++] = s;
            break;
        }
        case ExprKind::Product: {
            double p = 1.0;
            for (int i = 0; i < in.arg; ++i) p *= stack[top - static_cast<std::size_t>(in.arg) + static_cast<std::size_t>(i)];
            top -= static_cast<std::size_t>(in.arg);
            if (!std::isfinite(p)) fail("non-finite value", in.node);
            stack[top++] = p;
            break;
        }
        case ExprKind::Quotient: {
            const double den = stack[--top];
            const double num = stack[top - 1];
            if (den == 0.0) fail("division by zero", in.node);
            const double q = num / den;
            if (!std::isfinite(q)) fail("non-finite value", in.node);
            stack[top - 1] = q;
            break;
        }
        case ExprKind::Power: {
            const double b = stack[top - 1];
            if (b == 0.0 && in.arg < 0) fail("division by zero", in.node);
            const double r = std::pow(b, in.arg);
            if (!std::isfinite(r)) fail("non-finite value", in.node);
            stack[top - 1] = r;
            break;
        }
        case ExprKind::Exp: {
            const double r = std::exp(stack[top - 1]);
            if (!std::isfinite(r)) fail("non-finite value", in.node);
            stack[top - 1] = r;
            break;
        }
        case ExprKind::Ln:
            if (stack[top - 1] <= 0.0) fail("ln of non-positive argument", in.node);
            stack[top - 1] = std::log(stack[top - 1]);
            break;
        case ExprKind::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
        case ExprKind::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
        }
    }
    return stack[0];
}

} // namespace fobs
