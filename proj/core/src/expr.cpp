#include "fobs/expr.hpp"

#include "fobs/error.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

namespace fobs {

namespace {

__extension__ typedef __int128 i128;

constexpr i128 kI64Max = std::numeric_limits<std::int64_t>::max();
constexpr i128 kI64Min = std::numeric_limits<std::int64_t>::min();

i128 gcd128(i128 a, i128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const i128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

// Reduced rational, or nullopt when it does not fit in 64 bits.
std::optional<Number> make_rational(i128 num, i128 den) {
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const i128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    if (num > kI64Max || num < kI64Min || den > kI64Max) return std::nullopt;
    return Number::rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

} // namespace

Number Number::rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    Number n;
    n.exact_ = true;
    i128 a = num;
    i128 b = den;
    if (b < 0) {
        a = -a;
        b = -b;
    }
    const i128 g = gcd128(a, b);
    if (g > 1) {
        a /= g;
        b /= g;
    }
    if (a > kI64Max || a < kI64Min || b > kI64Max) return real(static_cast<double>(num) / static_cast<double>(den));
    n.num_ = static_cast<std::int64_t>(a);
    n.den_ = static_cast<std::int64_t>(b);
    return n;
}

Number Number::real(double value) {
    Number n;
    n.exact_ = false;
    n.real_ = value;
    return n;
}

Number Number::from_double(double value) {
    if (std::isfinite(value) && std::trunc(value) == value && std::fabs(value) < 9.0e15) {
        return rational(static_cast<std::int64_t>(value));
    }
    return real(value);
}

double Number::value() const noexcept {
    if (!exact_) return real_;
    if (den_ == 1) return static_cast<double>(num_);
    return static_cast<double>(num_) / static_cast<double>(den_);
}

Number Number::operator-() const {
    if (exact_) {
        if (auto r = make_rational(-static_cast<i128>(num_), den_)) return *r;
        return real(-value());
    }
    return real(-real_);
}

Number operator+(const Number& a, const Number& b) {
    if (a.exact_ && b.exact_) {
        const i128 num = static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_;
        const i128 den = static_cast<i128>(a.den_) * b.den_;
        if (auto r = make_rational(num, den)) return *r;
    }
    return Number::real(a.value() + b.value());
}

Number operator*(const Number& a, const Number& b) {
    if (a.exact_ && b.exact_) {
        const i128 num = static_cast<i128>(a.num_) * b.num_;
        const i128 den = static_cast<i128>(a.den_) * b.den_;
        if (auto r = make_rational(num, den)) return *r;
    }
    return Number::real(a.value() * b.value());
}

Number operator/(const Number& a, const Number& b) {
    if (a.exact_ && b.exact_ && b.num_ != 0) {
        const i128 num = static_cast<i128>(a.num_) * b.den_;
        const i128 den = static_cast<i128>(a.den_) * b.num_;
        if (auto r = make_rational(num, den)) return *r;
    }
    return Number::real(a.value() / b.value());
}

Number Number::pow(int exponent) const {
    if (exponent == 0) return rational(1);
    if (exact_) {
        Number base = exponent > 0 ? *this : rational(1) / *this;
        Number result = rational(1);
        for (int i = 0; i < std::abs(exponent); ++i) {
            result = result * base;
            if (!result.exact_) return real(std::pow(value(), exponent));
        }
        return result;
    }
    return real(std::pow(real_, exponent));
}

bool operator==(const Number& a, const Number& b) noexcept {
    if (a.exact_ != b.exact_) return false;
    if (a.exact_) return a.num_ == b.num_ && a.den_ == b.den_;
    return a.real_ == b.real_;
}

std::string Number::to_string() const {
    if (exact_) {
        if (den_ == 1) return std::to_string(num_);
        return std::to_string(num_) + "/" + std::to_string(den_);
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), real_);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string WIndex::name() const { return "w" + std::to_string(order) + "_" + std::to_string(output); }

std::optional<WIndex> parse_w_name(std::string_view name) {
    if (name.size() < 4 || name[0] != 'w') return std::nullopt;
    const auto us = name.find('_');
    if (us == std::string_view::npos || us == 1 || us + 1 == name.size()) return std::nullopt;
    WIndex w;
    const auto r1 = std::from_chars(name.data() + 1, name.data() + us, w.order);
    if (r1.ec != std::errc{} || r1.ptr != name.data() + us) return std::nullopt;
    const auto r2 = std::from_chars(name.data() + us + 1, name.data() + name.size(), w.output);
    if (r2.ec != std::errc{} || r2.ptr != name.data() + name.size()) return std::nullopt;
    if (w.order < 0 || w.output < 1) return std::nullopt;
    return w;
}

// ---------------------------------------------------------------------------
// Construction and access

namespace {

std::shared_ptr<detail::Node> new_node(ExprKind kind) {
    auto n = std::make_shared<detail::Node>();
    n->kind = kind;
    return n;
}

const Expr& zero_expr() {
    static const Expr z = Expr::integer(0);
    return z;
}

} // namespace

Expr::Expr() : Expr(zero_expr()) {}

Expr Expr::constant(Number value) {
    auto n = new_node(ExprKind::Constant);
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::symbol(std::string name) {
    if (name.empty()) throw std::invalid_argument("empty symbol name");
    if (auto w = parse_w_name(name)) return Expr::w(*w);
    auto n = new_node(ExprKind::Symbol);
    n->name = std::move(name);
    return Expr(std::move(n));
}

Expr Expr::w(int order, int output) {
    if (order < 0 || output < 1) throw std::invalid_argument("invalid w-variable index");
    auto n = new_node(ExprKind::WVar);
    n->windex = WIndex{order, output};
    n->name = n->windex.name();
    return Expr(std::move(n));
}


Expr Expr::sum(std::vector<Expr> operands) {
    if (operands.empty()) return Expr::integer(0);
    auto n = new_node(ExprKind::Sum);
    n->operands = std::move(operands);
    return Expr(std::move(n));
}

Expr Expr::product(std::vector<Expr> operands) {
    if (operands.empty()) return Expr::integer(1);
    auto n = new_node(ExprKind::Product);
    n->operands = std::move(operands);
    return Expr(std::move(n));
}

Expr Expr::quotient(Expr numerator, Expr denominator) {
    auto n = new_node(ExprKind::Quotient);
    n->operands = {std::move(numerator), std::move(denominator)};
    return Expr(std::move(n));
}

Expr Expr::power(Expr base, int exponent) {
    auto n = new_node(ExprKind::Power);
    n->exponent = exponent;
    n->operands = {std::move(base)};
    return Expr(std::move(n));
}

Expr Expr::function(ExprKind kind, Expr argument) {
    if (kind != ExprKind::Exp && kind != ExprKind::Ln && kind != ExprKind::Sin && kind != ExprKind::Cos) {
        throw std::invalid_argument("not a function kind");
    }
    auto n = new_node(kind);
    n->operands = {std::move(argument)};
    return Expr(std::move(n));
}

ExprKind Expr::kind() const noexcept { return node_->kind; }
const Number& Expr::number() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
WIndex Expr::windex() const { return node_->windex; }
int Expr::exponent() const { return node_->exponent; }
std::span<const Expr> Expr::operands() const noexcept { return node_->operands; }

bool Expr::is_zero() const noexcept { return is_constant() && number().is_zero(); }
bool Expr::is_one() const noexcept { return is_constant() && number().is_one(); }

namespace {

void collect_symbols(const Expr& e, std::set<std::string>& out) {
    if (e.kind() == ExprKind::Symbol) out.insert(e.name());
    for (const auto& c : e.operands()) collect_symbols(c, out);
}

void collect_w(const Expr& e, std::set<WIndex>& out) {
    if (e.kind() == ExprKind::WVar) out.insert(e.windex());
    for (const auto& c : e.operands()) collect_w(c, out);
}

} // namespace

std::set<std::string> Expr::free_symbols() const {
    std::set<std::string> out;
    collect_symbols(*this, out);
    return out;
}

std::set<WIndex> Expr::w_variables() const {
    std::set<WIndex> out;
    collect_w(*this, out);
    return out;
}

int Expr::max_w_order() const {
    int m = -1;
    for (const auto& w : w_variables()) m = std::max(m, w.order);
    return m;
}

bool operator==(const Expr& a, const Expr& b) noexcept {
    const detail::Node* x = a.node();
    const detail::Node* y = b.node();
    if (x == y) return true;
    if (x->kind != y->kind) return false;
    switch (x->kind) {
    case ExprKind::Constant: return x->value == y->value;
    case ExprKind::Symbol:
    case ExprKind::WVar: return x->name == y->name;
    case ExprKind::Power:
        if (x->exponent != y->exponent) return false;
        break;
    default: break;
    }
    if (x->operands.size() != y->operands.size()) return false;
    for (std::size_t i = 0; i < x->operands.size(); ++i) {
        if (!(x->operands[i] == y->operands[i])) return false;
    }
    return true;
}

Expr negate_folded(const Expr& e) { return Expr::neg(e); }

Expr Expr::neg(Expr e) {
    if (e.is_constant()) return Expr::constant(-e.number());
    if (e.kind() == ExprKind::Product && e.operand(0).is_constant()) {
        std::vector<Expr> ops(e.operands().begin(), e.operands().end());
        ops[0] = Expr::constant(-ops[0].number());
        return Expr::product(std::move(ops));
    }
    auto n = new_node(ExprKind::Neg);
    n->operands = {e};
    return Expr(std::shared_ptr<const detail::Node>(std::move(n)));
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, negate_folded(b)}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::quotient(a, b); }
Expr operator-(const Expr& a) { return negate_folded(a); }

// ---------------------------------------------------------------------------
// Printing. The layout mirrors the parser so that parse(print(parse(s)))
// reproduces parse(s) node for node.

namespace {

void print_expr(const Expr& e, std::string& out);
void print_term(const Expr& e, std::string& out);
void print_factor(const Expr& e, std::string& out);

const char* function_name(ExprKind k) {
    switch (k) {
    case ExprKind::Exp: return "exp";
    case ExprKind::Ln: return "ln";
    case ExprKind::Sin: return "sin";
    case ExprKind::Cos: return "cos";
    default: return "?";
    }
}

bool is_plain_number(const Number& n) { return !n.is_negative() && (!n.is_exact() || n.den() == 1); }

void print_parenthesized(const Expr& e, std::string& out) {
    out += '(';
    print_expr(e, out);
    out += ')';
}

// Leading operand of a product or numerator of a quotient.
void print_leading(const Expr& e, std::string& out) {
    switch (e.kind()) {
    case ExprKind::Constant: out += e.number().to_string(); return;
    case ExprKind::Quotient: print_term(e, out); return;
    case ExprKind::Neg: print_factor(e, out); return;
    case ExprKind::Product:
    case ExprKind::Sum: print_parenthesized(e, out); return;
    default: print_factor(e, out); return;
    }
}

void print_product(const Expr& e, std::string& out) {
    const auto ops = e.operands();
    print_leading(ops[0], out);
    for (std::size_t i = 1; i < ops.size(); ++i) {
        out += '*';
        print_factor(ops[i], out);
    }
}

void print_quotient(const Expr& e, std::string& out) {
    const Expr& num = e.operand(0);
    if (num.kind() == ExprKind::Product) {
        print_product(num, out);
    } else {
        print_leading(num, out);
    }
    out += '/';
    print_factor(e.operand(1), out);
}

void print_term(const Expr& e, std::string& out) {
    switch (e.kind()) {
    case ExprKind::Product: print_product(e, out); return;
    case ExprKind::Quotient: print_quotient(e, out); return;
    case ExprKind::Sum: print_parenthesized(e, out); return;
    case ExprKind::Constant: out += e.number().to_string(); return;
    default: print_factor(e, out); return;
    }
}

void print_base(const Expr& e, std::string& out) {
    switch (e.kind()) {
    case ExprKind::Symbol:
    case ExprKind::WVar:
    case ExprKind::Exp:
    case ExprKind::Ln:
    case ExprKind::Sin:
    case ExprKind::Cos: print_factor(e, out); return;
    case ExprKind::Constant:
        if (is_plain_number(e.number())) {
            out += e.number().to_string();
            return;
        }
        break;
    default: break;
    }
    print_parenthesized(e, out);
}

void print_factor(const Expr& e, std::string& out) {
    switch (e.kind()) {
    case ExprKind::Constant:
        if (is_plain_number(e.number())) {
            out += e.number().to_string();
        } else {
            out += '(' + e.number().to_string() + ')';
        }
        return;
    case ExprKind::Symbol:
    case ExprKind::WVar: out += e.name(); return;
    case ExprKind::Neg: {
        const Expr& u = e.operand(0);
        out += '-';
        if (u.kind() == ExprKind::Symbol || u.kind() == ExprKind::WVar || u.kind() == ExprKind::Power ||
            u.kind() == ExprKind::Exp || u.kind() == ExprKind::Ln || u.kind() == ExprKind::Sin ||
            u.kind() == ExprKind::Cos) {
            print_factor(u, out);
        } else {
            print_parenthesized(u, out);
        }
        return;
    }
    case ExprKind::Power:
        print_base(e.operand(0), out);
        out += '^';
        out += std::to_string(e.exponent());
        return;
    case ExprKind::Exp:
    case ExprKind::Ln:
    case ExprKind::Sin:
    case ExprKind::Cos:
        out += function_name(e.kind());
        out += '(';
        print_expr(e.operand(0), out);
        out += ')';
        return;
    case ExprKind::Sum:
    case ExprKind::Product:
    case ExprKind::Quotient: print_parenthesized(e, out); return;
    }
}

// For a sum operand after the first: the u with negate_folded(u) == t, if any.
std::optional<Expr> subtracted_operand(const Expr& t) {
    if (t.is_constant() && t.number().is_negative()) return Expr::constant(-t.number());
    if (t.kind() == ExprKind::Product && t.operand(0).is_constant() && t.operand(0).number().is_negative()) {
        std::vector<Expr> ops(t.operands().begin(), t.operands().end());
        ops[0] = Expr::constant(-ops[0].number());
        return Expr::product(std::move(ops));
    }
    if (t.kind() == ExprKind::Neg) return t.operand(0);
    return std::nullopt;
}

void print_expr(const Expr& e, std::string& out) {
    if (e.kind() != ExprKind::Sum) {
        print_term(e, out);
        return;
    }
    const auto ops = e.operands();
    print_term(ops[0], out);
    for (std::size_t i = 1; i < ops.size(); ++i) {
        if (auto u = subtracted_operand(ops[i])) {
            out += " - ";
            print_term(*u, out);
        } else {
            out += " + ";
            print_term(ops[i], out);
        }
    }
}

} // namespace

std::string Expr::to_string() const {
    std::string out;
    print_expr(*this, out);
    return out;
}

} // namespace fobs
