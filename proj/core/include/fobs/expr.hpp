#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fobs {

/// Scalar constant: an exact rational while every input stayed rational and
/// fit in 64 bits, a double otherwise.
class Number {
public:
    constexpr Number() = default;

    static Number rational(std::int64_t num, std::int64_t den = 1);
    static Number real(double value);
    /// Exact when `value` is an integer of moderate magnitude, real otherwise.
    static Number from_double(double value);

    [[nodiscard]] bool is_exact() const noexcept { return exact_; }
    [[nodiscard]] std::int64_t num() const noexcept { return num_; }
    [[nodiscard]] std::int64_t den() const noexcept { return den_; }
    [[nodiscard]] double value() const noexcept;

    [[nodiscard]] bool is_zero() const noexcept { return value() == 0.0; }
    [[nodiscard]] bool is_one() const noexcept { return value() == 1.0; }
    [[nodiscard]] bool is_negative() const noexcept { return value() < 0.0; }
    [[nodiscard]] bool is_integer() const noexcept { return exact_ && den_ == 1; }

    [[nodiscard]] Number operator-() const;
    friend Number operator+(const Number& a, const Number& b);
    friend Number operator-(const Number& a, const Number& b) { return a + (-b); }
    friend Number operator*(const Number& a, const Number& b);
    /// Precondition: `b` is nonzero.
    friend Number operator/(const Number& a, const Number& b);
    /// Precondition: base nonzero when `exponent` is negative.
    [[nodiscard]] Number pow(int exponent) const;

    /// Same representation and same value.
    friend bool operator==(const Number& a, const Number& b) noexcept;

    [[nodiscard]] std::string to_string() const;

private:
    bool exact_ = true;
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
    double real_ = 0.0;
};

/// Measurement-derivative variable w(i, j): the i-th time derivative of output j
/// (j counted from 1). Written `w<i>_<j>` in expression text.
struct WIndex {
    int order = 0;
    int output = 1;

    auto operator<=>(const WIndex&) const = default;

    [[nodiscard]] std::string name() const;
};

/// Parses `w<i>_<j>`; nullopt when `name` is not in that form.
std::optional<WIndex> parse_w_name(std::string_view name);

enum class ExprKind {
    Constant,
    Symbol,
    WVar,
    Neg,
    Sum,
    Product,
    Quotient,
    Power,
    Exp,
    Ln,
    Sin,
    Cos,
};

class Expr;

namespace detail {
struct Node;
}

/// Immutable symbolic expression. Copies share structure.
///
/// Symbols are plain names; whether a name is a state or a parameter is decided
/// by the system that owns the expression.
class Expr {
public:
    /// The exact zero constant.
    Expr();

    static Expr constant(Number value);
    static Expr integer(std::int64_t value) { return constant(Number::rational(value)); }
    static Expr real(double value) { return constant(Number::real(value)); }
    static Expr symbol(std::string name);
    static Expr w(int order, int output);
    static Expr w(WIndex index) { return w(index.order, index.output); }

    // Raw constructors, no simplification. neg() folds into a constant or a
    // leading constant factor, like negate_folded().
    static Expr neg(Expr operand);
    static Expr sum(std::vector<Expr> operands);
    static Expr product(std::vector<Expr> operands);
    static Expr quotient(Expr numerator, Expr denominator);
    static Expr power(Expr base, int exponent);
    static Expr function(ExprKind kind, Expr argument);

    [[nodiscard]] ExprKind kind() const noexcept;
    [[nodiscard]] const Number& number() const;
    [[nodiscard]] const std::string& name() const;
    [[nodiscard]] WIndex windex() const;
    [[nodiscard]] int exponent() const;
    [[nodiscard]] std::span<const Expr> operands() const noexcept;
    [[nodiscard]] const Expr& operand(std::size_t i) const { return operands()[i]; }

    [[nodiscard]] bool is_constant() const noexcept { return kind() == ExprKind::Constant; }
    [[nodiscard]] bool is_zero() const noexcept;
    [[nodiscard]] bool is_one() const noexcept;

    [[nodiscard]] std::string to_string() const;

    /// Symbol names (excluding w-variables).
    [[nodiscard]] std::set<std::string> free_symbols() const;
    [[nodiscard]] std::set<WIndex> w_variables() const;
    /// Largest derivative order among w-variables, -1 when there are none.
    [[nodiscard]] int max_w_order() const;

    /// Structural equality; constants compare by representation and value.
    friend bool operator==(const Expr& a, const Expr& b) noexcept;

    [[nodiscard]] const detail::Node* node() const noexcept { return node_.get(); }

private:
    explicit Expr(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<const detail::Node> node_;
};

namespace detail {
struct Node {
    ExprKind kind = ExprKind::Constant;
    Number value;
    std::string name;
    WIndex windex;
    int exponent = 0;
    std::vector<Expr> operands;
};
} // namespace detail

// Builder operators produce raw trees; run simplify() on the result.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

/// Negation that folds into a constant or a leading constant factor.
Expr negate_folded(const Expr& e);

/// Parses the expression grammar:
///
///     expr   := term (('+'|'-') term)*
///     term   := factor (('*'|'/') factor)*
///     factor := '-' factor | base ('^' integer)?
///     base   := number | identifier | function '(' expr ')' | '(' expr ')'
///
/// with function in {exp, ln, sin, cos}. `integer` may carry a leading '-'.
/// Throws ParseError.
Expr parse(std::string_view text);

using Bindings = std::map<std::string, double, std::less<>>;
using WBindings = std::map<WIndex, double>;

/// Recursive double evaluation. Throws EvalError.
double evaluate(const Expr& e, const Bindings& bindings, const WBindings& wvals = {});

/// Exact partial derivative, simplified. `var` is a symbol name or a `w<i>_<j>` name.
Expr differentiate(const Expr& e, std::string_view var);
Expr differentiate(const Expr& e, WIndex var);

struct Substitution {
    std::map<std::string, Expr, std::less<>> symbols;
    std::map<WIndex, Expr> w;
};

/// Simultaneous substitution followed by simplify().
Expr substitute(const Expr& e, const Substitution& bindings);

/// Constant folding, flattening, identity elimination, collection of like terms
/// and like factors. Not a canonical form.
Expr simplify(const Expr& e);

/// Resolves symbol and w-variable names to positions in a flat value array.
class SlotLayout {
public:
    int add(std::string_view name);
    int add(WIndex index) { return add(index.name()); }
    [[nodiscard]] std::optional<int> find(std::string_view name) const;
    [[nodiscard]] std::size_t size() const noexcept { return names_.size(); }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
    std::map<std::string, int, std::less<>> index_;
};

/// Expression flattened to a postfix program over a SlotLayout, for repeated
/// evaluation in sampling and simulation loops. Same error behavior as evaluate().
class CompiledExpr {
public:
    CompiledExpr() = default;
    /// Throws ValidationError when a symbol is not in `layout`.
    CompiledExpr(const Expr& e, const SlotLayout& layout);

    [[nodiscard]] double operator()(std::span<const double> slots) const;
    [[nodiscard]] const Expr& source() const noexcept { return source_; }

private:
    struct Instr {
        ExprKind op;
        int arg;
        double value;
        const detail::Node* node;
    };
    Expr source_;
    std::vector<Instr> program_;
    std::size_t max_stack_ = 0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Keys are symbol names or `w<i>_<j>` names.
using Box = std::map<std::string, Interval, std::less<>>;

struct EquivalenceReport {
    bool equivalent = false;
    /// Largest |e1 - e2| over evaluated samples.
    double max_residual = 0.0;
    /// Largest |e1 - e2| / (1 + max(|e1|, |e2|)).
    double max_scaled_residual = 0.0;
    Bindings worst_sample;
    int evaluated = 0;
    int skipped = 0;
    std::string first_skip_reason;
};

/// Randomized identity check: draws `n` seeded uniform samples from `box` and
/// requires |e1 - e2| <= rtol * (1 + max(|e1|, |e2|)) at each. `fixed` binds
/// symbols that are not sampled (parameters). Samples that fail to evaluate are
/// skipped and counted; more than half skipped throws IndeterminateError.
EquivalenceReport equivalent_numeric(const Expr& e1, const Expr& e2, const Box& box, int n,
                                     std::uint64_t seed, double rtol, const Bindings& fixed = {});

} // namespace fobs
