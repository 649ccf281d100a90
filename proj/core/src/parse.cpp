#include "fobs/error.hpp"
#include "fobs/expr.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace fobs {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr run() {
        skip_ws();
        if (at_end()) fail("empty expression");
        Expr e = expr();
        skip_ws();
        if (!at_end()) fail(std::string("unexpected '") + text_[pos_] + "'");
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr expr() {
        std::vector<Expr> terms;
        terms.push_back(term());
        for (;;) {
            if (accept('+')) {
                terms.push_back(term());
            } else if (accept('-')) {
                terms.push_back(negate_folded(term()));
            } else {
                break;
            }
        }
        if (terms.size() == 1) return terms.front();
        return Expr::sum(std::move(terms));
    }

    Expr term() {
        Expr acc = factor();
        bool built_product = false;
        for (;;) {
            if (accept('*')) {
                Expr f = factor();
                if (built_product) {
                    std::vector<Expr> ops(acc.operands().begin(), acc.operands().end());
                    ops.push_back(std::move(f));
                    acc = Expr::product(std::move(ops));
                } else {
                    acc = Expr::product({acc, std::move(f)});
                    built_product = true;
                }
            } else if (accept('/')) {
                Expr f = factor();
                // A literal fraction such as 2/3 is one rational constant.
                if (!built_product && acc.is_constant() && f.is_constant() && acc.number().is_exact() &&
                    f.number().is_exact() && !f.number().is_zero()) {
                    acc = Expr::constant(acc.number() / f.number());
                } else {
                    acc = Expr::quotient(acc, std::move(f));
                }
                built_product = false;
            } else {
                break;
            }
        }
        return acc;
    }

    Expr factor() {
        if (accept('-')) return negate_folded(factor());
        Expr b = base();
        if (accept('^')) {
            skip_ws();
            const bool paren = accept('(');
            skip_ws();
            bool negative = false;
            if (peek() == '-') {
                negative = true;
                ++pos_;
            }
            skip_ws();
            const std::size_t start = pos_;
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            if (start == pos_) fail("expected integer exponent");
            if (peek() == '.') fail("exponent must be an integer");
            int k = 0;
            const auto r = std::from_chars(text_.data() + start, text_.data() + pos_, k);
            if (r.ec != std::errc{}) fail("exponent out of range");
            if (paren && !accept(')')) fail("expected ')'");
            return Expr::power(std::move(b), negative ? -k : k);
        }
        return b;
    }

    Expr base() {
        skip_ws();
        const char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        if (accept('(')) {
            Expr e = expr();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        if (at_end()) fail("unexpected end of input");
        fail(std::string("unexpected '") + c + "'");
    }

    Expr number() {
        const std::size_t start = pos_;
        bool decimal = false;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        if (peek() == '.') {
            decimal = true;
            ++pos_;
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        }
        if (peek() == 'e' || peek() == 'E') {
            const std::size_t save = pos_;
            ++pos_;
            if (peek() == '+' || peek() == '-') ++pos_;
            if (std::isdigit(static_cast<unsigned char>(peek()))) {
                decimal = true;
                while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        const std::string_view tok = text_.substr(start, pos_ - start);
        if (tok == ".") {
            pos_ = start;
            fail("malformed number");
        }
        if (!decimal) {
            std::int64_t v = 0;
            const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (r.ec == std::errc{}) return Expr::integer(v);
        }
        const std::string s(tok);
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size()) {
            pos_ = start;
            fail("malformed number");
        }
        return Expr::real(v);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
        const std::string name(text_.substr(start, pos_ - start));
        skip_ws();
        ExprKind fn{};
        bool is_function = true;
        if (name == "exp") {
            fn = ExprKind::Exp;
        } else if (name == "ln") {
            fn = ExprKind::Ln;
        } else if (name == "sin") {
            fn = ExprKind::Sin;
        } else if (name == "cos") {
            fn = ExprKind::Cos;
        } else {
            is_function = false;
        }
        if (peek() == '(') {
            if (!is_function) {
                pos_ = start;
                fail("unknown function '" + name + "'");
            }
            ++pos_;
            Expr arg = expr();
            if (!accept(')')) fail("expected ')'");
            return Expr::function(fn, std::move(arg));
        }
        if (is_function) {
            pos_ = start;
            fail("function '" + name + "' requires an argument");
        }
        if (name.size() > 1 && name[0] == 'w' && std::isdigit(static_cast<unsigned char>(name[1])) &&
            !parse_w_name(name)) {
            pos_ = start;
            fail("malformed measurement-derivative variable '" + name + "' (expected w<i>_<j>, j >= 1)");
        }
        return Expr::symbol(name);
    }
};

} // namespace

Expr parse(std::string_view text) { return Parser(text).run(); }

} // namespace fobs
