#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace cylasym {

class ParseError : public std::runtime_error {
public:
    enum class Kind { syntax, unknown_identifier, arity };

    ParseError(Kind kind, std::size_t offset, const std::string& what)
        : std::runtime_error(what + " at offset " + std::to_string(offset)), kind_(kind), offset_(offset) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::size_t offset_;
};

/// Arithmetic expression over x1..xn: literals, pi, + - * / ^, unary minus,
/// sin/cos/exp. Immutable; copies share the tree.
class Expression {
public:
    enum class Op { number, variable, pi, neg, add, sub, mul, div, pow, sin, cos, exp };

    struct Node {
        Op op;
        double value = 0.0;  // number
        int var = 0;         // variable, 1-based
        std::shared_ptr<const Node> lhs, rhs;
    };

    Expression() : Expression(constant(0.0)) {}

    static Expression constant(double v) {
        auto n = std::make_shared<Node>();
        n->op = Op::number;
        n->value = v;
        return Expression(std::move(n));
    }

    static Expression parse(std::string_view text);

    const Node& root() const { return *root_; }

    /// Evaluates at x; x[k] holds coordinate x_{k+1}.
    double operator()(std::span<const double> x) const {
        thread_local std::vector<double> stack;
        stack.clear();
        for (const Instr& in : program_) {
            switch (in.op) {
                case Op::number: stack.push_back(in.value); break;
                case Op::pi: stack.push_back(std::numbers::pi); break;
                case Op::variable:
                    if (static_cast<std::size_t>(in.var) > x.size())
                        throw std::out_of_range("expression reads x" + std::to_string(in.var) + " but only " +
                                                std::to_string(x.size()) + " coordinates were given");
                    stack.push_back(x[static_cast<std::size_t>(in.var - 1)]);
                    break;
                case Op::neg: stack.back() = -stack.back(); break;
                case Op::sin: stack.back() = std::sin(stack.back()); break;
                case Op::cos: stack.back() = std::cos(stack.back()); break;
                case Op::exp: stack.back() = std::exp(stack.back()); break;
                default: {
                    double b = stack.back();
                    stack.pop_back();
                    double& a = stack.back();
                    switch (in.op) {
                        case Op::add: a = a + b; break;
                        case Op::sub: a = a - b; break;
                        case Op::mul: a = a * b; break;
                        case Op::div: a = a / b; break;
                        case Op::pow: a = std::pow(a, b); break;
                        default: break;
                    }
                }
            }
        }
        return stack.back();
    }

    /// Highest variable index referenced (0 when none).
    int max_variable() const { return max_var_; }

    /// True when the expression reads x_k for some k in [first, last] (1-based).
    bool references_any(int first, int last) const {
        for (const Instr& in : program_)
            if (in.op == Op::variable && in.var >= first && in.var <= last) return true;
        return false;
    }

    bool is_constant() const { return max_var_ == 0; }

    /// Canonical text; parse(print()) reproduces the same tree.
    std::string print() const {
        std::string out;
        print_node(*root_, out);
        return out;
    }

    friend bool operator==(const Expression& a, const Expression& b) { return nodes_equal(*a.root_, *b.root_); }

private:
    struct Instr {
        Op op;
        double value;
        int var;
    };

    explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) { compile(*root_); }

    void compile(const Node& n) {
        if (n.lhs) compile(*n.lhs);
        if (n.rhs) compile(*n.rhs);
        program_.push_back({n.op, n.value, n.var});
        if (n.op == Op::variable) max_var_ = std::max(max_var_, n.var);
    }

    static bool nodes_equal(const Node& a, const Node& b) {
        if (a.op != b.op || a.var != b.var) return false;
        if (a.op == Op::number && !(a.value == b.value)) return false;
        if (bool(a.lhs) != bool(b.lhs) || bool(a.rhs) != bool(b.rhs)) return false;
        if (a.lhs && !nodes_equal(*a.lhs, *b.lhs)) return false;
        if (a.rhs && !nodes_equal(*a.rhs, *b.rhs)) return false;
        return true;
    }

    static void print_node(const Node& n, std::string& out) {
        switch (n.op) {
            case Op::number: {
                char buf[64];
                auto r = std::to_chars(buf, buf + sizeof buf, n.value);
                out.append(buf, r.ptr);
                return;
            }
            case Op::variable: out += "x" + std::to_string(n.var); return;
            case Op::pi: out += "pi"; return;
            case Op::neg:
                out += "(-";
                print_node(*n.lhs, out);
                out += ")";
                return;
            case Op::sin:
            case Op::cos:
            case Op::exp:
                out += n.op == Op::sin ? "sin(" : n.op == Op::cos ? "cos(" : "exp(";
                print_node(*n.lhs, out);
                out += ")";
                return;
            default: {
                static constexpr std::string_view sym[] = {" + ", " - ", " * ", " / ", " ^ "};
                out += "(";
                print_node(*n.lhs, out);
                out += sym[static_cast<int>(n.op) - static_cast<int>(Op::add)];
                print_node(*n.rhs, out);
                out += ")";
            }
        }
    }

    friend class ExpressionParser;

    std::shared_ptr<const Node> root_;
    std::vector<Instr> program_;
    int max_var_ = 0;
};

/// Recursive-descent parser.
///   expr  := term (('+'|'-') term)*
///   term  := unary (('*'|'/') unary)*
///   unary := '-' unary | power
///   power := primary ('^' unary)?          right-associative
///   primary := number | pi | x<k> | fn '(' expr ')' | '(' expr ')'
class ExpressionParser {
public:
    explicit ExpressionParser(std::string_view text) : text_(text) {}

    Expression run() {
        skip_ws();
        if (pos_ == text_.size()) throw ParseError(ParseError::Kind::syntax, pos_, "empty expression");
        auto root = parse_expr();
        skip_ws();
        if (pos_ != text_.size())
            throw ParseError(ParseError::Kind::syntax, pos_, "unexpected '" + std::string(1, text_[pos_]) + "'");
        return Expression(std::move(root));
    }

private:
    using NodePtr = std::shared_ptr<const Expression::Node>;
    using Op = Expression::Op;

    static NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
        auto n = std::make_shared<Expression::Node>();
        n->op = op;
        n->lhs = std::move(lhs);
        n->rhs = std::move(rhs);
        return n;
    }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void unexpected() {
        if (pos_ >= text_.size()) throw ParseError(ParseError::Kind::syntax, pos_, "unexpected end of input");
        throw ParseError(ParseError::Kind::syntax, pos_, "unexpected '" + std::string(1, text_[pos_]) + "'");
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+'))
                lhs = make(Op::add, lhs, parse_term());
            else if (accept('-'))
                lhs = make(Op::sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*'))
                lhs = make(Op::mul, lhs, parse_unary());
            else if (accept('/'))
                lhs = make(Op::div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make(Op::neg, parse_unary());
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (accept('^')) return make(Op::pow, base, parse_unary());
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) unexpected();
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            if (!accept(')')) {
                skip_ws();
                if (pos_ >= text_.size())
                    throw ParseError(ParseError::Kind::syntax, pos_, "expected ')' but reached end of input");
                throw ParseError(ParseError::Kind::syntax, pos_, "expected ')'");
            }
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        unexpected();
    }

    NodePtr parse_number() {
        std::size_t start = pos_;
        std::size_t end = pos_;
        auto digits = [&] {
            std::size_t s = end;
            while (end < text_.size() && text_[end] >= '0' && text_[end] <= '9') ++end;
            return end > s;
        };
        bool mantissa = digits();
        if (end < text_.size() && text_[end] == '.') {
            ++end;
            mantissa = digits() || mantissa;
        }
        if (!mantissa) throw ParseError(ParseError::Kind::syntax, start, "malformed number");
        if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
            std::size_t exp_start = end;
            ++end;
            if (end < text_.size() && (text_[end] == '+' || text_[end] == '-')) ++end;
            if (!digits()) throw ParseError(ParseError::Kind::syntax, exp_start, "malformed exponent");
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + end, v);
        if (ec != std::errc() || ptr != text_.data() + end)
            throw ParseError(ParseError::Kind::syntax, start, "malformed number");
        pos_ = end;
        auto n = std::make_shared<Expression::Node>();
        n->op = Op::number;
        n->value = v;
        return n;
    }

    NodePtr parse_identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string_view name = text_.substr(start, pos_ - start);

        if (name == "sin" || name == "cos" || name == "exp") {
            Op op = name == "sin" ? Op::sin : name == "cos" ? Op::cos : Op::exp;
            if (!accept('('))
                throw ParseError(ParseError::Kind::arity, start,
                                 "function '" + std::string(name) + "' expects one argument");
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == ')')
                throw ParseError(ParseError::Kind::arity, start,
                                 "function '" + std::string(name) + "' expects one argument, got 0");
            NodePtr arg = parse_expr();
            if (accept(','))
                throw ParseError(ParseError::Kind::arity, start,
                                 "function '" + std::string(name) + "' expects one argument");
            if (!accept(')')) {
                skip_ws();
                throw ParseError(ParseError::Kind::syntax, pos_, "expected ')'");
            }
            return make(op, arg);
        }
        if (name == "pi") return make(Op::pi);
        if (name.size() >= 2 && name[0] == 'x' && name[1] != '0' &&
            name.find_first_not_of("0123456789", 1) == std::string_view::npos) {
            int k = 0;
            std::from_chars(name.data() + 1, name.data() + name.size(), k);
            auto n = std::make_shared<Expression::Node>();
            n->op = Op::variable;
            n->var = k;
            return n;
        }
        throw ParseError(ParseError::Kind::unknown_identifier, start, "unknown identifier '" + std::string(name) + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

inline Expression Expression::parse(std::string_view text) { return ExpressionParser(text).run(); }

}  // namespace cylasym
