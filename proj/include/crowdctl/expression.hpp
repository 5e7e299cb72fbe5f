#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace crowdctl {

// Scalar expression over x1..xd stored as a flat node array; the last node is the root.
class Expression {
public:
    enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Sin, Cos };
    struct Node {
        Op op;
        int a = -1, b = -1;
        double value = 0.0;  // Const
        int var = 0;         // Var (0-based)
    };

    Expression() = default;

    double eval(const Point& x) const { return eval_node(static_cast<int>(nodes_.size()) - 1, x); }
    bool is_constant() const { return nodes_.back().op == Op::Const; }
    double constant_value() const { return nodes_.back().value; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const Node& root() const { return nodes_.back(); }

    // Parses one component; `offset` shifts reported positions into the enclosing string.
    static Expression parse(std::string_view text, int dim, std::size_t offset = 0) {
        Parser p{text, 0, dim, offset, {}};
        p.skip();
        if (p.pos == text.size()) throw ParseError("empty expression", offset);
        p.parse_sum();
        p.skip();
        if (p.pos != text.size()) throw ParseError("unexpected character '" + std::string(1, text[p.pos]) + "'", offset + p.pos);
        Expression e;
        e.nodes_ = std::move(p.nodes);
        return e;
    }

private:
    std::vector<Node> nodes_;

    double eval_node(int i, const Point& x) const {
        const Node& n = nodes_[i];
        switch (n.op) {
            case Op::Const: return n.value;
            case Op::Var: return x[n.var];
            case Op::Neg: return -eval_node(n.a, x);
            case Op::Add: return eval_node(n.a, x) + eval_node(n.b, x);
            case Op::Sub: return eval_node(n.a, x) - eval_node(n.b, x);
            case Op::Mul: return eval_node(n.a, x) * eval_node(n.b, x);
            case Op::Div: {
                double den = eval_node(n.b, x);
                if (den == 0.0) throw DomainError("division by zero in field expression");
                return eval_node(n.a, x) / den;
            }
            case Op::Sin: return std::sin(eval_node(n.a, x));
            case Op::Cos: return std::cos(eval_node(n.a, x));
        }
        return 0.0;
    }

    struct Parser {
        std::string_view s;
        std::size_t pos;
        int dim;
        std::size_t offset;
        std::vector<Node> nodes;

        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, offset + pos); }

        int push(Node n) {
            nodes.push_back(n);
            return static_cast<int>(nodes.size()) - 1;
        }
        bool is_const(int i) const { return nodes[i].op == Op::Const; }

        int unary(Op op, int a) {
            if (is_const(a)) {
                double v = nodes[a].value;
                double r = op == Op::Neg ? -v : op == Op::Sin ? std::sin(v) : std::cos(v);
                return push({Op::Const, -1, -1, r, 0});
            }
            return push({op, a, -1, 0.0, 0});
        }
        int binary(Op op, int a, int b) {
            if (is_const(a) && is_const(b) && !(op == Op::Div && nodes[b].value == 0.0)) {
                double x = nodes[a].value, y = nodes[b].value;
                double r = op == Op::Add ? x + y : op == Op::Sub ? x - y : op == Op::Mul ? x * y : x / y;
                return push({Op::Const, -1, -1, r, 0});
            }
            return push({op, a, b, 0.0, 0});
        }

        int parse_sum() {
            int lhs = parse_product();
            for (;;) {
                skip();
                if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
                    Op op = s[pos] == '+' ? Op::Add : Op::Sub;
                    ++pos;
                    lhs = binary(op, lhs, parse_product());
                } else {
                    return lhs;
                }
            }
        }
        int parse_product() {
            int lhs = parse_unary();
            for (;;) {
                skip();
                if (pos < s.size() && (s[pos] == '*' || s[pos] == '/')) {
                    Op op = s[pos] == '*' ? Op::Mul : Op::Div;
                    ++pos;
                    lhs = binary(op, lhs, parse_unary());
                } else {
                    return lhs;
                }
            }
        }
        int parse_unary() {
            skip();
            if (pos < s.size() && s[pos] == '-') { ++pos; return unary(Op::Neg, parse_unary()); }
            if (pos < s.size() && s[pos] == '+') { ++pos; return parse_unary(); }
            return parse_primary();
        }
        int parse_primary() {
            skip();
            if (pos >= s.size()) fail("unexpected end of expression");
            char ch = s[pos];
            if (ch == '(') {
                ++pos;
                int e = parse_sum();
                skip();
                if (pos >= s.size() || s[pos] != ')') fail("expected ')'");
                ++pos;
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
                const char* begin = s.data() + pos;
                char* end = nullptr;
                std::string buf(begin, s.size() - pos);
                double v = std::strtod(buf.c_str(), &end);
                std::size_t used = static_cast<std::size_t>(end - buf.c_str());
                if (used == 0) fail("malformed number");
                pos += used;
                return push({Op::Const, -1, -1, v, 0});
            }
            if (std::isalpha(static_cast<unsigned char>(ch))) {
                std::size_t start = pos;
                while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
                std::string_view id = s.substr(start, pos - start);
                if (id == "sin" || id == "cos") {
                    skip();
                    if (pos >= s.size() || s[pos] != '(') fail("expected '(' after " + std::string(id));
                    ++pos;
                    int arg = parse_sum();
                    skip();
                    if (pos >= s.size() || s[pos] != ')') fail("expected ')'");
                    ++pos;
                    return unary(id == "sin" ? Op::Sin : Op::Cos, arg);
                }
                if (id.size() >= 2 && id[0] == 'x') {
                    int k = 0;
                    for (std::size_t i = 1; i < id.size(); ++i) {
                        if (!std::isdigit(static_cast<unsigned char>(id[i]))) { k = -1; break; }
                        k = k * 10 + (id[i] - '0');
                    }
                    if (k >= 1 && k <= dim) return push({Op::Var, -1, -1, 0.0, k - 1});
                }
                pos = start;
                fail("unknown identifier '" + std::string(id) + "'");
            }
            fail("unexpected character '" + std::string(1, ch) + "'");
        }
    };
};

}  // namespace crowdctl
