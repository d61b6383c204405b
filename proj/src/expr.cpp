#include "thinlim/expr.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace thinlim::expr {

namespace {

struct Token {
    enum Kind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };
    Kind kind = End;
    double number = 0.0;
    std::string ident;
    int column = 0;
};

class Lexer {
public:
    Lexer(std::string_view text, int line) : text_(text), line_(line) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const std::string& msg, int column) const {
        throw ParseError(msg, line_, column);
    }

private:
    void advance() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
        tok_ = Token{};
        tok_.column = static_cast<int>(pos_) + 1;
        if (pos_ >= text_.size()) {
            tok_.kind = Token::End;
            return;
        }
        const char c = text_[pos_];
        // Unicode minus/times/divide spellings.
        if (match_utf8("\xe2\x88\x92")) { tok_.kind = Token::Minus; return; }
        if (match_utf8("\xc3\x97")) { tok_.kind = Token::Star; return; }
        if (match_utf8("\xc3\xb7")) { tok_.kind = Token::Slash; return; }
        switch (c) {
            case '+': ++pos_; tok_.kind = Token::Plus; return;
            case '-': ++pos_; tok_.kind = Token::Minus; return;
            case '*': ++pos_; tok_.kind = Token::Star; return;
            case '/': ++pos_; tok_.kind = Token::Slash; return;
            case '^': ++pos_; tok_.kind = Token::Caret; return;
            case '(': ++pos_; tok_.kind = Token::LParen; return;
            case ')': ++pos_; tok_.kind = Token::RParen; return;
            case ',': ++pos_; tok_.kind = Token::Comma; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = text_.data() + pos_;
            char* end = nullptr;
            tok_.number = std::strtod(begin, &end);
            if (end == begin) fail("malformed number", tok_.column);
            pos_ += static_cast<size_t>(end - begin);
            tok_.kind = Token::Number;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            tok_.kind = Token::Ident;
            tok_.ident = std::string(text_.substr(start, pos_ - start));
            return;
        }
        fail(std::string("unexpected character '") + c + "'", tok_.column);
    }

    bool match_utf8(const char* seq) {
        const size_t n = std::strlen(seq);
        if (text_.size() - pos_ >= n && text_.compare(pos_, n, seq) == 0) {
            pos_ += n;
            return true;
        }
        return false;
    }

    std::string_view text_;
    int line_;
    size_t pos_ = 0;
    Token tok_;
};

NodePtr make(NodeKind kind, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodePtr make_const(double v) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->value = v;
    return n;
}

class Parser {
public:
    Parser(std::string_view text, std::span<const std::string> vars, int line)
        : lex_(text, line), vars_(vars) {}

    NodePtr parse() {
        NodePtr e = sum();
        if (lex_.peek().kind != Token::End)
            lex_.fail("trailing input after expression", lex_.peek().column);
        return e;
    }

private:
    NodePtr sum() {
        NodePtr e = product();
        while (true) {
            if (lex_.peek().kind == Token::Plus) {
                lex_.take();
                e = make(NodeKind::Add, e, product());
            } else if (lex_.peek().kind == Token::Minus) {
                lex_.take();
                e = make(NodeKind::Sub, e, product());
            } else {
                return e;
            }
        }
    }

    NodePtr product() {
        NodePtr e = unary();
        while (true) {
            if (lex_.peek().kind == Token::Star) {
                lex_.take();
                e = make(NodeKind::Mul, e, unary());
            } else if (lex_.peek().kind == Token::Slash) {
                lex_.take();
                e = make(NodeKind::Div, e, unary());
            } else {
                return e;
            }
        }
    }

    NodePtr unary() {
        if (lex_.peek().kind == Token::Minus) {
            lex_.take();
            return make(NodeKind::Neg, unary());
        }
        if (lex_.peek().kind == Token::Plus) {
            lex_.take();
            return unary();
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (lex_.peek().kind == Token::Caret) {
            lex_.take();
            // Right-associative; exponent may carry a unary sign.
            return make(NodeKind::Pow, base, unary());
        }
        return base;
    }

    NodePtr primary() {
        Token t = lex_.take();
        switch (t.kind) {
            case Token::Number:
                return make_const(t.number);
            case Token::LParen: {
                NodePtr e = sum();
                expect(Token::RParen, ")");
                return e;
            }
            case Token::Ident:
                return ident(t);
            default:
                lex_.fail("expected a value", t.column);
        }
    }

    NodePtr ident(const Token& t) {
        for (size_t i = 0; i < vars_.size(); ++i) {
            if (t.ident == vars_[i]) {
                auto n = std::make_shared<Node>();
                n->kind = NodeKind::Variable;
                n->var = static_cast<int>(i);
                return n;
            }
        }
        if (t.ident == "pi") return make_const(M_PI);
        if (t.ident == "e") return make_const(M_E);
        if (t.ident == "exp" || t.ident == "log" || t.ident == "sin" || t.ident == "cos") {
            expect(Token::LParen, "(");
            NodePtr a = sum();
            expect(Token::RParen, ")");
            NodeKind k = t.ident == "exp"   ? NodeKind::Exp
                         : t.ident == "log" ? NodeKind::Log
                         : t.ident == "sin" ? NodeKind::Sin
                                            : NodeKind::Cos;
            return make(k, a);
        }
        if (t.ident == "min" || t.ident == "max") {
            expect(Token::LParen, "(");
            NodePtr a = sum();
            expect(Token::Comma, ",");
            NodePtr b = sum();
            expect(Token::RParen, ")");
            return make(t.ident == "min" ? NodeKind::Min : NodeKind::Max, a, b);
        }
        lex_.fail("unknown identifier '" + t.ident + "'", t.column);
    }

    void expect(Token::Kind k, const char* what) {
        Token t = lex_.take();
        if (t.kind != k) lex_.fail(std::string("expected '") + what + "'", t.column);
    }

    Lexer lex_;
    std::span<const std::string> vars_;
};

double eval_node(const Node& n, std::span<const double> args) {
    switch (n.kind) {
        case NodeKind::Constant: return n.value;
        case NodeKind::Variable: return args[static_cast<size_t>(n.var)];
        case NodeKind::Add: return eval_node(*n.a, args) + eval_node(*n.b, args);
        case NodeKind::Sub: return eval_node(*n.a, args) - eval_node(*n.b, args);
        case NodeKind::Mul: return eval_node(*n.a, args) * eval_node(*n.b, args);
        case NodeKind::Div: return eval_node(*n.a, args) / eval_node(*n.b, args);
        case NodeKind::Pow: return std::pow(eval_node(*n.a, args), eval_node(*n.b, args));
        case NodeKind::Neg: return -eval_node(*n.a, args);
        case NodeKind::Exp: return std::exp(eval_node(*n.a, args));
        case NodeKind::Log: return std::log(eval_node(*n.a, args));
        case NodeKind::Sin: return std::sin(eval_node(*n.a, args));
        case NodeKind::Cos: return std::cos(eval_node(*n.a, args));
        case NodeKind::Min: return std::min(eval_node(*n.a, args), eval_node(*n.b, args));
        case NodeKind::Max: return std::max(eval_node(*n.a, args), eval_node(*n.b, args));
    }
    return 0.0;
}

int precedence(NodeKind k) {
    switch (k) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Neg: return 3;
        case NodeKind::Pow: return 4;
        default: return 5;
    }
}

void print_node(const Node& n, std::string& out, const char* const* vars);

void print_child(const Node& child, int parent_prec, bool tighten, std::string& out,
                 const char* const* vars) {
    const bool parens = precedence(child.kind) < parent_prec ||
                        (tighten && precedence(child.kind) == parent_prec);
    if (parens) out += '(';
    print_node(child, out, vars);
    if (parens) out += ')';
}

void print_node(const Node& n, std::string& out, const char* const* vars) {
    switch (n.kind) {
        case NodeKind::Constant: out += format_double(n.value); return;
        case NodeKind::Variable: out += vars[n.var]; return;
        case NodeKind::Add:
            print_child(*n.a, 1, false, out, vars);
            out += " + ";
            print_child(*n.b, 1, true, out, vars);
            return;
        case NodeKind::Sub:
            print_child(*n.a, 1, false, out, vars);
            out += " - ";
            print_child(*n.b, 1, true, out, vars);
            return;
        case NodeKind::Mul:
            print_child(*n.a, 2, false, out, vars);
            out += "*";
            print_child(*n.b, 2, true, out, vars);
            return;
        case NodeKind::Div:
            print_child(*n.a, 2, false, out, vars);
            out += "/";
            print_child(*n.b, 2, true, out, vars);
            return;
        case NodeKind::Pow:
            print_child(*n.a, 4, true, out, vars);
            out += "^";
            print_child(*n.b, 4, false, out, vars);
            return;
        case NodeKind::Neg:
            out += "-";
            print_child(*n.a, 3, true, out, vars);
            return;
        case NodeKind::Exp:
        case NodeKind::Log:
        case NodeKind::Sin:
        case NodeKind::Cos: {
            out += n.kind == NodeKind::Exp   ? "exp"
                   : n.kind == NodeKind::Log ? "log"
                   : n.kind == NodeKind::Sin ? "sin"
                                             : "cos";
            out += '(';
            print_node(*n.a, out, vars);
            out += ')';
            return;
        }
        case NodeKind::Min:
        case NodeKind::Max:
            out += n.kind == NodeKind::Min ? "min(" : "max(";
            print_node(*n.a, out, vars);
            out += ", ";
            print_node(*n.b, out, vars);
            out += ')';
            return;
    }
}

bool node_uses(const Node& n, int index) {
    if (n.kind == NodeKind::Variable) return n.var == index;
    if (n.a && node_uses(*n.a, index)) return true;
    if (n.b && node_uses(*n.b, index)) return true;
    return false;
}

NodePtr bind_node(const NodePtr& n, int index, double value) {
    if (!n) return nullptr;
    if (n->kind == NodeKind::Variable && n->var == index) return make_const(value);
    if (!n->a && !n->b) return n;
    auto out = std::make_shared<Node>(*n);
    out->a = bind_node(n->a, index, value);
    out->b = bind_node(n->b, index, value);
    return out;
}

}  // namespace

Expression Expression::parse(std::string_view text, std::span<const std::string> vars,
                             int line) {
    Parser p(text, vars, line);
    return Expression(p.parse(), static_cast<int>(vars.size()));
}

Expression Expression::constant(double v) { return Expression(make_const(v), 0); }

Expression Expression::variable(int index, int arity) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->var = index;
    return Expression(std::move(n), arity);
}

double Expression::eval(std::span<const double> args) const { return eval_node(*root_, args); }

bool Expression::uses_variable(int index) const {
    return root_ && node_uses(*root_, index);
}

std::string Expression::to_string() const {
    static const char* const names[2] = {"x", "y"};
    std::string out;
    print_node(*root_, out, names);
    return out;
}

Expression Expression::bind(int index, double value, int new_arity) const {
    return Expression(bind_node(root_, index, value), new_arity);
}

Expression operator+(const Expression& l, const Expression& r) {
    return Expression(make(NodeKind::Add, l.root_, r.root_), std::max(l.arity_, r.arity_));
}

Expression operator-(const Expression& l, const Expression& r) {
    return Expression(make(NodeKind::Sub, l.root_, r.root_), std::max(l.arity_, r.arity_));
}

Expression operator*(const Expression& l, const Expression& r) {
    return Expression(make(NodeKind::Mul, l.root_, r.root_), std::max(l.arity_, r.arity_));
}

Expression operator-(const Expression& e) {
    return Expression(make(NodeKind::Neg, e.root_), e.arity_);
}

std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace {

NodePtr diff_node(const NodePtr& n, int var) {
    switch (n->kind) {
        case NodeKind::Constant: return make_const(0);
        case NodeKind::Variable: return make_const(n->var == var ? 1 : 0);
        case NodeKind::Add: return make(NodeKind::Add, diff_node(n->a, var), diff_node(n->b, var));
        case NodeKind::Sub: return make(NodeKind::Sub, diff_node(n->a, var), diff_node(n->b, var));
        case NodeKind::Mul:
            return make(NodeKind::Add, make(NodeKind::Mul, diff_node(n->a, var), n->b),
                        make(NodeKind::Mul, n->a, diff_node(n->b, var)));
        case NodeKind::Div:
            // (a/b)' = a'/b - a b'/b^2
            return make(NodeKind::Sub, make(NodeKind::Div, diff_node(n->a, var), n->b),
                        make(NodeKind::Div, make(NodeKind::Mul, n->a, diff_node(n->b, var)),
                             make(NodeKind::Mul, n->b, n->b)));
        case NodeKind::Pow: {
            if (n->b->kind == NodeKind::Constant) {
                // (a^c)' = c a^(c-1) a'
                NodePtr lowered = make(NodeKind::Pow, n->a, make_const(n->b->value - 1));
                return make(NodeKind::Mul, make_const(n->b->value),
                            make(NodeKind::Mul, lowered, diff_node(n->a, var)));
            }
            // a^b = exp(b log a): (a^b)' = a^b (b' log a + b a'/a)
            NodePtr term1 = make(NodeKind::Mul, diff_node(n->b, var), make(NodeKind::Log, n->a));
            NodePtr term2 = make(NodeKind::Div, make(NodeKind::Mul, n->b, diff_node(n->a, var)),
                                 n->a);
            return make(NodeKind::Mul, n, make(NodeKind::Add, term1, term2));
        }
        case NodeKind::Neg: return make(NodeKind::Neg, diff_node(n->a, var));
        case NodeKind::Exp: return make(NodeKind::Mul, n, diff_node(n->a, var));
        case NodeKind::Log: return make(NodeKind::Div, diff_node(n->a, var), n->a);
        case NodeKind::Sin:
            return make(NodeKind::Mul, make(NodeKind::Cos, n->a), diff_node(n->a, var));
        case NodeKind::Cos:
            return make(NodeKind::Neg,
                        make(NodeKind::Mul, make(NodeKind::Sin, n->a), diff_node(n->a, var)));
        case NodeKind::Min:
        case NodeKind::Max:
            throw std::invalid_argument("min/max expressions are not differentiable");
    }
    return make_const(0);
}

}  // namespace

Expression differentiate(const Expression& e, int var) {
    return Expression(diff_node(e.root_, var), e.arity_);
}

}  // namespace thinlim::expr
