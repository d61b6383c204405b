#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace thinlim::expr {

/// Syntax error raised while parsing a config file or an expression.
/// Positions are 1-based; `line` is 0 when the text is a bare expression.
struct ParseError : std::runtime_error {
    ParseError(std::string msg, int line_, int column_)
        : std::runtime_error(std::move(msg)), line(line_), column(column_) {}
    int line;
    int column;
};

enum class NodeKind {
    Constant,
    Variable,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Min,
    Max,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;  // Constant
    int var = 0;         // Variable index
    NodePtr a, b;        // operands
};

/// Immutable arithmetic expression over a fixed variable list.
///
/// Supported grammar: + - * / ^ (right assoc), unary minus, exp, log,
/// sin, cos, min(a,b), max(a,b), numeric literals and the constants
/// `pi` and `e`. The unicode spellings of minus, times and divide are
/// accepted as well.
class Expression {
public:
    Expression() = default;

    /// Parse `text` against variable names (e.g. {"x"} or {"x","y"}).
    /// `line` seeds error positions when the text comes from a config file.
    static Expression parse(std::string_view text, std::span<const std::string> vars,
                            int line = 0);

    static Expression constant(double v);
    static Expression variable(int index, int arity);

    double eval(std::span<const double> args) const;
    double eval(double x) const { return eval(std::span<const double>(&x, 1)); }
    double eval(double x, double y) const {
        const double a[2] = {x, y};
        return eval(std::span<const double>(a, 2));
    }

    /// Number of variables the expression was parsed against.
    int arity() const { return arity_; }
    bool valid() const { return root_ != nullptr; }
    bool uses_variable(int index) const;

    /// Canonical text form; parsing it back yields an identical tree.
    std::string to_string() const;

    /// Substitute a constant for variable `index` (e.g. bind y = 0 to take a
    /// trace); the result is an expression of arity `new_arity`.
    Expression bind(int index, double value, int new_arity) const;

    // Combinators used to synthesize manufactured problems.
    friend Expression operator+(const Expression& l, const Expression& r);
    friend Expression operator-(const Expression& l, const Expression& r);
    friend Expression operator*(const Expression& l, const Expression& r);
    friend Expression operator-(const Expression& e);
    friend Expression differentiate(const Expression& e, int var);

private:
    Expression(NodePtr root, int arity) : root_(std::move(root)), arity_(arity) {}

    NodePtr root_;
    int arity_ = 0;
};

/// Shortest decimal form that round-trips through strtod.
std::string format_double(double v);

/// Exact derivative of `e` with respect to variable `var`. Throws
/// std::invalid_argument on min/max (kinks) and on a^b with both sides
/// variable when a may be nonpositive is the caller's concern.
Expression differentiate(const Expression& e, int var);

}  // namespace thinlim::expr
